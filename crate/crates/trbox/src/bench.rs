//! Benchmark harness: problem x starting-point x scaling sweeps.

use rayon::prelude::*;
use std::time::Instant;

use crate::dogleg::{solve, SolveStatus, TrustRegionConfig};
use crate::problem::NlsProblem;
use crate::problems::starting_point;
use crate::scaling::{ConvexWeights, ScalingSpec};

/// One benchmark cell. `it` and `fe` are integer-valued for raw runs and
/// fractional for aggregated rows (where `start` is 0).
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub pb: u8,
    pub start: u8,
    pub scaling_id: String,
    pub status: SolveStatus,
    pub it: f64,
    pub fe: f64,
    pub final_residual: f64,
    pub wall_ms: f64,
    pub seed: u64,
}

/// Harness options.
///
/// Wall time is measured only on request: the records file is specified to
/// be byte-identical across reruns, and clock readings are not.
#[derive(Debug, Clone, Default)]
pub struct BenchOptions {
    pub timing: bool,
    pub seed: u64,
}

/// The seven diagonals used throughout the benchmark suite: the three
/// individual families (Coleman-Li, Kanzow-Klug with gamma = 1, the gated
/// family with p = 1) and the four half/third combinations of them.
pub fn paper7_scalings() -> Vec<ScalingSpec> {
    let w = |a: [f64; 4]| ScalingSpec::convex(ConvexWeights::new(a).unwrap());
    vec![
        ScalingSpec::ColemanLi,
        ScalingSpec::kanzow_klug(),
        ScalingSpec::huu(),
        w([0.5, 0.5, 0.0, 0.0]),
        w([0.5, 0.0, 0.5, 0.0]),
        w([0.0, 0.5, 0.5, 0.0]),
        w([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0]),
    ]
}

/// Run every (problem, start, scaling) cell and return the records sorted
/// by (pb, start, scaling id). Cells run in parallel and are independent;
/// per-cell failures become statuses, never abort the sweep.
pub fn run_matrix(
    problems: &[(u8, NlsProblem)],
    starts: &[u8],
    scalings: &[ScalingSpec],
    cfg: &TrustRegionConfig,
    opts: &BenchOptions,
) -> Vec<RunRecord> {
    let mut cells = Vec::new();
    for (pb, problem) in problems {
        for &start in starts {
            for spec in scalings {
                cells.push((*pb, problem, start, spec));
            }
        }
    }
    let mut records: Vec<RunRecord> = cells
        .par_iter()
        .map(|(pb, problem, start, spec)| {
            let x0 = starting_point(problem, *start);
            let t0 = Instant::now();
            let outcome = solve(problem, spec, &x0, cfg);
            let wall_ms = if opts.timing {
                t0.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            };
            RunRecord {
                pb: *pb,
                start: *start,
                scaling_id: spec.to_string(),
                status: outcome.status,
                it: f64::from(outcome.iterations),
                fe: outcome.fevals as f64,
                final_residual: outcome.final_residual_norm,
                wall_ms,
                seed: opts.seed,
            }
        })
        .collect();
    records.sort_by(|a, b| {
        (a.pb, a.start, &a.scaling_id)
            .cmp(&(b.pb, b.start, &b.scaling_id))
    });
    records
}

/// Collapse the three starting points of each (problem, scaling) pair into
/// one row carrying mean it/fe, written with `start = 0`. A pair counts as
/// converged only when all of its starts converged.
pub fn aggregate_mean_over_starts(records: &[RunRecord]) -> Vec<RunRecord> {
    use std::collections::BTreeMap;
    let mut groups: BTreeMap<(u8, String), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.pb, r.scaling_id.clone())).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((pb, scaling_id), rs)| {
            let k = rs.len() as f64;
            let status = rs
                .iter()
                .find(|r| r.status != SolveStatus::Converged)
                .map_or(SolveStatus::Converged, |r| r.status);
            RunRecord {
                pb,
                start: 0,
                scaling_id,
                status,
                it: rs.iter().map(|r| r.it).sum::<f64>() / k,
                fe: rs.iter().map(|r| r.fe).sum::<f64>() / k,
                final_residual: rs.iter().map(|r| r.final_residual).fold(0.0, f64::max),
                wall_ms: rs.iter().map(|r| r.wall_ms).sum::<f64>() / k,
                seed: rs.first().map_or(0, |r| r.seed),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::get_problem;

    #[test]
    fn sweep_has_one_record_per_cell() {
        let brown = get_problem(3).unwrap();
        let records = run_matrix(
            &[(3, brown)],
            &[1, 2, 3],
            &paper7_scalings(),
            &TrustRegionConfig::default(),
            &BenchOptions::default(),
        );
        assert_eq!(records.len(), 21);
        // Sorted by (pb, start, scaling).
        for w in records.windows(2) {
            assert!((w[0].pb, w[0].start, &w[0].scaling_id) <= (w[1].pb, w[1].start, &w[1].scaling_id));
        }
    }

    #[test]
    fn all_seven_scalings_solve_brown_from_first_start() {
        let brown = get_problem(3).unwrap();
        let records = run_matrix(
            &[(3, brown)],
            &[1],
            &paper7_scalings(),
            &TrustRegionConfig::default(),
            &BenchOptions::default(),
        );
        for r in &records {
            assert_eq!(r.status, SolveStatus::Converged, "{} failed", r.scaling_id);
        }
    }

    #[test]
    fn records_are_identical_across_thread_counts() {
        let brown = get_problem(3).unwrap();
        let problems = [(3u8, brown)];
        let starts = [1u8, 2, 3];
        let scalings = paper7_scalings();
        let cfg = TrustRegionConfig::default();
        let opts = BenchOptions::default();

        let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let wide = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap();
        let a = serial.install(|| run_matrix(&problems, &starts, &scalings, &cfg, &opts));
        let b = wide.install(|| run_matrix(&problems, &starts, &scalings, &cfg, &opts));
        assert_eq!(a, b);
    }

    #[test]
    fn aggregation_collapses_starts() {
        let brown = get_problem(3).unwrap();
        let records = run_matrix(
            &[(3, brown)],
            &[1, 2, 3],
            &paper7_scalings(),
            &TrustRegionConfig::default(),
            &BenchOptions::default(),
        );
        let agg = aggregate_mean_over_starts(&records);
        assert_eq!(agg.len(), 7);
        for row in &agg {
            assert_eq!(row.start, 0);
            assert!(row.it > 0.0);
        }
    }
}
