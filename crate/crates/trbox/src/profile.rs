//! Dolan-More performance profiles and their nested variant.
//!
//! A profile curve maps a tolerance factor tau >= 1 to the fraction of
//! problem instances a solver handled within tau times the best cost on
//! that instance. The nested variant averages a solver's curves over every
//! subset (of size >= 2) of the solver set containing it, which removes the
//! sensitivity of plain profiles to the composition of the comparison set.

use std::collections::BTreeMap;
use thiserror::Error;

use crate::bench::RunRecord;
use crate::dogleg::SolveStatus;

/// Cost measure used to build profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostMetric {
    It,
    Fe,
}

impl CostMetric {
    pub fn as_str(&self) -> &'static str {
        match self {
            CostMetric::It => "it",
            CostMetric::Fe => "fe",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "it" => Some(CostMetric::It),
            "fe" => Some(CostMetric::Fe),
            _ => None,
        }
    }

    fn of(&self, r: &RunRecord) -> f64 {
        match self {
            CostMetric::It => r.it,
            CostMetric::Fe => r.fe,
        }
    }
}

/// How unsolved cells enter the ratios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FailurePolicy {
    /// A failure keeps the instance and contributes an infinite ratio, so
    /// the failing solver's curve caps below one.
    #[default]
    InfiniteRatio,
    /// Instances unsolved by any solver in the comparison are dropped.
    Exclude,
}

/// A monotone staircase: breakpoints `(tau, fraction)` with the fraction
/// constant until the next breakpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileCurve {
    pub scaling_id: String,
    pub metric: CostMetric,
    pub breakpoints: Vec<(f64, f64)>,
}

impl ProfileCurve {
    /// Curve value at `tau` (0 left of the first breakpoint).
    pub fn value_at(&self, tau: f64) -> f64 {
        let mut value = 0.0;
        for &(t, f) in &self.breakpoints {
            if t <= tau {
                value = f;
            } else {
                break;
            }
        }
        value
    }

    /// Final fraction, i.e. the share of instances solved at all.
    pub fn cap(&self) -> f64 {
        self.breakpoints.last().map_or(0.0, |&(_, f)| f)
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ProfileError {
    #[error("no records to profile")]
    EmptyRecords,
    #[error("records do not cover a full (problem, start) x scaling grid: {0}")]
    IncompleteGrid(String),
    #[error("nested profiles need at least two scalings")]
    NeedTwoScalings,
    #[error("nested profiles over {0} scalings would enumerate too many subsets (max 12)")]
    TooManyScalings(usize),
}

/// Cost table: instance -> scaling -> finite cost (None = unsolved).
struct CostTable {
    instances: Vec<(u8, u8)>,
    scalings: Vec<String>,
    /// costs[instance][scaling]
    costs: Vec<Vec<Option<f64>>>,
}

fn build_table(
    records: &[RunRecord],
    metric: CostMetric,
    solved: &[SolveStatus],
) -> Result<CostTable, ProfileError> {
    if records.is_empty() {
        return Err(ProfileError::EmptyRecords);
    }
    let mut instance_set = BTreeMap::new();
    let mut scaling_set = BTreeMap::new();
    for r in records {
        instance_set.entry((r.pb, r.start)).or_insert(());
        scaling_set.entry(r.scaling_id.clone()).or_insert(());
    }
    let instances: Vec<(u8, u8)> = instance_set.into_keys().collect();
    let scalings: Vec<String> = scaling_set.into_keys().collect();
    let index_of_instance: BTreeMap<_, _> =
        instances.iter().enumerate().map(|(i, k)| (*k, i)).collect();
    let index_of_scaling: BTreeMap<_, _> =
        scalings.iter().enumerate().map(|(i, k)| (k.clone(), i)).collect();

    let mut costs: Vec<Vec<Option<Option<f64>>>> =
        vec![vec![None; scalings.len()]; instances.len()];
    for r in records {
        let i = index_of_instance[&(r.pb, r.start)];
        let j = index_of_scaling[&r.scaling_id];
        if costs[i][j].is_some() {
            return Err(ProfileError::IncompleteGrid(format!(
                "duplicate cell pb {} start {} scaling {}",
                r.pb, r.start, r.scaling_id
            )));
        }
        let cost = solved.contains(&r.status).then(|| metric.of(r));
        costs[i][j] = Some(cost);
    }
    let mut flat = Vec::with_capacity(instances.len());
    for (i, row) in costs.into_iter().enumerate() {
        let mut out = Vec::with_capacity(scalings.len());
        for (j, cell) in row.into_iter().enumerate() {
            match cell {
                Some(c) => out.push(c),
                None => {
                    return Err(ProfileError::IncompleteGrid(format!(
                        "missing cell pb {} start {} scaling {}",
                        instances[i].0, instances[i].1, scalings[j]
                    )))
                }
            }
        }
        flat.push(out);
    }
    Ok(CostTable { instances, scalings, costs: flat })
}

/// Profile curves over the full scaling set found in `records`.
pub fn perf_profile(
    records: &[RunRecord],
    metric: CostMetric,
    solved: &[SolveStatus],
    policy: FailurePolicy,
) -> Result<Vec<ProfileCurve>, ProfileError> {
    let table = build_table(records, metric, solved)?;
    let all: Vec<usize> = (0..table.scalings.len()).collect();
    Ok(profile_of_subset(&table, &all, metric, policy))
}

/// Ratio of cost to the subset best; by convention 0/0 counts as best and a
/// positive cost against a zero best is a failure.
fn ratio(cost: Option<f64>, best: f64) -> f64 {
    match cost {
        None => f64::INFINITY,
        Some(c) => {
            if best == 0.0 {
                if c == 0.0 {
                    1.0
                } else {
                    f64::INFINITY
                }
            } else {
                c / best
            }
        }
    }
}

fn profile_of_subset(
    table: &CostTable,
    subset: &[usize],
    metric: CostMetric,
    policy: FailurePolicy,
) -> Vec<ProfileCurve> {
    // Instances kept under the failure policy.
    let kept: Vec<usize> = (0..table.instances.len())
        .filter(|&i| match policy {
            FailurePolicy::InfiniteRatio => true,
            FailurePolicy::Exclude => subset.iter().all(|&j| table.costs[i][j].is_some()),
        })
        .collect();
    let denom = kept.len() as f64;

    subset
        .iter()
        .map(|&j| {
            let mut ratios: Vec<f64> = Vec::with_capacity(kept.len());
            for &i in &kept {
                let best = subset
                    .iter()
                    .filter_map(|&s| table.costs[i][s])
                    .fold(f64::INFINITY, f64::min);
                if best.is_finite() {
                    let r = ratio(table.costs[i][j], best);
                    if r.is_finite() {
                        ratios.push(r);
                    }
                }
                // An instance failed by everyone stays in the denominator
                // but produces no finite ratio for anyone.
            }
            ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut breakpoints: Vec<(f64, f64)> = Vec::new();
            let at_one = ratios.iter().take_while(|&&r| r <= 1.0).count();
            let mut count = at_one;
            breakpoints.push((1.0, if denom > 0.0 { at_one as f64 / denom } else { 0.0 }));
            for &r in ratios.iter().skip(at_one) {
                count += 1;
                let fraction = count as f64 / denom;
                match breakpoints.last_mut() {
                    Some(last) if last.0 == r => last.1 = fraction,
                    _ => breakpoints.push((r, fraction)),
                }
            }
            ProfileCurve {
                scaling_id: table.scalings[j].clone(),
                metric,
                breakpoints,
            }
        })
        .collect()
}

/// Nested profiles: for each scaling, the pointwise mean of its profile over
/// every subset of the scaling set (size >= 2) containing it. With exactly
/// two scalings this reproduces [`perf_profile`] bitwise.
pub fn nested_perf_profile(
    records: &[RunRecord],
    metric: CostMetric,
    solved: &[SolveStatus],
    policy: FailurePolicy,
) -> Result<Vec<ProfileCurve>, ProfileError> {
    let table = build_table(records, metric, solved)?;
    let k = table.scalings.len();
    if k < 2 {
        return Err(ProfileError::NeedTwoScalings);
    }
    if k > 12 {
        return Err(ProfileError::TooManyScalings(k));
    }

    // All subset profiles, indexed by bitmask.
    let mut per_scaling_curves: Vec<Vec<ProfileCurve>> = vec![Vec::new(); k];
    for mask in 0u32..(1 << k) {
        if mask.count_ones() < 2 {
            continue;
        }
        let subset: Vec<usize> = (0..k).filter(|&j| mask & (1 << j) != 0).collect();
        let curves = profile_of_subset(&table, &subset, metric, policy);
        for (pos, &j) in subset.iter().enumerate() {
            per_scaling_curves[j].push(curves[pos].clone());
        }
    }

    Ok((0..k)
        .map(|j| {
            let curves = &per_scaling_curves[j];
            let m = curves.len() as f64;
            let mut taus: Vec<f64> = curves
                .iter()
                .flat_map(|c| c.breakpoints.iter().map(|&(t, _)| t))
                .collect();
            taus.push(1.0);
            taus.sort_by(|a, b| a.partial_cmp(b).unwrap());
            taus.dedup();
            let mut breakpoints: Vec<(f64, f64)> = Vec::new();
            for t in taus {
                let mean = curves.iter().map(|c| c.value_at(t)).sum::<f64>() / m;
                match breakpoints.last() {
                    Some(&(_, f)) if f == mean => {}
                    _ => breakpoints.push((t, mean)),
                }
            }
            ProfileCurve {
                scaling_id: table.scalings[j].clone(),
                metric,
                breakpoints,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(pb: u8, start: u8, scaling: &str, status: SolveStatus, it: f64) -> RunRecord {
        RunRecord {
            pb,
            start,
            scaling_id: scaling.to_string(),
            status,
            it,
            fe: it + 1.0,
            final_residual: 1e-8,
            wall_ms: 0.0,
            seed: 0,
        }
    }

    fn ok(pb: u8, scaling: &str, it: f64) -> RunRecord {
        record(pb, 1, scaling, SolveStatus::Converged, it)
    }

    const SOLVED: &[SolveStatus] = &[SolveStatus::Converged];

    #[test]
    fn two_solver_hand_example() {
        let records = vec![
            ok(1, "a", 2.0),
            ok(1, "b", 4.0),
            ok(2, "a", 10.0),
            ok(2, "b", 5.0),
        ];
        let curves =
            perf_profile(&records, CostMetric::It, SOLVED, FailurePolicy::InfiniteRatio).unwrap();
        let a = curves.iter().find(|c| c.scaling_id == "a").unwrap();
        let b = curves.iter().find(|c| c.scaling_id == "b").unwrap();
        assert_eq!(a.breakpoints, vec![(1.0, 0.5), (2.0, 1.0)]);
        assert_eq!(b.breakpoints, vec![(1.0, 0.5), (2.0, 1.0)]);
        assert_eq!(a.value_at(1.5), 0.5);
        assert_eq!(a.value_at(2.5), 1.0);
    }

    #[test]
    fn failures_cap_the_curve() {
        let records = vec![
            ok(1, "a", 2.0),
            record(1, 1, "b", SolveStatus::MaxIterations, 300.0),
            ok(2, "a", 3.0),
            record(2, 1, "b", SolveStatus::TrustRegionCollapse, 7.0),
        ];
        let curves =
            perf_profile(&records, CostMetric::It, SOLVED, FailurePolicy::InfiniteRatio).unwrap();
        let b = curves.iter().find(|c| c.scaling_id == "b").unwrap();
        assert_eq!(b.cap(), 0.0);
        let a = curves.iter().find(|c| c.scaling_id == "a").unwrap();
        assert_eq!(a.cap(), 1.0);
    }

    #[test]
    fn single_scaling_profile_is_constant_one() {
        let records = vec![ok(1, "a", 2.0), ok(2, "a", 9.0)];
        let curves =
            perf_profile(&records, CostMetric::It, SOLVED, FailurePolicy::InfiniteRatio).unwrap();
        assert_eq!(curves[0].breakpoints, vec![(1.0, 1.0)]);
    }

    #[test]
    fn exclude_policy_drops_unsolved_instances() {
        let records = vec![
            ok(1, "a", 2.0),
            record(1, 1, "b", SolveStatus::MaxFevals, 1.0),
            ok(2, "a", 4.0),
            ok(2, "b", 2.0),
        ];
        let curves =
            perf_profile(&records, CostMetric::It, SOLVED, FailurePolicy::Exclude).unwrap();
        let a = curves.iter().find(|c| c.scaling_id == "a").unwrap();
        // Only instance 2 remains; a is twice as slow there.
        assert_eq!(a.breakpoints, vec![(1.0, 0.0), (2.0, 1.0)]);
    }

    #[test]
    fn zero_cost_rows_count_every_attaining_solver_as_best() {
        let records = vec![ok(1, "a", 0.0), ok(1, "b", 0.0), ok(2, "a", 1.0), ok(2, "b", 2.0)];
        let curves =
            perf_profile(&records, CostMetric::It, SOLVED, FailurePolicy::InfiniteRatio).unwrap();
        let at_one: f64 = curves.iter().map(|c| c.value_at(1.0)).sum();
        assert!(at_one >= 1.0);
    }

    #[test]
    fn profiles_ignore_problem_and_scaling_labels() {
        let records = vec![
            ok(1, "a", 2.0),
            ok(1, "b", 4.0),
            ok(2, "a", 10.0),
            ok(2, "b", 5.0),
        ];
        let relabeled = vec![
            ok(7, "x", 2.0),
            ok(7, "y", 4.0),
            ok(9, "x", 10.0),
            ok(9, "y", 5.0),
        ];
        let c1 =
            perf_profile(&records, CostMetric::It, SOLVED, FailurePolicy::InfiniteRatio).unwrap();
        let c2 = perf_profile(&relabeled, CostMetric::It, SOLVED, FailurePolicy::InfiniteRatio)
            .unwrap();
        for (a, b) in c1.iter().zip(&c2) {
            assert_eq!(a.breakpoints, b.breakpoints);
        }
    }

    #[test]
    fn ratios_are_invariant_under_cost_scaling() {
        let base = vec![ok(1, "a", 2.0), ok(1, "b", 4.0), ok(2, "a", 10.0), ok(2, "b", 5.0)];
        let scaled: Vec<RunRecord> = base
            .iter()
            .cloned()
            .map(|mut r| {
                r.it *= 17.0;
                r
            })
            .collect();
        let c1 = perf_profile(&base, CostMetric::It, SOLVED, FailurePolicy::InfiniteRatio).unwrap();
        let c2 =
            perf_profile(&scaled, CostMetric::It, SOLVED, FailurePolicy::InfiniteRatio).unwrap();
        for (a, b) in c1.iter().zip(&c2) {
            assert_eq!(a.breakpoints, b.breakpoints);
        }
    }

    #[test]
    fn nested_with_two_scalings_equals_basic() {
        let records = vec![
            ok(1, "a", 2.0),
            ok(1, "b", 4.0),
            ok(2, "a", 10.0),
            ok(2, "b", 5.0),
        ];
        let basic =
            perf_profile(&records, CostMetric::It, SOLVED, FailurePolicy::InfiniteRatio).unwrap();
        let nested =
            nested_perf_profile(&records, CostMetric::It, SOLVED, FailurePolicy::InfiniteRatio)
                .unwrap();
        assert_eq!(basic, nested);
    }

    #[test]
    fn nested_rejects_single_scaling() {
        let records = vec![ok(1, "a", 2.0)];
        assert_eq!(
            nested_perf_profile(&records, CostMetric::It, SOLVED, FailurePolicy::InfiniteRatio),
            Err(ProfileError::NeedTwoScalings)
        );
    }

    #[test]
    fn symmetric_costs_give_identical_nested_curves() {
        let records = vec![
            ok(1, "a", 3.0),
            ok(1, "b", 3.0),
            ok(1, "c", 3.0),
            ok(2, "a", 5.0),
            ok(2, "b", 5.0),
            ok(2, "c", 5.0),
        ];
        let nested =
            nested_perf_profile(&records, CostMetric::It, SOLVED, FailurePolicy::InfiniteRatio)
                .unwrap();
        for c in &nested {
            assert_eq!(c.breakpoints, nested[0].breakpoints);
        }
    }

    #[test]
    fn dominated_scaling_never_improves_at_tau_one() {
        // c is strictly worse than both a and b everywhere.
        let records = vec![
            ok(1, "a", 1.0),
            ok(1, "b", 2.0),
            ok(1, "c", 4.0),
            ok(2, "a", 3.0),
            ok(2, "b", 2.0),
            ok(2, "c", 9.0),
            ok(3, "a", 2.0),
            ok(3, "b", 2.0),
            ok(3, "c", 5.0),
        ];
        let basic =
            perf_profile(&records, CostMetric::It, SOLVED, FailurePolicy::InfiniteRatio).unwrap();
        let nested =
            nested_perf_profile(&records, CostMetric::It, SOLVED, FailurePolicy::InfiniteRatio)
                .unwrap();
        let basic_c = basic.iter().find(|c| c.scaling_id == "c").unwrap();
        let nested_c = nested.iter().find(|c| c.scaling_id == "c").unwrap();
        assert!(nested_c.value_at(1.0) <= basic_c.value_at(1.0) + 1e-15);
    }

    // Independent oracle: evaluate the nested mean straight from the cost
    // table, enumerating subsets from scratch.
    fn nested_oracle(costs: &[Vec<f64>], names: &[&str], who: usize, tau: f64) -> f64 {
        let k = names.len();
        let n_inst = costs.len();
        let mut total = 0.0;
        let mut subsets = 0.0;
        for mask in 0u32..(1 << k) {
            if mask.count_ones() < 2 || mask & (1 << who) == 0 {
                continue;
            }
            let members: Vec<usize> = (0..k).filter(|&j| mask & (1 << j) != 0).collect();
            let mut solved_count = 0;
            for row in costs {
                let best = members.iter().map(|&j| row[j]).fold(f64::INFINITY, f64::min);
                if row[who] / best <= tau {
                    solved_count += 1;
                }
            }
            total += solved_count as f64 / n_inst as f64;
            subsets += 1.0;
        }
        total / subsets
    }

    #[test]
    fn three_solver_nested_matches_brute_force() {
        let names = ["a", "b", "c"];
        let costs = vec![
            vec![1.0, 2.0, 4.0],
            vec![6.0, 2.0, 3.0],
            vec![4.0, 4.0, 1.0],
        ];
        let mut records = Vec::new();
        for (i, row) in costs.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                records.push(ok(i as u8 + 1, names[j], c));
            }
        }
        let nested =
            nested_perf_profile(&records, CostMetric::It, SOLVED, FailurePolicy::InfiniteRatio)
                .unwrap();
        for (j, name) in names.iter().enumerate() {
            let curve = nested.iter().find(|c| &c.scaling_id == name).unwrap();
            for tau in [1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 10.0] {
                let expected = nested_oracle(&costs, &names, j, tau);
                let got = curve.value_at(tau);
                assert!(
                    (got - expected).abs() < 1e-12,
                    "{name} at tau {tau}: {got} vs oracle {expected}"
                );
            }
        }
    }

    #[test]
    fn empty_records_are_an_error() {
        assert_eq!(
            perf_profile(&[], CostMetric::It, SOLVED, FailurePolicy::InfiniteRatio),
            Err(ProfileError::EmptyRecords)
        );
    }

    #[test]
    fn incomplete_grid_is_an_error() {
        let records = vec![ok(1, "a", 2.0), ok(1, "b", 3.0), ok(2, "a", 4.0)];
        assert!(matches!(
            perf_profile(&records, CostMetric::It, SOLVED, FailurePolicy::InfiniteRatio),
            Err(ProfileError::IncompleteGrid(_))
        ));
    }
}
