//! Command-line front end.
//!
//! Exit codes: 0 success, 1 solver non-convergence (`solve`/`minimize`),
//! 2 usage error, 3 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nalgebra::DVector;

use trbox::bench::{aggregate_mean_over_starts, paper7_scalings, run_matrix, BenchOptions};
use trbox::dogleg::{solve, SolveStatus, TrustRegionConfig};
use trbox::ip_newton::{minimize, IpConfig};
use trbox::problem::NlsProblem;
use trbox::problems;
use trbox::profile::{nested_perf_profile, perf_profile, CostMetric, FailurePolicy};
use trbox::report;
use trbox::scaling::{check_assumptions, ScalingSpec};

#[derive(Parser)]
#[command(
    name = "trbox",
    version,
    about = "Affine-scaled trust-region and interior-point solvers for bound-constrained systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the problem registry, one `pb,name,dim,box_lo,box_hi,status` line each.
    ListProblems,
    /// Run the constrained dogleg solver on a registry problem.
    Solve {
        /// Problem number (1..=15; only fully specified entries run).
        #[arg(long)]
        problem: u8,
        /// Starting point index.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        start: u8,
        /// Scaling spec, e.g. `cl`, `kk:0.5`, `con:0.5,0,0.5,0`.
        #[arg(long)]
        scaling: String,
        #[arg(long, default_value_t = 300)]
        max_iter: u32,
        #[arg(long, default_value_t = 1000)]
        max_fevals: u64,
        /// Residual-norm tolerance.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Initial trust-region radius.
        #[arg(long, default_value_t = 1.0)]
        delta0: f64,
        /// Write per-proposal trace records to this CSV file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run the projected interior-point Newton minimizer.
    Minimize {
        /// `rosenbrock` or `wood`.
        #[arg(long)]
        problem: String,
        #[arg(long)]
        scaling: String,
        #[arg(long, default_value_t = 100)]
        max_iter: u32,
    },
    /// Sweep problems x starting points x scalings and write records CSV.
    Bench {
        /// Comma list of problem numbers, or `all` for every runnable entry.
        #[arg(long)]
        problems: String,
        /// Comma list of scaling specs; `paper7` expands to the benchmark seven.
        #[arg(long)]
        scalings: String,
        /// `none` or `mean-over-starts`.
        #[arg(long, default_value = "none")]
        aggregate: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Record measured wall time (off by default so reruns are
        /// byte-identical).
        #[arg(long)]
        timing: bool,
    },
    /// Compute performance profiles from a records CSV.
    Profile {
        #[arg(long = "in")]
        input: PathBuf,
        /// `it` or `fe`.
        #[arg(long)]
        metric: String,
        /// Average over all solver subsets instead of the plain profile.
        #[arg(long)]
        nested: bool,
        #[arg(long)]
        out: PathBuf,
        /// Also render the curves to this SVG file.
        #[arg(long)]
        svg: Option<PathBuf>,
        /// `infinite-ratio` (failures cap the curve) or `exclude`.
        #[arg(long, default_value = "infinite-ratio")]
        failures: String,
    },
    /// Sample a problem's box and certify a scaling's sign/boundedness
    /// conditions empirically.
    CheckScaling {
        #[arg(long)]
        scaling: String,
        #[arg(long)]
        problem: u8,
        #[arg(long, default_value_t = 10000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

const EXIT_NONCONVERGED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;

fn usage_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_USAGE)
}

fn io_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_IO)
}

fn parse_scaling(s: &str) -> Result<ScalingSpec, String> {
    s.parse::<ScalingSpec>().map_err(|e| format!("bad scaling `{s}`: {e}"))
}

/// Split a comma list of scaling specs; `con:` consumes its next three
/// comma-separated weights, and `paper7` expands to the benchmark seven.
fn parse_scaling_list(s: &str) -> Result<Vec<ScalingSpec>, String> {
    let tokens: Vec<&str> = s.split(',').collect();
    let mut specs = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let tok = tokens[i].trim();
        if tok == "paper7" {
            specs.extend(paper7_scalings());
            i += 1;
        } else if tok.starts_with("con:") {
            if i + 3 >= tokens.len() {
                return Err(format!("`{tok}` needs four weights"));
            }
            let joined = tokens[i..=i + 3].join(",");
            specs.push(parse_scaling(&joined)?);
            i += 4;
        } else if tok.is_empty() {
            return Err("empty scaling spec in list".to_string());
        } else {
            specs.push(parse_scaling(tok)?);
            i += 1;
        }
    }
    if specs.is_empty() {
        return Err("no scalings given".to_string());
    }
    Ok(specs)
}

fn load_problems(s: &str) -> Result<Vec<(u8, NlsProblem)>, String> {
    let numbers: Vec<u8> = if s.trim() == "all" {
        problems::fully_specified()
    } else {
        s.split(',')
            .map(|t| t.trim().parse::<u8>().map_err(|_| format!("bad problem number `{t}`")))
            .collect::<Result<_, _>>()?
    };
    if numbers.is_empty() {
        return Err("no problems given".to_string());
    }
    numbers
        .into_iter()
        .map(|pb| problems::get_problem(pb).map(|p| (pb, p)).map_err(|e| e.to_string()))
        .collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListProblems => {
            for line in report::registry_lines() {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }

        Command::Solve { problem, start, scaling, max_iter, max_fevals, tol, delta0, trace } => {
            let spec = match parse_scaling(&scaling) {
                Ok(s) => s,
                Err(e) => return usage_error(e),
            };
            let nls = match problems::get_problem(problem) {
                Ok(p) => p,
                Err(e) => return usage_error(e),
            };
            let x0 = problems::starting_point(&nls, start);
            let cfg = TrustRegionConfig {
                delta0,
                max_iter,
                max_fevals,
                tol_residual: tol,
                trace: trace.is_some(),
                ..TrustRegionConfig::default()
            };
            let out = solve(&nls, &spec, &x0, &cfg);
            println!(
                "problem={} start={} scaling={} status={} it={} fe={} final_residual={:e}",
                problem, start, spec, out.status, out.iterations, out.fevals,
                out.final_residual_norm
            );
            if let (Some(path), Some(records)) = (trace, out.trace.as_ref()) {
                let mut text = String::from("k,residual_norm,delta,step_kind,rho,accepted\n");
                for r in records {
                    text.push_str(&format!(
                        "{},{:e},{:e},{},{},{}\n",
                        r.k,
                        r.residual_norm,
                        r.delta,
                        r.step_kind.as_str(),
                        r.rho,
                        r.accepted
                    ));
                }
                if let Err(e) = std::fs::write(&path, text) {
                    return io_error(format!("{}: {e}", path.display()));
                }
            }
            if out.status == SolveStatus::Converged {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_NONCONVERGED)
            }
        }

        Command::Minimize { problem, scaling, max_iter } => {
            let spec = match parse_scaling(&scaling) {
                Ok(s) => s,
                Err(e) => return usage_error(e),
            };
            let (min_problem, x0) = match problem.as_str() {
                "rosenbrock" => (problems::rosenbrock(), DVector::from_row_slice(&[0.999, 0.999])),
                "wood" => (problems::wood(), DVector::repeat(4, 1.001)),
                other => return usage_error(format!("unknown problem `{other}`")),
            };
            let cfg = IpConfig { max_iter, ..IpConfig::default() };
            let out = minimize(&min_problem, &spec, &x0, &cfg);
            let distance = out
                .distance_history
                .last()
                .map_or_else(|| "n/a".to_string(), |d| format!("{d:e}"));
            println!(
                "problem={} scaling={} converged={} iterations={} final_distance={}",
                problem, spec, out.converged, out.iterations, distance
            );
            if out.converged {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_NONCONVERGED)
            }
        }

        Command::Bench { problems: probs, scalings, aggregate, out, seed, timing } => {
            let specs = match parse_scaling_list(&scalings) {
                Ok(s) => s,
                Err(e) => return usage_error(e),
            };
            let problem_list = match load_problems(&probs) {
                Ok(p) => p,
                Err(e) => return usage_error(e),
            };
            let aggregate = match aggregate.as_str() {
                "none" => false,
                "mean-over-starts" => true,
                other => return usage_error(format!("unknown aggregate `{other}`")),
            };
            let cfg = TrustRegionConfig::default();
            let opts = BenchOptions { timing, seed };
            let mut records = run_matrix(&problem_list, &[1, 2, 3], &specs, &cfg, &opts);
            if aggregate {
                records = aggregate_mean_over_starts(&records);
            }
            match report::write_records_csv(&out, &records) {
                Ok(()) => {
                    eprintln!("wrote {} records to {}", records.len(), out.display());
                    ExitCode::SUCCESS
                }
                Err(e) => io_error(e),
            }
        }

        Command::Profile { input, metric, nested, out, svg, failures } => {
            let metric = match CostMetric::parse(&metric) {
                Some(m) => m,
                None => return usage_error(format!("unknown metric `{metric}` (use it or fe)")),
            };
            let policy = match failures.as_str() {
                "infinite-ratio" => FailurePolicy::InfiniteRatio,
                "exclude" => FailurePolicy::Exclude,
                other => return usage_error(format!("unknown failure policy `{other}`")),
            };
            let records = match report::read_records_csv(&input) {
                Ok(r) => r,
                Err(e) => return io_error(e),
            };
            let solved = [SolveStatus::Converged];
            let result = if nested {
                nested_perf_profile(&records, metric, &solved, policy)
            } else {
                perf_profile(&records, metric, &solved, policy)
            };
            let curves = match result {
                Ok(c) => c,
                Err(e) => return usage_error(e),
            };
            let metadata = nested.then_some("nested_rule=subset-mean");
            if let Err(e) = report::write_curves_csv(&out, &curves, metadata) {
                return io_error(e);
            }
            if let Some(svg_path) = svg {
                let title = format!(
                    "{} performance profiles ({})",
                    if nested { "nested" } else { "basic" },
                    metric.as_str()
                );
                if let Err(e) = report::write_profile_svg(&svg_path, &curves, &title) {
                    return io_error(e);
                }
            }
            ExitCode::SUCCESS
        }

        Command::CheckScaling { scaling, problem, samples, seed } => {
            let spec = match parse_scaling(&scaling) {
                Ok(s) => s,
                Err(e) => return usage_error(e),
            };
            if samples == 0 {
                return usage_error("samples must be at least 1");
            }
            let nls = match problems::get_problem(problem) {
                Ok(p) => p,
                Err(e) => return usage_error(e),
            };
            let report = check_assumptions(&spec, &nls, samples, seed);
            println!("scaling={spec} problem={problem} samples={samples} seed={seed}");
            println!("sign_condition_violations={}", report.sign_condition_violations);
            println!("max_d_observed={:e}", report.max_d_observed);
            println!("min_boundary_step_observed={:e}", report.min_boundary_step_observed);
            println!("max_inverse_norm_observed={:e}", report.max_inverse_norm_observed);
            ExitCode::SUCCESS
        }
    }
}
