//! Solvers for bound-constrained systems of nonlinear equations built
//! around pluggable diagonal affine scalings.
//!
//! The crate provides:
//!
//! * [`scaling`] — the Coleman-Li, Heinkenschloss-Ulbrich-Ulbrich,
//!   Kanzow-Klug and Hager-Mair-Zhang diagonal scalings, their convex
//!   combination, and an empirical checker for the sign and boundedness
//!   conditions a scaling has to satisfy.
//! * [`dogleg`] — a constrained dogleg trust-region solver for square
//!   systems `F(x) = 0` on a box, with elliptical or spherical regions.
//! * [`ip_newton`] — a projected affine-scaling interior-point Newton
//!   minimizer used to study local convergence near degenerate solutions.
//! * [`problems`] — a registry of benchmark systems with standard starting
//!   points, plus the Rosenbrock and Wood minimization problems.
//! * [`bench`] / [`profile`] / [`report`] — a sweep harness, Dolan-More and
//!   nested performance profiles, and CSV/SVG emission.
//!
//! The `trbox` binary fronts all of this on the command line; the
//! `examples/` directory shows one runnable program per capability.
//!
//! ```
//! use nalgebra::DVector;
//! use trbox::{BoxBounds, JacobianSpec, NlsProblem, ScalingSpec, TrustRegionConfig};
//!
//! // Solve x^2 = 2 restricted to [0, 2].
//! let problem = NlsProblem::new(
//!     "sqrt2",
//!     BoxBounds::uniform(1, 0.0, 2.0).unwrap(),
//!     |x: &DVector<f64>| DVector::from_row_slice(&[x[0] * x[0] - 2.0]),
//!     JacobianSpec::FiniteDifference,
//! );
//! let out = trbox::solve(
//!     &problem,
//!     &ScalingSpec::kanzow_klug(),
//!     &DVector::from_row_slice(&[0.5]),
//!     &TrustRegionConfig::default(),
//! );
//! assert!((out.final_point[0] - 2f64.sqrt()).abs() < 1e-6);
//! ```

pub mod bench;
pub mod bounds;
pub mod dogleg;
pub mod ip_newton;
mod linalg;
pub mod problem;
pub mod problems;
pub mod profile;
pub mod report;
pub mod scaling;

pub use bench::{aggregate_mean_over_starts, paper7_scalings, run_matrix, BenchOptions, RunRecord};
pub use bounds::{BoundsError, BoxBounds};
pub use dogleg::{
    solve, IterationRecord, Metric, SolveOutcome, SolveStatus, StepKind, TrustRegionConfig,
};
pub use ip_newton::{minimize, IpConfig, IpOutcome};
pub use problem::{
    fd_jacobian, grad_f, merit, EvalCounter, EvalError, JacobianSpec, MinProblem, NlsProblem,
};
pub use problems::{get_problem, starting_point, ProblemStatus, RegistryEntry, REGISTRY};
pub use profile::{nested_perf_profile, perf_profile, CostMetric, FailurePolicy, ProfileCurve};
pub use scaling::{
    check_assumptions, check_assumptions_with, AssumptionReport, BranchTag, ConvexWeights,
    ScalingSpec, ScalingValue,
};
