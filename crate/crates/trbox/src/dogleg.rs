//! Constrained dogleg trust-region solver for box-constrained systems.
//!
//! Each outer iteration factors the Jacobian once, forms the exact Newton
//! step and a scaled-gradient Cauchy step, and walks the dogleg segment
//! between them, truncated by both the (elliptical) trust region and a
//! fraction-to-boundary rule that keeps every iterate strictly inside the
//! box. Rejected proposals shrink the radius and retry without refactoring.

use nalgebra::{DMatrix, DVector};

use crate::bounds::BoxBounds;
use crate::linalg::lu_solve_checked;
use crate::problem::{grad_f, EvalCounter, NlsProblem};
use crate::scaling::{metric_g, scaled_gradient, ScalingSpec, ScalingValue, METRIC_FLOOR};

/// Norm of the trust region: scaled by `D^(-1/2)` or plain Euclidean.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Elliptical,
    Spherical,
}

/// Trust-region controls. Defaults follow the benchmark protocol (initial
/// radius 1, 300 iterations, 1000 residual evaluations, tolerance 1e-6 on
/// the residual norm) with conventional acceptance and update constants.
#[derive(Debug, Clone)]
pub struct TrustRegionConfig {
    pub delta0: f64,
    pub max_iter: u32,
    pub max_fevals: u64,
    pub tol_residual: f64,
    /// Fraction-to-boundary damping in (0,1).
    pub theta: f64,
    pub eta_accept: f64,
    pub eta_expand: f64,
    pub shrink: f64,
    pub expand: f64,
    pub delta_min: f64,
    pub metric: Metric,
    /// Record one [`IterationRecord`] per proposal.
    pub trace: bool,
}

impl Default for TrustRegionConfig {
    fn default() -> Self {
        Self {
            delta0: 1.0,
            max_iter: 300,
            max_fevals: 1000,
            tol_residual: 1e-6,
            theta: 0.99995,
            eta_accept: 0.1,
            eta_expand: 0.75,
            shrink: 0.25,
            expand: 2.0,
            delta_min: 1e-12,
            metric: Metric::Elliptical,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    MaxFevals,
    TrustRegionCollapse,
    SingularJacobian,
    EvalFailure,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIterations => "max_iterations",
            SolveStatus::MaxFevals => "max_fevals",
            SolveStatus::TrustRegionCollapse => "trust_region_collapse",
            SolveStatus::SingularJacobian => "singular_jacobian",
            SolveStatus::EvalFailure => "eval_failure",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "converged" => SolveStatus::Converged,
            "max_iterations" => SolveStatus::MaxIterations,
            "max_fevals" => SolveStatus::MaxFevals,
            "trust_region_collapse" => SolveStatus::TrustRegionCollapse,
            "singular_jacobian" => SolveStatus::SingularJacobian,
            "eval_failure" => SolveStatus::EvalFailure,
            _ => return None,
        })
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which leg of the dogleg produced a proposal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    Newton,
    Dogleg,
    Cauchy,
}

impl StepKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StepKind::Newton => "newton",
            StepKind::Dogleg => "dogleg",
            StepKind::Cauchy => "cauchy",
        }
    }
}

/// One proposed step: the residual norm at the current iterate, the radius
/// in force, the leg taken, the achieved/predicted reduction ratio, and
/// whether the step was accepted.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: u32,
    pub residual_norm: f64,
    pub delta: f64,
    pub step_kind: StepKind,
    pub rho: f64,
    pub accepted: bool,
}

/// Result of a solve. `iterations` counts accepted outer steps; `fevals`
/// counts residual evaluations including the initial one, so
/// `fevals >= iterations + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub iterations: u32,
    pub fevals: u64,
    pub final_point: DVector<f64>,
    pub final_residual_norm: f64,
    pub trace: Option<Vec<IterationRecord>>,
}

/// Scaled-gradient norm below which the iteration is declared stalled.
const STALL_TOL: f64 = 1e-14;
/// Smallest predicted reduction for which the ratio is meaningful.
const PRED_FLOOR: f64 = 1e-30;

/// Exact Newton step `J p = -F` via partial-pivot LU; `None` flags a
/// singular or untrustworthy factorization (the solver then falls back to
/// the Cauchy leg).
pub fn newton_step(jac: &DMatrix<f64>, f_value: &DVector<f64>) -> Option<DVector<f64>> {
    lu_solve_checked(jac, &(-f_value))
}

/// Steepest-descent step along the scaled gradient, limited by the model
/// line minimum, the trust region, and the damped step to the boundary.
#[allow(clippy::too_many_arguments)]
pub fn cauchy_step(
    x: &DVector<f64>,
    f_value: &DVector<f64>,
    jac: &DMatrix<f64>,
    d: &ScalingValue,
    g_metric: &DVector<f64>,
    delta: f64,
    bounds: &BoxBounds,
    theta: f64,
) -> DVector<f64> {
    let grad = grad_f(jac, f_value);
    let ghat = scaled_gradient(d, &grad);
    let jg = jac * &ghat;
    let denom = jg.norm_squared();
    if denom == 0.0 {
        return DVector::zeros(x.len());
    }
    let t_model = -f_value.dot(&jg) / denom;
    let scaled_norm = g_metric.component_mul(&ghat).norm();
    let t_delta = if scaled_norm > 0.0 { delta / scaled_norm } else { f64::INFINITY };
    let t_boundary = theta * bounds.max_step_to_boundary(x, &ghat);
    let t = t_model.min(t_delta).min(t_boundary).max(0.0);
    ghat.scale(t)
}

/// Combine the Newton and Cauchy legs: take the full Newton step when it
/// fits the region and the damped interior, otherwise truncate the segment
/// from the Cauchy point towards the Newton point.
pub fn dogleg_step(
    p_newton: Option<&DVector<f64>>,
    p_cauchy: &DVector<f64>,
    x: &DVector<f64>,
    bounds: &BoxBounds,
    g_metric: &DVector<f64>,
    delta: f64,
    theta: f64,
) -> (DVector<f64>, StepKind) {
    let pn = match p_newton {
        Some(p) => p,
        None => return (p_cauchy.clone(), StepKind::Cauchy),
    };
    if g_metric.component_mul(pn).norm() <= delta
        && theta * bounds.max_step_to_boundary(x, pn) >= 1.0
    {
        return (pn.clone(), StepKind::Newton);
    }

    let q = pn - p_cauchy;
    let gq = g_metric.component_mul(&q);
    let a = gq.norm_squared();
    let tau_tr = if a == 0.0 {
        1.0
    } else {
        let gpc = g_metric.component_mul(p_cauchy);
        let b = 2.0 * gpc.dot(&gq);
        let c = gpc.norm_squared() - delta * delta;
        (((b * b - 4.0 * a * c).max(0.0).sqrt() - b) / (2.0 * a)).clamp(0.0, 1.0)
    };
    let from_cauchy = x + p_cauchy;
    let tau_boundary = (theta * bounds.max_step_to_boundary(&from_cauchy, &q)).min(1.0);
    let tau = tau_tr.min(tau_boundary);
    if tau <= 0.0 {
        return (p_cauchy.clone(), StepKind::Cauchy);
    }
    (p_cauchy + q.scale(tau), StepKind::Dogleg)
}

/// Radius update: shrink towards a fraction of the (scaled) step length on
/// poor agreement, hold on moderate agreement, expand past the step length
/// on strong agreement.
pub fn tr_update(rho: f64, delta: f64, step_norm_g: f64, cfg: &TrustRegionConfig) -> f64 {
    if rho < cfg.eta_accept {
        cfg.shrink * step_norm_g
    } else if rho < cfg.eta_expand {
        delta
    } else {
        delta.max(cfg.expand * step_norm_g)
    }
}

/// Run the solver from `x0` (projected and nudged inside the box if
/// necessary).
pub fn solve(
    problem: &NlsProblem,
    spec: &ScalingSpec,
    x0: &DVector<f64>,
    cfg: &TrustRegionConfig,
) -> SolveOutcome {
    let bounds = problem.bounds();
    let n = problem.dim();
    let mut counter = EvalCounter::default();
    let mut trace: Option<Vec<IterationRecord>> = cfg.trace.then(Vec::new);
    let mut it = 0u32;
    let mut delta = cfg.delta0;

    let mut x = if bounds.strict_interior(x0, 0.0) {
        x0.clone()
    } else {
        bounds.nudge_interior(x0, 1e-3)
    };

    macro_rules! finish {
        ($status:expr, $x:expr, $norm:expr) => {
            return SolveOutcome {
                status: $status,
                iterations: it,
                fevals: counter.f_evals,
                final_point: $x,
                final_residual_norm: $norm,
                trace,
            }
        };
    }

    let mut f = match problem.residual(&x, &mut counter) {
        Ok(f) => f,
        Err(_) => finish!(SolveStatus::EvalFailure, x, f64::NAN),
    };
    let mut fnorm = f.norm();
    if fnorm <= cfg.tol_residual {
        finish!(SolveStatus::Converged, x, fnorm);
    }

    loop {
        if it >= cfg.max_iter {
            finish!(SolveStatus::MaxIterations, x, fnorm);
        }
        let jac = match problem.jacobian(&x, &mut counter) {
            Ok(j) => j,
            Err(_) => finish!(SolveStatus::EvalFailure, x, fnorm),
        };
        let grad = grad_f(&jac, &f);
        let d = spec.evaluate(&x, &grad, bounds);
        let g_metric = match cfg.metric {
            Metric::Elliptical => metric_g(&d, METRIC_FLOOR),
            Metric::Spherical => DVector::repeat(n, 1.0),
        };
        let ghat = scaled_gradient(&d, &grad);
        if ghat.norm() <= STALL_TOL {
            finish!(SolveStatus::TrustRegionCollapse, x, fnorm);
        }

        let p_newton = newton_step(&jac, &f);

        // Inner loop: shrink the radius until a proposal is accepted.
        loop {
            let p_cauchy = cauchy_step(&x, &f, &jac, &d, &g_metric, delta, bounds, cfg.theta);
            if p_cauchy.iter().all(|v| *v == 0.0) {
                finish!(SolveStatus::SingularJacobian, x, fnorm);
            }
            let (p, kind) =
                dogleg_step(p_newton.as_ref(), &p_cauchy, &x, bounds, &g_metric, delta, cfg.theta);
            let step_norm_g = g_metric.component_mul(&p).norm();
            assert!(
                step_norm_g <= delta * (1.0 + 1e-10),
                "proposal violates the trust-region constraint"
            );

            if counter.f_evals >= cfg.max_fevals {
                finish!(SolveStatus::MaxFevals, x, fnorm);
            }
            let x_trial = &x + &p;
            let f_trial = match problem.residual(&x_trial, &mut counter) {
                Ok(f) => f,
                Err(_) => finish!(SolveStatus::EvalFailure, x, fnorm),
            };
            let trial_norm = f_trial.norm();
            let model_norm = (&f + &jac * &p).norm();
            let pred = fnorm - model_norm;
            debug_assert!(pred >= -1e-12 * fnorm.max(1.0), "model predicted an increase");
            let ared = fnorm - trial_norm;
            let rho = if pred > PRED_FLOOR { ared / pred } else { -1.0 };
            let accepted = rho >= cfg.eta_accept;

            if let Some(t) = trace.as_mut() {
                t.push(IterationRecord {
                    k: it,
                    residual_norm: fnorm,
                    delta,
                    step_kind: kind,
                    rho,
                    accepted,
                });
            }
            delta = tr_update(rho, delta, step_norm_g, cfg);

            if accepted {
                assert!(
                    bounds.strict_interior(&x_trial, 0.0),
                    "accepted iterate left the interior"
                );
                x = x_trial;
                f = f_trial;
                fnorm = trial_norm;
                it += 1;
                if fnorm <= cfg.tol_residual {
                    finish!(SolveStatus::Converged, x, fnorm);
                }
                break;
            }
            if delta < cfg.delta_min {
                finish!(SolveStatus::TrustRegionCollapse, x, fnorm);
            }
        }
    }
}
