//! Problem descriptions: residual systems, minimization objectives, and
//! evaluation accounting.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::bounds::BoxBounds;

/// Signalled when an evaluation produces a non-finite value.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{what} evaluation produced a non-finite value")]
pub struct EvalError {
    pub what: &'static str,
}

impl EvalError {
    pub fn new(what: &'static str) -> Self {
        Self { what }
    }
}

/// Residual and Jacobian evaluation counts for one solver run.
///
/// A finite-difference Jacobian charges its full stencil (n+1 residual
/// calls) to `f_evals`.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct EvalCounter {
    pub f_evals: u64,
    pub jac_evals: u64,
}

type ResidualFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;
type MatrixFn = dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync;
type ScalarFn = dyn Fn(&DVector<f64>) -> f64 + Send + Sync;
type VectorFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;

/// How the Jacobian of a residual map is obtained.
#[derive(Clone)]
pub enum JacobianSpec {
    Analytic(Arc<MatrixFn>),
    FiniteDifference,
}

/// A square system `F(x) = 0` restricted to a box.
///
/// The residual and Jacobian must be defined on an open set containing the
/// closed box, so evaluating a finite-difference stencil that pokes slightly
/// past a face is legitimate.
#[derive(Clone)]
pub struct NlsProblem {
    id: String,
    dim: usize,
    residual: Arc<ResidualFn>,
    jacobian: JacobianSpec,
    bounds: BoxBounds,
    known_solution: Option<DVector<f64>>,
}

impl std::fmt::Debug for NlsProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NlsProblem")
            .field("id", &self.id)
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

impl NlsProblem {
    pub fn new(
        id: impl Into<String>,
        bounds: BoxBounds,
        residual: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        jacobian: JacobianSpec,
    ) -> Self {
        Self {
            id: id.into(),
            dim: bounds.dim(),
            residual: Arc::new(residual),
            jacobian,
            bounds,
            known_solution: None,
        }
    }

    /// Attach a known root; `|F(root)|` should be below 1e-8.
    pub fn with_known_solution(mut self, x: DVector<f64>) -> Self {
        self.known_solution = Some(x);
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bounds(&self) -> &BoxBounds {
        &self.bounds
    }

    pub fn known_solution(&self) -> Option<&DVector<f64>> {
        self.known_solution.as_ref()
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        matches!(self.jacobian, JacobianSpec::Analytic(_))
    }

    /// Evaluate `F(x)`, counting one residual evaluation.
    pub fn residual(
        &self,
        x: &DVector<f64>,
        counter: &mut EvalCounter,
    ) -> Result<DVector<f64>, EvalError> {
        counter.f_evals += 1;
        let f = (self.residual)(x);
        debug_assert_eq!(f.len(), self.dim);
        if f.iter().all(|v| v.is_finite()) {
            Ok(f)
        } else {
            Err(EvalError::new("residual"))
        }
    }

    /// Evaluate the Jacobian, analytically or by forward differences.
    pub fn jacobian(
        &self,
        x: &DVector<f64>,
        counter: &mut EvalCounter,
    ) -> Result<DMatrix<f64>, EvalError> {
        match &self.jacobian {
            JacobianSpec::Analytic(j) => {
                counter.jac_evals += 1;
                let jac = j(x);
                debug_assert_eq!((jac.nrows(), jac.ncols()), (self.dim, self.dim));
                if jac.iter().all(|v| v.is_finite()) {
                    Ok(jac)
                } else {
                    Err(EvalError::new("jacobian"))
                }
            }
            JacobianSpec::FiniteDifference => fd_jacobian(self, x, DEFAULT_FD_STEP, counter),
        }
    }
}

/// A smooth objective with analytic gradient and Hessian, restricted to a box.
#[derive(Clone)]
pub struct MinProblem {
    id: String,
    dim: usize,
    pub objective: Arc<ScalarFn>,
    pub gradient: Arc<VectorFn>,
    pub hessian: Arc<MatrixFn>,
    bounds: BoxBounds,
    known_minimizer: Option<DVector<f64>>,
}

impl std::fmt::Debug for MinProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MinProblem")
            .field("id", &self.id)
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

impl MinProblem {
    pub fn new(
        id: impl Into<String>,
        bounds: BoxBounds,
        objective: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        hessian: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            id: id.into(),
            dim: bounds.dim(),
            objective: Arc::new(objective),
            gradient: Arc::new(gradient),
            hessian: Arc::new(hessian),
            bounds,
            known_minimizer: None,
        }
    }

    pub fn with_known_minimizer(mut self, x: DVector<f64>) -> Self {
        self.known_minimizer = Some(x);
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bounds(&self) -> &BoxBounds {
        &self.bounds
    }

    pub fn known_minimizer(&self) -> Option<&DVector<f64>> {
        self.known_minimizer.as_ref()
    }
}

/// Least-squares merit `f(x) = 0.5 * |F(x)|^2`.
pub fn merit(f_value: &DVector<f64>) -> Result<f64, EvalError> {
    if f_value.iter().all(|v| v.is_finite()) {
        Ok(0.5 * f_value.norm_squared())
    } else {
        Err(EvalError::new("merit input"))
    }
}

/// Merit gradient `J^T F`.
pub fn grad_f(jac: &DMatrix<f64>, f_value: &DVector<f64>) -> DVector<f64> {
    jac.tr_mul(f_value)
}

/// Base step for forward differences (sqrt of machine epsilon, 2^-26),
/// scaled per coordinate by `max(1, |x_i|)`.
pub const DEFAULT_FD_STEP: f64 = 1.4901161193847656e-8_f64;

/// Forward-difference Jacobian with per-coordinate step `h * max(1, |x_i|)`.
///
/// Charges n+1 residual evaluations.
pub fn fd_jacobian(
    problem: &NlsProblem,
    x: &DVector<f64>,
    h: f64,
    counter: &mut EvalCounter,
) -> Result<DMatrix<f64>, EvalError> {
    let n = problem.dim();
    let f0 = problem.residual(x, counter)?;
    let mut jac = DMatrix::zeros(n, n);
    let mut xh = x.clone();
    for j in 0..n {
        let step = h * x[j].abs().max(1.0);
        xh[j] = x[j] + step;
        let fj = problem.residual(&xh, counter)?;
        xh[j] = x[j];
        let col = (fj - &f0) / step;
        jac.set_column(j, &col);
    }
    Ok(jac)
}

/// Largest relative mismatch between the analytic Jacobian and a
/// forward-difference one, measured in the Frobenius norm.
pub fn jacobian_fd_mismatch(problem: &NlsProblem, x: &DVector<f64>) -> Result<f64, EvalError> {
    let mut counter = EvalCounter::default();
    let analytic = problem.jacobian(x, &mut counter)?;
    let fd = fd_jacobian(problem, x, DEFAULT_FD_STEP, &mut counter)?;
    Ok((&analytic - fd).norm() / analytic.norm().max(1.0))
}
