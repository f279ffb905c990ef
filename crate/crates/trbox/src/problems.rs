//! Registry of benchmark problems and their standard starting points.
//!
//! Three systems ship with full formulas (Brown's almost linear system,
//! Trigexp1 and the Troesch boundary-value discretization). The remaining
//! registry rows carry dimensions, boxes and source citations only; their
//! formulas live in the cited collections and requesting them produces an
//! explicit error naming what to transcribe.

use nalgebra::{DMatrix, DVector};
use std::sync::Arc;
use thiserror::Error;

use crate::bounds::BoxBounds;
use crate::problem::{JacobianSpec, MinProblem, NlsProblem};

/// Transcription state of a registry row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemStatus {
    FullySpecified,
    StubRequiresTranscription,
}

impl ProblemStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProblemStatus::FullySpecified => "fully_specified",
            ProblemStatus::StubRequiresTranscription => "stub_requires_transcription",
        }
    }
}

/// One row of the problem table.
#[derive(Debug, Clone, Copy)]
pub struct RegistryEntry {
    pub pb: u8,
    pub name: &'static str,
    pub dim: usize,
    /// Box column exactly as tabulated ("-" where the source leaves it open).
    pub table_box: &'static str,
    /// Uniform bounds actually used when instantiating, when known.
    pub bounds: Option<(f64, f64)>,
    pub status: ProblemStatus,
    pub source: &'static str,
    pub note: Option<&'static str>,
}

const INF: f64 = f64::INFINITY;

pub const REGISTRY: [RegistryEntry; 15] = [
    RegistryEntry {
        pb: 1,
        name: "Bullard-Biegler system",
        dim: 2,
        table_box: "-",
        bounds: None,
        status: ProblemStatus::StubRequiresTranscription,
        source: "Floudas et al., Handbook of Test Problems in Local and Global Optimization, sec. 14.1.3",
        note: None,
    },
    RegistryEntry {
        pb: 2,
        name: "Ferraris-Tronconi system",
        dim: 2,
        table_box: "-",
        bounds: None,
        status: ProblemStatus::StubRequiresTranscription,
        source: "Floudas et al., Handbook of Test Problems in Local and Global Optimization, sec. 14.1.4",
        note: None,
    },
    RegistryEntry {
        pb: 3,
        name: "Brown's almost linear system",
        dim: 5,
        table_box: "[-2,2]",
        bounds: Some((-2.0, 2.0)),
        status: ProblemStatus::FullySpecified,
        source: "Floudas et al., Handbook of Test Problems in Local and Global Optimization, sec. 14.1.5",
        note: None,
    },
    RegistryEntry {
        pb: 4,
        name: "Robot kinematics problem",
        dim: 8,
        table_box: "[-1,1]",
        bounds: Some((-1.0, 1.0)),
        status: ProblemStatus::StubRequiresTranscription,
        source: "Floudas et al., Handbook of Test Problems in Local and Global Optimization, sec. 14.1.6",
        note: None,
    },
    RegistryEntry {
        pb: 5,
        name: "Series of CSTRs, R = .935",
        dim: 2,
        table_box: "[0,1]",
        bounds: Some((0.0, 1.0)),
        status: ProblemStatus::StubRequiresTranscription,
        source: "Floudas et al., Handbook of Test Problems in Local and Global Optimization, sec. 14.1.8",
        note: None,
    },
    RegistryEntry {
        pb: 6,
        name: "Series of CSTRs, R = .995",
        dim: 2,
        table_box: "[-inf,inf]",
        bounds: Some((-INF, INF)),
        status: ProblemStatus::StubRequiresTranscription,
        source: "Floudas et al., Handbook of Test Problems in Local and Global Optimization, sec. 14.1.8",
        note: None,
    },
    RegistryEntry {
        pb: 7,
        name: "Chemical equilibrium system",
        dim: 10,
        table_box: "-",
        bounds: None,
        status: ProblemStatus::StubRequiresTranscription,
        source: "Meintjes & Morgan, chemical equilibrium system 1",
        note: None,
    },
    RegistryEntry {
        pb: 8,
        name: "Problem HS34",
        dim: 3,
        table_box: "[0,100]",
        bounds: Some((0.0, 100.0)),
        status: ProblemStatus::StubRequiresTranscription,
        source: "Hock & Schittkowski, test problem 34 (NCP reformulation)",
        note: None,
    },
    RegistryEntry {
        pb: 9,
        name: "Wachter-Biegler problem",
        dim: 3,
        table_box: "[0,inf]",
        bounds: Some((0.0, INF)),
        status: ProblemStatus::StubRequiresTranscription,
        source: "Wachter & Biegler, interior-point failure example (NCP reformulation)",
        note: None,
    },
    RegistryEntry {
        pb: 10,
        name: "Effati-Grosan 1, a = 2",
        dim: 2,
        table_box: "[-2,2]",
        bounds: Some((-2.0, 2.0)),
        status: ProblemStatus::StubRequiresTranscription,
        source: "Tsoulos & Stavrakoudis, Effati-Grosan family, system 1",
        note: None,
    },
    RegistryEntry {
        pb: 11,
        name: "Effati-Grosan 1, a = 100",
        dim: 2,
        table_box: "[-100,100]",
        bounds: Some((-100.0, 100.0)),
        status: ProblemStatus::StubRequiresTranscription,
        source: "Tsoulos & Stavrakoudis, Effati-Grosan family, system 1",
        note: None,
    },
    RegistryEntry {
        pb: 12,
        name: "Effati-Grosan 2, a = 2",
        dim: 2,
        table_box: "[-2,-2]",
        bounds: Some((-2.0, 2.0)),
        status: ProblemStatus::StubRequiresTranscription,
        source: "Tsoulos & Stavrakoudis, Effati-Grosan family, system 2",
        note: Some("tabulated box [-2,-2] is degenerate; recorded alongside the [-2,2] reading"),
    },
    RegistryEntry {
        pb: 13,
        name: "Effati-Grosan 2, a = 100",
        dim: 2,
        table_box: "[-100,100]",
        bounds: Some((-100.0, 100.0)),
        status: ProblemStatus::StubRequiresTranscription,
        source: "Tsoulos & Stavrakoudis, Effati-Grosan family, system 2",
        note: None,
    },
    RegistryEntry {
        pb: 14,
        name: "Trigexp1",
        dim: 1000,
        table_box: "[-100,100]",
        bounds: Some((-100.0, 100.0)),
        status: ProblemStatus::FullySpecified,
        source: "Luksan & Vlcek, sparse and partially separable test problems, TR 767",
        note: None,
    },
    RegistryEntry {
        pb: 15,
        name: "Troesch",
        dim: 500,
        table_box: "[-1,1]",
        bounds: Some((-1.0, 1.0)),
        status: ProblemStatus::FullySpecified,
        source: "Luksan & Vlcek, sparse and partially separable test problems, TR 767",
        note: None,
    },
];

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum RegistryError {
    #[error("problem number {0} is outside the registry (1..=15)")]
    UnknownProblem(u8),
    #[error("problem {pb} ({name}) is a stub: formulas not transcribed; transcribe from {citation}")]
    NotTranscribed { pb: u8, name: &'static str, citation: &'static str },
}

pub fn entry(pb: u8) -> Result<&'static RegistryEntry, RegistryError> {
    REGISTRY
        .iter()
        .find(|e| e.pb == pb)
        .ok_or(RegistryError::UnknownProblem(pb))
}

/// Instantiate a registry problem, or report what is missing for stubs.
pub fn get_problem(pb: u8) -> Result<NlsProblem, RegistryError> {
    let e = entry(pb)?;
    match pb {
        3 => Ok(brown_almost_linear(5)),
        14 => Ok(trigexp1(1000)),
        15 => Ok(troesch(500)),
        _ => Err(RegistryError::NotTranscribed { pb: e.pb, name: e.name, citation: e.source }),
    }
}

/// Identifiers of the rows that are runnable out of the box.
pub fn fully_specified() -> Vec<u8> {
    REGISTRY
        .iter()
        .filter(|e| e.status == ProblemStatus::FullySpecified)
        .map(|e| e.pb)
        .collect()
}

/// Brown's almost linear system on `[-2,2]^n`:
/// `F_i = x_i + sum(x) - (n+1)` for i < n, `F_n = prod(x) - 1`, root at ones.
pub fn brown_almost_linear(n: usize) -> NlsProblem {
    let bounds = BoxBounds::uniform(n, -2.0, 2.0).unwrap();
    let residual = move |x: &DVector<f64>| {
        let s = x.sum();
        let mut f = DVector::zeros(n);
        for i in 0..n - 1 {
            f[i] = x[i] + s - (n as f64 + 1.0);
        }
        f[n - 1] = x.iter().product::<f64>() - 1.0;
        f
    };
    let jacobian: Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync> =
        Arc::new(move |x: &DVector<f64>| {
            let mut j = DMatrix::from_element(n, n, 1.0);
            for i in 0..n - 1 {
                j[(i, i)] = 2.0;
            }
            for col in 0..n {
                let mut prod = 1.0;
                for k in 0..n {
                    if k != col {
                        prod *= x[k];
                    }
                }
                j[(n - 1, col)] = prod;
            }
            j
        });
    NlsProblem::new("brown-almost-linear", bounds, residual, JacobianSpec::Analytic(jacobian))
        .with_known_solution(DVector::repeat(n, 1.0))
}

/// Trigonometric-exponential tridiagonal system on `[-100,100]^n` with root
/// at ones.
pub fn trigexp1(n: usize) -> NlsProblem {
    assert!(n >= 2);
    let bounds = BoxBounds::uniform(n, -100.0, 100.0).unwrap();
    let residual = move |x: &DVector<f64>| {
        let mut f = DVector::zeros(n);
        f[0] = 3.0 * x[0].powi(3) + 2.0 * x[1] - 5.0 + (x[0] - x[1]).sin() * (x[0] + x[1]).sin();
        for i in 1..n - 1 {
            f[i] = -x[i - 1] * (x[i - 1] - x[i]).exp()
                + x[i] * (4.0 + 3.0 * x[i] * x[i])
                + 2.0 * x[i + 1]
                + (x[i] - x[i + 1]).sin() * (x[i] + x[i + 1]).sin()
                - 8.0;
        }
        f[n - 1] = -x[n - 2] * (x[n - 2] - x[n - 1]).exp() + 4.0 * x[n - 1] - 3.0;
        f
    };
    let jacobian: Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync> =
        Arc::new(move |x: &DVector<f64>| {
            let mut j = DMatrix::zeros(n, n);
            // d/da and d/db of sin(a-b)sin(a+b).
            let trig_da = |a: f64, b: f64| (a - b).cos() * (a + b).sin() + (a - b).sin() * (a + b).cos();
            let trig_db = |a: f64, b: f64| -(a - b).cos() * (a + b).sin() + (a - b).sin() * (a + b).cos();
            j[(0, 0)] = 9.0 * x[0] * x[0] + trig_da(x[0], x[1]);
            j[(0, 1)] = 2.0 + trig_db(x[0], x[1]);
            for i in 1..n - 1 {
                let e = (x[i - 1] - x[i]).exp();
                j[(i, i - 1)] = -e * (1.0 + x[i - 1]);
                j[(i, i)] = x[i - 1] * e + 4.0 + 9.0 * x[i] * x[i] + trig_da(x[i], x[i + 1]);
                j[(i, i + 1)] = 2.0 + trig_db(x[i], x[i + 1]);
            }
            let e = (x[n - 2] - x[n - 1]).exp();
            j[(n - 1, n - 2)] = -e * (1.0 + x[n - 2]);
            j[(n - 1, n - 1)] = x[n - 2] * e + 4.0;
            j
        });
    NlsProblem::new("trigexp1", bounds, residual, JacobianSpec::Analytic(jacobian))
        .with_known_solution(DVector::repeat(n, 1.0))
}

/// Central-difference discretization of the Troesch boundary-value problem
/// `y'' = rho * sinh(rho * y)`, `y(0) = 0`, `y(1) = 1`, with `rho = 10` on a
/// uniform mesh of n interior points (`h = 1/(n+1)`), boxed to `[-1,1]^n`.
pub fn troesch(n: usize) -> NlsProblem {
    assert!(n >= 2);
    const RHO: f64 = 10.0;
    let h = 1.0 / (n as f64 + 1.0);
    let bounds = BoxBounds::uniform(n, -1.0, 1.0).unwrap();
    let residual = move |x: &DVector<f64>| {
        let mut f = DVector::zeros(n);
        for i in 0..n {
            let left = if i == 0 { 0.0 } else { x[i - 1] };
            let right = if i == n - 1 { 1.0 } else { x[i + 1] };
            f[i] = 2.0 * x[i] - left - right + h * h * RHO * (RHO * x[i]).sinh();
        }
        f
    };
    let jacobian: Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync> =
        Arc::new(move |x: &DVector<f64>| {
            let mut j = DMatrix::zeros(n, n);
            for i in 0..n {
                j[(i, i)] = 2.0 + h * h * RHO * RHO * (RHO * x[i]).cosh();
                if i > 0 {
                    j[(i, i - 1)] = -1.0;
                }
                if i + 1 < n {
                    j[(i, i + 1)] = -1.0;
                }
            }
            j
        });
    NlsProblem::new("troesch", bounds, residual, JacobianSpec::Analytic(jacobian))
}

/// Standard starting point number `v` in {1,2,3}.
///
/// Finite coordinates sit at `l + 0.25*v*(u - l)`. Coordinates with an
/// infinite side use magnitude `10^(v-1)`, negative only when the lower side
/// is the infinite one; anything landing on or outside a face is projected
/// in and nudged off it.
pub fn starting_point(problem: &NlsProblem, v: u8) -> DVector<f64> {
    assert!((1..=3).contains(&v), "starting point index must be 1, 2 or 3");
    let b = problem.bounds();
    let n = problem.dim();
    let mut x = DVector::zeros(n);
    for i in 0..n {
        let (l, u) = (b.lower()[i], b.upper()[i]);
        x[i] = if l.is_finite() && u.is_finite() {
            l + 0.25 * f64::from(v) * (u - l)
        } else if l.is_finite() || !u.is_finite() {
            10f64.powi(i32::from(v) - 1)
        } else {
            -(10f64.powi(i32::from(v) - 1))
        };
    }
    b.nudge_interior(&x, 1e-3)
}

/// Rosenbrock's banana function boxed to `[0,1]^2`, minimizer at the corner
/// (1,1) where the gradient also vanishes.
pub fn rosenbrock() -> MinProblem {
    let bounds = BoxBounds::uniform(2, 0.0, 1.0).unwrap();
    MinProblem::new(
        "rosenbrock",
        bounds,
        |x: &DVector<f64>| {
            let t = x[1] - x[0] * x[0];
            100.0 * t * t + (1.0 - x[0]).powi(2)
        },
        |x: &DVector<f64>| {
            let t = x[1] - x[0] * x[0];
            DVector::from_row_slice(&[-400.0 * x[0] * t - 2.0 * (1.0 - x[0]), 200.0 * t])
        },
        |x: &DVector<f64>| {
            DMatrix::from_row_slice(
                2,
                2,
                &[
                    -400.0 * x[1] + 1200.0 * x[0] * x[0] + 2.0,
                    -400.0 * x[0],
                    -400.0 * x[0],
                    200.0,
                ],
            )
        },
    )
    .with_known_minimizer(DVector::repeat(2, 1.0))
}

/// Wood's function with bounds `l = (1,1,1,0.99)`, `u = (3,3,3,3)`; the
/// unconstrained minimizer (1,1,1,1) sits on three of the lower bounds.
pub fn wood() -> MinProblem {
    let bounds = BoxBounds::new(
        DVector::from_row_slice(&[1.0, 1.0, 1.0, 0.99]),
        DVector::from_row_slice(&[3.0, 3.0, 3.0, 3.0]),
    )
    .unwrap();
    MinProblem::new(
        "wood",
        bounds,
        |x: &DVector<f64>| {
            let a = x[1] - x[0] * x[0];
            let b = x[3] - x[2] * x[2];
            100.0 * a * a
                + (1.0 - x[0]).powi(2)
                + 90.0 * b * b
                + (1.0 - x[2]).powi(2)
                + 10.1 * ((x[1] - 1.0).powi(2) + (x[3] - 1.0).powi(2))
                + 19.8 * (x[1] - 1.0) * (x[3] - 1.0)
        },
        |x: &DVector<f64>| {
            let a = x[1] - x[0] * x[0];
            let b = x[3] - x[2] * x[2];
            DVector::from_row_slice(&[
                -400.0 * x[0] * a - 2.0 * (1.0 - x[0]),
                200.0 * a + 20.2 * (x[1] - 1.0) + 19.8 * (x[3] - 1.0),
                -360.0 * x[2] * b - 2.0 * (1.0 - x[2]),
                180.0 * b + 20.2 * (x[3] - 1.0) + 19.8 * (x[1] - 1.0),
            ])
        },
        |x: &DVector<f64>| {
            let mut h = DMatrix::zeros(4, 4);
            h[(0, 0)] = -400.0 * (x[1] - 3.0 * x[0] * x[0]) + 2.0;
            h[(0, 1)] = -400.0 * x[0];
            h[(1, 0)] = -400.0 * x[0];
            h[(1, 1)] = 220.2;
            h[(1, 3)] = 19.8;
            h[(2, 2)] = -360.0 * (x[3] - 3.0 * x[2] * x[2]) + 2.0;
            h[(2, 3)] = -360.0 * x[2];
            h[(3, 2)] = -360.0 * x[2];
            h[(3, 3)] = 200.2;
            h[(3, 1)] = 19.8;
            h
        },
    )
    .with_known_minimizer(DVector::repeat(4, 1.0))
}

/// Largest relative mismatch of the analytic gradient and Hessian against
/// central differences at `x`.
pub fn min_problem_fd_mismatch(problem: &MinProblem, x: &DVector<f64>) -> (f64, f64) {
    let n = problem.dim();
    let h = 1e-6;
    let g = (problem.gradient)(x);
    let mut g_fd = DVector::zeros(n);
    let mut xp = x.clone();
    for i in 0..n {
        let step = h * x[i].abs().max(1.0);
        xp[i] = x[i] + step;
        let fp = (problem.objective)(&xp);
        xp[i] = x[i] - step;
        let fm = (problem.objective)(&xp);
        xp[i] = x[i];
        g_fd[i] = (fp - fm) / (2.0 * step);
    }
    let grad_err = (&g - &g_fd).norm() / g.norm().max(1.0);

    let hess = (problem.hessian)(x);
    let mut h_fd = DMatrix::zeros(n, n);
    for i in 0..n {
        let step = h * x[i].abs().max(1.0);
        xp[i] = x[i] + step;
        let gp = (problem.gradient)(&xp);
        xp[i] = x[i] - step;
        let gm = (problem.gradient)(&xp);
        xp[i] = x[i];
        h_fd.set_column(i, &((gp - gm) / (2.0 * step)));
    }
    let hess_err = (&hess - &h_fd).norm() / hess.norm().max(1.0);
    (grad_err, hess_err)
}
