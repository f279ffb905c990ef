//! Diagonal affine-scaling matrices for box-constrained systems.
//!
//! Four families from the literature are provided, plus their convex
//! combination:
//!
//! * `cl` — Coleman–Li: the distance to the bound the gradient pushes
//!   against, discontinuous where a gradient component changes sign.
//! * `huu` — Heinkenschloss–Ulbrich–Ulbrich: Coleman–Li gated by a
//!   comparison between gradient magnitude and bound distance.
//! * `kk` — Kanzow–Klug: bound distances relaxed by a multiple of the
//!   gradient, locally Lipschitz.
//! * `hmz` — Hager–Mair–Zhang: a bounded rational form `chi / (a*chi + |g|)`.
//! * `con:a1,a2,a3,a4` — the convex combination of the four, weights in the
//!   order (cl, huu, kk, hmz).
//!
//! Every family produces a [`ScalingValue`]: the diagonal itself plus
//! per-coordinate branch bookkeeping consumed by the Newton-type solvers.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::bounds::BoxBounds;
use crate::problem::{grad_f, EvalCounter, NlsProblem};

/// Relative threshold below which a gradient component counts as zero in
/// branch tests. Exact-zero branches are measure-zero in floating point.
pub const GRAD_ZERO_REL: f64 = 1e-14;

/// Floor applied to the diagonal before inverting in [`metric_g`]; iterates
/// are kept strictly interior, so this guards rounding only.
pub const METRIC_FLOOR: f64 = 1e-12;

/// Which branch of a scaling formula produced a coordinate's value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchTag {
    /// Distance to the finite lower bound.
    Lower,
    /// Distance to the finite upper bound.
    Upper,
    /// Minimum distance to either finite bound (zero-gradient case).
    MinDistance,
    /// The coordinate is treated as unconstrained by the formula.
    Free,
}

/// A diagonal scaling evaluated at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingValue {
    /// Diagonal entries of `D(x)` (all nonnegative at interior points).
    pub d: DVector<f64>,
    /// Branch that fired per coordinate.
    pub branch: Vec<BranchTag>,
    /// True where the diagonal switches discontinuously with the gradient
    /// sign at a finite bound. Newton-type consumers add the `|g_i|`
    /// derivative-correction term exactly on these coordinates.
    pub bound_jump: Vec<bool>,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum WeightsError {
    #[error("weight {value} at position {index} is outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("weights sum to {sum}, expected 1 within 1e-12")]
    BadSum { sum: f64 },
}

/// Convex weights over the four families, in the order (cl, huu, kk, hmz).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexWeights([f64; 4]);

impl ConvexWeights {
    pub fn new(a: [f64; 4]) -> Result<Self, WeightsError> {
        for (i, &w) in a.iter().enumerate() {
            if !(0.0..=1.0).contains(&w) || w.is_nan() {
                return Err(WeightsError::OutOfRange { index: i, value: w });
            }
        }
        let sum: f64 = a.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(WeightsError::BadSum { sum });
        }
        Ok(Self(a))
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.0
    }
}

/// A scaling family together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalingSpec {
    ColemanLi,
    Huu { p: f64 },
    KanzowKlug { gamma: f64 },
    Hmz { alpha: f64 },
    Convex { weights: ConvexWeights, p: f64, gamma: f64, alpha: f64 },
}

impl ScalingSpec {
    pub fn huu() -> Self {
        ScalingSpec::Huu { p: 1.0 }
    }

    pub fn kanzow_klug() -> Self {
        ScalingSpec::KanzowKlug { gamma: 1.0 }
    }

    pub fn hmz() -> Self {
        ScalingSpec::Hmz { alpha: 1.0 }
    }

    /// Convex combination with default family parameters.
    pub fn convex(weights: ConvexWeights) -> Self {
        ScalingSpec::Convex { weights, p: 1.0, gamma: 1.0, alpha: 1.0 }
    }

    /// Evaluate the diagonal at a strictly interior point.
    pub fn evaluate(&self, x: &DVector<f64>, g: &DVector<f64>, bounds: &BoxBounds) -> ScalingValue {
        match self {
            ScalingSpec::ColemanLi => d_cl(x, g, bounds),
            ScalingSpec::Huu { p } => d_huu(x, g, bounds, *p),
            ScalingSpec::KanzowKlug { gamma } => d_kk(x, g, bounds, *gamma),
            ScalingSpec::Hmz { alpha } => d_hmz(x, g, bounds, *alpha),
            ScalingSpec::Convex { weights, p, gamma, alpha } => {
                d_con(x, g, bounds, weights, *p, *gamma, *alpha)
            }
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ScalingParseError {
    #[error("unknown scaling family `{0}`")]
    UnknownFamily(String),
    #[error("invalid number `{0}`")]
    BadNumber(String),
    #[error("`con` expects four comma-separated weights, got `{0}`")]
    BadWeights(String),
    #[error("unknown parameter `{0}` (expected p, gamma or alpha)")]
    UnknownParameter(String),
    #[error(transparent)]
    Weights(#[from] WeightsError),
    #[error("parameter `{name}` must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
}

fn parse_num(s: &str) -> Result<f64, ScalingParseError> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| ScalingParseError::BadNumber(s.to_string()))
}

fn require_positive(name: &'static str, value: f64) -> Result<f64, ScalingParseError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(ScalingParseError::NonPositive { name, value })
    }
}

impl FromStr for ScalingSpec {
    type Err = ScalingParseError;

    /// Grammar: `cl | huu[:p] | kk[:gamma] | hmz[:alpha] |
    /// con:a1,a2,a3,a4[;p=..][;gamma=..][;alpha=..]`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (family, rest) = match s.split_once(':') {
            Some((f, r)) => (f.trim(), Some(r)),
            None => (s, None),
        };
        match family {
            "cl" => match rest {
                None => Ok(ScalingSpec::ColemanLi),
                Some(r) => Err(ScalingParseError::UnknownParameter(r.to_string())),
            },
            "huu" => {
                let p = match rest {
                    None => 1.0,
                    Some(r) => require_positive("p", parse_num(r)?)?,
                };
                Ok(ScalingSpec::Huu { p })
            }
            "kk" => {
                let gamma = match rest {
                    None => 1.0,
                    Some(r) => require_positive("gamma", parse_num(r)?)?,
                };
                Ok(ScalingSpec::KanzowKlug { gamma })
            }
            "hmz" => {
                let alpha = match rest {
                    None => 1.0,
                    Some(r) => require_positive("alpha", parse_num(r)?)?,
                };
                Ok(ScalingSpec::Hmz { alpha })
            }
            "con" => {
                let body = rest.ok_or_else(|| ScalingParseError::BadWeights(s.to_string()))?;
                let mut parts = body.split(';');
                let weights_str = parts.next().unwrap_or("");
                let ws: Vec<f64> = weights_str
                    .split(',')
                    .map(parse_num)
                    .collect::<Result<_, _>>()?;
                if ws.len() != 4 {
                    return Err(ScalingParseError::BadWeights(weights_str.to_string()));
                }
                let weights = ConvexWeights::new([ws[0], ws[1], ws[2], ws[3]])?;
                let (mut p, mut gamma, mut alpha) = (1.0, 1.0, 1.0);
                for kv in parts {
                    let (k, v) = kv
                        .split_once('=')
                        .ok_or_else(|| ScalingParseError::UnknownParameter(kv.to_string()))?;
                    let value = parse_num(v)?;
                    match k.trim() {
                        "p" => p = require_positive("p", value)?,
                        "gamma" => gamma = require_positive("gamma", value)?,
                        "alpha" => alpha = require_positive("alpha", value)?,
                        other => return Err(ScalingParseError::UnknownParameter(other.to_string())),
                    }
                }
                Ok(ScalingSpec::Convex { weights, p, gamma, alpha })
            }
            other => Err(ScalingParseError::UnknownFamily(other.to_string())),
        }
    }
}

impl fmt::Display for ScalingSpec {
    /// Canonical form of the grammar; parameters are printed only when they
    /// differ from their defaults, so `Display` round-trips through `parse`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalingSpec::ColemanLi => write!(f, "cl"),
            ScalingSpec::Huu { p } if *p == 1.0 => write!(f, "huu"),
            ScalingSpec::Huu { p } => write!(f, "huu:{p}"),
            ScalingSpec::KanzowKlug { gamma } if *gamma == 1.0 => write!(f, "kk"),
            ScalingSpec::KanzowKlug { gamma } => write!(f, "kk:{gamma}"),
            ScalingSpec::Hmz { alpha } if *alpha == 1.0 => write!(f, "hmz"),
            ScalingSpec::Hmz { alpha } => write!(f, "hmz:{alpha}"),
            ScalingSpec::Convex { weights, p, gamma, alpha } => {
                let [a1, a2, a3, a4] = weights.as_array();
                write!(f, "con:{a1},{a2},{a3},{a4}")?;
                if *p != 1.0 {
                    write!(f, ";p={p}")?;
                }
                if *gamma != 1.0 {
                    write!(f, ";gamma={gamma}")?;
                }
                if *alpha != 1.0 {
                    write!(f, ";alpha={alpha}")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum GradSign {
    Neg,
    Zero,
    Pos,
}

fn grad_signs(g: &DVector<f64>) -> Vec<GradSign> {
    let tau = GRAD_ZERO_REL * g.amax().max(1.0);
    g.iter()
        .map(|&gi| {
            if gi.abs() <= tau {
                GradSign::Zero
            } else if gi > 0.0 {
                GradSign::Pos
            } else {
                GradSign::Neg
            }
        })
        .collect()
}

fn assert_interior(x: &DVector<f64>, bounds: &BoxBounds) {
    debug_assert!(
        bounds.strict_interior(x, 0.0),
        "scaling matrices are defined at strictly interior points only"
    );
}

/// Coleman–Li diagonal.
pub fn d_cl(x: &DVector<f64>, g: &DVector<f64>, bounds: &BoxBounds) -> ScalingValue {
    assert_interior(x, bounds);
    let n = x.len();
    let signs = grad_signs(g);
    let mut d = DVector::zeros(n);
    let mut branch = Vec::with_capacity(n);
    let mut jump = Vec::with_capacity(n);
    for i in 0..n {
        let (l, u) = (bounds.lower()[i], bounds.upper()[i]);
        let (di, tag) = match signs[i] {
            GradSign::Neg if u.is_finite() => (u - x[i], BranchTag::Upper),
            GradSign::Pos if l.is_finite() => (x[i] - l, BranchTag::Lower),
            GradSign::Zero if l.is_finite() || u.is_finite() => {
                let dl = if l.is_finite() { x[i] - l } else { f64::INFINITY };
                let du = if u.is_finite() { u - x[i] } else { f64::INFINITY };
                (dl.min(du), BranchTag::MinDistance)
            }
            _ => (1.0, BranchTag::Free),
        };
        d[i] = di;
        jump.push(tag != BranchTag::Free);
        branch.push(tag);
    }
    ScalingValue { d, branch, bound_jump: jump }
}

/// Heinkenschloss–Ulbrich–Ulbrich diagonal with exponent `p`.
///
/// Falls back to the Coleman–Li value when the gradient magnitude and the
/// bound distance are on sufficiently different scales, and to 1 otherwise.
/// The family is continuous, so no coordinate is marked as jumping.
pub fn d_huu(x: &DVector<f64>, g: &DVector<f64>, bounds: &BoxBounds, p: f64) -> ScalingValue {
    assert_interior(x, bounds);
    assert!(p > 0.0, "huu exponent must be positive");
    let cl = d_cl(x, g, bounds);
    let n = x.len();
    let mut d = DVector::zeros(n);
    let mut branch = Vec::with_capacity(n);
    for i in 0..n {
        let (l, u) = (bounds.lower()[i], bounds.upper()[i]);
        let dl = if l.is_finite() { x[i] - l } else { f64::INFINITY };
        let du = if u.is_finite() { u - x[i] } else { f64::INFINITY };
        let m = dl.min(du);
        let gi = g[i].abs();
        if gi < m.powf(p) || m < gi.powf(p) {
            d[i] = cl.d[i];
            branch.push(cl.branch[i]);
        } else {
            d[i] = 1.0;
            branch.push(BranchTag::Free);
        }
    }
    ScalingValue { d, branch, bound_jump: vec![false; n] }
}

/// Kanzow–Klug diagonal with relaxation constant `gamma`.
///
/// Locally Lipschitz in both arguments, so no coordinate is marked as
/// jumping.
pub fn d_kk(x: &DVector<f64>, g: &DVector<f64>, bounds: &BoxBounds, gamma: f64) -> ScalingValue {
    assert_interior(x, bounds);
    assert!(gamma > 0.0, "kk constant must be positive");
    let n = x.len();
    let mut d = DVector::zeros(n);
    let mut branch = Vec::with_capacity(n);
    for i in 0..n {
        let (l, u) = (bounds.lower()[i], bounds.upper()[i]);
        if !l.is_finite() && !u.is_finite() {
            d[i] = 1.0;
            branch.push(BranchTag::Free);
            continue;
        }
        let lo = if l.is_finite() {
            x[i] - l + gamma * (-g[i]).max(0.0)
        } else {
            f64::INFINITY
        };
        let up = if u.is_finite() {
            u - x[i] + gamma * g[i].max(0.0)
        } else {
            f64::INFINITY
        };
        if lo <= up {
            d[i] = lo;
            branch.push(BranchTag::Lower);
        } else {
            d[i] = up;
            branch.push(BranchTag::Upper);
        }
    }
    ScalingValue { d, branch, bound_jump: vec![false; n] }
}

/// Hager–Mair–Zhang diagonal `chi / (alpha*chi + |g|)` with constant
/// `alpha > 0`; pass an `alpha` evaluated at `x` to use a point-dependent
/// rule such as a Barzilai–Borwein parameter.
///
/// The numerator `chi` switches with the gradient sign exactly as the
/// Coleman–Li distances do, so bound branches are marked as jumping.
pub fn d_hmz(x: &DVector<f64>, g: &DVector<f64>, bounds: &BoxBounds, alpha: f64) -> ScalingValue {
    assert_interior(x, bounds);
    assert!(alpha > 0.0, "hmz alpha must be positive");
    let n = x.len();
    let signs = grad_signs(g);
    let mut d = DVector::zeros(n);
    let mut branch = Vec::with_capacity(n);
    let mut jump = Vec::with_capacity(n);
    for i in 0..n {
        let (l, u) = (bounds.lower()[i], bounds.upper()[i]);
        let (chi, tag) = match signs[i] {
            GradSign::Neg if u.is_finite() => (u - x[i], BranchTag::Upper),
            GradSign::Pos if l.is_finite() => (x[i] - l, BranchTag::Lower),
            // Cases left open by the defining formula (zero gradient, or a
            // gradient pointing at an infinite side) all take chi = 1.
            _ => (1.0, BranchTag::Free),
        };
        d[i] = chi / (alpha * chi + g[i].abs());
        jump.push(tag != BranchTag::Free);
        branch.push(tag);
    }
    ScalingValue { d, branch, bound_jump: jump }
}

/// Convex combination `a1*cl + a2*huu + a3*kk + a4*hmz`, coordinatewise.
///
/// Branch tags are taken from the largest-weight component (ties resolved in
/// the order cl, huu, kk, hmz). A unit weight vector reproduces the
/// corresponding family exactly, bookkeeping included; genuine mixtures are
/// continuous and carry no jump marks.
pub fn d_con(
    x: &DVector<f64>,
    g: &DVector<f64>,
    bounds: &BoxBounds,
    weights: &ConvexWeights,
    p: f64,
    gamma: f64,
    alpha: f64,
) -> ScalingValue {
    let a = weights.as_array();
    let parts = [
        d_cl(x, g, bounds),
        d_huu(x, g, bounds, p),
        d_kk(x, g, bounds, gamma),
        d_hmz(x, g, bounds, alpha),
    ];
    if let Some(k) = a.iter().position(|&w| w == 1.0) {
        return parts[k].clone();
    }
    let n = x.len();
    let mut d = DVector::zeros(n);
    for (w, part) in a.iter().zip(&parts) {
        if *w > 0.0 {
            d += part.d.scale(*w);
        }
    }
    let lead = (0..4).reduce(|best, j| if a[j] > a[best] { j } else { best }).unwrap();
    ScalingValue {
        d,
        branch: parts[lead].branch.clone(),
        bound_jump: vec![false; n],
    }
}

/// Diagonal of the elliptical trust-region metric `G = D^(-1/2)`, with the
/// diagonal floored before inversion.
pub fn metric_g(d: &ScalingValue, floor: f64) -> DVector<f64> {
    d.d.map(|di| di.max(floor).powf(-0.5))
}

/// Scaled steepest-descent direction `-D g`.
pub fn scaled_gradient(d: &ScalingValue, g: &DVector<f64>) -> DVector<f64> {
    -d.d.component_mul(g)
}

/// Empirical certificate for the sign/boundedness conditions a scaling must
/// satisfy.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    /// Coordinates (over all samples) where the diagonal was negative, or
    /// failed to vanish next to a bound the gradient pushes against.
    pub sign_condition_violations: u64,
    /// Largest diagonal entry seen (boundedness witness).
    pub max_d_observed: f64,
    /// Smallest step to the boundary along the scaled gradient.
    pub min_boundary_step_observed: f64,
    /// Largest `|D^-1|` seen on an interior ball.
    pub max_inverse_norm_observed: f64,
    pub samples: u64,
    pub seed: u64,
}

// Parameters of the limit-sense sign test. A coordinate within 1e-6 of a
// finite bound (scaled by the unit-capped width) whose gradient pushes
// against that bound must carry d <= 1e-3 * width. The gradient floor keeps
// the test well-posed for the rational hmz form, where d <= chi / |g|.
const NEAR_BOUND_REL: f64 = 1e-6;
const SMALL_D_REL: f64 = 1e-3;
const STRONG_GRAD_REL: f64 = 1e-3;
/// Inset defining the interior ball on which `|D^-1|` is recorded.
const INTERIOR_BALL_MARGIN: f64 = 0.05;

/// Sample interior points of the problem's box and check the scaling
/// produced by `spec` at each; see [`check_assumptions_with`].
pub fn check_assumptions(
    spec: &ScalingSpec,
    problem: &NlsProblem,
    samples: u64,
    seed: u64,
) -> AssumptionReport {
    check_assumptions_with(
        |x, g, bounds| spec.evaluate(x, g, bounds),
        problem,
        samples,
        seed,
    )
}

/// Core of the assumption checker, generic over the scaling rule so that
/// custom (or deliberately broken) scalings can be certified too.
///
/// Points are drawn uniformly over finite box sides and from a half-normal
/// tail on infinite sides; every eighth sample is pushed next to a finite
/// bound so the limit-sense sign condition is actually exercised.
/// Violations are report content, never errors.
pub fn check_assumptions_with(
    scaling: impl Fn(&DVector<f64>, &DVector<f64>, &BoxBounds) -> ScalingValue,
    problem: &NlsProblem,
    samples: u64,
    seed: u64,
) -> AssumptionReport {
    assert!(samples >= 1);
    let bounds = problem.bounds();
    let n = problem.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counter = EvalCounter::default();

    let mut violations = 0u64;
    let mut max_d = f64::NEG_INFINITY;
    let mut min_step = f64::INFINITY;
    let mut max_inv = 0.0f64;

    for k in 0..samples {
        let mut x = DVector::zeros(n);
        for i in 0..n {
            let (l, u) = (bounds.lower()[i], bounds.upper()[i]);
            x[i] = match (l.is_finite(), u.is_finite()) {
                (true, true) => l + rng.random::<f64>() * (u - l),
                (true, false) => l + rng.sample::<f64, _>(StandardNormal).abs(),
                (false, true) => u - rng.sample::<f64, _>(StandardNormal).abs(),
                (false, false) => rng.sample::<f64, _>(StandardNormal),
            };
        }
        // Deterministic near-boundary probes.
        let delta: f64 = rng.random_range(1e-8..NEAR_BOUND_REL);
        if k % 8 == 0 {
            let j = ((k / 8) as usize) % n;
            let (l, u) = (bounds.lower()[j], bounds.upper()[j]);
            let towards_lower = (k / 8) % 2 == 0;
            if towards_lower && l.is_finite() {
                x[j] = l + delta * bounds.margin_scale(j);
            } else if u.is_finite() {
                x[j] = u - delta * bounds.margin_scale(j);
            } else if l.is_finite() {
                x[j] = l + delta * bounds.margin_scale(j);
            }
        }
        let x = bounds.nudge_interior(&x, 1e-9);

        let (f, jac) = match (problem.residual(&x, &mut counter), problem.jacobian(&x, &mut counter))
        {
            (Ok(f), Ok(jac)) => (f, jac),
            _ => continue,
        };
        let g = grad_f(&jac, &f);
        let value = scaling(&x, &g, bounds);

        let strong = STRONG_GRAD_REL * g.amax().max(1.0);
        for i in 0..n {
            let (l, u) = (bounds.lower()[i], bounds.upper()[i]);
            let w = bounds.margin_scale(i);
            let mut bad = value.d[i] < 0.0;
            if l.is_finite() && x[i] - l <= NEAR_BOUND_REL * w && g[i] >= strong {
                bad |= value.d[i] > SMALL_D_REL * w;
            }
            if u.is_finite() && u - x[i] <= NEAR_BOUND_REL * w && g[i] <= -strong {
                bad |= value.d[i] > SMALL_D_REL * w;
            }
            if bad {
                violations += 1;
            }
            max_d = max_d.max(value.d[i]);
        }

        let ghat = scaled_gradient(&value, &g);
        if ghat.amax() > 0.0 {
            min_step = min_step.min(bounds.max_step_to_boundary(&x, &ghat));
        }
        if bounds.strict_interior(&x, INTERIOR_BALL_MARGIN) {
            let inv = value.d.iter().fold(0.0f64, |acc, &di| acc.max(1.0 / di));
            max_inv = max_inv.max(inv);
        }
    }

    AssumptionReport {
        sign_condition_violations: violations,
        max_d_observed: max_d,
        min_boundary_step_observed: min_step,
        max_inverse_norm_observed: max_inv,
        samples,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn v(s: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(s)
    }

    fn unit_box() -> BoxBounds {
        BoxBounds::uniform(1, 0.0, 1.0).unwrap()
    }

    #[test]
    fn cl_hand_values() {
        let b = unit_box();
        let x = v(&[0.3]);
        assert_relative_eq!(d_cl(&x, &v(&[-2.0]), &b).d[0], 0.7, epsilon = 1e-15);
        assert_relative_eq!(d_cl(&x, &v(&[5.0]), &b).d[0], 0.3, epsilon = 1e-15);
        assert_relative_eq!(d_cl(&x, &v(&[0.0]), &b).d[0], 0.3, epsilon = 1e-15);
        let free = BoxBounds::unbounded(1);
        assert_eq!(d_cl(&v(&[0.3]), &v(&[-2.0]), &free).d[0], 1.0);
        assert_eq!(d_cl(&v(&[0.3]), &v(&[-2.0]), &free).branch[0], BranchTag::Free);
    }

    #[test]
    fn cl_one_sided_box_branches() {
        // Negative gradient with an infinite upper side falls through to the
        // free branch even though the lower bound is finite.
        let b = BoxBounds::new(v(&[0.0]), v(&[f64::INFINITY])).unwrap();
        let val = d_cl(&v(&[0.3]), &v(&[-2.0]), &b);
        assert_eq!(val.d[0], 1.0);
        assert_eq!(val.branch[0], BranchTag::Free);
        // Zero gradient with one finite side takes the min-distance branch.
        let val = d_cl(&v(&[0.3]), &v(&[0.0]), &b);
        assert_relative_eq!(val.d[0], 0.3);
        assert_eq!(val.branch[0], BranchTag::MinDistance);
    }

    #[test]
    fn huu_hand_values() {
        let b = unit_box();
        let x = v(&[0.3]);
        assert_relative_eq!(d_huu(&x, &v(&[-2.0]), &b, 1.0).d[0], 0.7, epsilon = 1e-15);
        // Exact equality |g| = m trips neither strict inequality.
        assert_eq!(d_huu(&x, &v(&[0.3]), &b, 1.0).d[0], 1.0);
        assert_eq!(d_huu(&x, &v(&[0.3]), &b, 1.0).branch[0], BranchTag::Free);
        let free = BoxBounds::unbounded(1);
        assert_eq!(d_huu(&v(&[0.3]), &v(&[0.0]), &free, 1.0).d[0], 1.0);
    }

    #[test]
    fn kk_hand_values() {
        let b = unit_box();
        let x = v(&[0.3]);
        assert_relative_eq!(d_kk(&x, &v(&[-2.0]), &b, 1.0).d[0], 0.7, epsilon = 1e-15);
        assert_relative_eq!(d_kk(&x, &v(&[2.0]), &b, 1.0).d[0], 0.3, epsilon = 1e-15);
        let half = BoxBounds::new(v(&[0.0]), v(&[f64::INFINITY])).unwrap();
        assert_relative_eq!(d_kk(&v(&[0.3]), &v(&[-2.0]), &half, 1.0).d[0], 2.3, epsilon = 1e-15);
        let free = BoxBounds::unbounded(1);
        assert_eq!(d_kk(&v(&[0.3]), &v(&[7.0]), &free, 1.0).d[0], 1.0);
    }

    #[test]
    fn hmz_hand_values() {
        let b = unit_box();
        let x = v(&[0.3]);
        assert_relative_eq!(d_hmz(&x, &v(&[-2.0]), &b, 1.0).d[0], 0.7 / 2.7, epsilon = 1e-15);
        assert_relative_eq!(d_hmz(&x, &v(&[0.0]), &b, 1.0).d[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(d_hmz(&x, &v(&[3.0]), &b, 1.0).d[0], 0.3 / 3.3, epsilon = 1e-15);
    }

    #[test]
    fn con_hand_values() {
        let b = unit_box();
        let x = v(&[0.3]);
        let g = v(&[-2.0]);
        let quarter = ConvexWeights::new([0.25; 4]).unwrap();
        let d = d_con(&x, &g, &b, &quarter, 1.0, 1.0, 1.0);
        assert_relative_eq!(d.d[0], (0.7 + 0.7 + 0.7 + 0.7 / 2.7) / 4.0, epsilon = 1e-12);

        let half = ConvexWeights::new([0.0, 0.0, 0.5, 0.5]).unwrap();
        let d = d_con(&x, &g, &b, &half, 1.0, 1.0, 1.0);
        assert_relative_eq!(d.d[0], (0.7 + 0.7 / 2.7) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn con_unit_weights_reproduce_components_bitwise() {
        let b = BoxBounds::uniform(3, -1.0, 2.0).unwrap();
        let x = v(&[0.25, 0.5, 1.5]);
        let g = v(&[-3.0, 0.0, 4.0]);
        let units = [
            (ConvexWeights::new([1.0, 0.0, 0.0, 0.0]).unwrap(), d_cl(&x, &g, &b)),
            (ConvexWeights::new([0.0, 1.0, 0.0, 0.0]).unwrap(), d_huu(&x, &g, &b, 1.0)),
            (ConvexWeights::new([0.0, 0.0, 1.0, 0.0]).unwrap(), d_kk(&x, &g, &b, 1.0)),
            (ConvexWeights::new([0.0, 0.0, 0.0, 1.0]).unwrap(), d_hmz(&x, &g, &b, 1.0)),
        ];
        for (w, expected) in units {
            assert_eq!(d_con(&x, &g, &b, &w, 1.0, 1.0, 1.0), expected);
        }
    }

    #[test]
    fn cl_jump_at_gradient_sign_change() {
        // On [0,1] at x = 0.3 the limit values from either gradient sign
        // differ by exactly 0.7 - 0.3.
        let b = unit_box();
        let x = v(&[0.3]);
        let plus = d_cl(&x, &v(&[1e-10]), &b).d[0];
        let minus = d_cl(&x, &v(&[-1e-10]), &b).d[0];
        assert_eq!((minus - plus).abs(), 0.7 - 0.3);
    }

    #[test]
    fn kk_difference_quotients_stay_bounded() {
        // Local Lipschitz witness: difference quotients over close interior
        // pairs remain finite and modest for a smooth gradient field.
        let b = BoxBounds::uniform(4, 0.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let x = DVector::from_fn(4, |_, _| 0.01 + 0.98 * rng.random::<f64>());
            let dir = DVector::from_fn(4, |_, _| rng.random::<f64>() - 0.5).normalize();
            let xp = &x + dir.scale(1e-4);
            if !b.strict_interior(&xp, 0.0) {
                continue;
            }
            let grad = |y: &DVector<f64>| y.map(|t| t - 0.5);
            let d0 = d_kk(&x, &grad(&x), &b, 1.0);
            let d1 = d_kk(&xp, &grad(&xp), &b, 1.0);
            let quotient = (&d1.d - &d0.d).norm() / (&xp - &x).norm();
            assert!(quotient.is_finite());
            worst = worst.max(quotient);
        }
        assert!(worst <= 10.0, "observed Lipschitz estimate {worst}");
    }

    #[test]
    fn metric_g_values() {
        let val = ScalingValue {
            d: v(&[1.0, 4.0, 0.0]),
            branch: vec![BranchTag::Free; 3],
            bound_jump: vec![false; 3],
        };
        let g = metric_g(&val, 1e-12);
        assert_relative_eq!(g[0], 1.0);
        assert_relative_eq!(g[1], 0.5);
        assert_relative_eq!(g[2], 1e6);
    }

    #[test]
    fn scaled_gradient_values() {
        let val = ScalingValue {
            d: v(&[0.7, 0.3]),
            branch: vec![BranchTag::Free; 2],
            bound_jump: vec![false; 2],
        };
        assert_eq!(scaled_gradient(&val, &v(&[-2.0, 5.0])), v(&[1.4, -1.5]));
        assert_eq!(scaled_gradient(&val, &v(&[0.0, 0.0])), v(&[0.0, 0.0]));
    }

    #[test]
    fn weights_validation() {
        assert!(ConvexWeights::new([0.5, 0.5, 0.0, 0.0]).is_ok());
        assert!(ConvexWeights::new([0.5, 0.6, 0.0, 0.0]).is_err());
        assert!(ConvexWeights::new([-0.1, 1.1, 0.0, 0.0]).is_err());
    }

    #[test]
    fn grammar_round_trips() {
        for s in [
            "cl",
            "huu",
            "huu:2",
            "kk",
            "kk:0.5",
            "hmz",
            "hmz:3",
            "con:0.5,0.5,0,0",
            "con:0.25,0.25,0.25,0.25;p=2;gamma=0.5;alpha=2",
        ] {
            let spec: ScalingSpec = s.parse().unwrap();
            let printed = spec.to_string();
            let reparsed: ScalingSpec = printed.parse().unwrap();
            assert_eq!(spec, reparsed, "round trip failed for {s}");
        }
        assert!("xyz".parse::<ScalingSpec>().is_err());
        assert!("con:1,0,0".parse::<ScalingSpec>().is_err());
        assert!("con:0.7,0.7,0,0".parse::<ScalingSpec>().is_err());
        assert!("kk:-1".parse::<ScalingSpec>().is_err());
    }

    #[test]
    fn checker_accepts_cl_on_brown() {
        let brown = problems::get_problem(3).unwrap();
        let report = check_assumptions(&ScalingSpec::ColemanLi, &brown, 2000, 42);
        assert_eq!(report.sign_condition_violations, 0);
        assert!(report.max_d_observed <= 4.0);
        assert!(report.max_inverse_norm_observed.is_finite());
    }

    #[test]
    fn checker_flags_adversarial_scaling_everywhere() {
        let brown = problems::get_problem(3).unwrap();
        let samples = 500;
        let report = check_assumptions_with(
            |x, _, _| ScalingValue {
                d: DVector::repeat(x.len(), -1.0),
                branch: vec![BranchTag::Free; x.len()],
                bound_jump: vec![false; x.len()],
            },
            &brown,
            samples,
            1,
        );
        assert_eq!(report.sign_condition_violations, samples * 5);
    }

    #[test]
    fn checker_reports_finite_boundary_step_for_combination() {
        // Toy 2-d system on [0,1]^2 with a combination that leaves out huu.
        let toy = NlsProblem::new(
            "toy",
            BoxBounds::uniform(2, 0.0, 1.0).unwrap(),
            |x: &DVector<f64>| v(&[x[0] - 0.25, x[1] - 0.75]),
            crate::problem::JacobianSpec::FiniteDifference,
        );
        let weights = ConvexWeights::new([1.0 / 3.0, 0.0, 1.0 / 3.0, 1.0 / 3.0]).unwrap();
        let report = check_assumptions(&ScalingSpec::convex(weights), &toy, 500, 3);
        assert_eq!(report.sign_condition_violations, 0);
        assert!(report.min_boundary_step_observed.is_finite());
        assert!(report.min_boundary_step_observed > 0.0);
    }

    #[test]
    fn checker_is_deterministic() {
        let brown = problems::get_problem(3).unwrap();
        let a = check_assumptions(&ScalingSpec::kanzow_klug(), &brown, 300, 9);
        let b = check_assumptions(&ScalingSpec::kanzow_klug(), &brown, 300, 9);
        assert_eq!(a, b);
    }

    /// The seven diagonals exercised by the benchmark harness.
    fn bench_specs() -> Vec<ScalingSpec> {
        crate::bench::paper7_scalings()
    }

    fn arb_point() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<(f64, f64)>)> {
        // (interior fractions, gradient, per-coordinate box kind/params)
        let coord = (0.01f64..0.99, -50.0f64..50.0, 0u8..4, -5.0f64..0.0, 0.1f64..5.0);
        proptest::collection::vec(coord, 1..6).prop_map(|cs| {
            let mut fractions = Vec::new();
            let mut grads = Vec::new();
            let mut boxes = Vec::new();
            for (t, g, kind, lo, width) in cs {
                let (l, u) = match kind {
                    0 => (lo, lo + width),
                    1 => (lo, f64::INFINITY),
                    2 => (f64::NEG_INFINITY, lo + width),
                    _ => (f64::NEG_INFINITY, f64::INFINITY),
                };
                fractions.push(t);
                grads.push(g);
                boxes.push((l, u));
            }
            (fractions, grads, boxes)
        })
    }

    fn materialize(
        fractions: &[f64],
        boxes: &[(f64, f64)],
    ) -> (DVector<f64>, BoxBounds) {
        let n = fractions.len();
        let lower = DVector::from_fn(n, |i, _| boxes[i].0);
        let upper = DVector::from_fn(n, |i, _| boxes[i].1);
        let bounds = BoxBounds::new(lower, upper).unwrap();
        let x = DVector::from_fn(n, |i, _| {
            let (l, u) = boxes[i];
            match (l.is_finite(), u.is_finite()) {
                (true, true) => l + fractions[i] * (u - l),
                (true, false) => l + fractions[i] * 10.0 + 1e-6,
                (false, true) => u - fractions[i] * 10.0 - 1e-6,
                (false, false) => fractions[i] * 20.0 - 10.0,
            }
        });
        (x, bounds)
    }

    proptest! {
        // Nonnegativity and descent for every benchmark diagonal.
        #[test]
        fn diagonals_nonnegative_and_descending((fr, gr, bx) in arb_point()) {
            let (x, bounds) = materialize(&fr, &bx);
            let g = v(&gr);
            for spec in bench_specs() {
                let val = spec.evaluate(&x, &g, &bounds);
                for i in 0..x.len() {
                    prop_assert!(val.d[i] >= 0.0);
                }
                let ghat = scaled_gradient(&val, &g);
                prop_assert!(g.dot(&ghat) <= 0.0);
            }
        }

        // The combination lies inside the envelope of its components.
        #[test]
        fn convex_envelope_holds((fr, gr, bx) in arb_point()) {
            let (x, bounds) = materialize(&fr, &bx);
            let g = v(&gr);
            let parts = [
                d_cl(&x, &g, &bounds),
                d_huu(&x, &g, &bounds, 1.0),
                d_kk(&x, &g, &bounds, 1.0),
                d_hmz(&x, &g, &bounds, 1.0),
            ];
            let w = ConvexWeights::new([0.4, 0.3, 0.2, 0.1]).unwrap();
            let combo = d_con(&x, &g, &bounds, &w, 1.0, 1.0, 1.0);
            for i in 0..x.len() {
                let lo = parts.iter().map(|p| p.d[i]).fold(f64::INFINITY, f64::min);
                let hi = parts.iter().map(|p| p.d[i]).fold(0.0f64, f64::max);
                let tol = 1e-12 * hi.max(1.0);
                prop_assert!(combo.d[i] >= lo - tol && combo.d[i] <= hi + tol);
            }
        }

        // Fully unconstrained coordinates scale to one for cl and kk.
        #[test]
        fn free_coordinates_scale_to_one(g in -100.0f64..100.0, x in -100.0f64..100.0) {
            let free = BoxBounds::unbounded(1);
            let xv = v(&[x]);
            let gv = v(&[g]);
            prop_assert_eq!(d_cl(&xv, &gv, &free).d[0], 1.0);
            prop_assert_eq!(d_kk(&xv, &gv, &free, 1.0).d[0], 1.0);
        }
    }
}
