//! Box bounds and the geometry used to keep iterates strictly inside them.

use nalgebra::DVector;
use thiserror::Error;

/// Errors raised when constructing a [`BoxBounds`].
#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("bound vectors have mismatched lengths ({lower} vs {upper})")]
    DimensionMismatch { lower: usize, upper: usize },
    #[error("coordinate {index}: lower bound {lower} is not strictly below upper bound {upper}")]
    EmptyInterior { index: usize, lower: f64, upper: f64 },
    #[error("coordinate {index}: bounds must be non-NaN, with -inf only below and +inf only above")]
    InvalidBound { index: usize },
}

/// Lower and upper bound vectors delimiting a box with nonempty interior.
///
/// Entries may be infinite (`-inf` in `lower`, `+inf` in `upper`); NaN is
/// rejected, as is any coordinate with `lower >= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxBounds {
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl BoxBounds {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self, BoundsError> {
        if lower.len() != upper.len() {
            return Err(BoundsError::DimensionMismatch {
                lower: lower.len(),
                upper: upper.len(),
            });
        }
        for i in 0..lower.len() {
            let (l, u) = (lower[i], upper[i]);
            if l.is_nan() || u.is_nan() || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(BoundsError::InvalidBound { index: i });
            }
            if !(l < u) {
                return Err(BoundsError::EmptyInterior { index: i, lower: l, upper: u });
            }
        }
        Ok(Self { lower, upper })
    }

    /// Box `[lo, hi]^n`.
    pub fn uniform(n: usize, lo: f64, hi: f64) -> Result<Self, BoundsError> {
        Self::new(DVector::repeat(n, lo), DVector::repeat(n, hi))
    }

    /// The whole of `R^n`.
    pub fn unbounded(n: usize) -> Self {
        Self {
            lower: DVector::repeat(n, f64::NEG_INFINITY),
            upper: DVector::repeat(n, f64::INFINITY),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    /// Width `u_i - l_i` (possibly infinite).
    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    /// Unit-capped width `min(1, u_i - l_i)` used to scale margins; 1 when a
    /// side is infinite.
    pub fn margin_scale(&self, i: usize) -> f64 {
        self.width(i).min(1.0)
    }

    /// Coordinatewise clamp of `x` onto the closed box.
    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.dim(), |i, _| x[i].clamp(self.lower[i], self.upper[i]))
    }

    /// Whether `x` lies strictly inside the box, inset by `margin` times the
    /// unit-capped width on every finite side.
    pub fn strict_interior(&self, x: &DVector<f64>, margin: f64) -> bool {
        debug_assert_eq!(x.len(), self.dim());
        (0..self.dim()).all(|i| {
            let w = self.margin_scale(i);
            let above = !self.lower[i].is_finite() || x[i] > self.lower[i] + margin * w;
            let below = !self.upper[i].is_finite() || x[i] < self.upper[i] - margin * w;
            above && below
        })
    }

    /// Largest `lambda >= 0` with `x + lambda * d` still inside the closed
    /// box; `+inf` when `d` never reaches a finite face.
    ///
    /// Panics if `x` is not strictly interior.
    pub fn max_step_to_boundary(&self, x: &DVector<f64>, d: &DVector<f64>) -> f64 {
        assert!(
            self.strict_interior(x, 0.0),
            "max_step_to_boundary requires a strictly interior point"
        );
        let mut lambda = f64::INFINITY;
        for i in 0..self.dim() {
            let step = if d[i] > 0.0 {
                (self.upper[i] - x[i]) / d[i]
            } else if d[i] < 0.0 {
                (self.lower[i] - x[i]) / d[i]
            } else {
                f64::INFINITY
            };
            lambda = lambda.min(step);
        }
        lambda
    }

    /// Project `x` onto the box and push any coordinate sitting on (or
    /// outside) a finite face inward by `rel` times the unit-capped width.
    pub fn nudge_interior(&self, x: &DVector<f64>, rel: f64) -> DVector<f64> {
        let mut out = self.project(x);
        for i in 0..self.dim() {
            let shift = rel * self.margin_scale(i);
            if self.lower[i].is_finite() && out[i] <= self.lower[i] {
                out[i] = self.lower[i] + shift;
            }
            if self.upper[i].is_finite() && out[i] >= self.upper[i] {
                out[i] = self.upper[i] - shift;
            }
        }
        out
    }
}
