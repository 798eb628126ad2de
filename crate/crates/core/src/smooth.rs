//! Least-squares smoothing of discrete observations into curves.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

use crate::fda::{Curve, Grid};
use crate::linalg::LeastSquares;
use crate::math::{cos, sin};
use crate::{Error, Result};

/// Number of interior knots used when nothing else is configured.
pub const DEFAULT_INTERIOR_KNOTS: usize = 20;

/// Basis onto which raw observations are projected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoother {
    /// Cubic B-splines with equally spaced interior knots on `[0, 1]`.
    BSpline { interior_knots: usize },
    /// `1, √2 sin(2πkt), √2 cos(2πkt)` for `k = 1..=harmonics`.
    Fourier { harmonics: usize },
}

impl Default for Smoother {
    fn default() -> Self {
        Smoother::BSpline { interior_knots: DEFAULT_INTERIOR_KNOTS }
    }
}

impl Smoother {
    pub fn basis_len(&self) -> usize {
        match *self {
            Smoother::BSpline { interior_knots } => interior_knots + 4,
            Smoother::Fourier { harmonics } => 1 + 2 * harmonics,
        }
    }

    /// Values of every basis function at `t`.
    pub fn eval(&self, t: f64, out: &mut [f64]) {
        match *self {
            Smoother::BSpline { interior_knots } => cubic_bspline(t, interior_knots, out),
            Smoother::Fourier { harmonics } => {
                out[0] = 1.0;
                for k in 1..=harmonics {
                    let arg = 2.0 * PI * k as f64 * t;
                    out[2 * k - 1] = SQRT_2 * sin(arg);
                    out[2 * k] = SQRT_2 * cos(arg);
                }
            }
        }
    }
}

/// Cox–de Boor evaluation of the clamped cubic B-spline basis with
/// `interior` equally spaced interior knots.
fn cubic_bspline(t: f64, interior: usize, out: &mut [f64]) {
    const DEGREE: usize = 3;
    let nbasis = interior + DEGREE + 1;
    debug_assert_eq!(out.len(), nbasis);
    let knot = |i: usize| -> f64 {
        if i <= DEGREE {
            0.0
        } else if i >= interior + DEGREE + 1 {
            1.0
        } else {
            (i - DEGREE) as f64 / (interior + 1) as f64
        }
    };
    out.iter_mut().for_each(|v| *v = 0.0);
    let t = t.clamp(0.0, 1.0);
    // knot span index s with knot(s) <= t < knot(s+1), using the last span at t = 1
    let span = if t >= 1.0 {
        interior + DEGREE
    } else {
        DEGREE + crate::math::floor(t * (interior + 1) as f64) as usize
    };
    let span = span.min(interior + DEGREE);
    let mut n = [0.0f64; DEGREE + 1];
    n[0] = 1.0;
    let mut left = [0.0f64; DEGREE + 1];
    let mut right = [0.0f64; DEGREE + 1];
    for j in 1..=DEGREE {
        left[j] = t - knot(span + 1 - j);
        right[j] = knot(span + j) - t;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let temp = if denom == 0.0 { 0.0 } else { n[r] / denom };
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    for (j, v) in n.iter().enumerate() {
        out[span - DEGREE + j] = *v;
    }
}

/// A smoother fitted to a fixed set of observation positions.
///
/// Reusing it across many value vectors costs one QR solve each.
#[derive(Debug, Clone)]
pub struct FittedSmoother {
    smoother: Smoother,
    ls: LeastSquares,
}

impl FittedSmoother {
    pub fn new(positions: &[f64], smoother: Smoother) -> Result<Self> {
        let k = smoother.basis_len();
        if positions.len() < k {
            return Err(Error::invalid(format!(
                "{} observations cannot identify {} basis functions",
                positions.len(),
                k
            )));
        }
        if let Some(bad) = positions.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::invalid(format!("position {bad} outside [0, 1]")));
        }
        let mut design = vec![0.0; positions.len() * k];
        for (row, &t) in design.chunks_exact_mut(k).zip(positions) {
            smoother.eval(t, row);
        }
        let ls = LeastSquares::new(&design, positions.len(), k)?;
        Ok(FittedSmoother { smoother, ls })
    }

    /// Basis coefficients of the least-squares fit.
    pub fn coefficients(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite observation"));
        }
        self.ls.solve(values)
    }

    /// Evaluates the fit on `grid`.
    pub fn apply(&self, values: &[f64], grid: &Grid) -> Result<Curve> {
        let coef = self.coefficients(values)?;
        let mut basis = vec![0.0; coef.len()];
        let out = grid
            .points()
            .iter()
            .map(|&t| {
                self.smoother.eval(t, &mut basis);
                basis.iter().zip(&coef).map(|(b, c)| b * c).sum()
            })
            .collect();
        Ok(Curve::from_parts_unchecked(grid.clone(), out))
    }
}

/// Least-squares fit of `(position, value)` pairs, evaluated on `grid`.
pub fn smooth_with(raw: &[(f64, f64)], smoother: Smoother, grid: &Grid) -> Result<Curve> {
    let positions: Vec<f64> = raw.iter().map(|r| r.0).collect();
    let values: Vec<f64> = raw.iter().map(|r| r.1).collect();
    FittedSmoother::new(&positions, smoother)?.apply(&values, grid)
}

/// Cubic B-spline fit with `interior_knots` equally spaced interior knots.
pub fn smooth_to_curve(raw: &[(f64, f64)], interior_knots: usize, grid: &Grid) -> Result<Curve> {
    if raw.len() < interior_knots + 4 {
        return Err(Error::invalid(format!(
            "need at least {} raw points, got {}",
            interior_knots + 4,
            raw.len()
        )));
    }
    smooth_with(raw, Smoother::BSpline { interior_knots }, grid)
}
