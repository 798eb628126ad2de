//! Curves on a uniform grid of `[0, 1]` with trapezoid quadrature.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Smallest admissible number of grid points.
pub const MIN_GRID_POINTS: usize = 16;
/// Grid size used when nothing else is configured.
pub const DEFAULT_GRID_POINTS: usize = 501;

/// Uniform grid `{0, h, 2h, …, 1}` with trapezoid weights summing to one.
///
/// Cloning is cheap; points and weights are shared.
#[derive(Debug, Clone)]
pub struct Grid {
    points: Arc<[f64]>,
    weights: Arc<[f64]>,
}

impl Grid {
    pub fn uniform(len: usize) -> Result<Self> {
        if len < MIN_GRID_POINTS {
            return Err(Error::GridTooSmall { got: len, min: MIN_GRID_POINTS });
        }
        let h = 1.0 / (len - 1) as f64;
        let points: Vec<f64> = (0..len).map(|i| i as f64 / (len - 1) as f64).collect();
        let mut weights = vec![h; len];
        weights[0] = 0.5 * h;
        weights[len - 1] = 0.5 * h;
        Ok(Grid { points: points.into(), weights: weights.into() })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Spacing between neighbouring points.
    pub fn step(&self) -> f64 {
        1.0 / (self.len() - 1) as f64
    }

    /// Evaluates `f` at every grid point.
    pub fn sample_fn(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.points.iter().map(|&t| f(t)).collect()
    }

    /// Weighted inner product of two raw value vectors on this grid.
    #[inline]
    pub fn dot(&self, f: &[f64], g: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.len());
        debug_assert_eq!(g.len(), self.len());
        f.iter().zip(g).zip(self.weights.iter()).map(|((a, b), w)| a * b * w).sum()
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch { left: self.len(), right: other.len() })
        }
    }
}

impl PartialEq for Grid {
    // A uniform grid of [0, 1] is determined by its size.
    fn eq(&self, other: &Self) -> bool {
        self.len() == other.len()
    }
}

/// A function observed at every point of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    grid: Grid,
    values: Vec<f64>,
}

impl Curve {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch { got: values.len(), expected: grid.len() });
        }
        if let Some(point) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { curve: 0, point });
        }
        Ok(Curve { grid, values })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Curve::new(grid.clone(), grid.sample_fn(f))
    }

    pub fn zeros(grid: &Grid) -> Self {
        Curve { grid: grid.clone(), values: vec![0.0; grid.len()] }
    }

    pub(crate) fn from_parts_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        Curve { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scaled(&self, c: f64) -> Curve {
        Curve { grid: self.grid.clone(), values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn negated(&self) -> Curve {
        self.scaled(-1.0)
    }

    /// `self − other`, pointwise.
    pub fn sub(&self, other: &Curve) -> Result<Curve> {
        self.grid.check_same(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Curve { grid: self.grid.clone(), values })
    }

    /// Mean value over `[0, 1]`.
    pub fn integral(&self) -> f64 {
        self.values.iter().zip(self.grid.weights()).map(|(v, w)| v * w).sum()
    }
}

/// `⟨f, g⟩ = ∫ f g` by the trapezoid rule.
pub fn inner_product(f: &Curve, g: &Curve) -> Result<f64> {
    f.grid.check_same(&g.grid)?;
    Ok(f.grid.dot(&f.values, &g.values))
}

/// `‖f‖²`.
pub fn norm_sq(f: &Curve) -> f64 {
    f.grid.dot(&f.values, &f.values)
}

/// Time-ordered curves on a common grid, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSample {
    grid: Grid,
    values: Vec<f64>,
    label: String,
}

impl CurveSample {
    pub fn new(grid: Grid, rows: Vec<Vec<f64>>, label: impl Into<String>) -> Result<Self> {
        let p = grid.len();
        let mut values = Vec::with_capacity(rows.len() * p);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::LengthMismatch { got: row.len(), expected: p });
            }
            if let Some(point) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { curve: i, point });
            }
            values.extend_from_slice(row);
        }
        Self::from_flat(grid, values, label)
    }

    /// Builds a sample from `m·P` row-major values.
    pub fn from_flat(grid: Grid, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        let p = grid.len();
        let label = label.into();
        if values.len() % p != 0 {
            return Err(Error::LengthMismatch { got: values.len() % p, expected: p });
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { curve: idx / p, point: idx % p });
        }
        let m = values.len() / p;
        if m < 2 {
            return Err(Error::SampleTooShort { label, got: m, min: 2 });
        }
        Ok(CurveSample { grid, values, label })
    }

    pub fn from_curves(curves: &[Curve], label: impl Into<String>) -> Result<Self> {
        let Some(first) = curves.first() else {
            return Err(Error::SampleTooShort { label: label.into(), got: 0, min: 2 });
        };
        let grid = first.grid.clone();
        let mut values = Vec::with_capacity(curves.len() * grid.len());
        for c in curves {
            grid.check_same(&c.grid)?;
            values.extend_from_slice(&c.values);
        }
        Self::from_flat(grid, values, label)
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Number of curves.
    #[inline]
    pub fn len(&self) -> usize {
        self.values.len() / self.grid.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.grid.len();
        &self.values[i * p..(i + 1) * p]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.grid.len())
    }

    pub fn curve(&self, i: usize) -> Curve {
        Curve { grid: self.grid.clone(), values: self.row(i).to_vec() }
    }

    pub fn flat_values(&self) -> &[f64] {
        &self.values
    }

    /// Pointwise mean curve.
    pub fn mean_curve(&self) -> Curve {
        let p = self.grid.len();
        let mut mean = vec![0.0; p];
        for row in self.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        let inv = 1.0 / self.len() as f64;
        mean.iter_mut().for_each(|m| *m *= inv);
        Curve { grid: self.grid.clone(), values: mean }
    }

    /// Largest absolute value of the pointwise mean, relative to the
    /// largest absolute observation (0 for an all-zero sample).
    pub fn relative_mean_offset(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mean = self.mean_curve();
        mean.values.iter().fold(0.0f64, |a, v| a.max(v.abs())) / scale
    }

    /// Multiplies every curve by `c`.
    pub fn scaled(&self, c: f64) -> CurveSample {
        CurveSample {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
            label: self.label.clone(),
        }
    }

    /// The first `k` curves as a new sample (`k ≥ 2`).
    pub fn head(&self, k: usize) -> Result<CurveSample> {
        let k = k.min(self.len());
        Self::from_flat(self.grid.clone(), self.values[..k * self.grid.len()].to_vec(), self.label.clone())
    }
}

/// Subtracts the pointwise sample mean from every curve.
///
/// A sample whose mean is already at rounding level is returned unchanged,
/// which makes centering exactly idempotent.
pub fn center(sample: &CurveSample) -> CurveSample {
    let mean = sample.mean_curve();
    let p = sample.grid.len();
    let scale = sample.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let rounding = 8.0 * sample.len() as f64 * f64::EPSILON * scale;
    if mean.values.iter().all(|m| m.abs() <= rounding) {
        return sample.clone();
    }
    let mut values = sample.values.clone();
    for row in values.chunks_exact_mut(p) {
        for (v, m) in row.iter_mut().zip(&mean.values) {
            *v -= m;
        }
    }
    CurveSample { grid: sample.grid.clone(), values, label: sample.label.clone() }
}
