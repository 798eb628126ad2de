//! Covariance kernels and their eigensystems.
//!
//! [`estimate_cov`] and [`estimate_cov_partial`] build the `P × P` kernel
//! matrix; [`eigen_decompose`] solves the quadrature-weighted eigenproblem
//! densely. [`SampleSpan`] computes the same eigenpairs from a
//! quadrature-orthonormal basis of the sample's span, which turns every
//! sequential eigenproblem into a `rank × rank` one. The test statistics use
//! the span route; the kernel route is the reference.

use alloc::vec;
use alloc::vec::Vec;

use crate::fda::{Curve, CurveSample, Grid};
use crate::linalg::SymmetricEigen;
use crate::math::{floor_count, sqrt};
use crate::{Error, Result};

/// Pointwise mean (relative to the sample's largest value) above which a
/// sample is reported as uncentered.
pub const CENTERING_TOLERANCE: f64 = 1e-8;
/// Relative eigenvalue gap below which a spectrum is ill-separated.
pub const SEPARATION_TOLERANCE: f64 = 1e-10;

/// Discretized covariance kernel `Ĉ(s_i, t_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovKernel {
    grid: Grid,
    matrix: Vec<f64>,
    sample_fraction: f64,
    effective_count: usize,
    uncentered: bool,
}

impl CovKernel {
    /// Wraps an explicit symmetric kernel matrix (row-major `P × P`).
    pub fn from_matrix(grid: Grid, matrix: Vec<f64>) -> Result<Self> {
        let p = grid.len();
        if matrix.len() != p * p {
            return Err(Error::LengthMismatch { got: matrix.len(), expected: p * p });
        }
        Ok(CovKernel { grid, matrix, sample_fraction: 1.0, effective_count: 0, uncentered: false })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.grid.len() + j]
    }

    pub fn sample_fraction(&self) -> f64 {
        self.sample_fraction
    }

    /// `⌊mλ⌋`, the number of curves averaged.
    pub fn effective_count(&self) -> usize {
        self.effective_count
    }

    /// The sample's pointwise mean exceeded [`CENTERING_TOLERANCE`].
    pub fn uncentered(&self) -> bool {
        self.uncentered
    }

    /// `(C ∘ v)(s) = ∫ C(s, t) v(t) dt`.
    pub fn apply(&self, v: &Curve) -> Result<Curve> {
        self.grid.check_same(v.grid())?;
        let p = self.grid.len();
        let wv: Vec<f64> = v.values().iter().zip(self.grid.weights()).map(|(a, w)| a * w).collect();
        let out = self.matrix.chunks_exact(p).map(|row| row.iter().zip(&wv).map(|(a, b)| a * b).sum()).collect();
        Ok(Curve::from_parts_unchecked(self.grid.clone(), out))
    }

    /// `∫∫ C(s, t)² ds dt`.
    pub fn hilbert_schmidt_sq(&self) -> f64 {
        let w = self.grid.weights();
        let p = w.len();
        let mut s = 0.0;
        for i in 0..p {
            for j in 0..p {
                s += w[i] * w[j] * { let c = self.matrix[i * p + j]; c * c };
            }
        }
        s
    }
}

fn cov_of_first(sample: &CurveSample, count: usize, fraction: f64) -> CovKernel {
    let grid = sample.grid().clone();
    let p = grid.len();
    let mut matrix = vec![0.0; p * p];
    if count >= 1 {
        for row in sample.rows().take(count) {
            for i in 0..p {
                let xi = row[i];
                let dst = &mut matrix[i * p..i * p + i + 1];
                for (d, xj) in dst.iter_mut().zip(&row[..=i]) {
                    *d += xi * xj;
                }
            }
        }
        let inv = 1.0 / count as f64;
        for i in 0..p {
            for j in 0..=i {
                let v = matrix[i * p + j] * inv;
                matrix[i * p + j] = v;
                matrix[j * p + i] = v;
            }
        }
    }
    CovKernel {
        grid,
        matrix,
        sample_fraction: fraction,
        effective_count: count,
        uncentered: sample.relative_mean_offset() > CENTERING_TOLERANCE,
    }
}

/// `Ĉ(s, t) = (1/m) Σ X_i(s) X_i(t)` for a centered sample.
pub fn estimate_cov(sample: &CurveSample) -> CovKernel {
    cov_of_first(sample, sample.len(), 1.0)
}

/// The sequential estimator averaging the first `⌊mλ⌋` curves; the zero
/// kernel when `⌊mλ⌋ < 1`.
pub fn estimate_cov_partial(sample: &CurveSample, lambda: f64) -> Result<CovKernel> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid(alloc::format!("lambda {lambda} outside [0, 1]")));
    }
    Ok(cov_of_first(sample, floor_count(sample.len(), lambda), lambda))
}

/// Leading eigenpairs of a covariance operator.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    values: Vec<f64>,
    functions: Vec<Curve>,
    ill_separated: Vec<usize>,
    degenerate: bool,
}

impl EigenSystem {
    /// Assembles a system from explicit pairs. Values must be non-increasing.
    pub fn new(values: Vec<f64>, functions: Vec<Curve>) -> Result<Self> {
        if values.len() != functions.len() {
            return Err(Error::invalid("eigenvalue and eigenfunction counts differ"));
        }
        if values.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::invalid("eigenvalues must be non-increasing"));
        }
        if let Some(first) = functions.first() {
            for f in &functions[1..] {
                first.grid().check_same(f.grid())?;
            }
        }
        let degenerate = values.first().is_none_or(|&v| v <= 0.0);
        Ok(EigenSystem { values, functions, ill_separated: Vec::new(), degenerate })
    }

    fn from_parts(all_values: &[f64], functions: Vec<Curve>) -> Self {
        let count = functions.len();
        let top = all_values.first().copied().unwrap_or(0.0);
        let degenerate = top <= 0.0;
        let mut ill_separated = Vec::new();
        if !degenerate {
            for j in 0..count {
                let next = all_values.get(j + 1).copied().unwrap_or(0.0).max(0.0);
                if all_values[j] - next < SEPARATION_TOLERANCE * top {
                    ill_separated.push(j + 1);
                }
            }
        }
        EigenSystem { values: all_values[..count].to_vec(), functions, ill_separated, degenerate }
    }

    /// Number of eigenpairs `J`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn functions(&self) -> &[Curve] {
        &self.functions
    }

    /// `τ̂_j` for 1-based `j`.
    pub fn value(&self, j: usize) -> f64 {
        self.values[j - 1]
    }

    /// `v̂_j` for 1-based `j`.
    pub fn function(&self, j: usize) -> &Curve {
        &self.functions[j - 1]
    }

    /// 1-based orders `j` with `τ̂_j − τ̂_{j+1} < 1e-10·τ̂_1`.
    pub fn ill_separated(&self) -> &[usize] {
        &self.ill_separated
    }

    /// All eigenvalues vanish; the eigenfunctions are an arbitrary basis.
    pub fn degenerate(&self) -> bool {
        self.degenerate
    }

    pub(crate) fn flip(&mut self, j: usize) {
        let f = &mut self.functions[j - 1];
        *f = f.negated();
    }
}

/// Top-`count` eigenpairs of the quadrature-weighted operator with kernel
/// `kernel`, via the symmetric matrix `W^{1/2} M W^{1/2}`.
pub fn eigen_decompose(kernel: &CovKernel, count: usize) -> Result<EigenSystem> {
    let grid = &kernel.grid;
    let p = grid.len();
    if count > p {
        return Err(Error::invalid(alloc::format!("requested {count} eigenpairs from a {p}-point grid")));
    }
    if kernel.matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("kernel has non-finite entries"));
    }
    let sw: Vec<f64> = grid.weights().iter().map(|&w| sqrt(w)).collect();
    let mut b = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..=i {
            b[i * p + j] = sw[i] * kernel.matrix[i * p + j] * sw[j];
        }
    }
    let eig = SymmetricEigen::new(&b, p)?;
    let functions = (0..count)
        .map(|i| {
            let vals: Vec<f64> = eig.vector(i).iter().zip(&sw).map(|(u, s)| u / s).collect();
            normalized(grid, vals)
        })
        .collect();
    Ok(EigenSystem::from_parts(&eig.values, functions))
}

fn normalized(grid: &Grid, mut vals: Vec<f64>) -> Curve {
    let n = sqrt(grid.dot(&vals, &vals));
    if n > 0.0 {
        vals.iter_mut().for_each(|v| *v /= n);
    }
    Curve::from_parts_unchecked(grid.clone(), vals)
}

/// Flips each target eigenfunction whose inner product with the matching
/// reference eigenfunction is negative. Zero inner products keep the sign.
pub fn align_signs(reference: &EigenSystem, target: &EigenSystem) -> Result<EigenSystem> {
    if reference.len() != target.len() {
        return Err(Error::invalid("eigensystems have different sizes"));
    }
    let mut out = target.clone();
    for j in 1..=target.len() {
        if crate::fda::inner_product(reference.function(j), target.function(j))? < 0.0 {
            out.flip(j);
        }
    }
    Ok(out)
}

/// Quadrature-orthonormal basis of the span of a sample, with each curve's
/// coordinates in that basis.
#[derive(Debug, Clone)]
pub struct SampleSpan {
    grid: Grid,
    rank: usize,
    /// `rank × P`, quadrature-orthonormal curves.
    basis: Vec<f64>,
    /// `m × rank`.
    coords: Vec<f64>,
    len: usize,
}

/// Relative residual norm below which a curve adds no new direction.
const SPAN_TOLERANCE: f64 = 1e-10;

impl SampleSpan {
    pub fn new(sample: &CurveSample) -> Self {
        let grid = sample.grid().clone();
        let p = grid.len();
        let sw: Vec<f64> = grid.weights().iter().map(|&w| sqrt(w)).collect();
        let weighted: Vec<Vec<f64>> =
            sample.rows().map(|row| row.iter().zip(&sw).map(|(x, s)| x * s).collect()).collect();
        let max_norm = weighted.iter().map(|r| sqrt(dot(r, r))).fold(0.0f64, f64::max);
        let tol = SPAN_TOLERANCE * max_norm;

        // modified Gram–Schmidt with one reorthogonalization pass
        let mut ortho: Vec<Vec<f64>> = Vec::new();
        for y in &weighted {
            let mut r = y.clone();
            for _ in 0..2 {
                for q in &ortho {
                    let c = dot(&r, q);
                    r.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
                }
            }
            let n = sqrt(dot(&r, &r));
            if n > tol && n > 0.0 {
                r.iter_mut().for_each(|a| *a /= n);
                ortho.push(r);
            }
        }
        let rank = ortho.len();
        let mut coords = Vec::with_capacity(sample.len() * rank);
        for y in &weighted {
            coords.extend(ortho.iter().map(|q| dot(y, q)));
        }
        let mut basis = Vec::with_capacity(rank * p);
        for q in &ortho {
            basis.extend(q.iter().zip(&sw).map(|(a, s)| a / s));
        }
        SampleSpan { grid, rank, basis, coords, len: sample.len() }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Eigensystems of the sequential estimators averaging the first
    /// `counts[i]` curves, `counts` non-decreasing. `None` where the span is
    /// too small to supply `count` eigenfunctions; callers fall back to the
    /// kernel route there.
    pub fn partial_eigensystems(&self, counts: &[usize], count: usize) -> Result<Vec<Option<EigenSystem>>> {
        let r = self.rank;
        let mut acc = vec![0.0; r * r];
        let mut used = 0usize;
        let mut out = Vec::with_capacity(counts.len());
        for &k in counts {
            let k = k.min(self.len);
            if k < used {
                return Err(Error::invalid("counts must be non-decreasing"));
            }
            while used < k {
                let c = &self.coords[used * r..(used + 1) * r];
                for a in 0..r {
                    let ca = c[a];
                    for (d, cb) in acc[a * r..a * r + a + 1].iter_mut().zip(&c[..=a]) {
                        *d += ca * cb;
                    }
                }
                used += 1;
            }
            if r < count {
                out.push(None);
                continue;
            }
            if k == 0 {
                out.push(Some(self.zero_system(count)));
                continue;
            }
            let inv = 1.0 / k as f64;
            let mut cov = vec![0.0; r * r];
            for a in 0..r {
                for b in 0..=a {
                    cov[a * r + b] = acc[a * r + b] * inv;
                }
            }
            let eig = SymmetricEigen::new(&cov, r)?;
            let functions = (0..count).map(|i| self.to_curve(eig.vector(i))).collect();
            out.push(Some(EigenSystem::from_parts(&eig.values, functions)));
        }
        Ok(out)
    }

    /// Eigensystem of the full-sample estimator.
    pub fn eigensystem(&self, count: usize) -> Result<Option<EigenSystem>> {
        Ok(self.partial_eigensystems(&[self.len], count)?.pop().flatten())
    }

    fn zero_system(&self, count: usize) -> EigenSystem {
        let functions = (0..count)
            .map(|i| {
                let mut e = vec![0.0; self.rank];
                e[i] = 1.0;
                self.to_curve(&e)
            })
            .collect();
        EigenSystem::from_parts(&vec![0.0; count], functions)
    }

    fn to_curve(&self, e: &[f64]) -> Curve {
        let p = self.grid.len();
        let mut vals = vec![0.0; p];
        for (a, &ea) in e.iter().enumerate() {
            if ea != 0.0 {
                let q = &self.basis[a * p..(a + 1) * p];
                vals.iter_mut().zip(q).for_each(|(v, b)| *v += ea * b);
            }
        }
        normalized(&self.grid, vals)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
