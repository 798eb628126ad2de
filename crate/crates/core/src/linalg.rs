//! Dense symmetric eigensolver and least squares.
//!
//! The eigensolver is Householder reduction to tridiagonal form followed by
//! the implicit QL algorithm with Wilkinson-style shifts (EISPACK
//! `tred2`/`tql2`). Matrices are row-major `n × n` slices.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{hypot, sqrt};
use crate::{Error, Result};

const MAX_QL_ITERATIONS: usize = 60;

/// Eigenvalues in descending order with unit eigenvectors stored row-wise.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// `n × n`; row `i` is the eigenvector for `values[i]`.
    pub vectors: Vec<f64>,
    pub n: usize,
}

impl SymmetricEigen {
    /// Decomposes the symmetric matrix `a`. Only the lower triangle is read.
    pub fn new(a: &[f64], n: usize) -> Result<Self> {
        if a.len() != n * n {
            return Err(Error::invalid("matrix is not square"));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("matrix has non-finite entries"));
        }
        if n == 0 {
            return Ok(SymmetricEigen { values: Vec::new(), vectors: Vec::new(), n });
        }
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                v[i * n + j] = a[i * n + j];
                v[j * n + i] = a[i * n + j];
            }
        }
        let mut d = vec![0.0; n];
        let mut e = vec![0.0; n];
        tred2(&mut v, &mut d, &mut e, n);
        // tql2 rotates columns of V; work on the transpose so rotations touch rows.
        let mut vt = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                vt[j * n + i] = v[i * n + j];
            }
        }
        tql2(&mut vt, &mut d, &mut e, n)?;

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| d[b].total_cmp(&d[a]).then(a.cmp(&b)));
        let values = order.iter().map(|&i| d[i]).collect();
        let mut vectors = Vec::with_capacity(n * n);
        for &i in &order {
            vectors.extend_from_slice(&vt[i * n..(i + 1) * n]);
        }
        Ok(SymmetricEigen { values, vectors, n })
    }

    #[inline]
    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.n..(i + 1) * self.n]
    }
}

fn tred2(v: &mut [f64], d: &mut [f64], e: &mut [f64], n: usize) {
    let at = |i: usize, j: usize| i * n + j;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = sqrt(h);
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                for k in j + 1..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n - 1 {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL on the tridiagonal `(d, e)`; `vt` holds eigenvectors row-wise.
fn tql2(vt: &mut [f64], d: &mut [f64], e: &mut [f64], n: usize) -> Result<()> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERATIONS {
                    return Err(Error::NoConvergence);
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (lo, hi) = vt.split_at_mut((i + 1) * n);
                    let row_i = &mut lo[i * n..];
                    let row_next = &mut hi[..n];
                    for (a, b) in row_i.iter_mut().zip(row_next.iter_mut()) {
                        let t = *b;
                        *b = s * *a + c * t;
                        *a = c * *a - s * t;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Householder QR factorization of a tall `rows × cols` matrix, reusable
/// for many right-hand sides.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    rows: usize,
    cols: usize,
    // Householder vectors below the diagonal, R on and above; column-major.
    qr: Vec<f64>,
    rdiag: Vec<f64>,
}

impl LeastSquares {
    /// Factors the row-major design matrix `a`.
    ///
    /// Fails with [`Error::RankDeficient`] naming the first column that is
    /// (numerically) a combination of the preceding ones.
    pub fn new(a: &[f64], rows: usize, cols: usize) -> Result<Self> {
        if a.len() != rows * cols {
            return Err(Error::invalid("design matrix has the wrong size"));
        }
        if rows < cols {
            return Err(Error::invalid("fewer observations than unknowns"));
        }
        let mut qr = vec![0.0; rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                qr[j * rows + i] = a[i * cols + j];
            }
        }
        let col_norms: Vec<f64> =
            (0..cols).map(|j| sqrt(qr[j * rows..(j + 1) * rows].iter().map(|v| v * v).sum())).collect();
        let max_norm = col_norms.iter().fold(0.0f64, |a, &b| a.max(b));
        for (j, &nrm) in col_norms.iter().enumerate() {
            if nrm == 0.0 {
                return Err(Error::RankDeficient { index: j, reason: "no observations in its support" });
            }
        }
        let tol = 1e-10 * max_norm;
        let mut rdiag = vec![0.0; cols];
        for k in 0..cols {
            let (done, rest) = qr.split_at_mut((k + 1) * rows);
            let colk = &mut done[k * rows..];
            let nrm = sqrt(colk[k..].iter().map(|v| v * v).sum());
            if nrm <= tol {
                return Err(Error::RankDeficient { index: k, reason: "collinear with other basis functions" });
            }
            let nrm = if colk[k] < 0.0 { -nrm } else { nrm };
            for v in colk[k..].iter_mut() {
                *v /= nrm;
            }
            colk[k] += 1.0;
            for colj in rest.chunks_exact_mut(rows) {
                let s: f64 = colk[k..].iter().zip(&colj[k..]).map(|(a, b)| a * b).sum();
                let s = -s / colk[k];
                for (b, a) in colj[k..].iter_mut().zip(&colk[k..]) {
                    *b += s * a;
                }
            }
            rdiag[k] = -nrm;
        }
        Ok(LeastSquares { rows, cols, qr, rdiag })
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Minimizes `‖A x − b‖₂`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.rows {
            return Err(Error::invalid("right-hand side has the wrong length"));
        }
        let (m, n) = (self.rows, self.cols);
        let mut y = b.to_vec();
        for k in 0..n {
            let colk = &self.qr[k * m..(k + 1) * m];
            let s: f64 = colk[k..].iter().zip(&y[k..]).map(|(a, b)| a * b).sum();
            let s = -s / colk[k];
            for (yi, a) in y[k..].iter_mut().zip(&colk[k..]) {
                *yi += s * a;
            }
        }
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let mut v = y[k];
            for j in k + 1..n {
                v -= self.qr[j * m + k] * x[j];
            }
            x[k] = v / self.rdiag[k];
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn residual(a: &[f64], n: usize, eig: &SymmetricEigen) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..n {
            let v = eig.vector(i);
            for r in 0..n {
                let av: f64 = (0..n).map(|c| a[r * n + c] * v[c]).sum();
                worst = worst.max((av - eig.values[i] * v[r]).abs());
            }
        }
        worst
    }

    #[test]
    fn diagonal_matrix() {
        let a = [3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0];
        let e = SymmetricEigen::new(&a, 3).unwrap();
        assert_eq!(e.values, vec![3.0, 2.0, 1.0]);
        assert!(residual(&a, 3, &e) < 1e-14);
    }

    #[test]
    fn known_2x2() {
        let a = [2.0, 1.0, 1.0, 2.0];
        let e = SymmetricEigen::new(&a, 2).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
        let v = e.vector(0);
        assert!((v[0].abs() - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-14);
    }

    #[test]
    fn one_by_one_and_zero() {
        let e = SymmetricEigen::new(&[-4.0], 1).unwrap();
        assert_eq!(e.values, vec![-4.0]);
        let z = SymmetricEigen::new(&[0.0; 16], 4).unwrap();
        assert!(z.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_non_finite() {
        assert!(SymmetricEigen::new(&[f64::NAN, 0.0, 0.0, 1.0], 2).is_err());
    }

    proptest! {
        #[test]
        fn random_symmetric(entries in proptest::collection::vec(-1.0f64..1.0, 64)) {
            let n = 8;
            let mut a = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..=i {
                    a[i * n + j] = entries[i * n + j];
                    a[j * n + i] = entries[i * n + j];
                }
            }
            let e = SymmetricEigen::new(&a, n).unwrap();
            prop_assert!(residual(&a, n, &e) < 1e-12);
            for w in e.values.windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
            for i in 0..n {
                for j in 0..n {
                    let d: f64 = e.vector(i).iter().zip(e.vector(j)).map(|(x, y)| x * y).sum();
                    let target = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((d - target).abs() < 1e-12);
                }
            }
            let trace: f64 = (0..n).map(|i| a[i * n + i]).sum();
            let sum: f64 = e.values.iter().sum();
            prop_assert!((trace - sum).abs() < 1e-12);
        }
    }

    #[test]
    fn least_squares_exact_fit() {
        // y = 1 + 2x on 5 points
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let a: Vec<f64> = xs.iter().flat_map(|&x| [1.0, x]).collect();
        let b: Vec<f64> = xs.iter().map(|x| 1.0 + 2.0 * x).collect();
        let ls = LeastSquares::new(&a, 5, 2).unwrap();
        let x = ls.solve(&b).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn least_squares_normal_equations() {
        let a = [1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 5.0];
        let b = [0.3, 1.1, 1.7, 5.2];
        let x = LeastSquares::new(&a, 4, 2).unwrap().solve(&b).unwrap();
        // residual orthogonal to columns
        for j in 0..2 {
            let g: f64 = (0..4).map(|i| a[i * 2 + j] * (b[i] - a[i * 2] * x[0] - a[i * 2 + 1] * x[1])).sum();
            assert!(g.abs() < 1e-12);
        }
    }

    #[test]
    fn least_squares_flags_dependent_column() {
        let a = [1.0, 2.0, 0.0, 1.0, 2.0, 1.0, 1.0, 2.0, 3.0];
        match LeastSquares::new(&a, 3, 3) {
            Err(Error::RankDeficient { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
        let z = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        assert!(matches!(LeastSquares::new(&z, 3, 2), Err(Error::RankDeficient { index: 1, .. })));
    }
}
