//! Long-run variance of the eigenfunction distance and the plug-in normal
//! test that uses it.
//!
//! `√(m+n)(D̂ − D)` is asymptotically normal with standard deviation
//! `ζ_j = 2 √(σ²_X/θ + σ²_Y/(1−θ))`, where `σ²_X` is the long-run variance
//! of the scores
//!
//! ```text
//! X̄_i = ∫∫ (X_i(s)X_i(t) − C(s,t)) f_j(s,t) ds dt,
//! f_j(s,t) = −v_j(s) Σ_{k≠j} v_k(t) ⟨v_k, w_j⟩ / (τ_j − τ_k)
//! ```
//!
//! with `w_j` the other sample's eigenfunction. The sum over `k` is
//! truncated at `K` and `σ²` is estimated with a Bartlett kernel. This is
//! a diagnostic: `ζ_j` is hard to estimate reliably, which is the reason
//! the self-normalized test exists.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::covop::{eigen_decompose, estimate_cov, CovKernel, EigenSystem, SampleSpan, SEPARATION_TOLERANCE};
use crate::fda::{Curve, CurveSample, Grid};
use crate::math::{cbrt, floor, sqrt};
use crate::normal;
use crate::selfnorm::{RelevanceTestConfig, TestKind, TestResult, TwoSampleFit, Warning};
use crate::{Error, Result};

/// Relative eigenvalue floor that sets the default truncation.
pub const TRUNCATION_TOLERANCE: f64 = 1e-6;

/// `f_j(s, t) = −v_j(s) g(t)`, stored through its two factors.
#[derive(Debug, Clone)]
pub struct ScoreKernel {
    left: Curve,
    right: Curve,
    truncation: usize,
}

impl ScoreKernel {
    pub fn grid(&self) -> &Grid {
        self.left.grid()
    }

    /// `−v_j`.
    pub fn left(&self) -> &Curve {
        &self.left
    }

    /// `g = Σ_{k≠j, k≤K} v_k ⟨v_k, w_j⟩ / (τ_j − τ_k)`.
    pub fn right(&self) -> &Curve {
        &self.right
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn at(&self, a: usize, b: usize) -> f64 {
        self.left.values()[a] * self.right.values()[b]
    }

    /// Dense `P × P` matrix, row-major.
    pub fn matrix(&self) -> Vec<f64> {
        let l = self.left.values();
        let r = self.right.values();
        let mut out = Vec::with_capacity(l.len() * r.len());
        for a in l {
            out.extend(r.iter().map(|b| a * b));
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.right.values().iter().all(|&v| v == 0.0)
    }
}

/// Builds `f_j` from the own sample's eigensystem and the other's.
pub fn score_kernel(own: &EigenSystem, other: &EigenSystem, j: usize, truncation: usize) -> Result<ScoreKernel> {
    if j == 0 || j > truncation {
        return Err(Error::invalid(format!("order {j} outside 1..={truncation}")));
    }
    if own.len() < truncation || other.len() < j {
        return Err(Error::invalid(format!("{truncation} eigenpairs needed for truncation")));
    }
    let vj = own.function(j);
    let grid = vj.grid().clone();
    grid.check_same(other.function(j).grid())?;
    let mut wj = other.function(j).values().to_vec();
    if grid.dot(vj.values(), &wj) < 0.0 {
        wj.iter_mut().for_each(|v| *v = -*v);
    }
    let tj = own.value(j);
    let scale = own.value(1).abs();
    let mut g = vec![0.0; grid.len()];
    for k in (1..=truncation).filter(|&k| k != j) {
        let gap = tj - own.value(k);
        if gap.abs() <= SEPARATION_TOLERANCE * scale {
            return Err(Error::EigenvalueSpacing { j, k, gap });
        }
        let vk = own.function(k).values();
        let c = grid.dot(vk, &wj) / gap;
        for (acc, v) in g.iter_mut().zip(vk) {
            *acc += c * v;
        }
    }
    Ok(ScoreKernel { left: vj.negated(), right: Curve::from_parts_unchecked(grid, g), truncation })
}

/// `X̄_i = ∫∫ (X_i X_i − Ĉ) f` for every curve.
pub fn projected_scores(sample: &CurveSample, cov: &CovKernel, f: &ScoreKernel) -> Result<Vec<f64>> {
    let grid = sample.grid();
    grid.check_same(f.grid())?;
    grid.check_same(cov.grid())?;
    let l = f.left.values();
    let r = f.right.values();
    let w = grid.weights();
    // ∫∫ Ĉ(s,t) f(s,t) ds dt
    let p = grid.len();
    let m = cov.matrix();
    let mut cf = 0.0;
    for a in 0..p {
        let row = &m[a * p..(a + 1) * p];
        let inner: f64 = row.iter().zip(r).zip(w).map(|((c, g), wb)| c * g * wb).sum();
        cf += w[a] * l[a] * inner;
    }
    Ok(sample.rows().map(|x| grid.dot(x, l) * grid.dot(x, r) - cf).collect())
}

/// Bartlett-weighted long-run variance with the negative part clipped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HacVariance {
    pub value: f64,
    /// The raw weighted sum was negative and has been set to zero.
    pub clipped: bool,
}

/// `γ_0 + 2 Σ_{ℓ=1}^{b} (1 − ℓ/(b+1)) γ_ℓ` with `γ_ℓ = n⁻¹ Σ (x_i − x̄)(x_{i+ℓ} − x̄)`.
pub fn hac_variance(series: &[f64], bandwidth: usize) -> Result<HacVariance> {
    let n = series.len();
    if n <= 2 * bandwidth || n < 2 {
        return Err(Error::invalid(format!("bandwidth {bandwidth} too large for a series of length {n}")));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let gamma = |lag: usize| -> f64 {
        centered[..n - lag].iter().zip(&centered[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64
    };
    let mut s = gamma(0);
    for lag in 1..=bandwidth {
        s += 2.0 * (1.0 - lag as f64 / (bandwidth + 1) as f64) * gamma(lag);
    }
    Ok(if s < 0.0 { HacVariance { value: 0.0, clipped: true } } else { HacVariance { value: s, clipped: false } })
}

/// `⌊m^{1/3}⌋`.
pub fn default_bandwidth(m: usize) -> usize {
    floor(cbrt(m as f64) + 1e-9) as usize
}

/// Number of eigenvalues above `1e-6 · τ̂_1`.
pub fn default_truncation(sys: &EigenSystem) -> usize {
    let top = sys.value(1);
    sys.values().iter().take_while(|&&v| v > TRUNCATION_TOLERANCE * top).count().max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LrvEstimate {
    pub order: usize,
    pub sigma2_x: f64,
    pub sigma2_y: f64,
    pub theta: f64,
    pub zeta: f64,
    pub truncation: usize,
    pub bandwidth_x: usize,
    pub bandwidth_y: usize,
    pub clipped: bool,
}

/// `2 √(σ²_X/θ + σ²_Y/(1−θ))`.
pub fn zeta_from_parts(sigma2_x: f64, sigma2_y: f64, theta: f64) -> f64 {
    2.0 * sqrt(sigma2_x / theta + sigma2_y / (1.0 - theta))
}

fn eigensystem(sample: &CurveSample, count: usize) -> Result<EigenSystem> {
    match SampleSpan::new(sample).eigensystem(count)? {
        Some(sys) => Ok(sys),
        None => eigen_decompose(&estimate_cov(sample), count),
    }
}

/// Estimates `ζ_j` with truncation `K` (default from the `X` eigenvalues)
/// and Bartlett bandwidths (default `⌊m^{1/3}⌋`, `⌊n^{1/3}⌋`).
pub fn estimate_zeta(
    x: &CurveSample,
    y: &CurveSample,
    j: usize,
    truncation: Option<usize>,
    bandwidth: Option<usize>,
) -> Result<LrvEstimate> {
    x.grid().check_same(y.grid())?;
    let p = x.grid().len();
    let k = match truncation {
        Some(k) => k,
        None => {
            let probe = eigen_decompose(&estimate_cov(x), p.min(x.len()).max(j))?;
            default_truncation(&probe).max(j)
        }
    };
    if k > p {
        return Err(Error::invalid(format!("truncation {k} exceeds the grid size {p}")));
    }
    let sx = eigensystem(x, k)?;
    let sy = eigensystem(y, k)?;
    let fx = score_kernel(&sx, &sy, j, k)?;
    let fy = score_kernel(&sy, &sx, j, k)?;
    let bx = bandwidth.unwrap_or_else(|| default_bandwidth(x.len()));
    let by = bandwidth.unwrap_or_else(|| default_bandwidth(y.len()));
    let hx = hac_variance(&projected_scores(x, &estimate_cov(x), &fx)?, bx)?;
    let hy = hac_variance(&projected_scores(y, &estimate_cov(y), &fy)?, by)?;
    let theta = x.len() as f64 / (x.len() + y.len()) as f64;
    Ok(LrvEstimate {
        order: j,
        sigma2_x: hx.value,
        sigma2_y: hy.value,
        theta,
        zeta: zeta_from_parts(hx.value, hy.value, theta),
        truncation: k,
        bandwidth_x: bx,
        bandwidth_y: by,
        clipped: hx.clipped || hy.clipped,
    })
}

/// Rejects when `√(m+n)(D̂ − Δ)/ζ̂` exceeds the normal `(1−α)`-quantile.
pub fn test_lrv_plugin(
    x: &CurveSample,
    y: &CurveSample,
    cfg: &RelevanceTestConfig,
    lrv: &LrvEstimate,
) -> Result<TestResult> {
    cfg.validate()?;
    let nu = crate::selfnorm::NuMeasure::uniform(0.5, 2)?;
    let d_hat = TwoSampleFit::new(x, y, &nu, cfg.order)?.dhat_distance(cfg.order)?;
    Ok(plugin_decision(d_hat, x.len(), y.len(), cfg, lrv))
}

/// The plug-in decision for a given `D̂`.
pub fn plugin_decision(d_hat: f64, m: usize, n: usize, cfg: &RelevanceTestConfig, lrv: &LrvEstimate) -> TestResult {
    let root = sqrt((m + n) as f64);
    let mut warnings = vec![Warning::UnreliableLongRunVariance];
    let critical_value = normal::quantile(1.0 - cfg.alpha);
    let (w_hat, p_value, reject) = if lrv.zeta > 0.0 {
        let w = root * (d_hat - cfg.delta) / lrv.zeta;
        (w, normal::sf(w), w > critical_value)
    } else {
        warnings.push(Warning::DegenerateLongRunVariance);
        (f64::NAN, f64::NAN, false)
    };
    TestResult {
        kind: TestKind::LongRunVariancePlugin,
        order: cfg.order,
        d_hat,
        v_hat: lrv.zeta / root,
        w_hat,
        critical_value,
        p_value,
        reject,
        delta: cfg.delta,
        alpha: cfg.alpha,
        m,
        n,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covop::estimate_cov;
    use crate::dgp::{DgpConfig, Scenario};
    use crate::fda::center;
    use crate::rng::{substream, GaussianStream};
    use core::f64::consts::{PI, SQRT_2};
    use proptest::prelude::*;

    fn fourier_system(grid: &Grid, taus: &[f64], phase: f64) -> EigenSystem {
        let fs = [
            |t: f64, d: f64| SQRT_2 * libm::sin(2.0 * PI * t + d),
            |t: f64, d: f64| SQRT_2 * libm::cos(2.0 * PI * t + d),
            |t: f64, d: f64| SQRT_2 * libm::sin(4.0 * PI * t + d),
            |t: f64, d: f64| SQRT_2 * libm::cos(4.0 * PI * t + d),
        ];
        let functions = (0..taus.len()).map(|k| Curve::from_fn(grid, |t| fs[k](t, phase)).unwrap()).collect();
        EigenSystem::new(taus.to_vec(), functions).unwrap()
    }

    #[test]
    fn identical_systems_give_zero_kernel() {
        let grid = Grid::uniform(101).unwrap();
        let s = fourier_system(&grid, &[8.0, 4.0, 0.5, 0.3], 0.0);
        let f = score_kernel(&s, &s, 1, 4).unwrap();
        assert!(f.right().values().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn two_term_fourier_kernel() {
        // own: sin, cos at phase δ; other: sin at phase 0.
        // ⟨cos(·+δ), sin⟩ = −sin δ, so g = cos(·+δ)·(−sin δ)/(τ1 − τ2)
        let grid = Grid::uniform(101).unwrap();
        let d = 0.4;
        let own = fourier_system(&grid, &[8.0, 4.0], d);
        let other = fourier_system(&grid, &[6.0, 1.0], 0.0);
        let f = score_kernel(&own, &other, 1, 2).unwrap();
        let c = -libm::sin(d) / 4.0;
        for (a, &s) in grid.points().iter().enumerate() {
            for (b, &t) in grid.points().iter().enumerate().step_by(7) {
                let expected = -SQRT_2 * libm::sin(2.0 * PI * s + d) * c * SQRT_2 * libm::cos(2.0 * PI * t + d);
                assert!((f.at(a, b) - expected).abs() < 1e-8);
            }
        }
        // rank one: every 2x2 minor vanishes
        let m = f.matrix();
        let p = grid.len();
        for (a, b) in [(3, 40), (10, 77), (55, 90)] {
            let minor = m[a * p + a] * m[b * p + b] - m[a * p + b] * m[b * p + a];
            assert!(minor.abs() < 1e-12);
        }
    }

    #[test]
    fn spacing_error() {
        let grid = Grid::uniform(64).unwrap();
        let s = fourier_system(&grid, &[2.0, 2.0], 0.0);
        assert!(matches!(score_kernel(&s, &s, 1, 2), Err(Error::EigenvalueSpacing { .. })));
    }

    fn scenario(phase: f64, m: usize, seed: u64) -> (CurveSample, CurveSample) {
        let grid = Grid::uniform(64).unwrap();
        let (cx, cy) = Scenario::One.configs(phase, m, m, &grid, seed);
        (center(&cx.simulate().unwrap()), center(&cy.simulate().unwrap()))
    }

    #[test]
    fn scores_have_zero_mean_and_match_dense_quadrature() {
        let (x, y) = scenario(0.7, 300, 1);
        let sx = eigen_decompose(&estimate_cov(&x), 4).unwrap();
        let sy = eigen_decompose(&estimate_cov(&y), 4).unwrap();
        let f = score_kernel(&sx, &sy, 1, 4).unwrap();
        let cov = estimate_cov(&x);
        let scores = projected_scores(&x, &cov, &f).unwrap();
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        assert!(mean.abs() < 1e-10, "{mean}");
        // direct double quadrature for a few curves
        let grid = x.grid();
        let w = grid.weights();
        let p = grid.len();
        let fm = f.matrix();
        for i in [0, 57, 299] {
            let xi = x.row(i);
            let mut s = 0.0;
            for a in 0..p {
                for b in 0..p {
                    s += w[a] * w[b] * (xi[a] * xi[b] - cov.at(a, b)) * fm[a * p + b];
                }
            }
            assert!((s - scores[i]).abs() < 1e-9 * (1.0 + s.abs()));
        }
        let zero = ScoreKernel { left: f.left.clone(), right: Curve::zeros(grid), truncation: 4 };
        assert!(projected_scores(&x, &cov, &zero).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn score_variance_matches_moment_oracle() {
        // iid coefficients: X̄_i = −(a_i b_i − E[a b]) with a = ⟨X, v_j⟩, b = ⟨X, g⟩,
        // and a, b jointly Gaussian, so Var = Var(a)Var(b) + Cov(a,b)².
        let grid = Grid::uniform(64).unwrap();
        let cfg = DgpConfig { m: 5000, rho: 0.0, grid: grid.clone(), seed: 8, ..DgpConfig::default() };
        let x = center(&cfg.simulate().unwrap());
        let own = fourier_system(&grid, &[8.0, 4.0, 0.5, 0.3], 0.0);
        let other = fourier_system(&grid, &[8.0, 4.0, 0.5, 0.3], 0.5);
        let f = score_kernel(&own, &other, 1, 4).unwrap();
        let s = projected_scores(&x, &estimate_cov(&x), &f).unwrap();
        let var = s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64;
        // g lies in span(v_1..v_4); with coefficient variances τ, Var(⟨X, u⟩) = Σ τ_k ⟨u, v_k⟩²
        let taus = [8.0, 4.0, 0.5, 0.3];
        let coords = |u: &Curve| -> [f64; 4] {
            core::array::from_fn(|k| grid.dot(u.values(), own.function(k + 1).values()))
        };
        let a = coords(f.left());
        let b = coords(f.right());
        let va: f64 = (0..4).map(|k| taus[k] * a[k] * a[k]).sum();
        let vb: f64 = (0..4).map(|k| taus[k] * b[k] * b[k]).sum();
        let cab: f64 = (0..4).map(|k| taus[k] * a[k] * b[k]).sum();
        let oracle = va * vb + cab * cab;
        assert!((var / oracle - 1.0).abs() < 0.05, "{var} vs {oracle}");
    }

    #[test]
    fn hac_examples() {
        let mut g = GaussianStream::new(substream(3, 0));
        let iid: Vec<f64> = (0..5000).map(|_| g.next()).collect();
        let h = hac_variance(&iid, 10).unwrap();
        assert!((h.value - 1.0).abs() < 0.1, "{}", h.value);
        assert_eq!(hac_variance(&[2.5; 100], 4).unwrap().value, 0.0);
        assert!(hac_variance(&[1.0, 2.0, 3.0], 3).is_err());
        // AR(1), ρ = 0.5, unit marginal variance: long-run variance (1+ρ)/(1−ρ) = 3
        let rho: f64 = 0.5;
        let mut x = g.next();
        let ar: Vec<f64> = (0..10_000)
            .map(|_| {
                x = rho * x + libm::sqrt(1.0 - rho * rho) * g.next();
                x
            })
            .collect();
        let h = hac_variance(&ar, 30).unwrap();
        assert!((h.value / 3.0 - 1.0).abs() < 0.2, "{}", h.value);
    }

    #[test]
    fn zeta_arithmetic() {
        assert!((zeta_from_parts(2.0, 2.0, 0.5) - 4.0 * libm::sqrt(2.0)).abs() < 1e-12);
        assert_eq!(default_bandwidth(2000), 12);
        assert_eq!(default_bandwidth(1000), 10);
        assert_eq!(default_bandwidth(27), 3);
    }

    #[test]
    fn truncation_stability() {
        let (x, y) = scenario(PI / 2.0, 400, 2);
        let k4 = estimate_zeta(&x, &y, 1, Some(4), None).unwrap();
        let k8 = estimate_zeta(&x, &y, 1, Some(8), None).unwrap();
        assert!((k4.zeta / k8.zeta - 1.0).abs() < 0.1, "{} vs {}", k4.zeta, k8.zeta);
        let auto = estimate_zeta(&x, &y, 1, None, None).unwrap();
        assert_eq!(auto.truncation, 4);
    }

    #[test]
    fn plugin_scaling_and_threshold() {
        let (x, y) = scenario(0.5, 100, 3);
        let lrv = estimate_zeta(&x, &y, 1, Some(4), None).unwrap();
        let d = crate::selfnorm::dhat_distance(&x, &y, 1).unwrap();
        let cfg = RelevanceTestConfig::new(1, d);
        let at = test_lrv_plugin(&x, &y, &cfg, &lrv).unwrap();
        assert_eq!(at.w_hat, 0.0);
        assert!((at.p_value - 0.5).abs() < 1e-15);
        let cfg = RelevanceTestConfig::new(1, 0.1);
        let a = plugin_decision(d, 100, 100, &cfg, &lrv);
        let doubled = LrvEstimate { zeta: 2.0 * lrv.zeta, ..lrv.clone() };
        let b = plugin_decision(d, 100, 100, &cfg, &doubled);
        assert_eq!(a.w_hat / 2.0, b.w_hat);
        assert!(a.warnings.contains(&Warning::UnreliableLongRunVariance));
        let zero = LrvEstimate { zeta: 0.0, ..lrv };
        let z = plugin_decision(d, 100, 100, &cfg, &zero);
        assert!(!z.reject && z.w_hat.is_nan());
        assert!(z.warnings.contains(&Warning::DegenerateLongRunVariance));
    }

    proptest! {
        #[test]
        fn zeta_increasing(s1 in 0.0f64..10.0, s2 in 0.0f64..10.0, bump in 1e-3f64..5.0, theta in 0.05f64..0.95) {
            let base = zeta_from_parts(s1, s2, theta);
            prop_assert!(zeta_from_parts(s1 + bump, s2, theta) > base);
            prop_assert!(zeta_from_parts(s1, s2 + bump, theta) > base);
        }

        #[test]
        fn bartlett_never_negative(xs in proptest::collection::vec(-10.0f64..10.0, 8..80), b in 0usize..4) {
            let h = hac_variance(&xs, b).unwrap();
            prop_assert!(h.value >= 0.0);
        }
    }
}
