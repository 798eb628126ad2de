//! Self-normalized statistics for relevant differences between the `j`-th
//! eigenfunctions (and eigenvalues) of two covariance operators.
//!
//! For samples `X_1..X_m`, `Y_1..Y_n` and `λ ∈ (0, 1]`, let `v̂^X_j(·, λ)` be
//! the `j`-th eigenfunction of the covariance estimated from the first
//! `⌊mλ⌋` curves (likewise for `Y`). With
//!
//! ```text
//! D̂(t, λ) = λ (v̂^X_j(t, λ) − v̂^Y_j(t, λ)),    D̂ = ∫ D̂(t, 1)² dt,
//! V̂ = ( ∫ ( ∫ D̂(t, λ)² dt − λ² D̂ )² ν(dλ) )^{1/2},
//! Ŵ = (D̂ − Δ) / V̂,
//! ```
//!
//! the hypothesis `‖v^X_j − v^Y_j‖² ≤ Δ` is rejected when `Ŵ` exceeds the
//! `(1 − α)`-quantile of the pivotal law simulated in [`crate::nulldist`].
//!
//! Signs: `v̂^X_j(·, λ)` is aligned with `v̂^X_j(·, 1)`, then `v̂^Y_j(·, λ)`
//! with `v̂^X_j(·, λ)`, so the λ-path has no spurious sign flips.

use alloc::format;
use alloc::vec::Vec;

use crate::covop::{eigen_decompose, estimate_cov_partial, EigenSystem, SampleSpan, CENTERING_TOLERANCE};
use crate::fda::{Curve, CurveSample};
use crate::math::{floor_count, sqrt};
use crate::nulldist::{QuantileTable, MIN_DECISION_REPLICATES};
use crate::{Error, Result};

/// Lower end of the default uniform measure.
pub const DEFAULT_NU_LOWER: f64 = 0.1;
/// Points of the default λ grid `{0.10, 0.11, …, 1.00}`.
pub const DEFAULT_NU_POINTS: usize = 91;

/// Uniform probability measure on `[lower, 1]`, integrated by the plain
/// average over an equally spaced λ grid that ends at 1.
#[derive(Debug, Clone, PartialEq)]
pub struct NuMeasure {
    lower: f64,
    lambdas: Vec<f64>,
}

impl NuMeasure {
    pub fn uniform(lower: f64, points: usize) -> Result<Self> {
        if !(lower > 0.0 && lower < 1.0) {
            return Err(Error::invalid(format!("nu lower bound {lower} outside (0, 1)")));
        }
        if points < 2 {
            return Err(Error::invalid("nu grid needs at least two points"));
        }
        let last = (points - 1) as f64;
        let lambdas = (0..points)
            .map(|i| if i + 1 == points { 1.0 } else { (lower * (last - i as f64) + i as f64) / last })
            .collect();
        Ok(NuMeasure { lower, lambdas })
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    /// The λ quadrature nodes, increasing, last equal to 1.
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// `∫ f dν` as the average of `f` over the grid, summed in grid order.
    pub fn integrate(&self, mut f: impl FnMut(usize, f64) -> f64) -> f64 {
        let mut s = 0.0;
        for (i, &l) in self.lambdas.iter().enumerate() {
            s += f(i, l);
        }
        s / self.lambdas.len() as f64
    }
}

impl Default for NuMeasure {
    fn default() -> Self {
        NuMeasure::uniform(DEFAULT_NU_LOWER, DEFAULT_NU_POINTS).expect("default measure is valid")
    }
}

/// Which of the two samples a warning concerns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    X,
    Y,
}

/// Non-fatal conditions surfaced alongside a result.
#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    /// The sample mean is not numerically zero.
    Uncentered { side: Side },
    /// `τ̂_j − τ̂_{j+1}` is below `1e-10·τ̂_1` at some λ.
    IllSeparated { side: Side, lambda: f64 },
    /// Fewer than `j` curves enter the sequential estimate at some λ.
    RankDeficientPartial { side: Side, lambda: f64 },
    /// `V̂ = 0`; the statistic is `±∞` or undefined.
    DegenerateNormalizer,
    /// Plug-in long-run variance test: `ζ̂` is unreliable by construction.
    UnreliableLongRunVariance,
    /// Plug-in long-run variance test with `ζ̂ = 0`; no decision.
    DegenerateLongRunVariance,
}

/// Which test produced a [`TestResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestKind {
    Eigenfunction,
    Eigenvalue,
    LongRunVariancePlugin,
}

/// Configuration of a single relevance test.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceTestConfig {
    /// Eigen order `j ≥ 1`.
    pub order: usize,
    /// Relevance threshold `Δ > 0`.
    pub delta: f64,
    pub alpha: f64,
    pub nu: NuMeasure,
    /// Number of eigenpairs computed, `≥ order`.
    pub max_order: usize,
}

impl RelevanceTestConfig {
    pub fn new(order: usize, delta: f64) -> Self {
        RelevanceTestConfig { order, delta, alpha: 0.05, nu: NuMeasure::default(), max_order: order }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_nu(mut self, nu: NuMeasure) -> Self {
        self.nu = nu;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(Error::invalid("eigen order starts at 1"));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::invalid(format!("threshold {} must be positive", self.delta)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("level {} outside (0, 1)", self.alpha)));
        }
        if self.order > self.max_order {
            return Err(Error::invalid("order exceeds the number of computed eigenpairs"));
        }
        Ok(())
    }
}

/// Outcome of one test.
#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub kind: TestKind,
    pub order: usize,
    /// `D̂` (or `T̂(1)²` for eigenvalues).
    pub d_hat: f64,
    /// `V̂` (or `M̂`; `ζ̂/√(m+n)` for the plug-in test).
    pub v_hat: f64,
    /// `Ŵ` (or `Q̂`, or the normal statistic). May be `±∞` or NaN.
    pub w_hat: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub reject: bool,
    pub delta: f64,
    pub alpha: f64,
    pub m: usize,
    pub n: usize,
    pub warnings: Vec<Warning>,
}

/// `D̂`-type estimate, its normalizer and collected warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct Statistic {
    pub estimate: f64,
    pub normalizer: f64,
    pub warnings: Vec<Warning>,
}

/// Eigensystems of one sample's sequential estimators along the ν grid.
#[derive(Debug, Clone)]
pub struct SequentialEigen {
    side: Side,
    len: usize,
    counts: Vec<usize>,
    systems: Vec<EigenSystem>,
    full: EigenSystem,
    uncentered: bool,
}

impl SequentialEigen {
    pub fn new(sample: &CurveSample, nu: &NuMeasure, max_order: usize, side: Side) -> Result<Self> {
        let m = sample.len();
        let mut counts: Vec<usize> = nu.lambdas().iter().map(|&l| floor_count(m, l)).collect();
        counts.push(m);
        let span = SampleSpan::new(sample);
        let found = span.partial_eigensystems(&counts, max_order)?;
        let mut systems = Vec::with_capacity(found.len());
        for (i, sys) in found.into_iter().enumerate() {
            let sys = match sys {
                Some(s) => s,
                None => {
                    let lambda = if i < nu.lambdas().len() { nu.lambdas()[i] } else { 1.0 };
                    eigen_decompose(&estimate_cov_partial(sample, lambda)?, max_order)?
                }
            };
            systems.push(sys);
        }
        let full = systems.pop().expect("full-sample system is always computed");
        counts.pop();
        Ok(SequentialEigen {
            side,
            len: m,
            counts,
            systems,
            full,
            uncentered: sample.relative_mean_offset() > CENTERING_TOLERANCE,
        })
    }

    pub fn full(&self) -> &EigenSystem {
        &self.full
    }

    pub fn at(&self, i: usize) -> &EigenSystem {
        &self.systems[i]
    }

    pub fn count_at(&self, i: usize) -> usize {
        self.counts[i]
    }

    fn order_warnings(&self, j: usize, lambdas: &[f64], out: &mut Vec<Warning>) {
        if self.uncentered {
            out.push(Warning::Uncentered { side: self.side });
        }
        if self.full.ill_separated().contains(&j) {
            out.push(Warning::IllSeparated { side: self.side, lambda: 1.0 });
        }
        for (i, sys) in self.systems.iter().enumerate() {
            if self.counts[i] >= 1 && self.counts[i] < j {
                out.push(Warning::RankDeficientPartial { side: self.side, lambda: lambdas[i] });
            } else if self.counts[i] >= 1 && sys.ill_separated().contains(&j) {
                out.push(Warning::IllSeparated { side: self.side, lambda: lambdas[i] });
            }
        }
    }
}

#[inline]
fn sign_against(reference: &Curve, f: &Curve) -> f64 {
    if reference.grid().dot(reference.values(), f.values()) < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// `‖a·f − b·g‖²` for signs `a`, `b`.
#[inline]
fn signed_dist_sq(a: f64, f: &Curve, b: f64, g: &Curve) -> f64 {
    f.values()
        .iter()
        .zip(g.values())
        .zip(f.grid().weights())
        .map(|((x, y), w)| {
            let d = a * x - b * y;
            d * d * w
        })
        .sum()
}

/// Both samples' sequential eigensystems on a shared ν grid.
#[derive(Debug, Clone)]
pub struct TwoSampleFit {
    nu: NuMeasure,
    x: SequentialEigen,
    y: SequentialEigen,
}

impl TwoSampleFit {
    pub fn new(x: &CurveSample, y: &CurveSample, nu: &NuMeasure, max_order: usize) -> Result<Self> {
        x.grid().check_same(y.grid())?;
        if max_order == 0 || max_order > x.grid().len() {
            return Err(Error::invalid(format!("cannot compute {max_order} eigenpairs")));
        }
        Ok(TwoSampleFit {
            nu: nu.clone(),
            x: SequentialEigen::new(x, nu, max_order, Side::X)?,
            y: SequentialEigen::new(y, nu, max_order, Side::Y)?,
        })
    }

    pub fn nu(&self) -> &NuMeasure {
        &self.nu
    }

    pub fn x(&self) -> &SequentialEigen {
        &self.x
    }

    pub fn y(&self) -> &SequentialEigen {
        &self.y
    }

    pub fn sizes(&self) -> (usize, usize) {
        (self.x.len, self.y.len)
    }

    pub fn max_order(&self) -> usize {
        self.x.full.len()
    }

    fn check_order(&self, j: usize) -> Result<()> {
        if j == 0 || j > self.max_order() {
            return Err(Error::invalid(format!("order {j} outside 1..={}", self.max_order())));
        }
        Ok(())
    }

    /// `D̂ = ‖v̂^X_j − v̂^Y_j‖²` with `⟨v̂^X_j, v̂^Y_j⟩ ≥ 0`.
    pub fn dhat_distance(&self, j: usize) -> Result<f64> {
        self.check_order(j)?;
        let fx = self.x.full.function(j);
        let fy = self.y.full.function(j);
        Ok(signed_dist_sq(1.0, fx, sign_against(fx, fy), fy))
    }

    /// `∫ D̂(t, λ_i)² dt` at grid node `i`.
    fn partial_dist_sq(&self, j: usize, i: usize) -> f64 {
        if self.x.counts[i] < 1 || self.y.counts[i] < 1 {
            return 0.0;
        }
        let lambda = self.nu.lambdas[i];
        let fx = self.x.systems[i].function(j);
        let fy = self.y.systems[i].function(j);
        let sx = sign_against(self.x.full.function(j), fx);
        let sy = if fx.grid().dot(fx.values(), fy.values()) * sx < 0.0 { -1.0 } else { 1.0 };
        lambda * lambda * signed_dist_sq(sx, fx, sy, fy)
    }

    /// `D̂(·, λ_i) = λ_i (v̂^X_j(·, λ_i) − v̂^Y_j(·, λ_i))` at grid node `i`.
    pub fn dhat_process_at(&self, j: usize, i: usize) -> Result<Curve> {
        self.check_order(j)?;
        let grid = self.x.full.function(j).grid().clone();
        if self.x.counts[i] < 1 || self.y.counts[i] < 1 {
            return Ok(Curve::zeros(&grid));
        }
        let lambda = self.nu.lambdas[i];
        let fx = self.x.systems[i].function(j);
        let fy = self.y.systems[i].function(j);
        let sx = sign_against(self.x.full.function(j), fx);
        let sy = if grid.dot(fx.values(), fy.values()) * sx < 0.0 { -1.0 } else { 1.0 };
        let vals = fx.values().iter().zip(fy.values()).map(|(a, b)| lambda * (sx * a - sy * b)).collect();
        Curve::new(grid, vals)
    }

    /// `D̂` and `V̂` for eigenfunction order `j`.
    pub fn eigenfunction_statistic(&self, j: usize) -> Result<Statistic> {
        let d_hat = self.dhat_distance(j)?;
        let v2 = self.nu.integrate(|i, lambda| {
            let bracket = self.partial_dist_sq(j, i) - lambda * lambda * d_hat;
            bracket * bracket
        });
        let mut warnings = Vec::new();
        self.x.order_warnings(j, self.nu.lambdas(), &mut warnings);
        self.y.order_warnings(j, self.nu.lambdas(), &mut warnings);
        Ok(Statistic { estimate: d_hat, normalizer: sqrt(v2), warnings })
    }

    /// `T̂(λ_i) = λ_i (τ̂^X_j(λ_i) − τ̂^Y_j(λ_i))`; `T̂(1)` for `i = None`.
    pub fn eigenvalue_process(&self, j: usize, i: Option<usize>) -> Result<f64> {
        self.check_order(j)?;
        Ok(match i {
            None => self.x.full.value(j) - self.y.full.value(j),
            Some(i) if self.x.counts[i] < 1 || self.y.counts[i] < 1 => 0.0,
            Some(i) => self.nu.lambdas[i] * (self.x.systems[i].value(j) - self.y.systems[i].value(j)),
        })
    }

    /// `T̂(1)²` and `M̂` for eigenvalue order `j`.
    pub fn eigenvalue_statistic(&self, j: usize) -> Result<Statistic> {
        let t1 = self.eigenvalue_process(j, None)?;
        let d_val = t1 * t1;
        let mut terms = Vec::with_capacity(self.nu.lambdas.len());
        for i in 0..self.nu.lambdas.len() {
            terms.push(self.eigenvalue_process(j, Some(i))?);
        }
        let m2 = self.nu.integrate(|i, lambda| {
            let bracket = terms[i] * terms[i] - lambda * lambda * d_val;
            bracket * bracket
        });
        let mut warnings = Vec::new();
        self.x.order_warnings(j, self.nu.lambdas(), &mut warnings);
        self.y.order_warnings(j, self.nu.lambdas(), &mut warnings);
        Ok(Statistic { estimate: d_val, normalizer: sqrt(m2), warnings })
    }

    pub fn test_eigenfunction(&self, j: usize, delta: f64, alpha: f64, table: &QuantileTable) -> Result<TestResult> {
        let stat = self.eigenfunction_statistic(j)?;
        self.decide(TestKind::Eigenfunction, j, stat, delta, alpha, table)
    }

    pub fn test_eigenvalue(&self, j: usize, delta: f64, alpha: f64, table: &QuantileTable) -> Result<TestResult> {
        let stat = self.eigenvalue_statistic(j)?;
        self.decide(TestKind::Eigenvalue, j, stat, delta, alpha, table)
    }

    fn decide(
        &self,
        kind: TestKind,
        order: usize,
        stat: Statistic,
        delta: f64,
        alpha: f64,
        table: &QuantileTable,
    ) -> Result<TestResult> {
        check_table(table, &self.nu)?;
        let critical_value = table.quantile(1.0 - alpha)?;
        let Statistic { estimate, normalizer, mut warnings } = stat;
        let w_hat = self_normalized_ratio(estimate, delta, normalizer);
        if normalizer == 0.0 {
            warnings.push(Warning::DegenerateNormalizer);
        }
        let (p_value, reject) = if w_hat.is_nan() { (1.0, false) } else { (table.p_value(w_hat), w_hat > critical_value) };
        let (m, n) = self.sizes();
        Ok(TestResult {
            kind,
            order,
            d_hat: estimate,
            v_hat: normalizer,
            w_hat,
            critical_value,
            p_value,
            reject,
            delta,
            alpha,
            m,
            n,
            warnings,
        })
    }
}

/// `(estimate − Δ)/normalizer`, with `±∞` for a zero normalizer and NaN
/// when the estimate sits exactly on the threshold as well.
pub fn self_normalized_ratio(estimate: f64, delta: f64, normalizer: f64) -> f64 {
    let num = estimate - delta;
    if normalizer > 0.0 {
        num / normalizer
    } else if num > 0.0 {
        f64::INFINITY
    } else if num < 0.0 {
        f64::NEG_INFINITY
    } else {
        f64::NAN
    }
}

fn check_table(table: &QuantileTable, nu: &NuMeasure) -> Result<()> {
    if table.nu() != nu {
        return Err(Error::NuMismatch);
    }
    if table.replicates() < MIN_DECISION_REPLICATES {
        return Err(Error::TableTooSmall { got: table.replicates(), min: MIN_DECISION_REPLICATES });
    }
    Ok(())
}

/// `D̂(·, λ) = λ (v̂^X_j(·, λ) − v̂^Y_j(·, λ))` at an arbitrary `λ ∈ [0, 1]`.
pub fn dhat_process(x: &CurveSample, y: &CurveSample, j: usize, lambda: f64) -> Result<Curve> {
    let nu = single_point_measure(lambda)?;
    match nu {
        Some(nu) => TwoSampleFit::new(x, y, &nu, j)?.dhat_process_at(j, 0),
        None => Ok(Curve::zeros(x.grid())),
    }
}

// A two-node grid {λ, 1} reuses the fit machinery; λ ≤ 0 gives the zero curve.
fn single_point_measure(lambda: f64) -> Result<Option<NuMeasure>> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid(format!("lambda {lambda} outside [0, 1]")));
    }
    if lambda == 0.0 {
        return Ok(None);
    }
    if lambda == 1.0 {
        return Ok(Some(NuMeasure { lower: 0.5, lambdas: alloc::vec![1.0, 1.0] }));
    }
    Ok(Some(NuMeasure { lower: lambda, lambdas: alloc::vec![lambda, 1.0] }))
}

/// `D̂ = ‖v̂^X_j − v̂^Y_j‖²`.
pub fn dhat_distance(x: &CurveSample, y: &CurveSample, j: usize) -> Result<f64> {
    let nu = NuMeasure { lower: 0.5, lambdas: alloc::vec![1.0] };
    TwoSampleFit::new(x, y, &nu, j)?.dhat_distance(j)
}

/// The self-normalizer `V̂` for order `j`.
pub fn vhat(x: &CurveSample, y: &CurveSample, j: usize, nu: &NuMeasure) -> Result<f64> {
    Ok(TwoSampleFit::new(x, y, nu, j)?.eigenfunction_statistic(j)?.normalizer)
}

/// Test of `‖v^X_j − v^Y_j‖² ≤ Δ`.
pub fn test_eigenfunction(
    x: &CurveSample,
    y: &CurveSample,
    cfg: &RelevanceTestConfig,
    table: &QuantileTable,
) -> Result<TestResult> {
    cfg.validate()?;
    check_table(table, &cfg.nu)?;
    TwoSampleFit::new(x, y, &cfg.nu, cfg.max_order)?.test_eigenfunction(cfg.order, cfg.delta, cfg.alpha, table)
}

/// Test of `(τ^X_j − τ^Y_j)² ≤ Δ`.
pub fn test_eigenvalue(
    x: &CurveSample,
    y: &CurveSample,
    cfg: &RelevanceTestConfig,
    table: &QuantileTable,
) -> Result<TestResult> {
    cfg.validate()?;
    check_table(table, &cfg.nu)?;
    TwoSampleFit::new(x, y, &cfg.nu, cfg.max_order)?.test_eigenvalue(cfg.order, cfg.delta, cfg.alpha, table)
}
