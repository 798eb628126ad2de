//! Simulation model and power-study harness.
//!
//! Curves are
//!
//! ```text
//! X_i(t) = Σ_{j=1,2} ξ_{i,2j−1} √2 sin(2πjt + δ_j) + ξ_{i,2j} √2 cos(2πjt + δ_j)
//! ```
//!
//! with coefficient variances `τ = (τ_1, …, τ_4)` assigned in the order
//! `sin 2π, cos 2π, sin 4π, cos 4π`, so that `v_k` is the `k`-th function
//! in that list. The coefficients follow the VAR(1) recursion
//! `ξ_i = ρ ξ_{i−1} + √(1−ρ²) e_i`, `e_i ~ N(0, diag τ)`, whose stationary
//! covariance is exactly `diag τ`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

use crate::fda::{center, Curve, CurveSample, Grid, DEFAULT_GRID_POINTS};
use crate::math::{acos, cos, sin, sqrt};
use crate::nulldist::QuantileTable;
use crate::rng::{derive_seed, GaussianStream};
use crate::selfnorm::{NuMeasure, TwoSampleFit};
use crate::smooth::{FittedSmoother, Smoother};
use crate::{Error, Result};

pub const DEFAULT_TAU: [f64; 4] = [8.0, 4.0, 0.5, 0.3];
pub const DEFAULT_RHO: f64 = 0.5;
pub const MIN_BURN_IN: usize = 30;
/// Points at which curves are evaluated before optional re-smoothing.
pub const RESMOOTH_POINTS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct DgpConfig {
    pub tau: [f64; 4],
    pub rho: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub m: usize,
    pub burn_in: usize,
    pub grid: Grid,
    pub seed: u64,
    /// Evaluate at 1000 points and fit cubic B-splines (20 interior knots).
    pub resmooth: bool,
}

impl Default for DgpConfig {
    fn default() -> Self {
        DgpConfig {
            tau: DEFAULT_TAU,
            rho: DEFAULT_RHO,
            delta1: 0.0,
            delta2: 0.0,
            m: 100,
            burn_in: MIN_BURN_IN,
            grid: Grid::uniform(DEFAULT_GRID_POINTS).expect("default grid is valid"),
            seed: 0,
            resmooth: false,
        }
    }
}

impl DgpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho.abs() < 1.0) {
            return Err(Error::invalid(format!("autoregressive coefficient {} not in (-1, 1)", self.rho)));
        }
        if self.tau.iter().any(|&t| !(t > 0.0 && t.is_finite())) || self.tau.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::invalid("tau must be positive and strictly decreasing"));
        }
        if self.burn_in < MIN_BURN_IN {
            return Err(Error::invalid(format!("burn-in {} below {MIN_BURN_IN}", self.burn_in)));
        }
        if self.m < 2 {
            return Err(Error::SampleTooShort { label: "simulated".into(), got: self.m, min: 2 });
        }
        Ok(())
    }

    /// The `m` retained coefficient vectors.
    pub fn coefficients(&self) -> Result<Vec<[f64; 4]>> {
        self.validate()?;
        let mut g = GaussianStream::new(ChaCha8Rng::seed_from_u64(self.seed));
        let sd: [f64; 4] = core::array::from_fn(|k| sqrt(self.tau[k]));
        let innov = sqrt(1.0 - self.rho * self.rho);
        // start from the stationary law so the burn-in only has to mix, not converge
        let mut xi: [f64; 4] = core::array::from_fn(|k| sd[k] * g.next());
        let mut out = Vec::with_capacity(self.m);
        for i in 0..self.burn_in + self.m {
            for k in 0..4 {
                xi[k] = self.rho * xi[k] + innov * sd[k] * g.next();
            }
            if i >= self.burn_in {
                out.push(xi);
            }
        }
        Ok(out)
    }

    pub fn simulate(&self) -> Result<CurveSample> {
        simulate_sample(self)
    }
}

fn basis_values(t: f64, delta1: f64, delta2: f64) -> [f64; 4] {
    let a = 2.0 * PI * t + delta1;
    let b = 4.0 * PI * t + delta2;
    [SQRT_2 * sin(a), SQRT_2 * cos(a), SQRT_2 * sin(b), SQRT_2 * cos(b)]
}

fn basis_on(points: &[f64], delta1: f64, delta2: f64) -> Vec<[f64; 4]> {
    points.iter().map(|&t| basis_values(t, delta1, delta2)).collect()
}

/// Simulates `cfg.m` curves on `cfg.grid`.
pub fn simulate_sample(cfg: &DgpConfig) -> Result<CurveSample> {
    let coef = cfg.coefficients()?;
    let combine = |basis: &[[f64; 4]], c: &[f64; 4]| -> Vec<f64> {
        basis.iter().map(|b| b[0] * c[0] + b[1] * c[1] + b[2] * c[2] + b[3] * c[3]).collect()
    };
    let rows: Vec<Vec<f64>> = if cfg.resmooth {
        let fine: Vec<f64> = (0..RESMOOTH_POINTS).map(|i| i as f64 / (RESMOOTH_POINTS - 1) as f64).collect();
        let basis = basis_on(&fine, cfg.delta1, cfg.delta2);
        let fit = FittedSmoother::new(&fine, Smoother::default())?;
        coef.iter()
            .map(|c| fit.apply(&combine(&basis, c), &cfg.grid).map(Curve::into_values))
            .collect::<Result<_>>()?
    } else {
        let basis = basis_on(cfg.grid.points(), cfg.delta1, cfg.delta2);
        coef.iter().map(|c| combine(&basis, c)).collect()
    };
    CurveSample::new(cfg.grid.clone(), rows, "simulated")
}

/// `v_j` of the model with phases `delta1`, `delta2`, `j ∈ 1..=4`.
pub fn population_eigenfunction(j: usize, delta1: f64, delta2: f64, grid: &Grid) -> Result<Curve> {
    if !(1..=4).contains(&j) {
        return Err(Error::invalid(format!("the model has four eigenfunctions, not {j}")));
    }
    Curve::from_fn(grid, |t| basis_values(t, delta1, delta2)[j - 1])
}

/// `‖√2 sin(2πjt + δ) − √2 sin(2πjt)‖² = 2(1 − cos δ)`.
pub fn phase_to_distance(delta: f64) -> f64 {
    2.0 * (1.0 - cos(delta))
}

/// Squared distance after sign alignment, `2 − 2|cos δ|`.
pub fn aligned_distance(delta: f64) -> f64 {
    2.0 - 2.0 * cos(delta).abs()
}

/// Phase in `[0, π/2]` with `phase_to_distance(δ) = d`, `d ∈ [0, 2]`.
pub fn distance_to_phase(d: f64) -> Result<f64> {
    if !(0.0..=2.0).contains(&d) {
        return Err(Error::invalid(format!("distance {d} outside [0, 2]")));
    }
    Ok(acos(1.0 - d / 2.0))
}

/// The two simulation scenarios: `δ_1` varies in the first, `δ_2` in the
/// second; the other phase and the whole `Y` model stay at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    One,
    Two,
}

impl Scenario {
    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            1 => Ok(Scenario::One),
            2 => Ok(Scenario::Two),
            _ => Err(Error::invalid(format!("unknown scenario {id}"))),
        }
    }

    pub fn id(self) -> u8 {
        match self {
            Scenario::One => 1,
            Scenario::Two => 2,
        }
    }

    /// Order whose eigenfunction the varied phase moves first.
    pub fn default_order(self) -> usize {
        match self {
            Scenario::One => 1,
            Scenario::Two => 3,
        }
    }

    /// Phases `(δ_1, δ_2)` of the `X` model.
    pub fn phases(self, phase: f64) -> (f64, f64) {
        match self {
            Scenario::One => (phase, 0.0),
            Scenario::Two => (0.0, phase),
        }
    }

    /// Population `‖v^X_j − v^Y_j‖²` (sign-aligned) at this phase.
    pub fn population_distance(self, phase: f64, order: usize) -> f64 {
        let (d1, d2) = self.phases(phase);
        match order {
            1 | 2 => aligned_distance(d1),
            3 | 4 => aligned_distance(d2),
            _ => 0.0,
        }
    }

    /// Configurations for the two samples; seeds are derived from `seed`.
    pub fn configs(self, phase: f64, m: usize, n: usize, grid: &Grid, seed: u64) -> (DgpConfig, DgpConfig) {
        let (delta1, delta2) = self.phases(phase);
        let base = DgpConfig { grid: grid.clone(), ..DgpConfig::default() };
        let x = DgpConfig { delta1, delta2, m, seed: derive_seed(seed, &[0]), ..base.clone() };
        let y = DgpConfig { m: n, seed: derive_seed(seed, &[1]), ..base };
        (x, y)
    }
}

/// A power study over a grid of phases.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerStudy {
    pub scenario: Scenario,
    pub phases: Vec<f64>,
    pub m: usize,
    pub n: usize,
    pub replicates: usize,
    /// Orders tested on every replicate.
    pub orders: Vec<usize>,
    /// Relevance threshold `Δ`, shared by all orders.
    pub threshold: f64,
    pub alpha: f64,
    pub grid: Grid,
    pub nu: NuMeasure,
    pub seed: u64,
}

pub const MIN_POWER_REPLICATES: usize = 100;

impl PowerStudy {
    pub fn new(scenario: Scenario, phases: Vec<f64>, m: usize, n: usize, replicates: usize, seed: u64) -> Self {
        PowerStudy {
            scenario,
            phases,
            m,
            n,
            replicates,
            orders: vec![scenario.default_order()],
            threshold: 0.1,
            alpha: 0.05,
            grid: Grid::uniform(DEFAULT_GRID_POINTS).expect("default grid is valid"),
            nu: NuMeasure::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates < MIN_POWER_REPLICATES {
            return Err(Error::invalid(format!(
                "{} replicates requested, at least {MIN_POWER_REPLICATES} needed",
                self.replicates
            )));
        }
        if self.phases.is_empty() || self.orders.is_empty() {
            return Err(Error::invalid("empty phase grid or order list"));
        }
        if self.orders.iter().any(|&j| !(1..=4).contains(&j)) {
            return Err(Error::invalid("orders must lie in 1..=4"));
        }
        if !(self.threshold > 0.0) || !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid("threshold must be positive and level in (0, 1)"));
        }
        Ok(())
    }

    fn max_order(&self) -> usize {
        self.orders.iter().copied().max().unwrap_or(1)
    }

    /// Samples of replicate `rep` at phase index `k`, centered.
    ///
    /// The seed depends on the replicate only, so every phase sees the same
    /// innovations (common random numbers across the grid).
    pub fn replicate_samples(&self, k: usize, rep: u64) -> Result<(CurveSample, CurveSample)> {
        let seed = derive_seed(self.seed, &[rep]);
        let (cx, cy) = self.scenario.configs(self.phases[k], self.m, self.n, &self.grid, seed);
        Ok((center(&cx.simulate()?), center(&cy.simulate()?)))
    }

    /// Outcome of replicate `rep` at phase index `k`.
    pub fn run_replicate(&self, k: usize, rep: u64, table: &QuantileTable) -> Result<ReplicateOutcome> {
        let (x, y) = self.replicate_samples(k, rep)?;
        let fit = TwoSampleFit::new(&x, &y, &self.nu, self.max_order())?;
        let mut p_values = Vec::with_capacity(self.orders.len());
        let mut reject = Vec::with_capacity(self.orders.len());
        for &j in &self.orders {
            let r = fit.test_eigenfunction(j, self.threshold, self.alpha, table)?;
            p_values.push(r.p_value);
            reject.push(r.reject);
        }
        Ok(ReplicateOutcome { p_values, reject })
    }

    /// Aggregates outcomes laid out as `outcomes[k][rep]`.
    pub fn summarize(&self, outcomes: &[Vec<ReplicateOutcome>]) -> Vec<PowerPoint> {
        let mut points = Vec::new();
        for (k, reps) in outcomes.iter().enumerate() {
            for (o, &order) in self.orders.iter().enumerate() {
                let hits = reps.iter().filter(|r| r.reject[o]).count();
                points.push(PowerPoint {
                    scenario: self.scenario.id(),
                    phase: self.phases[k],
                    distance: self.scenario.population_distance(self.phases[k], order),
                    order,
                    m: self.m,
                    n: self.n,
                    replicates: reps.len(),
                    rejection_rate: hits as f64 / reps.len() as f64,
                });
            }
        }
        points
    }
}

/// Per-order p-values and decisions of one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutcome {
    pub p_values: Vec<f64>,
    pub reject: Vec<bool>,
}

/// Rejection rate at one design point.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerPoint {
    pub scenario: u8,
    pub phase: f64,
    /// Population squared distance of the tested eigenfunctions.
    pub distance: f64,
    pub order: usize,
    pub m: usize,
    pub n: usize,
    pub replicates: usize,
    pub rejection_rate: f64,
}

/// Sequential power study.
pub fn run_power_study(study: &PowerStudy, table: &QuantileTable) -> Result<Vec<PowerPoint>> {
    study.validate()?;
    let mut outcomes = Vec::with_capacity(study.phases.len());
    for k in 0..study.phases.len() {
        let reps = (0..study.replicates as u64)
            .map(|rep| study.run_replicate(k, rep, table))
            .collect::<Result<Vec<_>>>()?;
        outcomes.push(reps);
    }
    Ok(study.summarize(&outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covop::{eigen_decompose, estimate_cov};
    use crate::fda::{inner_product, norm_sq};

    fn iid_cfg(m: usize, rho: f64) -> DgpConfig {
        DgpConfig { m, rho, grid: Grid::uniform(64).unwrap(), seed: 17, ..DgpConfig::default() }
    }

    #[test]
    fn iid_coefficient_variances() {
        let coef = iid_cfg(5000, 0.0).coefficients().unwrap();
        for k in 0..4 {
            let var = coef.iter().map(|c| c[k] * c[k]).sum::<f64>() / coef.len() as f64;
            assert!((var / DEFAULT_TAU[k] - 1.0).abs() < 0.1, "component {k}: {var}");
        }
    }

    #[test]
    fn lag_one_autocorrelation() {
        let coef = iid_cfg(5000, 0.5).coefficients().unwrap();
        for k in 0..4 {
            let xs: Vec<f64> = coef.iter().map(|c| c[k]).collect();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let c0: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
            let c1: f64 = xs.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
            assert!((c1 / c0 - 0.5).abs() < 0.05, "component {k}: {}", c1 / c0);
            let var = c0 / xs.len() as f64;
            assert!((var / DEFAULT_TAU[k] - 1.0).abs() < 0.1);
        }
    }

    #[test]
    fn population_eigenfunctions() {
        let grid = Grid::uniform(201).unwrap();
        let v1 = population_eigenfunction(1, 0.0, 0.0, &grid).unwrap();
        for (v, &t) in v1.values().iter().zip(grid.points()) {
            assert!((v - SQRT_2 * libm::sin(2.0 * PI * t)).abs() < 1e-15);
        }
        for j in 1..=4 {
            for d in [0.0, 0.3, 1.7] {
                let v = population_eigenfunction(j, d, -d, &grid).unwrap();
                assert!((norm_sq(&v) - 1.0).abs() < 1e-5);
            }
        }
        let v2 = population_eigenfunction(2, 0.0, 0.0, &grid).unwrap();
        assert!(inner_product(&v1, &v2).unwrap().abs() < 1e-6);
        assert!(population_eigenfunction(5, 0.0, 0.0, &grid).is_err());
        assert!(population_eigenfunction(0, 0.0, 0.0, &grid).is_err());
    }

    #[test]
    fn phase_distance_examples() {
        assert_eq!(phase_to_distance(0.0), 0.0);
        assert!((phase_to_distance(0.3155) - 0.0987).abs() < 1e-4);
        assert!((phase_to_distance(PI / 2.0) - 2.0).abs() < 1e-15);
        assert!((distance_to_phase(0.1).unwrap() - libm::acos(0.95)).abs() < 1e-15);
        assert!(distance_to_phase(2.5).is_err());
        assert!((aligned_distance(2.0) - (2.0 - 2.0 * libm::cos(2.0).abs())).abs() < 1e-15);
    }

    #[test]
    fn distance_oracle_on_grid() {
        let grid = Grid::uniform(201).unwrap();
        for j in 1..=4 {
            for d in [0.05, 0.3155, 1.0, 2.0] {
                let a = population_eigenfunction(j, d, d, &grid).unwrap();
                let b = population_eigenfunction(j, 0.0, 0.0, &grid).unwrap();
                let got = norm_sq(&a.sub(&b).unwrap());
                assert!((got - phase_to_distance(d)).abs() < 1e-6, "j={j} d={d}: {got}");
            }
        }
    }

    #[test]
    fn zero_phase_sample_eigenfunctions() {
        let grid = Grid::uniform(101).unwrap();
        let cfg = DgpConfig { m: 4000, grid: grid.clone(), seed: 3, ..DgpConfig::default() };
        let sys = eigen_decompose(&estimate_cov(&cfg.simulate().unwrap()), 4).unwrap();
        for j in 1..=4 {
            let v = population_eigenfunction(j, 0.0, 0.0, &grid).unwrap();
            let c = inner_product(&v, sys.function(j)).unwrap().abs();
            // the two smallest variances are close, so their eigenfunctions mix more
            assert!(c > if j <= 2 { 0.98 } else { 0.9 }, "j={j}: {c}");
        }
    }

    #[test]
    fn resmoothing_is_nearly_a_no_op() {
        let cfg = DgpConfig { m: 5, grid: Grid::uniform(101).unwrap(), seed: 5, ..DgpConfig::default() };
        let direct = cfg.simulate().unwrap();
        let smoothed = DgpConfig { resmooth: true, ..cfg }.simulate().unwrap();
        for (a, b) in direct.flat_values().iter().zip(smoothed.flat_values()) {
            assert!((a - b).abs() < 1e-3, "{a} vs {b}");
        }
    }

    #[test]
    fn invalid_configs() {
        assert!(DgpConfig { rho: 1.0, ..iid_cfg(10, 0.0) }.simulate().is_err());
        assert!(DgpConfig { burn_in: 10, ..iid_cfg(10, 0.0) }.simulate().is_err());
        assert!(DgpConfig { tau: [1.0, 2.0, 0.5, 0.3], ..iid_cfg(10, 0.0) }.simulate().is_err());
    }

    #[test]
    fn scenario_distances() {
        assert_eq!(Scenario::One.population_distance(0.4, 3), 0.0);
        assert!((Scenario::Two.population_distance(PI / 3.0, 3) - 1.0).abs() < 1e-12);
        assert_eq!(Scenario::from_id(2).unwrap(), Scenario::Two);
        assert!(Scenario::from_id(3).is_err());
    }

    #[test]
    fn study_needs_replicates() {
        let s = PowerStudy::new(Scenario::One, vec![0.0], 20, 20, 10, 0);
        assert!(s.validate().is_err());
    }
}
