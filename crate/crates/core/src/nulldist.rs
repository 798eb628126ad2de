//! The pivotal law
//!
//! ```text
//! W = B(1) / ( ∫ λ² (B(λ) − λ B(1))² ν(dλ) )^{1/2}
//! ```
//!
//! simulated from discretized Brownian paths, with quantile and P-value
//! lookups. The ν-integral uses the same λ grid as [`crate::selfnorm`].
//!
//! Replicate `r` draws its increments from ChaCha8 stream `r` keyed by the
//! table seed (stream `r + k·2^40` for its `k`-th redraw), so any split of
//! the replicates across workers reproduces the same table.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::math::{floor, sqrt};
use crate::rng::{substream, GaussianStream};
use crate::selfnorm::NuMeasure;
use crate::{Error, Result};

pub const DEFAULT_PATH_STEPS: usize = 1000;
pub const DEFAULT_REPLICATES: usize = 100_000;
pub const MIN_PATH_STEPS: usize = 500;
/// Smallest table accepted by the tests' decision rule.
pub const MIN_DECISION_REPLICATES: usize = 10_000;

const REDRAW_STRIDE: u64 = 1 << 40;
const MAX_REDRAWS: u64 = 64;

/// `W` evaluated on the path with the given increments.
///
/// `B(k/L)` is the `k`-th partial sum; `B(λ)` interpolates linearly between
/// neighbouring nodes. Returns `None` when the denominator is zero.
pub fn w_from_increments(nu: &NuMeasure, increments: &[f64]) -> Option<f64> {
    let steps = increments.len();
    let mut path = Vec::with_capacity(steps + 1);
    path.push(0.0);
    let mut acc = 0.0;
    for z in increments {
        acc += z;
        path.push(acc);
    }
    w_from_path(nu, &path)
}

fn w_from_path(nu: &NuMeasure, path: &[f64]) -> Option<f64> {
    let steps = path.len() - 1;
    let b1 = path[steps];
    let denom2 = nu.integrate(|_, lambda| {
        let b = brownian_at(path, steps, lambda);
        let bridge = b - lambda * b1;
        lambda * lambda * bridge * bridge
    });
    let denom = sqrt(denom2);
    if denom > 0.0 && denom.is_finite() {
        Some(b1 / denom)
    } else {
        None
    }
}

#[inline]
fn brownian_at(path: &[f64], steps: usize, lambda: f64) -> f64 {
    let x = lambda * steps as f64;
    let nearest = crate::math::round(x);
    if (x - nearest).abs() <= 1e-9 * steps as f64 {
        return path[nearest as usize];
    }
    let k = (floor(x) as usize).min(steps - 1);
    let frac = x - k as f64;
    path[k] + frac * (path[k + 1] - path[k])
}

/// One draw of `W` for replicate `index`, with the number of redraws needed.
pub fn w_replicate(nu: &NuMeasure, steps: usize, seed: u64, index: u64) -> Result<(f64, u64)> {
    let mut path = vec![0.0; steps + 1];
    w_replicate_into(nu, seed, index, &mut path)
}

fn w_replicate_into(nu: &NuMeasure, seed: u64, index: u64, path: &mut [f64]) -> Result<(f64, u64)> {
    let steps = path.len() - 1;
    let scale = 1.0 / sqrt(steps as f64);
    for redraw in 0..MAX_REDRAWS {
        let mut g = GaussianStream::new(substream(seed, index + redraw * REDRAW_STRIDE));
        let mut acc = 0.0;
        path[0] = 0.0;
        for p in path[1..].iter_mut() {
            acc += scale * g.next();
            *p = acc;
        }
        if let Some(w) = w_from_path(nu, path) {
            return Ok((w, redraw));
        }
    }
    Err(Error::NoConvergence)
}

fn check_sizes(steps: usize, replicates: usize) -> Result<()> {
    if steps < MIN_PATH_STEPS {
        return Err(Error::invalid(format!("path grid {steps} below {MIN_PATH_STEPS}")));
    }
    if replicates == 0 {
        return Err(Error::invalid("no replicates requested"));
    }
    Ok(())
}

/// Draws replicates `range` in order. Building block for parallel drivers.
pub fn simulate_range(
    nu: &NuMeasure,
    steps: usize,
    seed: u64,
    range: core::ops::Range<u64>,
) -> Result<(Vec<f64>, u64)> {
    let mut path = vec![0.0; steps + 1];
    let mut out = Vec::with_capacity((range.end - range.start) as usize);
    let mut redraws = 0;
    for r in range {
        let (w, k) = w_replicate_into(nu, seed, r, &mut path)?;
        out.push(w);
        redraws += k;
    }
    Ok((out, redraws))
}

/// Sequential simulation of `replicates` draws of `W`.
pub fn simulate_w(nu: &NuMeasure, steps: usize, replicates: usize, seed: u64) -> Result<QuantileTable> {
    check_sizes(steps, replicates)?;
    let (draws, redraws) = simulate_range(nu, steps, seed, 0..replicates as u64)?;
    QuantileTable::from_draws(nu.clone(), steps, seed, draws, redraws)
}

/// Sorted simulated draws of `W` with their provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileTable {
    nu: NuMeasure,
    steps: usize,
    seed: u64,
    redraws: u64,
    samples: Vec<f64>,
}

impl QuantileTable {
    /// Builds a table from unsorted draws; rejects non-finite values.
    pub fn from_draws(nu: NuMeasure, steps: usize, seed: u64, mut draws: Vec<f64>, redraws: u64) -> Result<Self> {
        check_sizes(steps, draws.len())?;
        if draws.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("non-finite draw in null table"));
        }
        draws.sort_by(f64::total_cmp);
        Ok(QuantileTable { nu, steps, seed, redraws, samples: draws })
    }

    pub fn nu(&self) -> &NuMeasure {
        &self.nu
    }

    pub fn path_steps(&self) -> usize {
        self.steps
    }

    pub fn replicates(&self) -> usize {
        self.samples.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Replicates whose first path had a zero denominator.
    pub fn redraws(&self) -> u64 {
        self.redraws
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Type-7 empirical quantile, `p ∈ (0, 1)`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::invalid(format!("probability {p} outside (0, 1)")));
        }
        let n = self.samples.len();
        let h = (n - 1) as f64 * p;
        let lo = floor(h) as usize;
        let hi = (lo + 1).min(n - 1);
        let frac = h - lo as f64;
        Ok(self.samples[lo] + frac * (self.samples[hi] - self.samples[lo]))
    }

    /// Fraction of draws strictly greater than `w`.
    pub fn p_value(&self, w: f64) -> f64 {
        if w.is_nan() {
            return 1.0;
        }
        let above = self.samples.len() - self.samples.partition_point(|&s| s <= w);
        above as f64 / self.samples.len() as f64
    }
}
