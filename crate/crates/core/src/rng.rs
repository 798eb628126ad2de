//! Reproducible random streams.
//!
//! Every Monte Carlo replicate gets its own ChaCha8 stream: the key comes
//! from the master seed and the stream id from the replicate coordinates, so
//! a replicate's draws never depend on which worker runs it or in what
//! order. Gaussian variates use the Box–Muller transform (no rejection), so
//! each variate consumes a fixed number of uniforms.

use core::f64::consts::PI;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::math::{cos, ln, sin, sqrt};

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a path of indices.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix64(seed), |acc, &p| mix64(acc ^ mix64(p.wrapping_add(0x5851_F42D_4C95_7F2D))))
}

/// ChaCha8 generator keyed by `seed`, positioned on stream `stream`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform on `(0, 1]` from the top 53 bits.
#[inline]
pub fn open_unit<R: RngCore>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal variates by Box–Muller.
#[derive(Debug, Clone)]
pub struct GaussianStream<R> {
    rng: R,
    spare: Option<f64>,
}

impl<R: RngCore> GaussianStream<R> {
    pub fn new(rng: R) -> Self {
        GaussianStream { rng, spare: None }
    }

    #[inline]
    #[allow(clippy::should_implement_trait)]
    pub fn next(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = open_unit(&mut self.rng);
        let u2 = open_unit(&mut self.rng);
        let r = sqrt(-2.0 * ln(u1));
        let theta = 2.0 * PI * u2;
        self.spare = Some(r * sin(theta));
        r * cos(theta)
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.next();
        }
    }
}
