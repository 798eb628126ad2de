//! Deterministic parallel drivers.
//!
//! Work items are indexed and each draws from its own RNG substream, so the
//! results depend only on the indices; collection keeps index order.

use fpcrel_core::dgp::{PowerPoint, PowerStudy, ReplicateOutcome};
use fpcrel_core::nulldist::{simulate_range, QuantileTable, MIN_PATH_STEPS};
use rayon::prelude::*;

use crate::cache::NullSpec;
use crate::error::{Error, Result};

const NULL_CHUNK: u64 = 2048;

/// Runs `f` inside a pool of `threads` workers (0 = rayon's default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {threads} worker threads: {e}")))?;
    Ok(pool.install(f))
}

/// `f(0), …, f(n−1)` in parallel, returned in index order.
pub fn map_indexed<T, F>(threads: usize, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    with_threads(threads, || (0..n).into_par_iter().map(&f).collect::<Result<Vec<T>>>())?
}

pub fn simulate_null(spec: &NullSpec, threads: usize) -> Result<QuantileTable> {
    if spec.path_steps < MIN_PATH_STEPS {
        return Err(Error::Usage(format!("path steps {} below {MIN_PATH_STEPS}", spec.path_steps)));
    }
    let r = spec.replicates as u64;
    let chunks = r.div_ceil(NULL_CHUNK) as usize;
    let parts = map_indexed(threads, chunks, |c| {
        let start = c as u64 * NULL_CHUNK;
        Ok(simulate_range(&spec.nu, spec.path_steps, spec.seed, start..(start + NULL_CHUNK).min(r))?)
    })?;
    let mut draws = Vec::with_capacity(spec.replicates);
    let mut redraws = 0;
    for (d, k) in parts {
        draws.extend(d);
        redraws += k;
    }
    Ok(QuantileTable::from_draws(spec.nu.clone(), spec.path_steps, spec.seed, draws, redraws)?)
}

/// All replicate outcomes, laid out as `[phase][replicate]`.
pub fn power_outcomes(study: &PowerStudy, table: &QuantileTable, threads: usize) -> Result<Vec<Vec<ReplicateOutcome>>> {
    study.validate()?;
    let reps = study.replicates;
    let flat = map_indexed(threads, study.phases.len() * reps, |i| {
        Ok(study.run_replicate(i / reps, (i % reps) as u64, table)?)
    })?;
    let mut out: Vec<Vec<ReplicateOutcome>> = Vec::with_capacity(study.phases.len());
    let mut it = flat.into_iter();
    for _ in 0..study.phases.len() {
        out.push(it.by_ref().take(reps).collect());
    }
    Ok(out)
}

pub fn run_power_study(study: &PowerStudy, table: &QuantileTable, threads: usize) -> Result<Vec<PowerPoint>> {
    Ok(study.summarize(&power_outcomes(study, table, threads)?))
}
