//! On-disk null tables.
//!
//! File layout, all integers and floats little-endian:
//!
//! | offset | size | field                                         |
//! |--------|------|-----------------------------------------------|
//! | 0      | 8    | magic `FPCWNULL`                              |
//! | 8      | 4    | format version (`u32`, currently 1)           |
//! | 12     | 4    | measure kind (`u32`, 1 = uniform on [a, 1])   |
//! | 16     | 8    | lower bound `a` (`f64`)                       |
//! | 24     | 8    | number of λ grid points (`u64`)               |
//! | 32     | 8    | path steps `L` (`u64`)                        |
//! | 40     | 8    | replicates `R` (`u64`)                        |
//! | 48     | 8    | seed (`u64`)                                  |
//! | 56     | 32   | SHA-256 of the λ grid (bit patterns, LE)      |
//! | 88     | 8    | redraw count (`u64`)                          |
//! | 96     | 8·R  | sorted draws (`f64`)                          |
//!
//! Files are named `w-<key>.bin`, where the key is the hex SHA-256 of the
//! header fields up to and including the grid hash. Bumping the version
//! changes every key, so old files are simply never found again.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use fpcrel_core::nulldist::QuantileTable;
use fpcrel_core::selfnorm::NuMeasure;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"FPCWNULL";
pub const FORMAT_VERSION: u32 = 1;
const KIND_UNIFORM: u32 = 1;
const HEADER_LEN: usize = 96;
/// Overrides the default cache directory.
pub const CACHE_ENV: &str = "FPCREL_CACHE_DIR";

/// Everything that determines a table.
#[derive(Debug, Clone, PartialEq)]
pub struct NullSpec {
    pub nu: NuMeasure,
    pub path_steps: usize,
    pub replicates: usize,
    pub seed: u64,
}

pub fn grid_hash(nu: &NuMeasure) -> [u8; 32] {
    let mut h = Sha256::new();
    for l in nu.lambdas() {
        h.update(l.to_bits().to_le_bytes());
    }
    h.finalize().into()
}

fn header_prefix(spec: &NullSpec) -> Vec<u8> {
    let mut b = Vec::with_capacity(88);
    b.extend_from_slice(MAGIC);
    b.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    b.extend_from_slice(&KIND_UNIFORM.to_le_bytes());
    b.extend_from_slice(&spec.nu.lower().to_le_bytes());
    b.extend_from_slice(&(spec.nu.lambdas().len() as u64).to_le_bytes());
    b.extend_from_slice(&(spec.path_steps as u64).to_le_bytes());
    b.extend_from_slice(&(spec.replicates as u64).to_le_bytes());
    b.extend_from_slice(&spec.seed.to_le_bytes());
    b.extend_from_slice(&grid_hash(&spec.nu));
    b
}

/// Hex content hash naming the file for `spec`.
pub fn cache_key(spec: &NullSpec) -> String {
    Sha256::digest(header_prefix(spec)).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn encode(table: &QuantileTable) -> Vec<u8> {
    let spec = NullSpec {
        nu: table.nu().clone(),
        path_steps: table.path_steps(),
        replicates: table.replicates(),
        seed: table.seed(),
    };
    let mut b = header_prefix(&spec);
    b.extend_from_slice(&table.redraws().to_le_bytes());
    for w in table.samples() {
        b.extend_from_slice(&w.to_le_bytes());
    }
    b
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<QuantileTable> {
    let bad = |reason: &str| Error::Cache { path: path.into(), reason: reason.into() };
    if bytes.len() < HEADER_LEN {
        return Err(bad("truncated header"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    if &bytes[..8] != MAGIC {
        return Err(bad("not a null table"));
    }
    if u32_at(8) != FORMAT_VERSION {
        return Err(bad(&format!("format version {} (expected {FORMAT_VERSION})", u32_at(8))));
    }
    if u32_at(12) != KIND_UNIFORM {
        return Err(bad("unknown measure kind"));
    }
    let lower = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let nu = NuMeasure::uniform(lower, u64_at(24) as usize)?;
    if bytes[56..88] != grid_hash(&nu) {
        return Err(bad("lambda grid hash mismatch"));
    }
    let steps = u64_at(32) as usize;
    let replicates = u64_at(40) as usize;
    let seed = u64_at(48);
    let redraws = u64_at(88);
    if bytes.len() != HEADER_LEN + 8 * replicates {
        return Err(bad("payload length does not match the replicate count"));
    }
    let draws: Vec<f64> =
        bytes[HEADER_LEN..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    if draws.windows(2).any(|w| w[0] > w[1]) {
        return Err(bad("draws are not sorted"));
    }
    Ok(QuantileTable::from_draws(nu, steps, seed, draws, redraws)?)
}

/// Default location: `$FPCREL_CACHE_DIR`, else `$XDG_CACHE_HOME/fpcrel`,
/// else `~/.cache/fpcrel`, else `.fpcrel-cache`.
pub fn default_cache_dir() -> PathBuf {
    if let Some(d) = std::env::var_os(CACHE_ENV).filter(|d| !d.is_empty()) {
        return PathBuf::from(d);
    }
    if let Some(d) = std::env::var_os("XDG_CACHE_HOME").filter(|d| !d.is_empty()) {
        return PathBuf::from(d).join("fpcrel");
    }
    if let Some(h) = std::env::var_os("HOME").filter(|d| !d.is_empty()) {
        return PathBuf::from(h).join(".cache").join("fpcrel");
    }
    PathBuf::from(".fpcrel-cache")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheStatus {
    Hit,
    Simulated,
}

#[derive(Debug, Clone)]
pub struct NullCache {
    dir: PathBuf,
}

impl NullCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        NullCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, spec: &NullSpec) -> PathBuf {
        self.dir.join(format!("w-{}.bin", cache_key(spec)))
    }

    /// Loads a cached table, `None` when absent.
    pub fn load(&self, spec: &NullSpec) -> Result<Option<QuantileTable>> {
        let path = self.path_for(spec);
        match fs::read(&path) {
            Ok(bytes) => {
                let table = decode(&bytes, &path)?;
                let same = table.nu() == &spec.nu
                    && table.path_steps() == spec.path_steps
                    && table.replicates() == spec.replicates
                    && table.seed() == spec.seed;
                if !same {
                    return Err(Error::Cache { path, reason: "header does not match its file name".into() });
                }
                Ok(Some(table))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    /// Writes atomically through a temporary file in the same directory.
    pub fn store(&self, table: &QuantileTable) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let spec = NullSpec {
            nu: table.nu().clone(),
            path_steps: table.path_steps(),
            replicates: table.replicates(),
            seed: table.seed(),
        };
        let path = self.path_for(&spec);
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(&encode(table)).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    /// Loads the table or simulates and stores it.
    pub fn get_or_simulate(&self, spec: &NullSpec, threads: usize) -> Result<(QuantileTable, CacheStatus)> {
        if let Some(t) = self.load(spec)? {
            return Ok((t, CacheStatus::Hit));
        }
        let table = crate::parallel::simulate_null(spec, threads)?;
        self.store(&table)?;
        Ok((table, CacheStatus::Simulated))
    }
}
