//! TOML configuration. Every field is optional; command-line flags win over
//! the file, and the file wins over built-in defaults.
//!
//! ```toml
//! threads = 4
//! cache_dir = "/tmp/fpcrel"
//!
//! [null]
//! lower = 0.1
//! points = 91
//! path_steps = 1000
//! replicates = 100000
//! seed = 1
//!
//! [test]
//! order = 1
//! delta = 0.1
//! alpha = 0.05
//!
//! [power]
//! scenario = 1
//! distances = [0.0, 0.1, 0.5, 2.0]
//! m = 100
//! n = 100
//! replicates = 1000
//! seed = 7
//!
//! [annual]
//! max_missing = 30
//!
//! [schema]
//! station = "station"
//! value = "tmin"
//! date = { kind = "iso", column = "date" }
//! ```

use std::path::{Path, PathBuf};

use fpcrel_core::annual::{AnnualConfig, DEFAULT_MAX_MISSING};
use fpcrel_core::fda::DEFAULT_GRID_POINTS;
use fpcrel_core::multiplicity::Method;
use fpcrel_core::nulldist::{DEFAULT_PATH_STEPS, DEFAULT_REPLICATES};
use fpcrel_core::selfnorm::{NuMeasure, DEFAULT_NU_LOWER, DEFAULT_NU_POINTS};
use fpcrel_core::smooth::DEFAULT_INTERIOR_KNOTS;
use fpcrel_core::Grid;
use serde::{Deserialize, Serialize};

use crate::cache::NullSpec;
use crate::error::{Error, Result};
use crate::ingest::Schema;

pub const DEFAULT_NULL_SEED: u64 = 1;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub threads: Option<usize>,
    pub cache_dir: Option<PathBuf>,
    #[serde(default)]
    pub null: NullFile,
    #[serde(default)]
    pub test: TestFile,
    #[serde(default)]
    pub power: PowerFile,
    #[serde(default)]
    pub annual: AnnualFile,
    #[serde(default)]
    pub analyze: AnalyzeFile,
    pub schema: Option<Schema>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NullFile {
    pub lower: Option<f64>,
    pub points: Option<usize>,
    pub path_steps: Option<usize>,
    pub replicates: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFile {
    pub order: Option<usize>,
    pub delta: Option<f64>,
    pub alpha: Option<f64>,
    pub statistic: Option<Statistic>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerFile {
    pub scenario: Option<u8>,
    pub phases: Option<Vec<f64>>,
    pub distances: Option<Vec<f64>>,
    pub order: Option<usize>,
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub replicates: Option<usize>,
    pub seed: Option<u64>,
    pub grid_points: Option<usize>,
    pub delta: Option<f64>,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnualFile {
    pub max_missing: Option<usize>,
    pub interior_knots: Option<usize>,
    pub grid_points: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeFile {
    pub orders: Option<Vec<usize>>,
    pub deltas: Option<Vec<f64>>,
    pub alpha: Option<f64>,
    pub correction: Option<Correction>,
}

pub fn load(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// Self-normalized eigenfunction test.
    Eigenfunction,
    /// Self-normalized eigenvalue test.
    Eigenvalue,
    /// Normal test with an estimated long-run variance (diagnostic).
    Plugin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Correction {
    None,
    Bonferroni,
    Holm,
}

impl Correction {
    pub fn method(self) -> Option<Method> {
        match self {
            Correction::None => None,
            Correction::Bonferroni => Some(Method::Bonferroni),
            Correction::Holm => Some(Method::Holm),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullSettings {
    pub lower: f64,
    pub points: usize,
    pub path_steps: usize,
    pub replicates: usize,
    pub seed: u64,
}

impl Default for NullSettings {
    fn default() -> Self {
        NullSettings {
            lower: DEFAULT_NU_LOWER,
            points: DEFAULT_NU_POINTS,
            path_steps: DEFAULT_PATH_STEPS,
            replicates: DEFAULT_REPLICATES,
            seed: DEFAULT_NULL_SEED,
        }
    }
}

impl NullSettings {
    pub fn merged(file: &NullFile) -> Self {
        let d = NullSettings::default();
        NullSettings {
            lower: file.lower.unwrap_or(d.lower),
            points: file.points.unwrap_or(d.points),
            path_steps: file.path_steps.unwrap_or(d.path_steps),
            replicates: file.replicates.unwrap_or(d.replicates),
            seed: file.seed.unwrap_or(d.seed),
        }
    }

    pub fn nu(&self) -> Result<NuMeasure> {
        NuMeasure::uniform(self.lower, self.points).map_err(|e| Error::Usage(e.to_string()))
    }

    pub fn spec(&self) -> Result<NullSpec> {
        Ok(NullSpec { nu: self.nu()?, path_steps: self.path_steps, replicates: self.replicates, seed: self.seed })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestSettings {
    pub order: usize,
    pub delta: f64,
    pub alpha: f64,
    pub statistic: Statistic,
    /// Plug-in test only; `None` picks the eigenvalue-based default.
    pub truncation: Option<usize>,
    /// Plug-in test only; `None` is `⌊m^{1/3}⌋`.
    pub bandwidth: Option<usize>,
}

impl TestSettings {
    pub fn merged(file: &TestFile) -> Self {
        TestSettings {
            order: file.order.unwrap_or(1),
            delta: file.delta.unwrap_or(0.1),
            alpha: file.alpha.unwrap_or(0.05),
            statistic: file.statistic.unwrap_or(Statistic::Eigenfunction),
            truncation: None,
            bandwidth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnualSettings {
    pub max_missing: usize,
    pub interior_knots: usize,
    pub grid_points: usize,
}

impl AnnualSettings {
    pub fn merged(file: &AnnualFile) -> Self {
        AnnualSettings {
            max_missing: file.max_missing.unwrap_or(DEFAULT_MAX_MISSING),
            interior_knots: file.interior_knots.unwrap_or(DEFAULT_INTERIOR_KNOTS),
            grid_points: file.grid_points.unwrap_or(DEFAULT_GRID_POINTS),
        }
    }

    pub fn config(&self) -> Result<AnnualConfig> {
        Ok(AnnualConfig {
            interior_knots: self.interior_knots,
            max_missing: self.max_missing,
            grid: Grid::uniform(self.grid_points).map_err(|e| Error::Usage(e.to_string()))?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyzeSettings {
    pub orders: Vec<usize>,
    pub deltas: Vec<f64>,
    pub alpha: f64,
    pub correction: Correction,
    pub annual: AnnualSettings,
    pub schema: Schema,
}

impl AnalyzeSettings {
    pub fn merged(file: &FileConfig) -> Self {
        AnalyzeSettings {
            orders: file.analyze.orders.clone().unwrap_or_else(|| vec![1, 2]),
            deltas: file.analyze.deltas.clone().unwrap_or_else(|| vec![0.1]),
            alpha: file.analyze.alpha.unwrap_or(0.05),
            correction: file.analyze.correction.unwrap_or(Correction::Holm),
            annual: AnnualSettings::merged(&file.annual),
            schema: file.schema.clone().unwrap_or_default(),
        }
    }

    /// `Δ` per order; a single value applies to every order.
    pub fn delta_for(&self, k: usize) -> f64 {
        if self.deltas.len() == 1 {
            self.deltas[0]
        } else {
            self.deltas[k]
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.orders.is_empty() || self.orders.contains(&0) {
            return Err(Error::Usage("orders must be a non-empty list of positive integers".into()));
        }
        if self.deltas.len() != 1 && self.deltas.len() != self.orders.len() {
            return Err(Error::Usage(format!("{} thresholds for {} orders", self.deltas.len(), self.orders.len())));
        }
        if self.deltas.iter().any(|d| !(*d > 0.0)) || !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Usage("thresholds must be positive and the level in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerSettings {
    pub scenario: u8,
    /// Phases of the varied parameter.
    pub phases: Vec<f64>,
    pub order: usize,
    pub m: usize,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    pub grid_points: usize,
    pub delta: f64,
    pub alpha: f64,
}

/// Population distances of the default power grid.
pub const DEFAULT_POWER_DISTANCES: [f64; 8] = [0.0, 0.05, 0.1, 0.2, 0.4, 0.7, 1.0, 2.0];

impl PowerSettings {
    pub fn merged(file: &PowerFile) -> Result<Self> {
        let scenario = file.scenario.unwrap_or(1);
        let sc = fpcrel_core::dgp::Scenario::from_id(scenario).map_err(|e| Error::Usage(e.to_string()))?;
        let phases = match (&file.phases, &file.distances) {
            (Some(_), Some(_)) => return Err(Error::Usage("give phases or distances, not both".into())),
            (Some(p), None) => p.clone(),
            (None, d) => phases_for(d.as_deref().unwrap_or(&DEFAULT_POWER_DISTANCES))?,
        };
        Ok(PowerSettings {
            scenario,
            phases,
            order: file.order.unwrap_or(sc.default_order()),
            m: file.m.unwrap_or(100),
            n: file.n.unwrap_or(100),
            replicates: file.replicates.unwrap_or(1000),
            seed: file.seed.unwrap_or(1),
            grid_points: file.grid_points.unwrap_or(DEFAULT_GRID_POINTS),
            delta: file.delta.unwrap_or(0.1),
            alpha: file.alpha.unwrap_or(0.05),
        })
    }
}

pub fn phases_for(distances: &[f64]) -> Result<Vec<f64>> {
    distances
        .iter()
        .map(|&d| fpcrel_core::dgp::distance_to_phase(d).map_err(|e| Error::Usage(e.to_string())))
        .collect()
}
