//! Library entry points behind each subcommand. The binary only parses
//! flags, calls these and prints.

use std::io::Write;
use std::path::{Path, PathBuf};

use fpcrel_core::annual::{build_annual_curves, detrend_linear, AnnualCurveSet};
use fpcrel_core::dgp::{PowerPoint, PowerStudy, Scenario};
use fpcrel_core::lrv::{estimate_zeta, test_lrv_plugin};
use fpcrel_core::nulldist::{QuantileTable, MIN_DECISION_REPLICATES};
use fpcrel_core::selfnorm::{RelevanceTestConfig, TestResult, TwoSampleFit};
use fpcrel_core::{center, CurveSample, Grid};
use serde::Serialize;

use crate::cache::{CacheStatus, NullCache};
use crate::config::{AnnualSettings, NullSettings, PowerSettings, Statistic, TestSettings};
use crate::curves::read_curves;
use crate::error::{Error, Result};
use crate::ingest::{load_csv, Schema};
use crate::parallel;
use crate::report::{NullView, TestView, FORMAT_VERSION};

/// Shared runtime state.
#[derive(Debug, Clone)]
pub struct Context {
    pub cache: NullCache,
    /// Worker threads; 0 lets rayon decide.
    pub threads: usize,
    pub quiet: bool,
}

impl Context {
    pub fn notice(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }
}

pub fn null_view(s: &NullSettings, status: CacheStatus) -> NullView {
    NullView {
        lower: s.lower,
        points: s.points,
        path_steps: s.path_steps,
        replicates: s.replicates,
        seed: s.seed,
        cache: match status {
            CacheStatus::Hit => "hit",
            CacheStatus::Simulated => "simulated",
        },
    }
}

/// Loads the null table from the cache or simulates it.
pub fn null_table(ctx: &Context, s: &NullSettings) -> Result<(QuantileTable, CacheStatus)> {
    if s.replicates < MIN_DECISION_REPLICATES {
        return Err(Error::Usage(format!(
            "{} replicates is too few for decisions; use at least {MIN_DECISION_REPLICATES} (default 100000)",
            s.replicates
        )));
    }
    let spec = s.spec()?;
    let path = ctx.cache.path_for(&spec);
    if !path.exists() {
        ctx.notice(&format!(
            "no cached null table for lower={} points={} L={} R={} seed={}; simulating into {}",
            s.lower,
            s.points,
            s.path_steps,
            s.replicates,
            s.seed,
            path.display()
        ));
    }
    ctx.cache.get_or_simulate(&spec, ctx.threads)
}

/// The test selected by `s` on two samples.
pub fn run_test(x: &CurveSample, y: &CurveSample, s: &TestSettings, table: Option<&QuantileTable>) -> Result<TestResult> {
    let table = || table.ok_or_else(|| Error::Usage("this statistic needs a null table".into()));
    match s.statistic {
        Statistic::Eigenfunction | Statistic::Eigenvalue => {
            let table = table()?;
            let cfg = RelevanceTestConfig::new(s.order, s.delta).with_alpha(s.alpha).with_nu(table.nu().clone());
            cfg.validate()?;
            let fit = TwoSampleFit::new(x, y, &cfg.nu, s.order)?;
            Ok(if s.statistic == Statistic::Eigenfunction {
                fit.test_eigenfunction(s.order, s.delta, s.alpha, table)?
            } else {
                fit.test_eigenvalue(s.order, s.delta, s.alpha, table)?
            })
        }
        Statistic::Plugin => {
            let cfg = RelevanceTestConfig::new(s.order, s.delta).with_alpha(s.alpha);
            let lrv = estimate_zeta(x, y, s.order, s.truncation, s.bandwidth)?;
            Ok(test_lrv_plugin(x, y, &cfg, &lrv)?)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub format_version: u32,
    pub inputs: [String; 2],
    pub config: TestSettings,
    pub null: Option<NullView>,
    pub result: TestView,
}

pub fn cmd_test(ctx: &Context, x: &Path, y: &Path, test: &TestSettings, null: &NullSettings) -> Result<(TestReport, TestResult)> {
    let xs = read_curves(x)?;
    let ys = read_curves(y)?;
    let (table, view) = if test.statistic == Statistic::Plugin {
        (None, None)
    } else {
        let (t, status) = null_table(ctx, null)?;
        (Some(t), Some(null_view(null, status)))
    };
    let result = run_test(&xs, &ys, test, table.as_ref())?;
    let report = TestReport {
        format_version: FORMAT_VERSION,
        inputs: [x.display().to_string(), y.display().to_string()],
        config: test.clone(),
        null: view,
        result: TestView::from(&result),
    };
    Ok((report, result))
}

pub fn power_study(s: &PowerSettings, nu: fpcrel_core::selfnorm::NuMeasure) -> Result<PowerStudy> {
    let scenario = Scenario::from_id(s.scenario).map_err(|e| Error::Usage(e.to_string()))?;
    let mut study = PowerStudy::new(scenario, s.phases.clone(), s.m, s.n, s.replicates, s.seed);
    study.orders = vec![s.order];
    study.threshold = s.delta;
    study.alpha = s.alpha;
    study.grid = Grid::uniform(s.grid_points).map_err(|e| Error::Usage(e.to_string()))?;
    study.nu = nu;
    study.validate().map_err(|e| Error::Usage(e.to_string()))?;
    Ok(study)
}

pub fn cmd_power(ctx: &Context, s: &PowerSettings, null: &NullSettings) -> Result<Vec<PowerPoint>> {
    let (table, _) = null_table(ctx, null)?;
    let study = power_study(s, table.nu().clone())?;
    parallel::run_power_study(&study, &table, ctx.threads)
}

/// CSV columns `scenario,delta,distance,m,n,replicates,rejection_rate`;
/// `delta` is the varied phase.
pub fn write_power_csv(mut w: impl Write, points: &[PowerPoint]) -> std::io::Result<()> {
    writeln!(w, "scenario,delta,distance,m,n,replicates,rejection_rate")?;
    for p in points {
        writeln!(
            w,
            "{},{:?},{:?},{},{},{},{:?}",
            p.scenario, p.phase, p.distance, p.m, p.n, p.replicates, p.rejection_rate
        )?;
    }
    Ok(())
}

/// Station file to annual curves, optionally detrended.
pub fn annual_curves(path: &Path, schema: &Schema, annual: &AnnualSettings, detrend: bool) -> Result<AnnualCurveSet> {
    let raw = load_csv(path, schema)?;
    let set = build_annual_curves(&raw, &annual.config()?)?;
    Ok(if detrend { detrend_linear(&set)? } else { set })
}

/// The sample fed to the tests: detrended, then centered.
pub fn station_sample(set: &AnnualCurveSet) -> CurveSample {
    center(&set.curves).with_label(set.station.clone())
}

pub fn default_output(input: &Path, suffix: &str) -> PathBuf {
    let stem = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    input.with_file_name(format!("{stem}{suffix}"))
}
