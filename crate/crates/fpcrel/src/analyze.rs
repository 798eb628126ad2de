//! Pairwise station analysis: every station goes through ingest, annual
//! smoothing, detrending and centering, then each pair is tested at every
//! requested order.

use std::io::Write;
use std::path::{Path, PathBuf};

use fpcrel_core::multiplicity::adjust;
use fpcrel_core::nulldist::QuantileTable;
use fpcrel_core::selfnorm::{TestResult, TwoSampleFit};
use fpcrel_core::CurveSample;
use serde::Serialize;

use crate::commands::{annual_curves, station_sample};
use crate::config::AnalyzeSettings;
use crate::error::{Error, Result};
use crate::parallel::map_indexed;
use crate::report::{FamilyView, NullView, TestView, FORMAT_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationView {
    pub station: String,
    pub path: String,
    pub years: Vec<i32>,
    pub dropped: Vec<DroppedView>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DroppedView {
    pub year: i32,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub path: String,
    pub error: String,
}

/// Tests of one station pair, one entry per requested order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairView {
    pub a: usize,
    pub b: usize,
    pub station_a: String,
    pub station_b: String,
    /// `None` when the pair could not be tested.
    pub tests: Option<Vec<TestView>>,
    pub family: Option<FamilyView>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub format_version: u32,
    pub config: AnalyzeSettings,
    pub null: NullView,
    pub stations: Vec<StationView>,
    pub failures: Vec<Failure>,
    /// Upper triangle `a < b`, row-major.
    pub pairs: Vec<PairView>,
}

/// Full pipeline for one station file.
pub fn prepare_station(path: &Path, settings: &AnalyzeSettings) -> Result<(StationView, CurveSample)> {
    let set = annual_curves(path, &settings.schema, &settings.annual, true)?;
    let view = StationView {
        station: set.station.clone(),
        path: path.display().to_string(),
        years: set.years.clone(),
        dropped: set.dropped.iter().map(|d| DroppedView { year: d.year, reason: d.reason.to_string() }).collect(),
    };
    Ok((view, station_sample(&set)))
}

/// Tests of one pair at every order, with the family correction if any.
pub fn test_pair(
    x: &CurveSample,
    y: &CurveSample,
    settings: &AnalyzeSettings,
    table: &QuantileTable,
) -> Result<(Vec<TestResult>, Option<fpcrel_core::multiplicity::MultiTestResult>)> {
    let max_order = settings.orders.iter().copied().max().unwrap_or(1);
    let fit = TwoSampleFit::new(x, y, table.nu(), max_order)?;
    let results = settings
        .orders
        .iter()
        .enumerate()
        .map(|(k, &j)| fit.test_eigenfunction(j, settings.delta_for(k), settings.alpha, table))
        .collect::<fpcrel_core::Result<Vec<_>>>()?;
    let family = match settings.correction.method() {
        Some(m) => {
            let p: Vec<f64> = results.iter().map(|r| r.p_value).collect();
            Some(adjust(m, &p, settings.alpha)?)
        }
        None => None,
    };
    Ok((results, family))
}

pub fn analyze(
    paths: &[PathBuf],
    settings: &AnalyzeSettings,
    table: &QuantileTable,
    null: NullView,
    threads: usize,
) -> Result<AnalysisReport> {
    settings.validate()?;
    if paths.len() < 2 {
        return Err(Error::Usage("analysis needs at least two station files".into()));
    }
    let prepared = map_indexed(threads, paths.len(), |i| Ok(prepare_station(&paths[i], settings)))?;
    let mut stations = Vec::new();
    let mut samples = Vec::new();
    let mut failures = Vec::new();
    for (path, r) in paths.iter().zip(prepared) {
        match r {
            Ok((view, sample)) => {
                stations.push(view);
                samples.push(sample);
            }
            Err(e) => failures.push(Failure { path: path.display().to_string(), error: e.to_string() }),
        }
    }
    let pairs_idx: Vec<(usize, usize)> =
        (0..samples.len()).flat_map(|a| (a + 1..samples.len()).map(move |b| (a, b))).collect();
    let tested = map_indexed(threads, pairs_idx.len(), |k| {
        let (a, b) = pairs_idx[k];
        Ok(test_pair(&samples[a], &samples[b], settings, table))
    })?;
    let pairs = pairs_idx
        .iter()
        .zip(tested)
        .map(|(&(a, b), r)| {
            let (tests, family, error) = match r {
                Ok((res, fam)) => {
                    (Some(res.iter().map(TestView::from).collect()), fam.as_ref().map(FamilyView::from), None)
                }
                Err(e) => (None, None, Some(e.to_string())),
            };
            PairView {
                a,
                b,
                station_a: stations[a].station.clone(),
                station_b: stations[b].station.clone(),
                tests,
                family,
                error,
            }
        })
        .collect();
    Ok(AnalysisReport { format_version: FORMAT_VERSION, config: settings.clone(), null, stations, failures, pairs })
}

/// One row per pair and order. `mark` is `*` when `p < α`.
pub fn write_table(mut w: impl Write, report: &AnalysisReport) -> std::io::Result<()> {
    writeln!(w, "station_a,station_b,order,delta,d_hat,v_hat,w_hat,p_value,reject,mark")?;
    for pair in &report.pairs {
        let Some(tests) = &pair.tests else { continue };
        for (k, t) in tests.iter().enumerate() {
            let reject = pair.family.as_ref().map_or(t.reject, |f| f.reject[k]);
            let mark = if t.p_value < report.config.alpha { "*" } else { "" };
            writeln!(
                w,
                "{},{},{},{:?},{:?},{:?},{:?},{:?},{},{}",
                csv_field(&pair.station_a),
                csv_field(&pair.station_b),
                t.order,
                t.delta,
                t.d_hat,
                t.v_hat,
                t.w_hat,
                t.p_value,
                reject,
                mark
            )?;
        }
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
