use std::f64::consts::FRAC_PI_2;

use fpcrel::analyze::{analyze, write_table};
use fpcrel::cache::NullSpec;
use fpcrel::config::{AnalyzeSettings, FileConfig};
use fpcrel::parallel::simulate_null;
use fpcrel::report::NullView;
use fpcrel_core::nulldist::QuantileTable;
use fpcrel_core::selfnorm::NuMeasure;

mod common;

fn table() -> QuantileTable {
    simulate_null(&NullSpec { nu: NuMeasure::default(), path_steps: 500, replicates: 10_000, seed: 5 }, 0).unwrap()
}

fn null_view() -> NullView {
    NullView { lower: 0.1, points: 91, path_steps: 500, replicates: 10_000, seed: 5, cache: "simulated" }
}

#[test]
fn pairwise_structure_and_decisions() {
    let dir = tempfile::tempdir().unwrap();
    let a = common::station_csv(dir.path(), "a", 1900, 100, 0.0, 1);
    let copy = dir.path().join("a_copy.csv");
    std::fs::copy(&a, &copy).unwrap();
    let c = common::station_csv(dir.path(), "c", 1900, 100, FRAC_PI_2, 2);
    let broken = dir.path().join("broken.csv");
    std::fs::write(&broken, "station,date,value\n").unwrap();

    let settings = AnalyzeSettings::merged(&FileConfig::default());
    let paths = vec![a, copy, broken, c];
    let report = analyze(&paths, &settings, &table(), null_view(), 0).unwrap();

    assert_eq!(report.failures.len(), 1);
    assert!(report.failures[0].error.contains("no records"));
    assert_eq!(report.stations.len(), 3);
    assert_eq!(report.pairs.len(), 3);
    assert!(report.pairs.iter().all(|p| p.a < p.b));

    // identical data
    let same = &report.pairs[0];
    assert_eq!((same.a, same.b), (0, 1));
    let tests = same.tests.as_ref().unwrap();
    assert_eq!(tests.len(), 2);
    for t in tests {
        assert_eq!(t.d_hat, 0.0);
        assert!(!t.reject);
        assert_eq!(t.p_value, 1.0);
    }
    assert!(!same.family.as_ref().unwrap().global_reject);

    // orthogonal leading eigenfunctions
    let ortho = &report.pairs[1];
    assert_eq!((ortho.a, ortho.b), (0, 2));
    let lead = &ortho.tests.as_ref().unwrap()[0];
    assert!(lead.reject && lead.p_value < 0.05, "{lead:?}");

    let mut csv = Vec::new();
    write_table(&mut csv, &report).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 * 2);
    assert!(text.lines().any(|l| l.starts_with("a,c,1,") && l.ends_with(",true,*")), "{text}");

    let json = serde_json::to_value(&report).unwrap();
    assert_eq!(json["config"]["correction"], "holm");
    assert_eq!(json["config"]["orders"], serde_json::json!([1, 2]));
}

#[test]
fn six_stations_give_fifteen_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<_> =
        (0..6).map(|k| common::station_csv(dir.path(), &format!("s{k}"), 1950, 15, 0.2 * k as f64, 10 + k)).collect();
    let mut settings = AnalyzeSettings::merged(&FileConfig::default());
    settings.orders = vec![1];
    let t = table();
    let a = analyze(&paths, &settings, &t, null_view(), 1).unwrap();
    let b = analyze(&paths, &settings, &t, null_view(), 3).unwrap();
    assert_eq!(a.pairs.len(), 15);
    assert!(a.pairs.iter().all(|p| p.tests.as_ref().is_some_and(|t| t.len() == 1)));
    assert_eq!(a, b);
}

#[test]
fn too_few_stations() {
    let dir = tempfile::tempdir().unwrap();
    let a = common::station_csv(dir.path(), "a", 1950, 5, 0.0, 1);
    let settings = AnalyzeSettings::merged(&FileConfig::default());
    let err = analyze(&[a], &settings, &table(), null_view(), 0).unwrap_err();
    assert_eq!(err.exit_code(), 1);
}
