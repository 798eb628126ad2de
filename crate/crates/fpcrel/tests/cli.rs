//! Runs the built binary and compares its output with library calls.

use std::path::Path;
use std::process::{Command, Output};

use fpcrel::cache::NullSpec;
use fpcrel::commands::run_test;
use fpcrel::config::{Statistic, TestSettings};
use fpcrel::curves::{read_curves, write_curves};
use fpcrel::parallel::simulate_null;
use fpcrel_core::selfnorm::NuMeasure;
use serde_json::Value;

mod common;

const FAST_NULL: [&str; 6] = ["--null-replicates", "10000", "--path-steps", "500", "--null-seed", "3"];

fn fpcrel(cache: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fpcrel"))
        .env("FPCREL_CACHE_DIR", cache)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fast_spec() -> NullSpec {
    NullSpec { nu: NuMeasure::default(), path_steps: 500, replicates: 10_000, seed: 3 }
}

#[test]
fn simulate_null_caches_and_refuses_small_tables() {
    let dir = tempfile::tempdir().unwrap();
    let first = fpcrel(dir.path(), &[&["simulate-null"], &FAST_NULL[..]].concat());
    assert!(first.status.success(), "{}", stderr(&first));
    assert!(stdout(&first).contains("simulated 10000 draws"));
    assert!(stdout(&first).contains("q(0.95) = "));
    let second = fpcrel(dir.path(), &[&["simulate-null"], &FAST_NULL[..]].concat());
    assert!(stdout(&second).starts_with("cache hit"));
    // the quantile lines agree
    assert_eq!(stdout(&first).lines().skip(1).collect::<Vec<_>>(), stdout(&second).lines().skip(1).collect::<Vec<_>>());

    let other = fpcrel(dir.path(), &["simulate-null", "--null-replicates", "10000", "--path-steps", "500", "--null-seed", "4"]);
    assert!(other.status.success());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);

    let small = fpcrel(dir.path(), &["simulate-null", "--null-replicates", "5000"]);
    assert_eq!(small.status.code(), Some(1));
    assert!(stderr(&small).contains("at least 10000"));
}

#[test]
fn test_command_matches_library_call() {
    let dir = tempfile::tempdir().unwrap();
    let (x, y) = common::scenario_pair(std::f64::consts::FRAC_PI_2, 100, 21);
    let (px, py) = (dir.path().join("x.csv"), dir.path().join("y.csv"));
    write_curves(&px, &x).unwrap();
    write_curves(&py, &y).unwrap();
    let cache = dir.path().join("cache");
    let args = [&["test", px.to_str().unwrap(), py.to_str().unwrap(), "--delta", "0.1"], &FAST_NULL[..]].concat();
    let out = fpcrel(&cache, &args);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stderr(&out).contains("simulating"), "missing-cache notice: {}", stderr(&out));
    let json: Value = serde_json::from_str(&stdout(&out)).unwrap();

    let table = simulate_null(&fast_spec(), 1).unwrap();
    let settings = TestSettings {
        order: 1,
        delta: 0.1,
        alpha: 0.05,
        statistic: Statistic::Eigenfunction,
        truncation: None,
        bandwidth: None,
    };
    let lib = run_test(&read_curves(&px).unwrap(), &read_curves(&py).unwrap(), &settings, Some(&table)).unwrap();
    let direct = run_test(&x, &y, &settings, Some(&table)).unwrap();
    assert_eq!(lib, direct);
    let r = &json["result"];
    assert_eq!(r["d_hat"].as_f64().unwrap().to_bits(), lib.d_hat.to_bits());
    assert_eq!(r["v_hat"].as_f64().unwrap().to_bits(), lib.v_hat.to_bits());
    assert_eq!(r["w_hat"].as_f64().unwrap().to_bits(), lib.w_hat.to_bits());
    assert_eq!(r["p_value"].as_f64().unwrap(), lib.p_value);
    assert_eq!(r["reject"].as_bool().unwrap(), lib.reject);
    assert!(lib.reject && lib.p_value < 0.05, "{lib:?}");
    assert_eq!(json["config"]["statistic"], "eigenfunction");
    assert_eq!(json["null"]["replicates"], 10000);
    assert_eq!(json["null"]["cache"], "simulated");
}

#[test]
fn identical_inputs_do_not_reject() {
    let dir = tempfile::tempdir().unwrap();
    let (x, _) = common::scenario_pair(0.0, 40, 2);
    let px = dir.path().join("x.csv");
    write_curves(&px, &x).unwrap();
    for stat in ["eigenfunction", "eigenvalue"] {
        let args = [&["test", px.to_str().unwrap(), px.to_str().unwrap(), "--statistic", stat], &FAST_NULL[..]].concat();
        let out = fpcrel(dir.path(), &args);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        let json: Value = serde_json::from_str(&stdout(&out)).unwrap();
        assert_eq!(json["result"]["d_hat"], 0.0);
        assert_eq!(json["result"]["reject"], false);
        assert_eq!(json["result"]["w_hat"], "-inf");
    }
}

#[test]
fn plugin_statistic_needs_no_table() {
    let dir = tempfile::tempdir().unwrap();
    let (x, y) = common::scenario_pair(0.5, 60, 8);
    let (px, py) = (dir.path().join("x.csv"), dir.path().join("y.csv"));
    write_curves(&px, &x).unwrap();
    write_curves(&py, &y).unwrap();
    let out = fpcrel(dir.path(), &["test", px.to_str().unwrap(), py.to_str().unwrap(), "--statistic", "plugin"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let json: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(json["null"].is_null());
    assert!(json["result"]["warnings"][0].as_str().unwrap().contains("diagnostic"));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
}

#[test]
fn data_and_usage_errors_set_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (x, _) = common::scenario_pair(0.0, 10, 2);
    let px = dir.path().join("x.csv");
    write_curves(&px, &x).unwrap();
    let coarse = dir.path().join("coarse.csv");
    std::fs::write(&coarse, "t,a,b\n0,1,2\n0.5,0,1\n1,3,1\n").unwrap();
    let mismatch = fpcrel(dir.path(), &[&["test", px.to_str().unwrap(), coarse.to_str().unwrap()], &FAST_NULL[..]].concat());
    assert_eq!(mismatch.status.code(), Some(2), "{}", stderr(&mismatch));
    let missing = fpcrel(dir.path(), &["test", "nope.csv", "nope.csv"]);
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(fpcrel(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(fpcrel(dir.path(), &["test", px.to_str().unwrap()]).status.code(), Some(1));
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[null]\nunknown_key = 1\n").unwrap();
    assert_eq!(fpcrel(dir.path(), &["--config", cfg.to_str().unwrap(), "simulate-null"]).status.code(), Some(1));
}

#[test]
fn power_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str, name: &str| {
        let out = dir.path().join(name);
        let args = [
            &["--threads", threads, "power", "--replicates", "100", "--distances", "0,0.1,2", "-m", "40", "-n", "40"],
            &FAST_NULL[..],
            &["-o", out.to_str().unwrap()],
        ]
        .concat();
        let o = fpcrel(dir.path(), &args);
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(out).unwrap()
    };
    let a = run("1", "a.csv");
    let b = run("1", "b.csv");
    let c = run("3", "c.csv");
    assert_eq!(a, b);
    assert_eq!(a, c);
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("scenario,delta,distance,m,n,replicates,rejection_rate"));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        let rate: f64 = r[6].parse().unwrap();
        assert!((0.0..=1.0).contains(&rate));
        assert_eq!(r[5], "100");
    }
}

#[test]
fn power_rises_past_the_boundary() {
    let dir = tempfile::tempdir().unwrap();
    let args = [&["power", "--replicates", "200", "--distances", "0.1,0.4,1,2", "--grid-points", "101"], &FAST_NULL[..]].concat();
    let o = fpcrel(dir.path(), &args);
    assert!(o.status.success(), "{}", stderr(&o));
    let rates: Vec<f64> = stdout(&o).lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert!(rates[0] <= 0.1, "{rates:?}");
    for w in rates.windows(2) {
        assert!(w[1] >= w[0] - 0.05, "{rates:?}");
    }
    assert!(rates[3] > 0.5, "{rates:?}");
}

#[test]
fn config_file_is_merged_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[null]\nreplicates = 10000\npath_steps = 500\nseed = 3\n\n[power]\nreplicates = 100\nm = 30\nn = 30\ndistances = [0.0, 2.0]\n",
    )
    .unwrap();
    let o = fpcrel(dir.path(), &["--config", cfg.to_str().unwrap(), "power", "-m", "35"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.contains(",35,30,100,")), "{text}");
}

#[test]
fn ingest_writes_curve_files() {
    let dir = tempfile::tempdir().unwrap();
    let station = common::station_csv(dir.path(), "alpha", 1990, 5, 0.0, 1);
    let o = fpcrel(dir.path(), &["ingest", station.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let curves = read_curves(&dir.path().join("alpha.curves.csv")).unwrap();
    assert_eq!(curves.len(), 5);
    let header = std::fs::read_to_string(dir.path().join("alpha.curves.csv")).unwrap();
    assert!(header.starts_with("t,y1990,y1991"));

    let long = dir.path().join("long.csv");
    let o = fpcrel(dir.path(), &["ingest", station.to_str().unwrap(), "--format", "long", "-o", long.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(std::fs::read_to_string(long).unwrap().starts_with("year,index,t,value"));
}
