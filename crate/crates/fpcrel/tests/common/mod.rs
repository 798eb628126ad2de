#![allow(dead_code)]

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fpcrel_core::annual::{days_in_year, Date};
use fpcrel_core::dgp::{DgpConfig, Scenario};
use fpcrel_core::{center, CurveSample, Grid};

/// Centered Scenario-1 samples at `phase`.
pub fn scenario_pair(phase: f64, m: usize, seed: u64) -> (CurveSample, CurveSample) {
    let grid = Grid::uniform(101).unwrap();
    let (cx, cy) = Scenario::One.configs(phase, m, m, &grid, seed);
    (center(&cx.simulate().unwrap()), center(&cy.simulate().unwrap()))
}

/// Daily station CSV whose yearly curves follow the simulation model with
/// leading phase `phase`, plus a mean level and a slow warming trend.
pub fn station_csv(dir: &Path, name: &str, first_year: i32, years: usize, phase: f64, seed: u64) -> PathBuf {
    let cfg = DgpConfig { m: years, seed, ..DgpConfig::default() };
    let coef = cfg.coefficients().unwrap();
    let mut text = String::from("station,date,value\n");
    for (k, c) in coef.iter().enumerate() {
        let year = first_year + k as i32;
        let days = days_in_year(year);
        for d in 1..=days {
            let t = (d - 1) as f64 / (days - 1) as f64;
            let a = 2.0 * PI * t + phase;
            let b = 4.0 * PI * t;
            let v = 12.0 + 0.01 * k as f64
                + 2f64.sqrt() * (c[0] * a.sin() + c[1] * a.cos() + c[2] * b.sin() + c[3] * b.cos());
            let date = Date::from_year_day(year, d).unwrap();
            writeln!(text, "{name},{date},{v:.4}").unwrap();
        }
    }
    let path = dir.join(format!("{name}.csv"));
    std::fs::write(&path, text).unwrap();
    path
}
