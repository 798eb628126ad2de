//! Daily scalar series to one smoothed curve per year.
//!
//! Day `d` of a year with `N` days sits at `(d − 1)/(N − 1)`, so leap and
//! regular years both span `[0, 1]`. Missing days are left out of the
//! least-squares fit; years with too many of them are dropped and listed.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::fda::{CurveSample, Grid, DEFAULT_GRID_POINTS};
use crate::smooth::{FittedSmoother, Smoother, DEFAULT_INTERIOR_KNOTS};
use crate::{Error, Result};

pub const DEFAULT_MAX_MISSING: usize = 30;

pub fn is_leap(year: i32) -> bool {
    (year % 4 == 0 && year % 100 != 0) || year % 400 == 0
}

pub fn days_in_year(year: i32) -> u32 {
    if is_leap(year) {
        366
    } else {
        365
    }
}

fn days_in_month(year: i32, month: u32) -> u32 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if is_leap(year) => 29,
        2 => 28,
        _ => 0,
    }
}

/// A proleptic Gregorian calendar date.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Date {
    year: i32,
    month: u32,
    day: u32,
}

impl Date {
    pub fn new(year: i32, month: u32, day: u32) -> Result<Self> {
        if day == 0 || day > days_in_month(year, month) {
            return Err(Error::InvalidDate { year, month, day });
        }
        Ok(Date { year, month, day })
    }

    /// From a 1-based day of the year.
    pub fn from_year_day(year: i32, ordinal: u32) -> Result<Self> {
        if ordinal == 0 || ordinal > days_in_year(year) {
            return Err(Error::invalid(format!("day {ordinal} outside year {year}")));
        }
        let mut left = ordinal;
        for month in 1..=12 {
            let len = days_in_month(year, month);
            if left <= len {
                return Ok(Date { year, month, day: left });
            }
            left -= len;
        }
        unreachable!("ordinal was checked against the year length")
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn month(&self) -> u32 {
        self.month
    }

    pub fn day(&self) -> u32 {
        self.day
    }

    /// 1-based day of the year.
    pub fn ordinal(&self) -> u32 {
        (1..self.month).map(|m| days_in_month(self.year, m)).sum::<u32>() + self.day
    }

    /// Position of this day in `[0, 1]`.
    pub fn position(&self) -> f64 {
        (self.ordinal() - 1) as f64 / (days_in_year(self.year) - 1) as f64
    }
}

impl fmt::Display for Date {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}-{:02}", self.year, self.month, self.day)
    }
}

/// One observation; `value` is `None` when the source marks it missing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub date: Date,
    pub value: Option<f64>,
    /// Line in the source, for error messages.
    pub line: usize,
}

/// Date-sorted observations of one station.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    station: String,
    records: Vec<Record>,
}

impl RawSeries {
    /// Sorts by date; rejects empty input and duplicate dates.
    pub fn new(station: impl Into<String>, mut records: Vec<Record>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::invalid("no records"));
        }
        records.sort_by_key(|r| (r.date, r.line));
        for w in records.windows(2) {
            if w[0].date == w[1].date {
                return Err(Error::DuplicateRecord { date: format!("{}", w[0].date), first: w[0].line, second: w[1].line });
            }
        }
        Ok(RawSeries { station: station.into(), records })
    }

    pub fn station(&self) -> &str {
        &self.station
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    /// First and last year covered.
    pub fn year_span(&self) -> (i32, i32) {
        (self.records[0].date.year, self.records[self.records.len() - 1].date.year)
    }

    /// Records explicitly marked missing.
    pub fn missing(&self) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(|r| r.value.is_none())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DropReason {
    TooManyMissing { missing: usize, max: usize },
    Smoothing(Error),
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DropReason::TooManyMissing { missing, max } => write!(f, "{missing} missing days (limit {max})"),
            DropReason::Smoothing(e) => write!(f, "smoothing failed: {e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DroppedYear {
    pub year: i32,
    pub reason: DropReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnualConfig {
    pub interior_knots: usize,
    pub max_missing: usize,
    pub grid: Grid,
}

impl Default for AnnualConfig {
    fn default() -> Self {
        AnnualConfig {
            interior_knots: DEFAULT_INTERIOR_KNOTS,
            max_missing: DEFAULT_MAX_MISSING,
            grid: Grid::uniform(DEFAULT_GRID_POINTS).expect("default grid is valid"),
        }
    }
}

/// One curve per retained year.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnualCurveSet {
    pub station: String,
    pub years: Vec<i32>,
    pub curves: CurveSample,
    pub dropped: Vec<DroppedYear>,
}

/// Smooths every sufficiently complete year of `raw`.
///
/// Errors only when fewer than two years survive.
pub fn build_annual_curves(raw: &RawSeries, cfg: &AnnualConfig) -> Result<AnnualCurveSet> {
    let smoother = Smoother::BSpline { interior_knots: cfg.interior_knots };
    let mut years = Vec::new();
    let mut rows = Vec::new();
    let mut dropped = Vec::new();
    let records = raw.records();
    let mut start = 0;
    while start < records.len() {
        let year = records[start].date.year;
        let end = start + records[start..].iter().take_while(|r| r.date.year == year).count();
        let (positions, values): (Vec<f64>, Vec<f64>) =
            records[start..end].iter().filter_map(|r| r.value.map(|v| (r.date.position(), v))).unzip();
        start = end;
        let missing = days_in_year(year) as usize - positions.len();
        if missing > cfg.max_missing {
            dropped.push(DroppedYear { year, reason: DropReason::TooManyMissing { missing, max: cfg.max_missing } });
            continue;
        }
        match FittedSmoother::new(&positions, smoother).and_then(|f| f.apply(&values, &cfg.grid)) {
            Ok(curve) => {
                years.push(year);
                rows.push(curve.into_values());
            }
            Err(e) => dropped.push(DroppedYear { year, reason: DropReason::Smoothing(e) }),
        }
    }
    let curves = CurveSample::new(cfg.grid.clone(), rows, raw.station())?;
    Ok(AnnualCurveSet { station: raw.station().into(), years, curves, dropped })
}

/// Least-squares line through `(year, yearly mean)`.
pub fn yearly_trend(set: &AnnualCurveSet) -> Result<(f64, f64)> {
    let n = set.years.len();
    if n < 3 {
        return Err(Error::SampleTooShort { label: set.station.clone(), got: n, min: 3 });
    }
    let grid = set.curves.grid();
    let ones: Vec<f64> = alloc::vec![1.0; grid.len()];
    let means: Vec<f64> = set.curves.rows().map(|r| grid.dot(r, &ones)).collect();
    let xbar = set.years.iter().map(|&y| y as f64).sum::<f64>() / n as f64;
    let ybar = means.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (&y, m) in set.years.iter().zip(&means) {
        let dx = y as f64 - xbar;
        sxy += dx * (m - ybar);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    Ok((ybar - slope * xbar, slope))
}

/// Subtracts the fitted linear trend of the yearly means from each curve.
pub fn detrend_linear(set: &AnnualCurveSet) -> Result<AnnualCurveSet> {
    let (intercept, slope) = yearly_trend(set)?;
    let grid = set.curves.grid().clone();
    let p = grid.len();
    let xbar = set.years.iter().map(|&y| y as f64).sum::<f64>() / set.years.len() as f64;
    let ybar = intercept + slope * xbar;
    let mut values = set.curves.flat_values().to_vec();
    for (row, &y) in values.chunks_exact_mut(p).zip(&set.years) {
        // centered form keeps the subtraction well conditioned for calendar years
        let fitted = ybar + slope * (y as f64 - xbar);
        row.iter_mut().for_each(|v| *v -= fitted);
    }
    Ok(AnnualCurveSet {
        station: set.station.clone(),
        years: set.years.clone(),
        curves: CurveSample::from_flat(grid, values, set.curves.label())?,
        dropped: set.dropped.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use core::f64::consts::PI;
    use proptest::prelude::*;

    fn synthetic(years: core::ops::Range<i32>, f: impl Fn(i32, f64) -> f64) -> RawSeries {
        let mut records = Vec::new();
        let mut line = 2;
        for y in years {
            for d in 1..=days_in_year(y) {
                let date = Date::from_year_day(y, d).unwrap();
                records.push(Record { date, value: Some(f(y, date.position())), line });
                line += 1;
            }
        }
        RawSeries::new("test", records).unwrap()
    }

    fn small_cfg() -> AnnualConfig {
        AnnualConfig { grid: Grid::uniform(101).unwrap(), ..AnnualConfig::default() }
    }

    #[test]
    fn calendar() {
        assert!(is_leap(2000) && is_leap(1996) && !is_leap(1900) && !is_leap(2023));
        assert_eq!(Date::new(2024, 12, 31).unwrap().ordinal(), 366);
        assert_eq!(Date::from_year_day(2023, 60).unwrap(), Date::new(2023, 3, 1).unwrap());
        assert_eq!(Date::from_year_day(2024, 60).unwrap(), Date::new(2024, 2, 29).unwrap());
        assert!(Date::new(2023, 2, 29).is_err());
        assert!(Date::new(2023, 13, 1).is_err());
        assert_eq!(Date::new(2024, 12, 31).unwrap().position(), 1.0);
        assert_eq!(Date::new(2023, 1, 1).unwrap().position(), 0.0);
        assert_eq!(format!("{}", Date::new(987, 3, 4).unwrap()), "0987-03-04");
    }

    #[test]
    fn empty_and_duplicates() {
        assert_eq!(RawSeries::new("s", vec![]), Err(Error::invalid("no records")));
        let d = Date::new(2000, 5, 5).unwrap();
        let recs = vec![
            Record { date: d, value: Some(1.0), line: 7 },
            Record { date: Date::new(2000, 5, 6).unwrap(), value: Some(1.0), line: 8 },
            Record { date: d, value: Some(2.0), line: 12 },
        ];
        assert_eq!(
            RawSeries::new("s", recs),
            Err(Error::DuplicateRecord { date: "2000-05-05".into(), first: 7, second: 12 })
        );
    }

    #[test]
    fn full_years_and_leap_years_share_the_grid() {
        let raw = synthetic(2023..2025, |_, t| libm::sin(2.0 * PI * t));
        let set = build_annual_curves(&raw, &small_cfg()).unwrap();
        assert_eq!(set.years, [2023, 2024]);
        assert!(set.dropped.is_empty());
        for row in set.curves.rows() {
            for (v, &t) in row.iter().zip(set.curves.grid().points()) {
                assert!((v - libm::sin(2.0 * PI * t)).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn sparse_year_dropped() {
        let mut recs = synthetic(1930..1934, |_, t| t).records().to_vec();
        // 40 missing markers in 1932, 5 in 1931; 1933 loses 100 days outright
        for r in recs.iter_mut() {
            let o = r.date.ordinal();
            if (r.date.year() == 1932 && o <= 40) || (r.date.year() == 1931 && o % 70 == 0) {
                r.value = None;
            }
        }
        recs.retain(|r| !(r.date.year() == 1933 && r.date.ordinal() > 265));
        let raw = RawSeries::new("boulia", recs).unwrap();
        assert_eq!(raw.missing().count(), 45);
        let set = build_annual_curves(&raw, &small_cfg()).unwrap();
        assert_eq!(set.years, [1930, 1931]);
        assert_eq!(set.dropped.len(), 2);
        assert_eq!(set.dropped[0].year, 1932);
        assert_eq!(set.dropped[0].reason, DropReason::TooManyMissing { missing: 40, max: 30 });
        assert_eq!(set.dropped[1].reason, DropReason::TooManyMissing { missing: 100, max: 30 });
    }

    #[test]
    fn detrend_recovers_slope() {
        let raw = synthetic(1950..1970, |y, t| 12.0 + 0.01 * (y - 1950) as f64 + libm::cos(2.0 * PI * t));
        let set = build_annual_curves(&raw, &small_cfg()).unwrap();
        let (_, slope) = yearly_trend(&set).unwrap();
        assert!((slope - 0.01).abs() < 1e-8, "{slope}");
        let out = detrend_linear(&set).unwrap();
        let (a, b) = yearly_trend(&out).unwrap();
        assert!(a.abs() < 1e-8 && b.abs() < 1e-10);
        // shapes are untouched: year-to-year differences are constant offsets
        let r0 = out.curves.row(0);
        let r5 = out.curves.row(5);
        let d: Vec<f64> = r0.iter().zip(r5).map(|(x, y)| x - y).collect();
        assert!(d.iter().all(|v| (v - d[0]).abs() < 1e-12));
    }

    #[test]
    fn linear_means_vanish() {
        let raw = synthetic(2000..2005, |y, t| 3.0 - 0.5 * (y - 2000) as f64 + libm::sin(2.0 * PI * t));
        let out = detrend_linear(&build_annual_curves(&raw, &small_cfg()).unwrap()).unwrap();
        let grid = out.curves.grid();
        for row in out.curves.rows() {
            let mean = grid.dot(row, &vec![1.0; grid.len()]);
            assert!(mean.abs() < 1e-10);
        }
    }

    #[test]
    fn too_few_years() {
        let raw = synthetic(2000..2002, |_, t| t);
        assert!(detrend_linear(&build_annual_curves(&raw, &small_cfg()).unwrap()).is_err());
    }

    fn random_set(rows: &[Vec<f64>], first_year: i32) -> AnnualCurveSet {
        let grid = Grid::uniform(rows[0].len()).unwrap();
        AnnualCurveSet {
            station: "p".into(),
            years: (0..rows.len() as i32).map(|i| first_year + i).collect(),
            curves: CurveSample::new(grid, rows.to_vec(), "p").unwrap(),
            dropped: vec![],
        }
    }

    proptest! {
        #[test]
        fn detrend_idempotent(
            rows in proptest::collection::vec(proptest::collection::vec(-30.0f64..30.0, 16), 3..12),
            first in 1850i32..2020,
        ) {
            let once = detrend_linear(&random_set(&rows, first)).unwrap();
            let twice = detrend_linear(&once).unwrap();
            for (a, b) in once.curves.flat_values().iter().zip(twice.curves.flat_values()) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }

        #[test]
        fn detrend_commutes_with_zero_mean_shape(
            rows in proptest::collection::vec(proptest::collection::vec(-30.0f64..30.0, 16), 3..12),
            amp in -5.0f64..5.0,
        ) {
            let set = random_set(&rows, 1990);
            let grid = set.curves.grid().clone();
            let h: Vec<f64> = grid.points().iter().map(|&t| amp * libm::cos(2.0 * PI * t)).collect();
            let shifted: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().zip(&h).map(|(a, b)| a + b).collect()).collect();
            let a = detrend_linear(&random_set(&shifted, 1990)).unwrap();
            let b = detrend_linear(&set).unwrap();
            for (i, row) in a.curves.rows().enumerate() {
                for ((x, y), hv) in row.iter().zip(b.curves.row(i)).zip(&h) {
                    prop_assert!((x - y - hv).abs() < 1e-9);
                }
            }
        }
    }
}
