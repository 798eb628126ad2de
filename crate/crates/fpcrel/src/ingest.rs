//! Long-form daily CSV input and annual-curve export.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use fpcrel_core::annual::{AnnualCurveSet, Date, RawSeries, Record};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where the date lives in a row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DateColumns {
    /// One `YYYY-MM-DD` column.
    Iso { column: String },
    /// Year and 1-based day of year.
    YearDay { year: String, day: String },
    YearMonthDay { year: String, month: String, day: String },
}

/// Column mapping for a station file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schema {
    pub station: Option<String>,
    pub date: DateColumns,
    pub value: String,
    /// Cell contents read as a missing value.
    pub missing: Vec<String>,
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            station: Some("station".into()),
            date: DateColumns::Iso { column: "date".into() },
            value: "value".into(),
            missing: vec![String::new(), "NA".into(), "NaN".into(), "-".into()],
        }
    }
}

struct Columns {
    station: Option<usize>,
    date: Vec<usize>,
    value: usize,
}

fn locate(path: &Path, headers: &csv::StringRecord, schema: &Schema) -> Result<Columns> {
    let find = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            path: path.into(),
            line: 1,
            message: format!("no column named '{name}' (have: {})", headers.iter().collect::<Vec<_>>().join(", ")),
        })
    };
    let date = match &schema.date {
        DateColumns::Iso { column } => vec![find(column)?],
        DateColumns::YearDay { year, day } => vec![find(year)?, find(day)?],
        DateColumns::YearMonthDay { year, month, day } => vec![find(year)?, find(month)?, find(day)?],
    };
    // a configured station column that is absent falls back to the file name
    let station = schema.station.as_deref().and_then(|s| headers.iter().position(|h| h == s));
    Ok(Columns { station, date, value: find(&schema.value)? })
}

fn parse_date(fields: &[&str]) -> std::result::Result<Date, String> {
    let int = |s: &str| s.parse::<i64>().map_err(|_| format!("'{s}' is not an integer"));
    let checked = |y: i64, a: i64, b: i64| -> std::result::Result<(i32, u32, u32), String> {
        let y = i32::try_from(y).map_err(|_| format!("year {y} out of range"))?;
        let a = u32::try_from(a).map_err(|_| format!("{a} is negative"))?;
        let b = u32::try_from(b).map_err(|_| format!("{b} is negative"))?;
        Ok((y, a, b))
    };
    match fields {
        [iso] => {
            let parts: Vec<&str> = iso.split('-').collect();
            if parts.len() != 3 || parts[0].len() != 4 {
                return Err(format!("'{iso}' is not a YYYY-MM-DD date"));
            }
            let (y, m, d) = checked(int(parts[0])?, int(parts[1])?, int(parts[2])?)?;
            Date::new(y, m, d).map_err(|e| e.to_string())
        }
        [year, day] => {
            let (y, _, d) = checked(int(year)?, 0, int(day)?)?;
            Date::from_year_day(y, d).map_err(|e| e.to_string())
        }
        [year, month, day] => {
            let (y, m, d) = checked(int(year)?, int(month)?, int(day)?)?;
            Date::new(y, m, d).map_err(|e| e.to_string())
        }
        _ => unreachable!("date columns come from the schema"),
    }
}

/// Reads one station's daily series.
///
/// Missing cells become records without a value. Malformed rows are
/// collected and reported together; duplicate dates are rejected with both
/// line numbers.
pub fn load_csv(path: &Path, schema: &Schema) -> Result<RawSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|source| Error::Csv { path: path.into(), source })?;
    let headers = reader.headers().map_err(|source| Error::Csv { path: path.into(), source })?.clone();
    if headers.is_empty() {
        return Err(Error::Parse { path: path.into(), line: 1, message: "no records".into() });
    }
    let cols = locate(path, &headers, schema)?;
    let mut records = Vec::new();
    let mut stations = BTreeSet::new();
    let mut bad_lines = Vec::new();
    let mut first_problem = None;
    for row in reader.records() {
        let row = row.map_err(|source| Error::Csv { path: path.into(), source })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let parsed = (|| -> std::result::Result<Record, String> {
            let get = |i: usize| row.get(i).ok_or_else(|| format!("row has {} fields", row.len()));
            let fields = cols.date.iter().map(|&i| get(i)).collect::<std::result::Result<Vec<_>, _>>()?;
            let date = parse_date(&fields)?;
            let raw = get(cols.value)?;
            let value = if schema.missing.iter().any(|m| m == raw) {
                None
            } else {
                let v: f64 = raw.parse().map_err(|_| format!("value '{raw}' is not a number"))?;
                if !v.is_finite() {
                    return Err(format!("value '{raw}' is not finite"));
                }
                Some(v)
            };
            Ok(Record { date, value, line })
        })();
        match parsed {
            Ok(r) => {
                if let Some(s) = cols.station.and_then(|i| row.get(i)) {
                    stations.insert(s.to_string());
                }
                records.push(r);
            }
            Err(msg) => {
                bad_lines.push(line);
                first_problem.get_or_insert_with(|| format!("line {line}: {msg}"));
            }
        }
    }
    if !bad_lines.is_empty() {
        return Err(Error::Malformed { path: path.into(), lines: bad_lines, first: first_problem.unwrap_or_default() });
    }
    if records.is_empty() {
        return Err(Error::Parse { path: path.into(), line: 1, message: "no records".into() });
    }
    if stations.len() > 1 {
        return Err(Error::Parse {
            path: path.into(),
            line: 1,
            message: format!("file mixes stations {:?}; split it per station", stations),
        });
    }
    let station = match stations.into_iter().next() {
        Some(s) => s,
        None => path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
    };
    Ok(RawSeries::new(station, records)?)
}

/// Long-form export: `year,index,t,value`.
pub fn write_annual_csv(path: &Path, set: &AnnualCurveSet) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "year,index,t,value").map_err(io)?;
    let points = set.curves.grid().points();
    for (year, row) in set.years.iter().zip(set.curves.rows()) {
        for (k, (t, v)) in points.iter().zip(row).enumerate() {
            writeln!(w, "{year},{k},{t:?},{v:?}").map_err(io)?;
        }
    }
    w.flush().map_err(io)
}
