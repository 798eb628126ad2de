//! Curve files: wide CSV with the grid in the first column and one curve
//! per remaining column.
//!
//! ```text
//! t,c0,c1,c2
//! 0.0,0.13,-1.2,0.4
//! ...
//! ```
//!
//! The grid must be the uniform grid on `[0, 1]`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use fpcrel_core::{CurveSample, Grid};

use crate::error::{Error, Result};

const GRID_TOLERANCE: f64 = 1e-9;

pub fn read_curves(path: &Path) -> Result<CurveSample> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| Error::Csv { path: path.into(), source })?;
    let headers = reader.headers().map_err(|source| Error::Csv { path: path.into(), source })?.clone();
    let width = headers.len();
    if width < 3 {
        return Err(Error::Parse { path: path.into(), line: 1, message: "need a grid column and at least two curves".into() });
    }
    let mut points = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); width - 1];
    for record in reader.records() {
        let record = record.map_err(|source| Error::Csv { path: path.into(), source })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        for (k, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                path: path.into(),
                line,
                message: format!("'{field}' in column '{}' is not a number", &headers[k]),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse { path: path.into(), line, message: format!("non-finite value in column '{}'", &headers[k]) });
            }
            if k == 0 {
                points.push(v);
            } else {
                columns[k - 1].push(v);
            }
        }
    }
    let grid = Grid::uniform(points.len())?;
    if let Some((i, (got, want))) =
        points.iter().zip(grid.points()).enumerate().find(|(_, (a, b))| (*a - *b).abs() > GRID_TOLERANCE)
    {
        return Err(Error::Parse {
            path: path.into(),
            line: i + 2,
            message: format!("grid point {got} should be {want} (uniform grid on [0, 1])"),
        });
    }
    let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(CurveSample::new(grid, columns, label)?)
}

pub fn write_curves(path: &Path, sample: &CurveSample) -> Result<()> {
    write_curves_named(path, sample, |i| format!("c{i}"))
}

/// Writes with custom column names (e.g. years).
pub fn write_curves_named(path: &Path, sample: &CurveSample, name: impl Fn(usize) -> String) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let mut header = String::from("t");
    for i in 0..sample.len() {
        header.push(',');
        header.push_str(&name(i));
    }
    writeln!(w, "{header}").map_err(io)?;
    for (k, t) in sample.grid().points().iter().enumerate() {
        let mut line = format!("{t:?}");
        for row in sample.rows() {
            line.push(',');
            line.push_str(&format!("{:?}", row[k]));
        }
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}
