//! The model-agnostic survival-prediction exchange format.
//!
//! Two layouts share one file structure: a format marker line, a header row,
//! then one subject per row.
//!
//! * `time-grid`: header holds ascending times, rows hold survival
//!   probabilities, non-increasing left to right.
//! * `percentile`: header holds survival percentile levels in decreasing
//!   order, rows hold the corresponding percentile times, non-decreasing
//!   left to right.
//!
//! Numbers are written in shortest round-trip decimal form, so a write/read
//! cycle reproduces every value bit for bit.

use crate::error::{CliError, Result};
use std::fs;
use std::path::Path;
use survcal_core::conformal::PctMatrix;
use survcal_core::curve::{Extrapolation, Interpolation, PercentileGrid, SurvivalCurve};

#[derive(Debug, Clone, PartialEq)]
pub enum IsdFile {
    TimeGrid {
        times: Vec<f64>,
        rows: Vec<Vec<f64>>,
    },
    /// Levels stored as in the file: decreasing survival percentile.
    Percentile {
        levels: Vec<f64>,
        rows: Vec<Vec<f64>>,
    },
}

impl IsdFile {
    pub fn n_subjects(&self) -> usize {
        match self {
            IsdFile::TimeGrid { rows, .. } | IsdFile::Percentile { rows, .. } => rows.len(),
        }
    }

    /// Builds the time-grid form from curves that share one knot grid.
    pub fn from_shared_curves(curves: &[SurvivalCurve]) -> Result<IsdFile> {
        let first = curves
            .first()
            .ok_or_else(|| CliError::data("no curves to write"))?;
        let times = first.times().to_vec();
        let mut rows = Vec::with_capacity(curves.len());
        for (i, c) in curves.iter().enumerate() {
            if c.times() != times.as_slice() {
                return Err(CliError::data(format!(
                    "curve {i} uses a different time grid; cannot share a header"
                )));
            }
            rows.push(c.probs().to_vec());
        }
        Ok(IsdFile::TimeGrid { times, rows })
    }

    /// Builds the percentile form from a matrix on ascending levels; columns
    /// are flipped to the file's decreasing order and negative times clamp
    /// to zero.
    pub fn from_pct_matrix(pcts: &PctMatrix) -> IsdFile {
        let levels: Vec<f64> = pcts.grid().levels().iter().rev().cloned().collect();
        let rows = pcts
            .rows()
            .iter()
            .map(|row| row.iter().rev().map(|t| t.max(0.0)).collect())
            .collect();
        IsdFile::Percentile { levels, rows }
    }

    pub fn to_curves(&self) -> Result<Vec<SurvivalCurve>> {
        match self {
            IsdFile::TimeGrid { times, rows } => rows
                .iter()
                .map(|row| {
                    SurvivalCurve::new(
                        times.clone(),
                        row.clone(),
                        Interpolation::Linear,
                        Extrapolation::LinearToZero,
                    )
                    .map_err(|e| CliError::data(e.to_string()))
                })
                .collect(),
            IsdFile::Percentile { levels, rows } => {
                let ascending: Vec<f64> = levels.iter().rev().cloned().collect();
                rows.iter()
                    .map(|row| {
                        let row_asc: Vec<f64> = row.iter().rev().cloned().collect();
                        SurvivalCurve::from_percentiles(&ascending, &row_asc)
                            .map_err(|e| CliError::data(e.to_string()))
                    })
                    .collect()
            }
        }
    }

    pub fn to_pct_matrix(&self) -> Result<PctMatrix> {
        match self {
            IsdFile::TimeGrid { .. } => Err(CliError::data(
                "time-grid file cannot be read as a percentile matrix",
            )),
            IsdFile::Percentile { levels, rows } => {
                let ascending: Vec<f64> = levels.iter().rev().cloned().collect();
                let grid =
                    PercentileGrid::new(ascending).map_err(|e| CliError::data(e.to_string()))?;
                let rows_asc = rows
                    .iter()
                    .map(|row| row.iter().rev().cloned().collect())
                    .collect();
                PctMatrix::new(grid, rows_asc).map_err(|e| CliError::data(e.to_string()))
            }
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        let (marker, header, rows) = match self {
            IsdFile::TimeGrid { times, rows } => ("time-grid", times, rows),
            IsdFile::Percentile { levels, rows } => ("percentile", levels, rows),
        };
        out.push_str("isd-format: ");
        out.push_str(marker);
        out.push('\n');
        push_row(&mut out, header);
        for row in rows {
            push_row(&mut out, row);
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<IsdFile> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let mut lines = text.lines();
        let marker = lines
            .next()
            .ok_or_else(|| CliError::data(format!("{}: empty file", path.display())))?;
        let mode = marker
            .strip_prefix("isd-format:")
            .map(str::trim)
            .ok_or_else(|| {
                CliError::data(format!(
                    "{}: first line must be an isd-format marker",
                    path.display()
                ))
            })?;
        let header = parse_row(
            lines
                .next()
                .ok_or_else(|| CliError::data(format!("{}: missing header row", path.display())))?,
            0,
        )?;
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row = parse_row(line, i + 1)?;
            if row.len() != header.len() {
                return Err(CliError::data(format!(
                    "row {}: {} values for a header of {}",
                    i + 1,
                    row.len(),
                    header.len()
                )));
            }
            rows.push(row);
        }
        match mode {
            "time-grid" => {
                if !header.windows(2).all(|w| w[1] > w[0]) {
                    return Err(CliError::data("time grid must be strictly increasing"));
                }
                for (i, row) in rows.iter().enumerate() {
                    if !row.windows(2).all(|w| w[1] <= w[0]) {
                        return Err(CliError::data(format!(
                            "row {}: probabilities must be non-increasing",
                            i + 1
                        )));
                    }
                }
                Ok(IsdFile::TimeGrid {
                    times: header,
                    rows,
                })
            }
            "percentile" => {
                if !header.windows(2).all(|w| w[1] < w[0]) {
                    return Err(CliError::data(
                        "percentile levels must be strictly decreasing",
                    ));
                }
                for (i, row) in rows.iter().enumerate() {
                    if !row.windows(2).all(|w| w[1] >= w[0]) {
                        return Err(CliError::data(format!(
                            "row {}: percentile times must be non-decreasing",
                            i + 1
                        )));
                    }
                }
                Ok(IsdFile::Percentile {
                    levels: header,
                    rows,
                })
            }
            other => Err(CliError::data(format!("unknown isd format {other:?}"))),
        }
    }
}

fn push_row(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&format!("{v}"));
    }
    out.push('\n');
}

fn parse_row(line: &str, row: usize) -> Result<Vec<f64>> {
    line.split(',')
        .map(|field| {
            field
                .trim()
                .parse::<f64>()
                .map_err(|_| CliError::data(format!("row {row}: bad number {field:?}")))
        })
        .collect()
}
