//! Delimited-text dataset files: a header row naming the columns, one
//! subject per data row. The event column accepts 0/1 or true/false. Rows
//! with non-positive times are rejected by name, matching the convention of
//! dropping zero-time subjects before modeling.

use crate::error::{CliError, Result};
use std::fs;
use std::path::Path;
use survcal_core::data::{SurvivalDataset, SurvivalRecord};

#[derive(Debug, Clone)]
pub struct DatasetSchema {
    pub time_col: String,
    pub event_col: String,
    /// Feature columns; every remaining column when omitted.
    pub feature_cols: Option<Vec<String>>,
}

impl Default for DatasetSchema {
    fn default() -> Self {
        Self {
            time_col: "time".into(),
            event_col: "event".into(),
            feature_cols: None,
        }
    }
}

fn parse_event(raw: &str, row: usize) -> Result<bool> {
    match raw.trim() {
        "1" | "true" | "True" | "TRUE" => Ok(true),
        "0" | "false" | "False" | "FALSE" => Ok(false),
        other => Err(CliError::data(format!(
            "row {row}: event value {other:?} is not one of 0/1/true/false"
        ))),
    }
}

pub fn load_dataset(path: &Path, schema: &DatasetSchema) -> Result<SurvivalDataset> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| CliError::data(format!("{}: empty file", path.display())))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let col_index = |name: &str| -> Result<usize> {
        columns
            .iter()
            .position(|c| *c == name)
            .ok_or_else(|| CliError::data(format!("{}: missing column {name:?}", path.display())))
    };
    let time_idx = col_index(&schema.time_col)?;
    let event_idx = col_index(&schema.event_col)?;
    let feature_idx: Vec<usize> = match &schema.feature_cols {
        Some(names) => names
            .iter()
            .map(|n| col_index(n))
            .collect::<Result<Vec<_>>>()?,
        None => (0..columns.len())
            .filter(|&i| i != time_idx && i != event_idx)
            .collect(),
    };
    let feature_names: Vec<String> = feature_idx
        .iter()
        .map(|&i| columns[i].to_string())
        .collect();

    let mut records = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row = lineno + 1; // 1-based, header is row 1
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(CliError::data(format!(
                "row {row}: {} fields, header has {}",
                fields.len(),
                columns.len()
            )));
        }
        let time: f64 = fields[time_idx].parse().map_err(|_| {
            CliError::data(format!(
                "row {row}, column {}: bad number {:?}",
                schema.time_col, fields[time_idx]
            ))
        })?;
        if time <= 0.0 || !time.is_finite() {
            return Err(CliError::data(format!(
                "row {row}: non-positive survival time {time}"
            )));
        }
        let event = parse_event(fields[event_idx], row)?;
        let mut features = Vec::with_capacity(feature_idx.len());
        for &i in &feature_idx {
            let v: f64 = fields[i].parse().map_err(|_| {
                CliError::data(format!(
                    "row {row}, column {}: bad number {:?}",
                    columns[i], fields[i]
                ))
            })?;
            features.push(v);
        }
        records.push(SurvivalRecord::new(features, time, event));
    }
    SurvivalDataset::new(records, feature_names).map_err(|e| CliError::data(e.to_string()))
}

pub fn save_dataset(path: &Path, ds: &SurvivalDataset, schema: &DatasetSchema) -> Result<()> {
    let mut out = String::new();
    out.push_str(&schema.time_col);
    out.push(',');
    out.push_str(&schema.event_col);
    for name in ds.feature_names() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for r in ds.records() {
        out.push_str(&format!("{}", r.time));
        out.push(',');
        out.push(if r.event { '1' } else { '0' });
        for x in &r.features {
            out.push(',');
            out.push_str(&format!("{x}"));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn tmp(name: &str) -> PathBuf {
        let mut p = std::env::temp_dir();
        p.push(format!("survcal-dataset-io-{}-{name}", std::process::id()));
        p
    }

    #[test]
    fn well_formed_file_loads() {
        let p = tmp("ok.csv");
        fs::write(&p, "time,event,x\n1.5,1,0.2\n2,0,-1\n3,true,0.5\n").unwrap();
        let ds = load_dataset(&p, &DatasetSchema::default()).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.feature_names(), ["x".to_string()]);
        assert!(ds.records()[2].event);
        fs::remove_file(&p).unwrap();
    }

    #[test]
    fn zero_time_row_is_named() {
        let p = tmp("zero.csv");
        fs::write(&p, "time,event\n1,1\n0,1\n").unwrap();
        let err = load_dataset(&p, &DatasetSchema::default()).unwrap_err();
        assert!(err.to_string().contains("row 3"), "{err}");
        fs::remove_file(&p).unwrap();
    }

    #[test]
    fn numeric_and_boolean_events_agree() {
        let a = tmp("num.csv");
        let b = tmp("bool.csv");
        fs::write(&a, "time,event\n1,1\n2,0\n").unwrap();
        fs::write(&b, "time,event\n1,true\n2,false\n").unwrap();
        let da = load_dataset(&a, &DatasetSchema::default()).unwrap();
        let db = load_dataset(&b, &DatasetSchema::default()).unwrap();
        assert_eq!(da.records(), db.records());
        fs::remove_file(&a).unwrap();
        fs::remove_file(&b).unwrap();
    }

    #[test]
    fn missing_column_is_reported() {
        let p = tmp("missing.csv");
        fs::write(&p, "t,event\n1,1\n").unwrap();
        let err = load_dataset(&p, &DatasetSchema::default()).unwrap_err();
        assert!(err.to_string().contains("missing column"), "{err}");
        fs::remove_file(&p).unwrap();
    }

    #[test]
    fn round_trip() {
        let p = tmp("rt.csv");
        let ds = SurvivalDataset::new(
            vec![
                SurvivalRecord::new(vec![0.25, -1.5], 1.75, true),
                SurvivalRecord::new(vec![1.0, 2.0], 0.3333333333333333, false),
            ],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        save_dataset(&p, &ds, &DatasetSchema::default()).unwrap();
        let back = load_dataset(&p, &DatasetSchema::default()).unwrap();
        assert_eq!(back.records(), ds.records());
        fs::remove_file(&p).unwrap();
    }
}
