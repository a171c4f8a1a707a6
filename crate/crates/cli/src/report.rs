//! Machine-parsable metric output (one `key=value` per line) and the
//! aggregation of per-seed metric files into means with 95% confidence
//! intervals.

use crate::error::{CliError, Result};
use std::fs;
use std::path::Path;
use survcal_core::metrics::MetricReport;

pub const METRIC_KEYS: [&str; 5] = ["c_index", "d_cal", "km_cal", "ibs", "mae_po"];

pub fn render_report(report: &MetricReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("c_index={}\n", report.c_index));
    out.push_str(&format!("d_cal={}\n", report.d_cal));
    out.push_str(&format!("km_cal={}\n", report.km_cal));
    out.push_str(&format!("ibs={}\n", report.ibs));
    out.push_str(&format!("mae_po={}\n", report.mae_po));
    if let Some(hl) = &report.hl {
        out.push_str(&format!("hl={}\n", hl.statistic));
        out.push_str(&format!("hl_time={}\n", hl.t_star));
        out.push_str(&format!("hl_groups={}\n", hl.groups.len()));
    }
    out
}

pub fn render_pp_points(points: &[(f64, f64)]) -> String {
    let mut out = String::from("expected,observed\n");
    for (e, o) in points {
        out.push_str(&format!("{e},{o}\n"));
    }
    out
}

pub fn parse_metric_file(path: &Path) -> Result<Vec<(String, f64)>> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::data(format!(
                "{}: line {} is not key=value",
                path.display(),
                i + 1
            ))
        })?;
        let value: f64 = value.trim().parse().map_err(|_| {
            CliError::data(format!("{}: bad number on line {}", path.display(), i + 1))
        })?;
        out.push((key.trim().to_string(), value));
    }
    Ok(out)
}

/// Two-sided 97.5% Student-t quantiles for 1..=30 degrees of freedom; the
/// normal value beyond.
const T_975: [f64; 30] = [
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160,
    2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056,
    2.052, 2.048, 2.045, 2.042,
];

fn t_quantile(df: usize) -> f64 {
    if df == 0 {
        f64::NAN
    } else if df <= 30 {
        T_975[df - 1]
    } else {
        1.96
    }
}

/// Mean and 95% CI half-width of each metric across per-seed files.
pub fn aggregate(paths: &[&Path]) -> Result<String> {
    if paths.is_empty() {
        return Err(CliError::usage("report needs at least one metrics file"));
    }
    let mut per_key: Vec<(String, Vec<f64>)> = Vec::new();
    for path in paths {
        for (key, value) in parse_metric_file(path)? {
            match per_key.iter_mut().find(|(k, _)| *k == key) {
                Some((_, values)) => values.push(value),
                None => per_key.push((key, vec![value])),
            }
        }
    }
    let mut out = String::new();
    out.push_str(&format!("runs={}\n", paths.len()));
    for (key, values) in &per_key {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        if values.len() < 2 {
            out.push_str(&format!("{key}.mean={mean}\n{key}.ci95=0\n"));
            continue;
        }
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        let half = t_quantile(values.len() - 1) * (var / n).sqrt();
        out.push_str(&format!("{key}.mean={mean}\n{key}.ci95={half}\n"));
    }
    Ok(out)
}
