//! Versioned structured-text model files.

use crate::error::{CliError, Result};
use std::fs;
use std::path::Path;
use survcal_core::baseline::WeibullAftModel;
use survcal_core::curve::{Extrapolation, Interpolation, SurvivalCurve};
use survcal_core::data::SurvivalDataset;

#[derive(Debug, Clone)]
pub enum StoredModel {
    /// Original-scale coefficients (intercept first), log sigma, and the
    /// prediction grid chosen at fit time.
    WeibullAft(WeibullAftModel),
    /// The training-set curve handed to every subject.
    KmDummy(SurvivalCurve),
}

impl StoredModel {
    pub fn predict_dataset(&self, ds: &SurvivalDataset) -> Result<Vec<SurvivalCurve>> {
        match self {
            StoredModel::WeibullAft(model) => {
                if ds.feature_dim() + 1 != model.coefficients().len() {
                    return Err(CliError::data(format!(
                        "model expects {} features, dataset has {}",
                        model.coefficients().len() - 1,
                        ds.feature_dim()
                    )));
                }
                model
                    .predict_dataset(ds)
                    .map_err(|e| CliError::data(e.to_string()))
            }
            StoredModel::KmDummy(curve) => Ok(vec![curve.clone(); ds.len()]),
        }
    }
}

fn push_values(out: &mut String, key: &str, values: &[f64]) {
    out.push_str(key);
    out.push_str(": ");
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&format!("{v}"));
    }
    out.push('\n');
}

pub fn save_model(path: &Path, model: &StoredModel) -> Result<()> {
    let mut out = String::new();
    match model {
        StoredModel::WeibullAft(m) => {
            out.push_str("model: weibull-aft v1\n");
            push_values(&mut out, "coefficients", &m.coefficients());
            push_values(&mut out, "log_sigma", &[m.log_sigma()]);
            push_values(&mut out, "grid", m.default_grid());
        }
        StoredModel::KmDummy(curve) => {
            out.push_str("model: km-dummy v1\n");
            push_values(&mut out, "times", curve.times());
            push_values(&mut out, "probs", curve.probs());
        }
    }
    fs::write(path, out)?;
    Ok(())
}

fn take_values(lines: &mut std::str::Lines, key: &str) -> Result<Vec<f64>> {
    let line = lines
        .next()
        .ok_or_else(|| CliError::data(format!("model file truncated before {key:?}")))?;
    let rest = line
        .strip_prefix(key)
        .and_then(|r| r.strip_prefix(':'))
        .ok_or_else(|| CliError::data(format!("expected {key:?} line, found {line:?}")))?;
    rest.trim()
        .split(',')
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|_| CliError::data(format!("{key}: bad number {f:?}")))
        })
        .collect()
}

pub fn load_model(path: &Path) -> Result<StoredModel> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::data(format!("{}: empty model file", path.display())))?;
    match header.trim() {
        "model: weibull-aft v1" => {
            let coefficients = take_values(&mut lines, "coefficients")?;
            let log_sigma = take_values(&mut lines, "log_sigma")?;
            let grid = take_values(&mut lines, "grid")?;
            if coefficients.is_empty() || log_sigma.len() != 1 {
                return Err(CliError::data("malformed weibull-aft parameters"));
            }
            Ok(StoredModel::WeibullAft(WeibullAftModel::from_parameters(
                coefficients,
                log_sigma[0],
                grid,
            )))
        }
        "model: km-dummy v1" => {
            let times = take_values(&mut lines, "times")?;
            let probs = take_values(&mut lines, "probs")?;
            let curve = SurvivalCurve::new(
                times,
                probs,
                Interpolation::Step,
                Extrapolation::LinearToZero,
            )
            .map_err(|e| CliError::data(e.to_string()))?;
            Ok(StoredModel::KmDummy(curve))
        }
        other => Err(CliError::data(format!("unknown model header {other:?}"))),
    }
}
