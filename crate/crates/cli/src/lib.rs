//! Command-line pipeline: generate or ingest survival data, split it, fit a
//! baseline model, predict survival curves, conformalize the predictions,
//! and evaluate. Every path is reproducible from the inputs, flags and seed
//! alone.

pub mod dataset_io;
pub mod error;
pub mod isd;
pub mod model_file;
pub mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use survcal_core::baseline::{km_dummy_predict, WeibullAftModel, WeibullFitOptions};
use survcal_core::conformal::{conformalize, CensorHandler, ConformalPolicy, ConformalConfig};
use survcal_core::curve::PercentileGrid;
use survcal_core::km::KmCurve;
use survcal_core::metrics::evaluate_predictions;
use survcal_core::synth::{generate, SyntheticSpec};

use dataset_io::{load_dataset, save_dataset, DatasetSchema};
use error::{CliError, Result};
use isd::IsdFile;
use model_file::{load_model, save_model, StoredModel};

#[derive(Parser)]
#[command(
    name = "survcal",
    version,
    about = "Conformal calibration of survival predictions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct SchemaArgs {
    /// Column holding observed times.
    #[arg(long, default_value = "time")]
    time_col: String,
    /// Column holding the event indicator (0/1 or true/false).
    #[arg(long, default_value = "event")]
    event_col: String,
    /// Comma-separated feature columns; all remaining columns when omitted.
    #[arg(long)]
    features: Option<String>,
}

impl SchemaArgs {
    fn schema(&self) -> DatasetSchema {
        DatasetSchema {
            time_col: self.time_col.clone(),
            event_col: self.event_col.clone(),
            feature_cols: self
                .features
                .as_ref()
                .map(|s| s.split(',').map(|c| c.trim().to_string()).collect()),
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum HandlerArg {
    #[value(name = "uncensored")]
    Uncensored,
    #[value(name = "margin")]
    Margin,
    #[value(name = "pseudo_observation")]
    PseudoObservation,
    #[value(name = "km_sampling")]
    KmSampling,
}

impl From<HandlerArg> for CensorHandler {
    fn from(h: HandlerArg) -> Self {
        match h {
            HandlerArg::Uncensored => CensorHandler::Uncensored,
            HandlerArg::Margin => CensorHandler::Margin,
            HandlerArg::PseudoObservation => CensorHandler::PseudoObservation,
            HandlerArg::KmSampling => CensorHandler::KmSampling,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum PolicyArg {
    #[value(name = "separate_validation")]
    SeparateValidation,
    #[value(name = "merged_train_and_validation")]
    MergedTrainAndValidation,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ModelArg {
    #[value(name = "weibull_aft")]
    WeibullAft,
    #[value(name = "km_dummy")]
    KmDummy,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with known ground truth.
    Synth {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        features: usize,
        #[arg(long, default_value_t = 0.0)]
        censor_fraction: f64,
        #[arg(long, default_value_t = 2.0)]
        shape: f64,
        #[arg(long, default_value_t = 1.0)]
        beta0: f64,
        /// Comma-separated coefficients, 0.5 per feature when omitted.
        #[arg(long)]
        beta: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split a dataset into parts that balance times and censoring.
    Split {
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated positive fractions summing to one.
        #[arg(long)]
        fractions: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Parts are written to <out-prefix>_<k>.csv.
        #[arg(long)]
        out_prefix: String,
        #[command(flatten)]
        schema: SchemaArgs,
    },
    /// Fit a baseline model and store it.
    Fit {
        #[arg(long, value_enum)]
        model: ModelArg,
        #[arg(long)]
        train: PathBuf,
        #[arg(long, default_value_t = 1e-4)]
        l2: f64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        schema: SchemaArgs,
    },
    /// Predict survival curves for a dataset from a stored model.
    Predict {
        #[arg(long)]
        model_file: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        schema: SchemaArgs,
    },
    /// Conformalize test predictions against a conformal set.
    Conformalize {
        #[arg(long)]
        isd_conformal: PathBuf,
        #[arg(long)]
        labels_conformal: PathBuf,
        #[arg(long)]
        isd_test: PathBuf,
        /// Training labels; fits the Kaplan-Meier curve the censor handlers
        /// rely on, and joins the conformal set under the merged policy.
        #[arg(long)]
        train: PathBuf,
        #[arg(long, value_enum, default_value = "km_sampling")]
        handler: HandlerArg,
        /// Number of percentile levels.
        #[arg(long, default_value_t = 19)]
        grid: usize,
        #[arg(long, default_value_t = 1000)]
        repeat_r: usize,
        #[arg(long, value_enum, default_value = "separate_validation")]
        policy: PolicyArg,
        /// Predictions for the training set; required under the merged policy.
        #[arg(long)]
        isd_train: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        schema: SchemaArgs,
    },
    /// Evaluate predictions: one metric per line, machine-parsable.
    Evaluate {
        #[arg(long)]
        isd: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Training labels for the censoring distribution of the Brier score.
        #[arg(long)]
        train: PathBuf,
        /// Evaluate single-time calibration at this time.
        #[arg(long)]
        hl_time: Option<f64>,
        #[arg(long)]
        hl_groups: Option<usize>,
        /// Write the P-P plot points here.
        #[arg(long)]
        pp_out: Option<PathBuf>,
        /// Also write the metric lines to this file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        schema: SchemaArgs,
    },
    /// Aggregate per-seed metric files into means with 95% intervals.
    Report {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Wall-time of the conformal step per censor handler.
    Bench {
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 0.3)]
        censor_fraction: f64,
        #[arg(long, default_value_t = 1000)]
        repeat_r: usize,
        #[arg(long, default_value_t = 19)]
        grid: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let mut argv: Vec<String> = args.into_iter().map(Into::into).collect();
    if let Err(e) = apply_config_file(&mut argv) {
        eprintln!("{e}");
        return e.exit_code();
    }
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprintln!("{e}");
            return 1;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

/// `--config FILE` supplies defaults as `flag = value` lines; flags given on
/// the command line win.
fn apply_config_file(argv: &mut Vec<String>) -> Result<()> {
    let pos = match argv.iter().position(|a| a == "--config") {
        Some(p) => p,
        None => return Ok(()),
    };
    if pos + 1 >= argv.len() {
        return Err(CliError::usage("--config needs a file path"));
    }
    let path = argv.remove(pos + 1);
    argv.remove(pos);
    let text =
        fs::read_to_string(&path).map_err(|e| CliError::usage(format!("config {path}: {e}")))?;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::usage(format!("config line {}: expected key = value", i + 1))
        })?;
        let flag = format!("--{}", key.trim());
        let already = argv
            .iter()
            .any(|a| *a == flag || a.starts_with(&format!("{flag}=")));
        if !already {
            argv.push(flag);
            argv.push(value.trim().to_string());
        }
    }
    Ok(())
}

fn parse_fraction_list(raw: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|_| CliError::usage(format!("bad fraction {f:?}")))
        })
        .collect()
}

fn grid_from_count(count: usize) -> Result<PercentileGrid> {
    match count {
        9 | 19 | 39 | 49 | 99 => Ok(PercentileGrid::evenly_spaced(count)),
        other => Err(CliError::usage(format!(
            "--grid must be one of 9, 19, 39, 49, 99 (got {other})"
        ))),
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Synth {
            n,
            features,
            censor_fraction,
            shape,
            beta0,
            beta,
            seed,
            out,
        } => {
            let beta = match beta {
                Some(raw) => {
                    let parsed = parse_fraction_list(&raw)?;
                    if parsed.len() != features {
                        return Err(CliError::usage(format!(
                            "--beta lists {} coefficients for {features} features",
                            parsed.len()
                        )));
                    }
                    parsed
                }
                None => vec![0.5; features],
            };
            let spec = SyntheticSpec {
                n,
                feature_dim: features,
                beta0,
                beta,
                shape,
                censor_fraction,
                seed,
            };
            let (ds, _) = generate(&spec)?;
            save_dataset(&out, &ds, &DatasetSchema::default())
        }
        Command::Split {
            input,
            fractions,
            seed,
            out_prefix,
            schema,
        } => {
            let fractions = parse_fraction_list(&fractions)?;
            let ds = load_dataset(&input, &schema.schema())?;
            let parts = ds.stratified_split(&fractions, seed)?;
            for (k, part) in parts.iter().enumerate() {
                let path = PathBuf::from(format!("{out_prefix}_{k}.csv"));
                save_dataset(&path, part, &schema.schema())?;
            }
            Ok(())
        }
        Command::Fit {
            model,
            train,
            l2,
            tol,
            out,
            schema,
        } => {
            let ds = load_dataset(&train, &schema.schema())?;
            let stored = match model {
                ModelArg::WeibullAft => {
                    let opts = WeibullFitOptions {
                        l2,
                        tol,
                        ..Default::default()
                    };
                    StoredModel::WeibullAft(WeibullAftModel::fit(&ds, &opts)?)
                }
                ModelArg::KmDummy => StoredModel::KmDummy(km_dummy_predict(&ds)?),
            };
            save_model(&out, &stored)
        }
        Command::Predict {
            model_file,
            data,
            out,
            schema,
        } => {
            let model = load_model(&model_file)?;
            let ds = load_dataset(&data, &schema.schema())?;
            let curves = model.predict_dataset(&ds)?;
            IsdFile::from_shared_curves(&curves)?.write(&out)
        }
        Command::Conformalize {
            isd_conformal,
            labels_conformal,
            isd_test,
            train,
            handler,
            grid,
            repeat_r,
            policy,
            isd_train,
            seed,
            out,
            schema,
        } => {
            let grid = grid_from_count(grid)?;
            if matches!(policy, PolicyArg::SeparateValidation) && isd_train.is_some() {
                return Err(CliError::usage(
                    "--isd-train only applies to the merged policy",
                ));
            }
            let schema = schema.schema();
            let train_ds = load_dataset(&train, &schema)?;
            let val_labels = load_dataset(&labels_conformal, &schema)?;
            let val_preds = IsdFile::read(&isd_conformal)?.to_curves()?;
            if val_preds.len() != val_labels.len() {
                return Err(CliError::data(format!(
                    "{} conformal predictions for {} labels",
                    val_preds.len(),
                    val_labels.len()
                )));
            }
            let (conformal_labels, conformal_preds) = match policy {
                PolicyArg::SeparateValidation => (val_labels, val_preds),
                PolicyArg::MergedTrainAndValidation => {
                    let isd_train = isd_train.ok_or_else(|| {
                        CliError::usage("merged policy needs --isd-train predictions")
                    })?;
                    let train_preds = IsdFile::read(&isd_train)?.to_curves()?;
                    if train_preds.len() != train_ds.len() {
                        return Err(CliError::data(format!(
                            "{} training predictions for {} training labels",
                            train_preds.len(),
                            train_ds.len()
                        )));
                    }
                    let mut preds = train_preds;
                    preds.extend(val_preds);
                    (train_ds.concat(&val_labels)?, preds)
                }
            };
            let test_preds = IsdFile::read(&isd_test)?.to_curves()?;
            let cfg = ConformalConfig {
                handler: handler.into(),
                repeat_r,
                grid,
                policy: match policy {
                    PolicyArg::SeparateValidation => ConformalPolicy::SeparateValidation,
                    PolicyArg::MergedTrainAndValidation => {
                        ConformalPolicy::MergedTrainAndValidation
                    }
                },
                seed,
            };
            let km = KmCurve::fit(&train_ds)?;
            let outcome =
                conformalize(&conformal_preds, &conformal_labels, &test_preds, &km, &cfg)?;
            for (level, overflow) in outcome.rank_overflow.iter().enumerate() {
                if *overflow {
                    eprintln!(
                        "warning: corrected rank exceeded the sample at level {}; using the maximum score",
                        cfg.grid.levels()[level]
                    );
                }
            }
            IsdFile::from_pct_matrix(&outcome.final_pcts).write(&out)
        }
        Command::Evaluate {
            isd,
            labels,
            train,
            hl_time,
            hl_groups,
            pp_out,
            out,
            schema,
        } => {
            let schema = schema.schema();
            let test = load_dataset(&labels, &schema)?;
            let train = load_dataset(&train, &schema)?;
            let preds = IsdFile::read(&isd)?.to_curves()?;
            let hl = match (hl_time, hl_groups) {
                (Some(t), Some(k)) => Some((t, k)),
                (Some(t), None) => Some((t, 10)),
                (None, Some(_)) => {
                    return Err(CliError::usage("--hl-groups needs --hl-time"));
                }
                (None, None) => None,
            };
            let metric_report = evaluate_predictions(&preds, &test, &train, hl)?;
            let text = report::render_report(&metric_report);
            print!("{text}");
            if let Some(path) = out {
                fs::write(path, &text)?;
            }
            if let Some(path) = pp_out {
                fs::write(path, report::render_pp_points(&metric_report.pp_points))?;
            }
            Ok(())
        }
        Command::Report { files, out } => {
            let refs: Vec<&Path> = files.iter().map(|p| p.as_path()).collect();
            let text = report::aggregate(&refs)?;
            print!("{text}");
            if let Some(path) = out {
                fs::write(path, &text)?;
            }
            Ok(())
        }
        Command::Bench {
            n,
            censor_fraction,
            repeat_r,
            grid,
            seed,
        } => {
            let spec = SyntheticSpec::new(n, 2, censor_fraction, seed);
            let (full, _) = generate(&spec)?;
            let parts = full.stratified_split(&[0.8, 0.2], seed)?;
            let (train, test) = (&parts[0], &parts[1]);
            let model = WeibullAftModel::fit(train, &WeibullFitOptions::default())?;
            let conformal_preds = model.predict_dataset(train)?;
            let test_preds = model.predict_dataset(test)?;
            let km = KmCurve::fit(train)?;
            for handler in [
                CensorHandler::Uncensored,
                CensorHandler::Margin,
                CensorHandler::PseudoObservation,
                CensorHandler::KmSampling,
            ] {
                let cfg = ConformalConfig {
                    handler,
                    repeat_r,
                    grid: grid_from_count(grid)?,
                    policy: ConformalPolicy::MergedTrainAndValidation,
                    seed,
                };
                let start = Instant::now();
                let _ = conformalize(&conformal_preds, train, &test_preds, &km, &cfg)?;
                println!(
                    "handler={} seconds={:.3}",
                    handler.name(),
                    start.elapsed().as_secs_f64()
                );
            }
            Ok(())
        }
    }
}
