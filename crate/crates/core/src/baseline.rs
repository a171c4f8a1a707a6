//! Self-contained survival predictors: a Weibull accelerated-failure-time
//! model fit by penalized censored maximum likelihood, and the group-level
//! Kaplan-Meier "dummy" that hands the same curve to every subject.
//!
//! The AFT model works on the log-time scale: with y = ln t,
//! mu(x) = x' beta and z = (y - mu) / sigma, the log-likelihood per subject
//! is `delta * (-ln sigma - y + z) - exp(z)`. This is the usual extreme-value
//! form of S(t | x) = exp(-(t / lambda)^k) with lambda = exp(mu) and
//! k = 1 / sigma.

use crate::curve::{Extrapolation, Interpolation, SurvivalCurve};
use crate::data::SurvivalDataset;
use crate::error::{Error, Result};
use crate::km::KmCurve;

/// Feature standardization fitted on training data.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(ds: &SurvivalDataset) -> Self {
        let d = ds.feature_dim();
        let n = ds.len() as f64;
        let mut mean = vec![0.0; d];
        for r in ds.records() {
            for (m, &x) in mean.iter_mut().zip(&r.features) {
                *m += x;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; d];
        for r in ds.records() {
            for (v, (&x, &m)) in var.iter_mut().zip(r.features.iter().zip(&mean)) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, std }
    }

    /// Design row for one subject: intercept then standardized features.
    pub fn design_row(&self, x: &[f64]) -> Vec<f64> {
        let mut row = Vec::with_capacity(x.len() + 1);
        row.push(1.0);
        for ((&xi, &m), &s) in x.iter().zip(&self.mean).zip(&self.std) {
            row.push((xi - m) / s);
        }
        row
    }
}

/// Mean penalized censored log-likelihood and its gradient over the packed
/// parameter vector `[beta_0, ..., beta_d, log_sigma]`. The L2 penalty acts
/// on the non-intercept coefficients only.
#[derive(Debug, Clone)]
pub struct WeibullObjective {
    design: Vec<Vec<f64>>,
    log_times: Vec<f64>,
    events: Vec<bool>,
    l2: f64,
}

impl WeibullObjective {
    pub fn new(ds: &SurvivalDataset, standardizer: &Standardizer, l2: f64) -> Result<Self> {
        let mut log_times = Vec::with_capacity(ds.len());
        for (i, r) in ds.records().iter().enumerate() {
            if r.time <= 0.0 {
                return Err(Error::ZeroTime {
                    index: i,
                    time: r.time,
                });
            }
            log_times.push(r.time.ln());
        }
        Ok(WeibullObjective {
            design: ds
                .records()
                .iter()
                .map(|r| standardizer.design_row(&r.features))
                .collect(),
            log_times,
            events: ds.events(),
            l2,
        })
    }

    pub fn n_params(&self) -> usize {
        self.design[0].len() + 1
    }

    fn mean_log_time(&self) -> f64 {
        self.log_times.iter().sum::<f64>() / self.log_times.len() as f64
    }

    fn var_log_time(&self) -> f64 {
        let m = self.mean_log_time();
        self.log_times
            .iter()
            .map(|y| (y - m) * (y - m))
            .sum::<f64>()
            / self.log_times.len() as f64
    }

    pub fn value_and_grad(&self, params: &[f64]) -> (f64, Vec<f64>) {
        let p = params.len();
        let (beta, log_sigma) = (&params[..p - 1], params[p - 1]);
        let sigma = log_sigma.exp();
        let n = self.design.len() as f64;
        let mut value = 0.0;
        let mut grad = vec![0.0; p];
        for ((row, &y), &event) in self.design.iter().zip(&self.log_times).zip(&self.events) {
            let mu: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
            let z = (y - mu) / sigma;
            let ez = z.exp();
            let delta = if event { 1.0 } else { 0.0 };
            value += delta * (-log_sigma - y + z) - ez;
            let dz = delta - ez;
            // dz/dbeta_j = -row_j / sigma ; dz/dlog_sigma = -z.
            for (g, &xj) in grad[..p - 1].iter_mut().zip(row) {
                *g += dz * (-xj / sigma);
            }
            grad[p - 1] += -delta + dz * (-z);
        }
        value /= n;
        for g in grad.iter_mut() {
            *g /= n;
        }
        for j in 1..p - 1 {
            value -= 0.5 * self.l2 * beta[j] * beta[j];
            grad[j] -= self.l2 * beta[j];
        }
        (value, grad)
    }
}

#[derive(Debug, Clone)]
pub struct WeibullFitOptions {
    /// L2 penalty on non-intercept coefficients (standardized scale).
    pub l2: f64,
    /// Convergence tolerance on the gradient norm of the mean objective.
    pub tol: f64,
    pub max_iter: usize,
    /// Fixes log(sigma), e.g. `Some(0.0)` pins the shape at k = 1.
    pub fix_log_sigma: Option<f64>,
}

impl Default for WeibullFitOptions {
    fn default() -> Self {
        Self {
            l2: 1e-4,
            tol: 1e-6,
            max_iter: 5000,
            fix_log_sigma: None,
        }
    }
}

/// Fit diagnostics alongside the model.
#[derive(Debug, Clone)]
pub struct WeibullFit {
    pub model: WeibullAftModel,
    pub iterations: usize,
    pub grad_norm: f64,
    /// Objective value after every accepted step; non-decreasing by the
    /// line-search construction.
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeibullAftModel {
    /// Intercept plus one coefficient per standardized feature.
    beta: Vec<f64>,
    log_sigma: f64,
    standardizer: Standardizer,
    default_grid: Vec<f64>,
}

impl WeibullAftModel {
    pub fn fit(train: &SurvivalDataset, opts: &WeibullFitOptions) -> Result<WeibullAftModel> {
        Ok(Self::fit_traced(train, opts)?.model)
    }

    pub fn fit_traced(train: &SurvivalDataset, opts: &WeibullFitOptions) -> Result<WeibullFit> {
        let standardizer = Standardizer::fit(train);
        let objective = WeibullObjective::new(train, &standardizer, opts.l2)?;
        let p = objective.n_params();

        // Start from the marginal log-time distribution.
        let mut params = vec![0.0; p];
        params[0] = objective.mean_log_time();
        params[p - 1] = opts
            .fix_log_sigma
            .unwrap_or_else(|| objective.var_log_time().sqrt().max(0.1).ln());

        let (mut value, mut grad) = objective.value_and_grad(&params);
        if opts.fix_log_sigma.is_some() {
            grad[p - 1] = 0.0;
        }
        let mut trace = vec![value];
        let mut step = 1.0;
        let mut iterations = 0;
        let mut grad_norm = norm(&grad);
        while grad_norm > opts.tol && iterations < opts.max_iter {
            iterations += 1;
            let mut accepted = false;
            let mut first_try = true;
            for _ in 0..80 {
                let candidate: Vec<f64> = params
                    .iter()
                    .zip(&grad)
                    .map(|(x, g)| x + step * g)
                    .collect();
                let (v, mut g) = objective.value_and_grad(&candidate);
                if v.is_finite() && v >= value + 1e-4 * step * grad_norm * grad_norm {
                    if opts.fix_log_sigma.is_some() {
                        g[p - 1] = 0.0;
                    }
                    params = candidate;
                    value = v;
                    grad = g;
                    grad_norm = norm(&grad);
                    trace.push(value);
                    if first_try {
                        step *= 1.5;
                    }
                    accepted = true;
                    break;
                }
                step *= 0.5;
                first_try = false;
            }
            if !accepted {
                break;
            }
        }
        if grad_norm > opts.tol {
            return Err(Error::NonConvergence {
                iterations,
                grad_norm,
            });
        }
        let beta = params[..p - 1].to_vec();
        let log_sigma = params[p - 1];
        let mut model = WeibullAftModel {
            beta,
            log_sigma,
            standardizer,
            default_grid: Vec::new(),
        };
        model.default_grid = model.build_default_grid(train);
        Ok(WeibullFit {
            model,
            iterations,
            grad_norm,
            objective_trace: trace,
        })
    }

    /// Model with explicit original-scale parameters and no standardization,
    /// used when loading a stored model or building fixtures.
    pub fn from_parameters(beta: Vec<f64>, log_sigma: f64, grid: Vec<f64>) -> WeibullAftModel {
        let d = beta.len() - 1;
        WeibullAftModel {
            beta,
            log_sigma,
            standardizer: Standardizer {
                mean: vec![0.0; d],
                std: vec![1.0; d],
            },
            default_grid: grid,
        }
    }

    /// Weibull scale lambda(x).
    pub fn scale(&self, x: &[f64]) -> f64 {
        let row = self.standardizer.design_row(x);
        let mu: f64 = row.iter().zip(&self.beta).map(|(a, b)| a * b).sum();
        mu.exp()
    }

    /// Weibull shape k = 1 / sigma.
    pub fn shape(&self) -> f64 {
        (-self.log_sigma).exp()
    }

    pub fn log_sigma(&self) -> f64 {
        self.log_sigma
    }

    /// Intercept and coefficients mapped back to the original feature scale.
    pub fn coefficients(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.beta.len());
        let mut intercept = self.beta[0];
        for ((&b, &m), &s) in self.beta[1..]
            .iter()
            .zip(&self.standardizer.mean)
            .zip(&self.standardizer.std)
        {
            intercept -= b * m / s;
        }
        out.push(intercept);
        for (&b, &s) in self.beta[1..].iter().zip(&self.standardizer.std) {
            out.push(b / s);
        }
        out
    }

    /// Copy with the scale multiplied by `factor` everywhere; a factor of 2
    /// yields the deliberately miscalibrated variant used in calibration
    /// experiments.
    pub fn with_scale_factor(&self, factor: f64) -> WeibullAftModel {
        assert!(factor > 0.0);
        let mut out = self.clone();
        out.beta[0] += factor.ln();
        out
    }

    pub fn survival(&self, x: &[f64], t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        (-(t / self.scale(x)).powf(self.shape())).exp()
    }

    pub fn default_grid(&self) -> &[f64] {
        &self.default_grid
    }

    pub fn predict_on_grid(&self, x: &[f64], grid: &[f64]) -> Result<SurvivalCurve> {
        let probs: Vec<f64> = grid.iter().map(|&t| self.survival(x, t)).collect();
        SurvivalCurve::new(
            grid.to_vec(),
            probs,
            Interpolation::Linear,
            Extrapolation::LinearToZero,
        )
    }

    pub fn predict(&self, x: &[f64]) -> Result<SurvivalCurve> {
        self.predict_on_grid(x, &self.default_grid)
    }

    pub fn predict_dataset(&self, ds: &SurvivalDataset) -> Result<Vec<SurvivalCurve>> {
        ds.records()
            .iter()
            .map(|r| self.predict(&r.features))
            .collect()
    }

    /// 200-point grid from 0 to the 99.9th percentile of the fitted marginal
    /// survival, linear up to the first decile of event mass and geometric
    /// beyond it.
    fn build_default_grid(&self, train: &SurvivalDataset) -> Vec<f64> {
        let marginal = |t: f64| -> f64 {
            train
                .records()
                .iter()
                .map(|r| self.survival(&r.features, t))
                .sum::<f64>()
                / train.len() as f64
        };
        let t_head = invert_decreasing(&marginal, 0.9);
        let t_tail = invert_decreasing(&marginal, 0.001);
        let mut grid = Vec::with_capacity(200);
        grid.push(0.0);
        let head_points = 20usize;
        for i in 1..=head_points {
            grid.push(t_head * i as f64 / head_points as f64);
        }
        let tail_points = 179usize;
        let ratio = t_tail / t_head;
        for i in 1..=tail_points {
            grid.push(t_head * ratio.powf(i as f64 / tail_points as f64));
        }
        grid.dedup_by(|a, b| *a <= *b);
        grid
    }
}

fn invert_decreasing(f: &dyn Fn(f64) -> f64, target: f64) -> f64 {
    let mut hi = 1.0;
    while f(hi) > target && hi < 1e300 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// The Kaplan-Meier "dummy" predictor: the training-set curve handed to every
/// test subject. Minimal discrimination, near-perfect calibration.
pub fn km_dummy_predict(train: &SurvivalDataset) -> Result<SurvivalCurve> {
    Ok(KmCurve::fit(train)?.curve().clone())
}
