//! Synthetic right-censored data with a known ground-truth distribution.
//!
//! Event times follow a Weibull law whose scale depends log-linearly on the
//! covariates; censoring times are exponential with a rate tuned so the
//! realized censoring fraction matches a target. Event and censoring times
//! are independent given the covariates by construction.

use crate::curve::{Extrapolation, Interpolation, SurvivalCurve};
use crate::data::{SurvivalDataset, SurvivalRecord};
use crate::error::Result;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub n: usize,
    pub feature_dim: usize,
    /// Intercept of the log-scale: lambda(x) = exp(beta0 + x . beta).
    pub beta0: f64,
    /// One coefficient per feature.
    pub beta: Vec<f64>,
    /// Weibull shape k.
    pub shape: f64,
    /// Target fraction of censored subjects in [0, 1).
    pub censor_fraction: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(n: usize, feature_dim: usize, censor_fraction: f64, seed: u64) -> Self {
        Self {
            n,
            feature_dim,
            beta0: 1.0,
            beta: vec![0.5; feature_dim],
            shape: 2.0,
            censor_fraction,
            seed,
        }
    }
}

/// The true conditional survival distribution behind a synthetic dataset.
#[derive(Debug, Clone)]
pub struct WeibullOracle {
    pub beta0: f64,
    pub beta: Vec<f64>,
    pub shape: f64,
}

impl WeibullOracle {
    pub fn scale(&self, x: &[f64]) -> f64 {
        let mu = self.beta0 + x.iter().zip(&self.beta).map(|(a, b)| a * b).sum::<f64>();
        mu.exp()
    }

    /// True S(t | x) = exp(-(t / lambda(x))^k).
    pub fn survival(&self, x: &[f64], t: f64) -> f64 {
        (-(t / self.scale(x)).powf(self.shape)).exp()
    }

    /// Exact time at which S(t | x) = rho.
    pub fn percentile_time(&self, x: &[f64], rho: f64) -> f64 {
        self.scale(x) * (-rho.ln()).powf(1.0 / self.shape)
    }

    /// Materializes the true curve on quantile-spaced knots, so the knots sit
    /// exactly on the distribution and interpolation error stays small.
    pub fn curve(&self, x: &[f64], knots: usize) -> SurvivalCurve {
        let mut times = Vec::with_capacity(knots);
        let mut probs = Vec::with_capacity(knots);
        for i in 1..=knots {
            let rho = 1.0 - i as f64 / (knots + 1) as f64;
            times.push(self.percentile_time(x, rho));
            probs.push(rho);
        }
        SurvivalCurve::new(
            times,
            probs,
            Interpolation::Linear,
            Extrapolation::LinearToZero,
        )
        .expect("quantile knots are valid")
    }

    pub fn curves(&self, ds: &SurvivalDataset, knots: usize) -> Vec<SurvivalCurve> {
        ds.records()
            .iter()
            .map(|r| self.curve(&r.features, knots))
            .collect()
    }
}

/// Standard normal draw via Box-Muller.
fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Exponential censoring rate matching the target fraction for the drawn
/// event times: solves mean(1 - exp(-rate * e_i)) = target by bisection.
fn tune_censor_rate(event_times: &[f64], target: f64) -> f64 {
    if target <= 0.0 {
        return 0.0;
    }
    let frac = |rate: f64| {
        event_times
            .iter()
            .map(|&e| 1.0 - (-rate * e).exp())
            .sum::<f64>()
            / event_times.len() as f64
    };
    let mut hi = 1.0;
    while frac(hi) < target {
        hi *= 2.0;
        if hi > 1e12 {
            break;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if frac(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Draws a dataset and returns it with the oracle that generated it.
pub fn generate(spec: &SyntheticSpec) -> Result<(SurvivalDataset, WeibullOracle)> {
    assert_eq!(spec.beta.len(), spec.feature_dim);
    let oracle = WeibullOracle {
        beta0: spec.beta0,
        beta: spec.beta.clone(),
        shape: spec.shape,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut features = Vec::with_capacity(spec.n);
    let mut event_times = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let x: Vec<f64> = (0..spec.feature_dim)
            .map(|_| standard_normal(&mut rng))
            .collect();
        let u: f64 = 1.0 - rng.random::<f64>();
        let e = oracle.scale(&x) * (-u.ln()).powf(1.0 / spec.shape);
        features.push(x);
        event_times.push(e);
    }
    let rate = tune_censor_rate(&event_times, spec.censor_fraction);
    let mut records = Vec::with_capacity(spec.n);
    for (x, e) in features.into_iter().zip(event_times) {
        let c = if rate > 0.0 {
            let u: f64 = 1.0 - rng.random::<f64>();
            -u.ln() / rate
        } else {
            f64::INFINITY
        };
        let (t, event) = if e <= c { (e, true) } else { (c, false) };
        records.push(SurvivalRecord::new(x, t, event));
    }
    let names = (0..spec.feature_dim).map(|j| format!("x{j}")).collect();
    Ok((SurvivalDataset::new(records, names)?, oracle))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_target_means_no_censoring() {
        let (ds, _) = generate(&SyntheticSpec::new(200, 2, 0.0, 1)).unwrap();
        assert_eq!(ds.n_censored(), 0);
    }

    #[test]
    fn censor_fraction_hits_target() {
        let (ds, _) = generate(&SyntheticSpec::new(10_000, 2, 0.4, 5)).unwrap();
        let frac = ds.n_censored() as f64 / ds.len() as f64;
        assert!((0.37..=0.43).contains(&frac), "fraction {frac}");
    }

    #[test]
    fn deterministic_given_seed() {
        let (a, _) = generate(&SyntheticSpec::new(50, 3, 0.3, 9)).unwrap();
        let (b, _) = generate(&SyntheticSpec::new(50, 3, 0.3, 9)).unwrap();
        assert_eq!(a.records(), b.records());
    }

    #[test]
    fn oracle_curve_matches_closed_form() {
        let oracle = WeibullOracle {
            beta0: 0.5,
            beta: vec![0.2],
            shape: 1.7,
        };
        let x = [0.3];
        let curve = oracle.curve(&x, 199);
        for t in [0.1, 0.5, 1.0, 2.0] {
            assert!((curve.eval(t) - oracle.survival(&x, t)).abs() < 2e-3);
        }
        let rho = 0.35;
        assert!((curve.inverse(rho).unwrap() - oracle.percentile_time(&x, rho)).abs() < 1e-2);
    }
}
