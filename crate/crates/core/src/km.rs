//! Kaplan-Meier product-limit estimation, conditional distributions given
//! survival past a censoring time, inverse-CDF sampling, margin times, and
//! jackknife pseudo-observations.

use crate::curve::{Extrapolation, Interpolation, SurvivalCurve};
use crate::data::SurvivalDataset;
use crate::error::{Error, Result};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One row of the product-limit computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskRow {
    pub time: f64,
    pub at_risk: usize,
    pub events: usize,
    pub survival: f64,
}

/// Product-limit rows over the distinct event times of `(time, event)` pairs.
/// Ties between events and censorings at the same time are resolved with the
/// events first: censored subjects at that time are still in the risk set.
/// Tolerates data without any events (returns no rows).
pub fn product_limit(times: &[f64], events: &[bool]) -> Vec<RiskRow> {
    assert_eq!(times.len(), events.len());
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let mut rows = Vec::new();
    let mut survival = 1.0;
    let mut at_risk = times.len();
    let mut i = 0;
    while i < order.len() {
        let t = times[order[i]];
        let mut d = 0usize;
        let mut group = 0usize;
        while i + group < order.len() && times[order[i + group]] == t {
            if events[order[i + group]] {
                d += 1;
            }
            group += 1;
        }
        if d > 0 {
            survival *= 1.0 - d as f64 / at_risk as f64;
            rows.push(RiskRow {
                time: t,
                at_risk,
                events: d,
                survival,
            });
        }
        at_risk -= group;
        i += group;
    }
    rows
}

/// A fitted Kaplan-Meier curve together with its risk table.
#[derive(Debug, Clone, PartialEq)]
pub struct KmCurve {
    curve: SurvivalCurve,
    event_times: Vec<f64>,
    at_risk: Vec<usize>,
    events: Vec<usize>,
}

impl KmCurve {
    pub fn fit(ds: &SurvivalDataset) -> Result<KmCurve> {
        Self::from_raw(&ds.times(), &ds.events())
    }

    pub fn from_raw(times: &[f64], events: &[bool]) -> Result<KmCurve> {
        let rows = product_limit(times, events);
        if rows.is_empty() {
            return Err(Error::NoEvents);
        }
        let mut knot_times: Vec<f64> = rows.iter().map(|r| r.time).collect();
        let mut knot_probs: Vec<f64> = rows.iter().map(|r| r.survival).collect();
        // The curve runs flat to the last observation when the data end
        // censored; the linear extension is anchored there.
        let t_last = times.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if t_last > *knot_times.last().unwrap() {
            knot_times.push(t_last);
            knot_probs.push(*knot_probs.last().unwrap());
        }
        let curve = SurvivalCurve::new(
            knot_times,
            knot_probs,
            Interpolation::Step,
            Extrapolation::LinearToZero,
        )?;
        Ok(KmCurve {
            curve,
            event_times: rows.iter().map(|r| r.time).collect(),
            at_risk: rows.iter().map(|r| r.at_risk).collect(),
            events: rows.iter().map(|r| r.events).collect(),
        })
    }

    /// Reverse Kaplan-Meier of the censoring distribution: roles of event
    /// and censoring are swapped. Fully uncensored data yields the constant
    /// curve 1 (held beyond the data).
    pub fn fit_censoring(ds: &SurvivalDataset) -> Result<SurvivalCurve> {
        let flipped: Vec<bool> = ds.events().iter().map(|&e| !e).collect();
        let rows = product_limit(&ds.times(), &flipped);
        SurvivalCurve::new(
            rows.iter().map(|r| r.time).collect(),
            rows.iter().map(|r| r.survival).collect(),
            Interpolation::Step,
            Extrapolation::HoldLast,
        )
    }

    pub fn curve(&self) -> &SurvivalCurve {
        &self.curve
    }

    pub fn event_times(&self) -> &[f64] {
        &self.event_times
    }

    pub fn at_risk(&self) -> &[usize] {
        &self.at_risk
    }

    pub fn events(&self) -> &[usize] {
        &self.events
    }

    /// Survival at `t` on the extrapolated curve (zero past the crossing).
    pub fn survival_at(&self, t: f64) -> f64 {
        self.curve.eval(t)
    }

    /// Conditional survival distribution given survival past `c`:
    /// `min { S(t) / S(c), 1 }`, where `S` is the extrapolated curve when the
    /// raw steps have already reached zero at `c`. The result keeps the same
    /// zero-crossing as the extrapolated unconditional curve.
    pub fn conditional(&self, c: f64) -> Result<SurvivalCurve> {
        debug_assert!(c >= 0.0);
        let s_c = self.curve.eval(c);
        if s_c <= 0.0 {
            return Err(Error::DegenerateConditional { at: c });
        }
        let zero = self.curve.zero_crossing();
        let t_max = *self.curve.times().last().unwrap();
        if c >= t_max {
            // Only the linearly extrapolated tail remains: conditional is a
            // straight line from (c, 1) down to the inherited crossing.
            let zero = zero.ok_or(Error::DegenerateConditional { at: c })?;
            if zero <= c {
                return Err(Error::DegenerateConditional { at: c });
            }
            return SurvivalCurve::new(
                vec![c, zero],
                vec![1.0, 0.0],
                Interpolation::Linear,
                Extrapolation::LinearToZero,
            );
        }
        let mut times = Vec::new();
        let mut probs = Vec::new();
        for (k, &t) in self.curve.times().iter().enumerate() {
            if t > c {
                times.push(t);
                probs.push((self.curve.probs()[k] / s_c).min(1.0));
            }
        }
        let terminal = *probs.last().unwrap();
        let mut cond = SurvivalCurve::new(
            times,
            probs,
            Interpolation::Step,
            Extrapolation::LinearToZero,
        )?;
        if terminal > 0.0 {
            cond = cond.with_tail_zero(zero.unwrap());
        }
        Ok(cond)
    }

    /// Conditional expectation of the event time given survival past `c`:
    /// `c + integral of S from c to its crossing, divided by S(c)`. Returns
    /// `c` itself when no conditional mass remains.
    pub fn margin_time(&self, c: f64) -> f64 {
        match self.conditional(c) {
            Ok(cond) => cond
                .mean_survival_time()
                .expect("conditional curve reaches zero"),
            Err(_) => c,
        }
    }
}

/// One inverse-CDF draw from a survival curve: `S^{-1}(u)` with `u` uniform
/// on (0, 1). The curve must reach zero under its extrapolation.
pub fn sample_survival_time<R: Rng + ?Sized>(curve: &SurvivalCurve, rng: &mut R) -> Result<f64> {
    let u = loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            break u;
        }
    };
    curve.inverse(u)
}

/// Random stream for one (subject, repeat) cell, derived from the run seed.
/// Streams never depend on iteration order, so results are identical under
/// any parallel schedule.
pub fn subject_stream(seed: u64, subject: u64, repeat: u64) -> ChaCha8Rng {
    let m0 = splitmix(seed ^ 0x9e37_79b9_7f4a_7c15);
    let m1 = splitmix(m0 ^ subject);
    let m2 = splitmix(m1 ^ repeat.rotate_left(32));
    let m3 = splitmix(m2 ^ 0x2545_f491_4f6c_dd1d);
    let mut bytes = [0u8; 32];
    for (chunk, word) in bytes.chunks_exact_mut(8).zip([m0, m1, m2, m3]) {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Jackknife pseudo-observations for the mean survival time of the
/// Kaplan-Meier estimator: `N * theta - (N - 1) * theta_without_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoObservations {
    pub values: Vec<f64>,
    /// Subjects whose leave-one-out fit had no events and fell back to the
    /// full-sample estimate.
    pub fallback: Vec<usize>,
}

/// Computes one pseudo-observation per subject (censored and uncensored
/// alike) by refitting the Kaplan-Meier curve N times. The full-sample and
/// leave-one-out means use the same linear-to-zero extrapolation.
pub fn pseudo_observations(ds: &SurvivalDataset) -> Result<PseudoObservations> {
    let times = ds.times();
    let events = ds.events();
    let n = times.len();
    let theta = KmCurve::from_raw(&times, &events)?
        .curve()
        .mean_survival_time()?;
    let mut values = Vec::with_capacity(n);
    let mut fallback = Vec::new();
    let mut loo_times = Vec::with_capacity(n.saturating_sub(1));
    let mut loo_events = Vec::with_capacity(n.saturating_sub(1));
    for i in 0..n {
        loo_times.clear();
        loo_events.clear();
        for j in 0..n {
            if j != i {
                loo_times.push(times[j]);
                loo_events.push(events[j]);
            }
        }
        let theta_loo = match KmCurve::from_raw(&loo_times, &loo_events) {
            Ok(km) => km.curve().mean_survival_time()?,
            Err(Error::NoEvents) => {
                fallback.push(i);
                theta
            }
            Err(e) => return Err(e),
        };
        values.push(n as f64 * theta - (n as f64 - 1.0) * theta_loo);
    }
    Ok(PseudoObservations { values, fallback })
}
