//! Evaluation metrics for predicted individual survival distributions:
//! concordance index, distribution calibration with censored mass splitting,
//! Kaplan-Meier calibration, Hosmer-Lemeshow single-time calibration, the
//! IPCW-weighted integrated Brier score, and mean absolute error against
//! pseudo-observations.

use crate::curve::{PercentileGrid, SurvivalCurve};
use crate::data::SurvivalDataset;
use crate::error::{Error, Result};
use crate::km::{product_limit, pseudo_observations, KmCurve};

/// How tied predicted times count in the concordance index. `Half` is the
/// Harrell convention (ties score 0.5) and is what makes a constant
/// predictor land at exactly 0.5; `Strict` scores ties as discordant, the
/// literal indicator form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TieRule {
    Half,
    Strict,
}

/// Fraction of comparable subject pairs whose predicted times are ordered
/// like their observed times. A pair (i, j) is comparable when `t_i < t_j`
/// and subject i had the event.
pub fn concordance_index(
    predicted_times: &[f64],
    ds: &SurvivalDataset,
    ties: TieRule,
) -> Result<f64> {
    if predicted_times.len() != ds.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {} subjects",
            predicted_times.len(),
            ds.len()
        )));
    }
    let times = ds.times();
    let events = ds.events();
    let n = times.len();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        if !events[i] {
            continue;
        }
        for j in 0..n {
            if i == j || times[i] >= times[j] {
                continue;
            }
            den += 1.0;
            if predicted_times[i] < predicted_times[j] {
                num += 1.0;
            } else if predicted_times[i] == predicted_times[j] && ties == TieRule::Half {
                num += 0.5;
            }
        }
    }
    if den == 0.0 {
        return Err(Error::NoComparablePairs);
    }
    Ok(num / den)
}

/// Predicted survival probability at each subject's observed time.
fn probabilities_at_observed_times(
    predictions: &[SurvivalCurve],
    ds: &SurvivalDataset,
) -> Result<Vec<f64>> {
    if predictions.len() != ds.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {} subjects",
            predictions.len(),
            ds.len()
        )));
    }
    Ok(predictions
        .iter()
        .zip(ds.records())
        .map(|(c, r)| c.eval(r.time))
        .collect())
}

/// Histogram of predicted probabilities at event times over `bins` equal
/// intervals of [0, 1], bins closed on the right.
///
/// An uncensored subject contributes unit mass to the bin holding
/// `S(t_i | x_i)`. A censored subject's event probability is only known to
/// lie below `p_c = S(c_i | x_i)`, so its unit mass is split: the bin
/// holding `p_c` receives `(p_c - a) / p_c` and every bin entirely below
/// receives `(width) / p_c`. A censored subject with `p_c = 0` drops its
/// whole mass in the lowest bin.
#[derive(Debug, Clone, PartialEq)]
pub struct DcalHistogram {
    pub bin_edges: Vec<f64>,
    pub masses: Vec<f64>,
}

pub fn d_cal_histogram(
    predictions: &[SurvivalCurve],
    ds: &SurvivalDataset,
    bins: usize,
) -> Result<DcalHistogram> {
    assert!(bins >= 1);
    let probs = probabilities_at_observed_times(predictions, ds)?;
    let width = 1.0 / bins as f64;
    let bin_of = |p: f64| -> usize {
        let idx = (p * bins as f64).ceil() as isize - 1;
        idx.clamp(0, bins as isize - 1) as usize
    };
    let mut masses = vec![0.0; bins];
    for (&p, r) in probs.iter().zip(ds.records()) {
        if r.event {
            masses[bin_of(p)] += 1.0;
        } else if p <= 0.0 {
            masses[0] += 1.0;
        } else {
            let container = bin_of(p);
            let a = container as f64 * width;
            masses[container] += (p - a) / p;
            for m in masses.iter_mut().take(container) {
                *m += width / p;
            }
        }
    }
    let bin_edges = (0..=bins).map(|b| b as f64 * width).collect();
    Ok(DcalHistogram { bin_edges, masses })
}

/// Cumulative calibration mass at probability `rho`: the (fractional) number
/// of subjects whose event-time survival probability lies at or below `rho`.
fn cumulative_mass(probs: &[f64], events: &[bool], rho: f64) -> f64 {
    let mut mass = 0.0;
    for (&p, &event) in probs.iter().zip(events) {
        if event {
            if p <= rho {
                mass += 1.0;
            }
        } else if p <= rho {
            mass += 1.0;
        } else {
            mass += rho / p;
        }
    }
    mass
}

#[derive(Debug, Clone, PartialEq)]
pub struct DcalResult {
    pub statistic: f64,
    /// (expected, observed) pairs for a P-P plot.
    pub pp_points: Vec<(f64, f64)>,
}

/// Mean squared gap between observed and nominal cumulative probability over
/// the grid levels: `(1/L) * sum_rho (mass(0, rho)/N - rho)^2`.
pub fn d_cal_statistic(
    predictions: &[SurvivalCurve],
    ds: &SurvivalDataset,
    grid: &PercentileGrid,
) -> Result<DcalResult> {
    let probs = probabilities_at_observed_times(predictions, ds)?;
    let events = ds.events();
    let n = ds.len() as f64;
    let mut statistic = 0.0;
    let mut pp_points = Vec::with_capacity(grid.len());
    for &rho in grid.levels() {
        let observed = cumulative_mass(&probs, &events, rho) / n;
        statistic += (observed - rho) * (observed - rho);
        pp_points.push((rho, observed));
    }
    statistic /= grid.len() as f64;
    Ok(DcalResult {
        statistic,
        pp_points,
    })
}

/// Integrated squared gap between the test-set Kaplan-Meier curve and the
/// mean predicted curve, normalized by the largest test time. Trapezoid over
/// the union of test times and prediction knots.
pub fn km_calibration(predictions: &[SurvivalCurve], ds: &SurvivalDataset) -> Result<f64> {
    if predictions.len() != ds.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {} subjects",
            predictions.len(),
            ds.len()
        )));
    }
    let km = KmCurve::fit(ds)?;
    let t_max = ds.times().iter().cloned().fold(0.0, f64::max);
    let mut points: Vec<f64> = Vec::new();
    points.push(0.0);
    points.push(t_max);
    points.extend(ds.times());
    for c in predictions {
        points.extend(c.times().iter().filter(|&&t| t <= t_max));
    }
    points.sort_by(f64::total_cmp);
    points.dedup();
    let n = predictions.len() as f64;
    let gap = |t: f64| -> f64 {
        let mean: f64 = predictions.iter().map(|c| c.eval(t)).sum::<f64>() / n;
        let d = km.survival_at(t) - mean;
        d * d
    };
    let mut integral = 0.0;
    let mut prev_t = points[0];
    let mut prev_g = gap(prev_t);
    for &t in &points[1..] {
        let g = gap(t);
        integral += (t - prev_t) * (prev_g + g) / 2.0;
        prev_t = t;
        prev_g = g;
    }
    Ok(integral / t_max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HlGroup {
    pub n: usize,
    /// Kaplan-Meier survival of the group at the target time.
    pub observed: f64,
    pub sum_predicted: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HlResult {
    pub statistic: f64,
    pub t_star: f64,
    pub groups: Vec<HlGroup>,
}

impl HlGroup {
    pub fn mean_predicted(&self) -> f64 {
        self.sum_predicted / self.n as f64
    }

    /// `(n * observed - sum_predicted)^2`, the per-group numerator.
    pub fn numerator(&self) -> f64 {
        let d = self.n as f64 * self.observed - self.sum_predicted;
        d * d
    }
}

/// Hosmer-Lemeshow statistic at time `t_star` over `k` groups of subjects
/// sorted by predicted survival (remainders go to the early groups). The
/// observed group survival comes from a per-group Kaplan-Meier estimate.
pub fn hosmer_lemeshow(
    predictions: &[SurvivalCurve],
    ds: &SurvivalDataset,
    t_star: f64,
    k: usize,
) -> Result<HlResult> {
    assert!(k >= 1);
    if predictions.len() != ds.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {} subjects",
            predictions.len(),
            ds.len()
        )));
    }
    let preds_at_t: Vec<f64> = predictions.iter().map(|c| c.eval(t_star)).collect();
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.sort_by(|&a, &b| preds_at_t[a].total_cmp(&preds_at_t[b]).then(a.cmp(&b)));

    let n = ds.len();
    let base = n / k;
    let remainder = n % k;
    let mut groups = Vec::with_capacity(k);
    let mut start = 0;
    let times = ds.times();
    let events = ds.events();
    let mut statistic = 0.0;
    for g in 0..k {
        let size = base + usize::from(g < remainder);
        let members = &order[start..start + size];
        start += size;
        let g_times: Vec<f64> = members.iter().map(|&i| times[i]).collect();
        let g_events: Vec<bool> = members.iter().map(|&i| events[i]).collect();
        let observed = survival_at_from_rows(&product_limit(&g_times, &g_events), t_star);
        let sum_predicted: f64 = members.iter().map(|&i| preds_at_t[i]).sum();
        let mean = sum_predicted / size as f64;
        if mean <= 0.0 || mean >= 1.0 {
            return Err(Error::DegenerateGroup { index: g, mean });
        }
        let group = HlGroup {
            n: size,
            observed,
            sum_predicted,
        };
        statistic += group.numerator() / (sum_predicted * (1.0 - mean));
        groups.push(group);
    }
    Ok(HlResult {
        statistic,
        t_star,
        groups,
    })
}

fn survival_at_from_rows(rows: &[crate::km::RiskRow], t: f64) -> f64 {
    let mut s = 1.0;
    for row in rows {
        if row.time <= t {
            s = row.survival;
        } else {
            break;
        }
    }
    s
}

/// IPCW-weighted integrated Brier score. `censor_curve` is the reverse
/// Kaplan-Meier of the censoring distribution, fitted on training data.
/// Terms whose weight denominator is zero are dropped.
pub fn integrated_brier_score(
    predictions: &[SurvivalCurve],
    test: &SurvivalDataset,
    censor_curve: &SurvivalCurve,
) -> Result<f64> {
    if predictions.len() != test.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {} subjects",
            predictions.len(),
            test.len()
        )));
    }
    let times = test.times();
    let events = test.events();
    let n = times.len() as f64;
    let t_max = times.iter().cloned().fold(0.0, f64::max);
    let mut points = times.clone();
    points.push(0.0);
    points.sort_by(f64::total_cmp);
    points.dedup();
    let g_at_obs: Vec<f64> = times.iter().map(|&t| censor_curve.eval(t)).collect();
    let brier = |t: f64| -> f64 {
        let g_t = censor_curve.eval(t);
        let mut sum = 0.0;
        for i in 0..times.len() {
            let s = predictions[i].eval(t);
            if times[i] <= t && events[i] {
                if g_at_obs[i] > 0.0 {
                    sum += s * s / g_at_obs[i];
                }
            } else if times[i] > t && g_t > 0.0 {
                sum += (1.0 - s) * (1.0 - s) / g_t;
            }
        }
        sum / n
    };
    let mut integral = 0.0;
    let mut prev_t = points[0];
    let mut prev_b = brier(prev_t);
    for &t in &points[1..] {
        let b = brier(t);
        integral += (t - prev_t) * (prev_b + b) / 2.0;
        prev_t = t;
        prev_b = b;
    }
    Ok(integral / t_max)
}

/// Mean absolute error between predicted times and observed event times,
/// with pseudo-observations standing in for censored subjects.
pub fn mae_po(predicted_times: &[f64], ds: &SurvivalDataset) -> Result<f64> {
    if predicted_times.len() != ds.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {} subjects",
            predicted_times.len(),
            ds.len()
        )));
    }
    let targets: Vec<f64> = if ds.n_censored() > 0 {
        let po = pseudo_observations(ds)?;
        ds.records()
            .iter()
            .zip(po.values)
            .map(|(r, po_i)| if r.event { r.time } else { po_i })
            .collect()
    } else {
        ds.times()
    };
    let sum: f64 = predicted_times
        .iter()
        .zip(&targets)
        .map(|(p, t)| (p - t).abs())
        .sum();
    Ok(sum / ds.len() as f64)
}

/// The full metric suite for one prediction set.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub c_index: f64,
    pub d_cal: f64,
    pub km_cal: f64,
    pub ibs: f64,
    pub mae_po: f64,
    pub hl: Option<HlResult>,
    pub pp_points: Vec<(f64, f64)>,
}

/// Evaluates predictions on a test set: median predicted times drive the
/// C-index and MAE-PO, deciles drive the calibration statistic, and the
/// training set supplies the censoring distribution for the Brier score.
pub fn evaluate_predictions(
    predictions: &[SurvivalCurve],
    test: &SurvivalDataset,
    train: &SurvivalDataset,
    hl_at: Option<(f64, usize)>,
) -> Result<MetricReport> {
    let medians: Vec<f64> = predictions
        .iter()
        .map(|c| c.median_survival_time())
        .collect::<Result<_>>()?;
    let c_index = concordance_index(&medians, test, TieRule::Half)?;
    let dcal = d_cal_statistic(predictions, test, &PercentileGrid::deciles())?;
    let km_cal = km_calibration(predictions, test)?;
    let censor_curve = KmCurve::fit_censoring(train)?;
    let ibs = integrated_brier_score(predictions, test, &censor_curve)?;
    let mae = mae_po(&medians, test)?;
    let hl = match hl_at {
        Some((t_star, k)) => Some(hosmer_lemeshow(predictions, test, t_star, k)?),
        None => None,
    };
    Ok(MetricReport {
        c_index,
        d_cal: dcal.statistic,
        km_cal,
        ibs,
        mae_po: mae,
        hl,
        pp_points: dcal.pp_points,
    })
}
