//! Conformal post-processing of predicted survival distributions.
//!
//! The engine discretizes each predicted curve into percentile times,
//! measures per-level conformity scores against the conformal set (with four
//! ways of standing in for censored event times), shifts every subject's
//! percentile times by the finite-sample-corrected score quantile, repairs
//! any monotonicity violations by rearrangement, and rebuilds curves.
//!
//! Percentile levels are stored in ascending order throughout, so a valid
//! row of percentile times is non-increasing: higher survival percentiles
//! are crossed earlier.

use crate::curve::{PercentileGrid, SurvivalCurve};
use crate::data::SurvivalDataset;
use crate::error::{Error, Result};
use crate::km::{pseudo_observations, sample_survival_time, subject_stream, KmCurve};

/// Per-subject percentile times on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PctMatrix {
    grid: PercentileGrid,
    rows: Vec<Vec<f64>>,
}

impl PctMatrix {
    pub fn new(grid: PercentileGrid, rows: Vec<Vec<f64>>) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            if row.len() != grid.len() {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} times for {} levels",
                    row.len(),
                    grid.len()
                )));
            }
        }
        Ok(PctMatrix { grid, rows })
    }

    pub fn grid(&self) -> &PercentileGrid {
        &self.grid
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn n_subjects(&self) -> usize {
        self.rows.len()
    }

    /// True when every row is non-increasing across ascending levels.
    pub fn is_monotone(&self) -> bool {
        self.rows
            .iter()
            .all(|row| row.windows(2).all(|w| w[1] <= w[0]))
    }

    /// Index of the grid level equal to 0.5, if present.
    pub fn median_level(&self) -> Option<usize> {
        self.grid.levels().iter().position(|&rho| rho == 0.5)
    }

    /// Sorting permutation of one column, ties broken by subject index.
    pub fn argsort_column(&self, level: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.rows.len()).collect();
        idx.sort_by(|&a, &b| {
            self.rows[a][level]
                .total_cmp(&self.rows[b][level])
                .then(a.cmp(&b))
        });
        idx
    }

    /// Percentile-domain mean survival time of each row.
    pub fn mean_times(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| crate::curve::mean_time_from_percentiles(self.grid.levels(), row))
            .collect()
    }
}

/// How censored subjects enter the conformal score computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CensorHandler {
    /// Drop censored subjects.
    Uncensored,
    /// Replace the censored time by the Kaplan-Meier conditional expectation.
    Margin,
    /// Replace the censored time by its jackknife pseudo-observation.
    PseudoObservation,
    /// Replace each censored subject by R draws from the conditional
    /// Kaplan-Meier distribution past its censoring time; uncensored subjects
    /// are repeated R times to keep the event/censor ratio.
    KmSampling,
}

impl CensorHandler {
    pub fn name(self) -> &'static str {
        match self {
            CensorHandler::Uncensored => "uncensored",
            CensorHandler::Margin => "margin",
            CensorHandler::PseudoObservation => "pseudo_observation",
            CensorHandler::KmSampling => "km_sampling",
        }
    }
}

/// Which data form the conformal set. The pipeline itself is agnostic; the
/// caller resolves the policy by passing the corresponding set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConformalPolicy {
    SeparateValidation,
    MergedTrainAndValidation,
}

#[derive(Debug, Clone)]
pub struct ConformalConfig {
    pub handler: CensorHandler,
    pub repeat_r: usize,
    pub grid: PercentileGrid,
    pub policy: ConformalPolicy,
    pub seed: u64,
}

impl Default for ConformalConfig {
    fn default() -> Self {
        Self {
            handler: CensorHandler::KmSampling,
            repeat_r: 1000,
            grid: PercentileGrid::evenly_spaced(19),
            policy: ConformalPolicy::SeparateValidation,
            seed: 0,
        }
    }
}

/// Percentile times of every prediction: `rows[i][l] = inverse(curve_i, rho_l)`.
pub fn discretize(predictions: &[SurvivalCurve], grid: &PercentileGrid) -> Result<PctMatrix> {
    let mut rows = Vec::with_capacity(predictions.len());
    for curve in predictions {
        let mut row = Vec::with_capacity(grid.len());
        for &rho in grid.levels() {
            row.push(curve.inverse(rho)?);
        }
        rows.push(row);
    }
    PctMatrix::new(grid.clone(), rows)
}

/// Surrogate event times for the conformal set: one per retained subject for
/// the deterministic handlers, `repeat` per subject under KM-sampling.
#[derive(Debug, Clone)]
struct SurrogateTimes {
    /// (row index into the conformal matrix, surrogate times).
    entries: Vec<(usize, Vec<f64>)>,
    effective_n: usize,
    replicate: usize,
}

fn surrogate_times(
    labels: &SurvivalDataset,
    km: &KmCurve,
    cfg: &ConformalConfig,
) -> Result<SurrogateTimes> {
    let records = labels.records();
    match cfg.handler {
        CensorHandler::Uncensored => {
            let entries: Vec<(usize, Vec<f64>)> = records
                .iter()
                .enumerate()
                .filter(|(_, r)| r.event)
                .map(|(j, r)| (j, vec![r.time]))
                .collect();
            if entries.is_empty() {
                return Err(Error::EmptyConformalSet(
                    "uncensored handler found no events".into(),
                ));
            }
            let n = entries.len();
            Ok(SurrogateTimes {
                entries,
                effective_n: n,
                replicate: 1,
            })
        }
        CensorHandler::Margin => {
            let entries = records
                .iter()
                .enumerate()
                .map(|(j, r)| {
                    let t = if r.event {
                        r.time
                    } else {
                        km.margin_time(r.time)
                    };
                    (j, vec![t])
                })
                .collect();
            Ok(SurrogateTimes {
                entries,
                effective_n: records.len(),
                replicate: 1,
            })
        }
        CensorHandler::PseudoObservation => {
            let po = pseudo_observations(labels)?;
            let entries = records
                .iter()
                .enumerate()
                .map(|(j, r)| {
                    let t = if r.event { r.time } else { po.values[j] };
                    (j, vec![t])
                })
                .collect();
            Ok(SurrogateTimes {
                entries,
                effective_n: records.len(),
                replicate: 1,
            })
        }
        CensorHandler::KmSampling => {
            assert!(cfg.repeat_r >= 1);
            let mut entries = Vec::with_capacity(records.len());
            for (j, r) in records.iter().enumerate() {
                let times = if r.event {
                    vec![r.time; cfg.repeat_r]
                } else {
                    match km.conditional(r.time) {
                        Ok(cond) => (0..cfg.repeat_r)
                            .map(|rep| {
                                let mut rng = subject_stream(cfg.seed, j as u64, rep as u64);
                                sample_survival_time(&cond, &mut rng)
                            })
                            .collect::<Result<Vec<f64>>>()?,
                        // No conditional mass left: a point mass at the
                        // censoring time stands in.
                        Err(Error::DegenerateConditional { .. }) => vec![r.time; cfg.repeat_r],
                        Err(e) => return Err(e),
                    }
                };
                entries.push((j, times));
            }
            Ok(SurrogateTimes {
                entries,
                effective_n: records.len(),
                replicate: cfg.repeat_r,
            })
        }
    }
}

fn scores_for_level(pcts: &PctMatrix, surrogates: &SurrogateTimes, level: usize) -> Vec<f64> {
    let mut scores = Vec::with_capacity(surrogates.entries.len() * surrogates.replicate);
    for (row, times) in &surrogates.entries {
        let q = pcts.rows()[*row][level];
        for &t in times {
            scores.push(q - t);
        }
    }
    scores
}

/// Conformity scores per level with the subject count used for the quantile
/// rank. Under KM-sampling each level holds `effective_n * replicate` scores
/// but the rank formula still runs on the subject count.
#[derive(Debug, Clone)]
pub struct ConformityScoreSet {
    grid: PercentileGrid,
    per_level: Vec<Vec<f64>>,
    effective_n: usize,
    replicate: usize,
}

impl ConformityScoreSet {
    pub fn grid(&self) -> &PercentileGrid {
        &self.grid
    }

    pub fn level_scores(&self, level: usize) -> &[f64] {
        &self.per_level[level]
    }

    pub fn effective_n(&self) -> usize {
        self.effective_n
    }

    pub fn replicate(&self) -> usize {
        self.replicate
    }
}

/// Scores `q_hat(rho | x_j) - t_j` for every conformal subject and level,
/// with censored subjects handled per the configured strategy.
pub fn conformity_scores(
    pcts: &PctMatrix,
    labels: &SurvivalDataset,
    km: &KmCurve,
    cfg: &ConformalConfig,
) -> Result<ConformityScoreSet> {
    if pcts.n_subjects() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} percentile rows for {} conformal labels",
            pcts.n_subjects(),
            labels.len()
        )));
    }
    let surrogates = surrogate_times(labels, km, cfg)?;
    let per_level = (0..pcts.grid().len())
        .map(|l| scores_for_level(pcts, &surrogates, l))
        .collect();
    Ok(ConformityScoreSet {
        grid: pcts.grid().clone(),
        per_level,
        effective_n: surrogates.effective_n,
        replicate: surrogates.replicate,
    })
}

/// A per-level shift, flagged when the corrected rank overflowed the sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileShift {
    pub value: f64,
    pub rank_overflow: bool,
}

/// The corrected empirical quantile of one score multiset: rank
/// `k = ceil(rho * (n + 1))` over `n` subjects, mapped to element `k * R` of
/// the sorted multiset when each subject contributed `R` scores. A rank past
/// the sample returns the maximum (flagged) rather than infinity, so curve
/// reconstruction stays finite.
pub fn conformal_quantile(scores: &[f64], effective_n: usize, rho: f64) -> Result<QuantileShift> {
    if scores.is_empty() || effective_n == 0 {
        return Err(Error::EmptyLevel { level: rho });
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidProbability(rho));
    }
    debug_assert_eq!(scores.len() % effective_n, 0);
    let replicate = scores.len() / effective_n;
    let n = effective_n as f64;
    let k = (rho * (n + 1.0)).ceil() as usize;
    let mut work = scores.to_vec();
    if k > effective_n {
        let max = work.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        return Ok(QuantileShift {
            value: max,
            rank_overflow: true,
        });
    }
    let idx = k * replicate - 1;
    let (_, value, _) = work.select_nth_unstable_by(idx, f64::total_cmp);
    Ok(QuantileShift {
        value: *value,
        rank_overflow: false,
    })
}

/// Shifts every subject's percentile time down by the per-level amount.
/// Rows may become negative or non-monotone here; ordering within each
/// column is untouched because the shift is constant across subjects.
pub fn adjust(pcts: &PctMatrix, shifts: &[f64]) -> Result<PctMatrix> {
    if shifts.len() != pcts.grid().len() {
        return Err(Error::DimensionMismatch(format!(
            "{} shifts for {} levels",
            shifts.len(),
            pcts.grid().len()
        )));
    }
    let rows = pcts
        .rows()
        .iter()
        .map(|row| row.iter().zip(shifts).map(|(t, s)| t - s).collect())
        .collect();
    PctMatrix::new(pcts.grid().clone(), rows)
}

/// Monotone rearrangement: each row's times sorted into valid order (later
/// times at lower survival percentiles). Returns whether any row changed.
pub fn rearrange(pcts: &PctMatrix) -> (PctMatrix, bool) {
    let mut changed = false;
    let rows = pcts
        .rows()
        .iter()
        .map(|row| {
            let mut sorted = row.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            if sorted != *row {
                changed = true;
            }
            sorted
        })
        .collect();
    let out = PctMatrix::new(pcts.grid().clone(), rows).expect("same shape");
    (out, changed)
}

/// Everything the conformal pass produces.
#[derive(Debug, Clone)]
pub struct ConformalOutcome {
    /// Reconstructed survival curves for the test subjects.
    pub curves: Vec<SurvivalCurve>,
    /// Test percentile times before adjustment.
    pub test_pcts: PctMatrix,
    /// After the per-level shift, before rearrangement.
    pub adjusted_pcts: PctMatrix,
    /// After rearrangement; what the curves are built from.
    pub final_pcts: PctMatrix,
    pub shifts: Vec<f64>,
    pub rank_overflow: Vec<bool>,
    pub rearranged: bool,
}

/// Runs the full conformal pass: discretize both sets, score the conformal
/// pairs, shift the test percentile times by the per-level quantiles,
/// rearrange, and rebuild curves. Deterministic given `cfg.seed`.
pub fn conformalize(
    conformal_predictions: &[SurvivalCurve],
    conformal_labels: &SurvivalDataset,
    test_predictions: &[SurvivalCurve],
    km_from_train: &KmCurve,
    cfg: &ConformalConfig,
) -> Result<ConformalOutcome> {
    let pcts_con = discretize(conformal_predictions, &cfg.grid)?;
    if pcts_con.n_subjects() != conformal_labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} conformal predictions for {} labels",
            pcts_con.n_subjects(),
            conformal_labels.len()
        )));
    }
    let surrogates = surrogate_times(conformal_labels, km_from_train, cfg)?;
    let mut shifts = Vec::with_capacity(cfg.grid.len());
    let mut rank_overflow = Vec::with_capacity(cfg.grid.len());
    for (l, &rho) in cfg.grid.levels().iter().enumerate() {
        let scores = scores_for_level(&pcts_con, &surrogates, l);
        let shift = conformal_quantile(&scores, surrogates.effective_n, rho)?;
        shifts.push(shift.value);
        rank_overflow.push(shift.rank_overflow);
    }
    let test_pcts = discretize(test_predictions, &cfg.grid)?;
    let adjusted_pcts = adjust(&test_pcts, &shifts)?;
    let (final_pcts, rearranged) = rearrange(&adjusted_pcts);
    let curves = final_pcts
        .rows()
        .iter()
        .map(|row| SurvivalCurve::from_percentiles(cfg.grid.levels(), row))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConformalOutcome {
        curves,
        test_pcts,
        adjusted_pcts,
        final_pcts,
        shifts,
        rank_overflow,
        rearranged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{Extrapolation, Interpolation};
    use crate::data::SurvivalRecord;

    fn grid(levels: &[f64]) -> PercentileGrid {
        PercentileGrid::new(levels.to_vec()).unwrap()
    }

    fn linear_to_zero(t_end: f64) -> SurvivalCurve {
        SurvivalCurve::new(
            vec![0.0, t_end],
            vec![1.0, 0.0],
            Interpolation::Linear,
            Extrapolation::LinearToZero,
        )
        .unwrap()
    }

    fn labels(obs: &[(f64, bool)]) -> SurvivalDataset {
        let records = obs
            .iter()
            .map(|&(t, e)| SurvivalRecord::new(vec![], t, e))
            .collect();
        SurvivalDataset::new(records, vec![]).unwrap()
    }

    #[test]
    fn discretize_heaviside() {
        let m = discretize(&[SurvivalCurve::heaviside(3.0)], &grid(&[0.25, 0.5, 0.75])).unwrap();
        assert_eq!(m.rows()[0], vec![3.0, 3.0, 3.0]);
    }

    #[test]
    fn discretize_straight_line() {
        let m = discretize(&[linear_to_zero(10.0)], &grid(&[0.25, 0.5, 0.75])).unwrap();
        let row = &m.rows()[0];
        assert!((row[0] - 7.5).abs() < 1e-12);
        assert!((row[1] - 5.0).abs() < 1e-12);
        assert!((row[2] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn discretize_then_reconstruct_matches_at_grid_levels() {
        let g = PercentileGrid::evenly_spaced(9);
        let curve = SurvivalCurve::new(
            vec![0.0, 2.0, 5.0, 9.0],
            vec![1.0, 0.8, 0.45, 0.1],
            Interpolation::Linear,
            Extrapolation::LinearToZero,
        )
        .unwrap();
        let m = discretize(std::slice::from_ref(&curve), &g).unwrap();
        let rebuilt = SurvivalCurve::from_percentiles(g.levels(), &m.rows()[0]).unwrap();
        for &rho in g.levels() {
            let a = curve.inverse(rho).unwrap();
            let b = rebuilt.inverse(rho).unwrap();
            assert!((a - b).abs() < 1e-10, "rho {rho}: {a} vs {b}");
        }
    }

    #[test]
    fn all_handlers_agree_without_censoring() {
        let g = grid(&[0.25, 0.5, 0.75]);
        let preds = vec![
            linear_to_zero(8.0),
            linear_to_zero(4.0),
            linear_to_zero(6.0),
        ];
        let ds = labels(&[(3.0, true), (2.0, true), (5.0, true)]);
        let km = KmCurve::fit(&ds).unwrap();
        let pcts = discretize(&preds, &g).unwrap();
        let base_cfg = ConformalConfig {
            grid: g.clone(),
            seed: 7,
            ..Default::default()
        };

        let mut reference: Option<Vec<Vec<f64>>> = None;
        for handler in [
            CensorHandler::Uncensored,
            CensorHandler::Margin,
            CensorHandler::PseudoObservation,
        ] {
            let cfg = ConformalConfig {
                handler,
                ..base_cfg.clone()
            };
            let scores = conformity_scores(&pcts, &ds, &km, &cfg).unwrap();
            let levels: Vec<Vec<f64>> = (0..g.len())
                .map(|l| scores.level_scores(l).to_vec())
                .collect();
            match &reference {
                None => reference = Some(levels),
                Some(r) => assert_eq!(r, &levels, "{}", handler.name()),
            }
        }
        // KM-sampling replicates each score R times.
        let cfg = ConformalConfig {
            handler: CensorHandler::KmSampling,
            repeat_r: 5,
            ..base_cfg
        };
        let scores = conformity_scores(&pcts, &ds, &km, &cfg).unwrap();
        let reference = reference.unwrap();
        for (l, level_ref) in reference.iter().enumerate() {
            assert_eq!(scores.level_scores(l).len(), 3 * 5);
            let expect: Vec<f64> = level_ref
                .iter()
                .flat_map(|&s| std::iter::repeat_n(s, 5))
                .collect();
            assert_eq!(scores.level_scores(l), &expect[..]);
        }
        assert_eq!(scores.effective_n(), 3);
    }

    #[test]
    fn point_mass_conditional_gives_constant_sampled_scores() {
        let g = grid(&[0.5]);
        // Subject 0: event at 7. Subject 1: censored at 3 with q(0.5) = 4.
        let preds = vec![linear_to_zero(14.0), linear_to_zero(8.0)];
        let ds = labels(&[(7.0, true), (3.0, false)]);
        let km = KmCurve::fit(&labels(&[(7.0, true)])).unwrap();
        let pcts = discretize(&preds, &g).unwrap();
        let cfg = ConformalConfig {
            handler: CensorHandler::KmSampling,
            repeat_r: 40,
            grid: g,
            seed: 3,
            ..Default::default()
        };
        let scores = conformity_scores(&pcts, &ds, &km, &cfg).unwrap();
        let level = scores.level_scores(0);
        assert_eq!(level.len(), 80);
        // Censored subject's draws all land on the point mass at 7.
        for &s in &level[40..] {
            assert!((s - (4.0 - 7.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn sampling_is_deterministic_in_the_seed() {
        let g = PercentileGrid::evenly_spaced(9);
        let preds = vec![
            linear_to_zero(9.0),
            linear_to_zero(5.0),
            linear_to_zero(7.0),
        ];
        let ds = labels(&[(2.0, true), (1.5, false), (4.0, false)]);
        let km = KmCurve::fit(&labels(&[(1.0, true), (3.0, true), (5.0, true)])).unwrap();
        let pcts = discretize(&preds, &g).unwrap();
        let cfg = ConformalConfig {
            handler: CensorHandler::KmSampling,
            repeat_r: 25,
            grid: g.clone(),
            seed: 11,
            ..Default::default()
        };
        let a = conformity_scores(&pcts, &ds, &km, &cfg).unwrap();
        let b = conformity_scores(&pcts, &ds, &km, &cfg).unwrap();
        for l in 0..g.len() {
            assert_eq!(a.level_scores(l), b.level_scores(l));
        }
    }

    #[test]
    fn quantile_rank_arithmetic() {
        let q = conformal_quantile(&[1.0, 2.0, 3.0], 3, 0.5).unwrap();
        assert_eq!(q.value, 2.0);
        assert!(!q.rank_overflow);

        let q = conformal_quantile(&[1.0, 2.0, 3.0], 3, 0.95).unwrap();
        assert_eq!(q.value, 3.0);
        assert!(q.rank_overflow);

        let q = conformal_quantile(&[-5.0, -1.0, 0.0, 2.0, 7.0, 9.0, 11.0], 7, 0.25).unwrap();
        assert_eq!(q.value, -1.0);
        assert!(!q.rank_overflow);
    }

    #[test]
    fn quantile_of_nothing_is_an_error() {
        assert!(matches!(
            conformal_quantile(&[], 0, 0.5),
            Err(Error::EmptyLevel { .. })
        ));
    }

    #[test]
    fn quantile_on_replicated_multiset_uses_relative_rank() {
        // n = 3 subjects, R = 2: rank k maps to sorted element k * 2.
        let scores = [1.0, 1.0, 2.0, 2.0, 3.0, 3.0];
        let q = conformal_quantile(&scores, 3, 0.5).unwrap();
        assert_eq!(q.value, 2.0);
    }

    #[test]
    fn adjust_identity_and_order_preservation() {
        let g = grid(&[0.25, 0.5, 0.75]);
        let m = PctMatrix::new(
            g.clone(),
            vec![
                vec![6.0, 4.0, 2.0],
                vec![9.0, 5.0, 1.0],
                vec![3.0, 2.5, 2.0],
            ],
        )
        .unwrap();
        let same = adjust(&m, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(same.rows(), m.rows());
        let shifted = adjust(&m, &[1.5, -0.25, 0.75]).unwrap();
        for l in 0..3 {
            assert_eq!(shifted.argsort_column(l), m.argsort_column(l));
        }
    }

    #[test]
    fn rearrange_sorts_and_flags() {
        let g = grid(&[0.25, 0.5, 0.75]);
        let m = PctMatrix::new(g.clone(), vec![vec![8.0, 5.0, 3.0]]).unwrap();
        let (out, changed) = rearrange(&m);
        assert!(!changed);
        assert_eq!(out.rows(), m.rows());

        // Ascending levels: row [5, 3, 8] is invalid, rearranged to [8, 5, 3].
        let m = PctMatrix::new(g, vec![vec![5.0, 3.0, 8.0]]).unwrap();
        let (out, changed) = rearrange(&m);
        assert!(changed);
        assert_eq!(out.rows()[0], vec![8.0, 5.0, 3.0]);
        let mut sorted_in = vec![5.0, 3.0, 8.0];
        sorted_in.sort_by(f64::total_cmp);
        let mut sorted_out = out.rows()[0].clone();
        sorted_out.sort_by(f64::total_cmp);
        assert_eq!(sorted_in, sorted_out);
    }

    /// Four patients with straight-line predictions and a seven-subject
    /// conformal set chosen so the shifts are (0.3, -0.5, 0.0) at levels
    /// (0.25, 0.5, 0.75). The miscalibrated patient's event-time probability
    /// moves up from the [0.25, 0.5] band into [0.5, 0.75] while the other
    /// three stay put.
    #[test]
    fn adjustment_moves_one_patient_up_a_probability_band() {
        let g = grid(&[0.25, 0.5, 0.75]);
        let con_preds: Vec<SurvivalCurve> = (0..7).map(|_| linear_to_zero(4.0)).collect();
        let con_times = [4.0, 2.7, 2.6, 2.5, 2.0, 1.0, 0.1];
        let con = labels(&con_times.map(|t| (t, true)));
        let km = KmCurve::fit(&con).unwrap();

        let test_ends = [10.0, 6.0, 8.0, 4.0];
        let test_times = [6.9, 0.6, 7.2, 2.2];
        let test_preds: Vec<SurvivalCurve> = test_ends.iter().map(|&e| linear_to_zero(e)).collect();

        let cfg = ConformalConfig {
            handler: CensorHandler::Uncensored,
            grid: g,
            seed: 0,
            ..Default::default()
        };
        let out = conformalize(&con_preds, &con, &test_preds, &km, &cfg).unwrap();
        assert!((out.shifts[0] - 0.3).abs() < 1e-12);
        assert!((out.shifts[1] + 0.5).abs() < 1e-12);
        assert!(out.shifts[2].abs() < 1e-12);
        assert!(!out.rearranged);

        let pre: Vec<f64> = test_preds
            .iter()
            .zip(&test_times)
            .map(|(c, &t)| c.eval(t))
            .collect();
        let post: Vec<f64> = out
            .curves
            .iter()
            .zip(&test_times)
            .map(|(c, &t)| c.eval(t))
            .collect();
        let band = |p: f64| -> usize {
            // Closed band edges, matching how the migration is described.
            if p < 0.25 {
                0
            } else if p < 0.5 {
                1
            } else if p <= 0.75 {
                2
            } else {
                3
            }
        };
        // Patient D (index 3) moves from the second band into the third.
        assert_eq!(band(pre[3]), 1);
        assert!((0.5..=0.75).contains(&post[3]), "post {}", post[3]);
        assert!(post[3] > pre[3]);
        // The other three keep their bands.
        assert_eq!(band(pre[0]), 1);
        assert_eq!(band(post[0]), 1);
        assert!(pre[1] > 0.75 && post[1] >= 0.75);
        assert_eq!(band(pre[2]), 0);
        assert_eq!(band(post[2]), 0);
    }

    #[test]
    fn pipeline_shifts_every_mean_time_by_the_same_constant() {
        let g = PercentileGrid::evenly_spaced(19);
        let con_preds: Vec<SurvivalCurve> = [7.0, 9.0, 11.0, 8.0, 10.0, 6.5, 12.0]
            .iter()
            .map(|&e| linear_to_zero(e))
            .collect();
        let con = labels(&[
            (3.0, true),
            (6.0, true),
            (2.0, true),
            (8.0, true),
            (5.0, true),
            (1.0, true),
            (9.5, true),
        ]);
        let km = KmCurve::fit(&con).unwrap();
        let test_preds: Vec<SurvivalCurve> = [20.0, 15.0, 25.0, 18.0]
            .iter()
            .map(|&e| linear_to_zero(e))
            .collect();
        let cfg = ConformalConfig {
            handler: CensorHandler::Uncensored,
            grid: g.clone(),
            ..Default::default()
        };
        let out = conformalize(&con_preds, &con, &test_preds, &km, &cfg).unwrap();
        assert!(!out.rearranged);
        let pre = out.test_pcts.mean_times();
        let post = out.adjusted_pcts.mean_times();
        let expect = -crate::curve::mean_time_from_percentiles(g.levels(), &out.shifts);
        for (a, b) in pre.iter().zip(&post) {
            assert!((b - a - expect).abs() < 1e-9, "delta {} vs {expect}", b - a);
        }
    }
}
