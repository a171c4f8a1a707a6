//! Right-censored survival data.
//!
//! A record is the triplet (covariates, observed time, event indicator): the
//! observed time is the minimum of the event and censoring times and the
//! indicator says which one it was.

use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalRecord {
    pub features: Vec<f64>,
    pub time: f64,
    pub event: bool,
}

impl SurvivalRecord {
    pub fn new(features: Vec<f64>, time: f64, event: bool) -> Self {
        Self {
            features,
            time,
            event,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset {
    records: Vec<SurvivalRecord>,
    feature_names: Vec<String>,
}

impl SurvivalDataset {
    /// Validates that every record is finite with non-negative time, shares
    /// one feature dimensionality, and that at least one event was observed
    /// (Kaplan-Meier fitting needs one).
    pub fn new(records: Vec<SurvivalRecord>, feature_names: Vec<String>) -> Result<Self> {
        let dim = feature_names.len();
        let mut any_event = false;
        for (i, r) in records.iter().enumerate() {
            if !r.time.is_finite() || r.time < 0.0 {
                return Err(Error::InvalidRecord {
                    index: i,
                    reason: format!("time {} must be finite and >= 0", r.time),
                });
            }
            if r.features.len() != dim {
                return Err(Error::InvalidRecord {
                    index: i,
                    reason: format!("{} features, dataset declares {dim}", r.features.len()),
                });
            }
            if r.features.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidRecord {
                    index: i,
                    reason: "non-finite feature value".into(),
                });
            }
            any_event |= r.event;
        }
        if !any_event {
            return Err(Error::NoEvents);
        }
        Ok(Self {
            records,
            feature_names,
        })
    }

    pub fn records(&self) -> &[SurvivalRecord] {
        &self.records
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.time).collect()
    }

    pub fn events(&self) -> Vec<bool> {
        self.records.iter().map(|r| r.event).collect()
    }

    pub fn n_events(&self) -> usize {
        self.records.iter().filter(|r| r.event).count()
    }

    pub fn n_censored(&self) -> usize {
        self.len() - self.n_events()
    }

    /// Concatenates two datasets with identical feature names.
    pub fn concat(&self, other: &SurvivalDataset) -> Result<SurvivalDataset> {
        if self.feature_names != other.feature_names {
            return Err(Error::DimensionMismatch(
                "cannot concatenate datasets with different feature names".into(),
            ));
        }
        let mut records = self.records.clone();
        records.extend(other.records.iter().cloned());
        SurvivalDataset::new(records, self.feature_names.clone())
    }

    /// Deterministic split that balances both the observed times and the
    /// censoring rate across the parts.
    ///
    /// Within each event-status group the records are sorted by time and
    /// dealt block by block: each block is a shuffled template holding each
    /// destination in proportion to its fraction, so every split's time
    /// distribution and censoring rate track the whole within one record per
    /// block.
    pub fn stratified_split(&self, fractions: &[f64], seed: u64) -> Result<Vec<SurvivalDataset>> {
        let sum: f64 = fractions.iter().sum();
        if fractions.is_empty() || fractions.iter().any(|&f| f <= 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidFractions { sum });
        }
        let template = block_template(fractions);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut parts: Vec<Vec<SurvivalRecord>> = vec![Vec::new(); fractions.len()];

        for status in [true, false] {
            let mut idx: Vec<usize> = (0..self.records.len())
                .filter(|&i| self.records[i].event == status)
                .collect();
            idx.sort_by(|&a, &b| {
                self.records[a]
                    .time
                    .total_cmp(&self.records[b].time)
                    .then(a.cmp(&b))
            });
            for block in idx.chunks(template.len()) {
                let mut assignment = template.clone();
                assignment.shuffle(&mut rng);
                for (&rec, &dest) in block.iter().zip(assignment.iter()) {
                    parts[dest].push(self.records[rec].clone());
                }
            }
        }

        let mut out = Vec::with_capacity(parts.len());
        for (k, recs) in parts.into_iter().enumerate() {
            if recs.is_empty() {
                return Err(Error::EmptySplit { index: k });
            }
            out.push(SurvivalDataset::new(recs, self.feature_names.clone())?);
        }
        Ok(out)
    }
}

/// Smallest block of destination indices realizing the fractions exactly,
/// falling back to a 100-slot largest-remainder block for awkward fractions.
fn block_template(fractions: &[f64]) -> Vec<usize> {
    for size in fractions.len()..=1000 {
        let counts: Vec<f64> = fractions.iter().map(|f| f * size as f64).collect();
        if counts.iter().all(|c| (c - c.round()).abs() < 1e-9)
            && counts.iter().map(|c| c.round() as usize).sum::<usize>() == size
        {
            let mut template = Vec::with_capacity(size);
            for (k, c) in counts.iter().enumerate() {
                template.extend(std::iter::repeat_n(k, c.round() as usize));
            }
            return template;
        }
    }
    let size = 100usize;
    let mut counts: Vec<usize> = fractions
        .iter()
        .map(|f| (f * size as f64).floor() as usize)
        .collect();
    let mut remainders: Vec<(usize, f64)> = fractions
        .iter()
        .enumerate()
        .map(|(k, f)| (k, f * size as f64 - (f * size as f64).floor()))
        .collect();
    remainders.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut missing = size - counts.iter().sum::<usize>();
    for (k, _) in remainders {
        if missing == 0 {
            break;
        }
        counts[k] += 1;
        missing -= 1;
    }
    let mut template = Vec::with_capacity(size);
    for (k, c) in counts.iter().enumerate() {
        template.extend(std::iter::repeat_n(k, *c));
    }
    template
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize, censored: usize) -> SurvivalDataset {
        let records = (0..n)
            .map(|i| SurvivalRecord::new(vec![i as f64], (i + 1) as f64, i >= censored))
            .collect();
        SurvivalDataset::new(records, vec!["x".into()]).unwrap()
    }

    #[test]
    fn rejects_all_censored() {
        let records = vec![SurvivalRecord::new(vec![0.0], 1.0, false)];
        assert!(matches!(
            SurvivalDataset::new(records, vec!["x".into()]),
            Err(Error::NoEvents)
        ));
    }

    #[test]
    fn rejects_feature_dim_mismatch() {
        let records = vec![SurvivalRecord::new(vec![0.0, 1.0], 1.0, true)];
        assert!(SurvivalDataset::new(records, vec!["x".into()]).is_err());
    }

    #[test]
    fn split_is_deterministic() {
        let ds = toy(10, 0);
        let a = ds.stratified_split(&[0.9, 0.1], 7).unwrap();
        let b = ds.stratified_split(&[0.9, 0.1], 7).unwrap();
        assert_eq!(a[0].records(), b[0].records());
        assert_eq!(a[1].records(), b[1].records());

        let big = toy(60, 0);
        let x = big.stratified_split(&[0.5, 0.5], 7).unwrap();
        let y = big.stratified_split(&[0.5, 0.5], 8).unwrap();
        assert_ne!(x[0].records(), y[0].records());
    }

    #[test]
    fn split_balances_censoring() {
        let ds = toy(100, 40);
        let parts = ds.stratified_split(&[0.5, 0.5], 3).unwrap();
        for p in &parts {
            assert_eq!(p.len(), 50);
            assert!((p.n_censored() as i64 - 20).abs() <= 1);
        }
    }

    #[test]
    fn identity_split() {
        let ds = toy(10, 3);
        let parts = ds.stratified_split(&[1.0], 0).unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].len(), 10);
    }

    #[test]
    fn split_is_a_partition() {
        let ds = toy(53, 17);
        let parts = ds.stratified_split(&[0.6, 0.3, 0.1], 11).unwrap();
        let mut all: Vec<(u64, bool)> = parts
            .iter()
            .flat_map(|p| p.records().iter().map(|r| (r.time.to_bits(), r.event)))
            .collect();
        all.sort();
        let mut expect: Vec<(u64, bool)> = ds
            .records()
            .iter()
            .map(|r| (r.time.to_bits(), r.event))
            .collect();
        expect.sort();
        assert_eq!(all, expect);
    }

    #[test]
    fn empty_split_is_an_error() {
        let records = vec![SurvivalRecord::new(vec![0.0], 2.0, true)];
        let ds = SurvivalDataset::new(records, vec!["x".into()]).unwrap();
        assert!(matches!(
            ds.stratified_split(&[0.5, 0.5], 0),
            Err(Error::EmptySplit { .. })
        ));
    }

    #[test]
    fn invalid_fractions_rejected() {
        let ds = toy(10, 0);
        assert!(matches!(
            ds.stratified_split(&[0.5, 0.4], 0),
            Err(Error::InvalidFractions { .. })
        ));
        assert!(matches!(
            ds.stratified_split(&[1.5, -0.5], 0),
            Err(Error::InvalidFractions { .. })
        ));
    }
}
