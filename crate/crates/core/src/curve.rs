//! Survival curves as knot sequences with an interpolation and extrapolation
//! policy.
//!
//! One representation covers every curve the library deals with: Kaplan-Meier
//! step functions, parametric curves materialized on a grid, and curves
//! rebuilt from percentile times. A curve stores knots `(times[k], probs[k])`
//! with strictly increasing times and non-increasing probabilities; the point
//! `(0, 1)` is implicit whenever the first knot sits after time zero.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    /// Right-continuous steps: the probability drops at each knot.
    Step,
    /// Straight segments between consecutive knots.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extrapolation {
    /// Beyond the last knot, descend linearly along the line through (0, 1)
    /// and the last knot until the curve reaches zero.
    LinearToZero,
    /// Beyond the last knot, keep the terminal probability forever.
    HoldLast,
}

/// A monotone non-increasing map from time to survival probability.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalCurve {
    times: Vec<f64>,
    probs: Vec<f64>,
    interpolation: Interpolation,
    extrapolation: Extrapolation,
    /// Overrides the derived zero-crossing of the extrapolated tail.
    /// Conditional Kaplan-Meier curves inherit the crossing of the curve
    /// they were derived from, which differs from the one their own knots
    /// would imply.
    tail_zero: Option<f64>,
}

impl SurvivalCurve {
    pub fn new(
        times: Vec<f64>,
        probs: Vec<f64>,
        interpolation: Interpolation,
        extrapolation: Extrapolation,
    ) -> Result<Self> {
        if times.len() != probs.len() {
            return Err(Error::InvalidCurve(format!(
                "{} times but {} probabilities",
                times.len(),
                probs.len()
            )));
        }
        for (k, &t) in times.iter().enumerate() {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::InvalidCurve(format!(
                    "knot {k} has invalid time {t}"
                )));
            }
            if k > 0 && t <= times[k - 1] {
                return Err(Error::InvalidCurve(format!(
                    "knot times must be strictly increasing (knot {k})"
                )));
            }
        }
        for (k, &p) in probs.iter().enumerate() {
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidCurve(format!(
                    "knot {k} has probability {p} outside [0, 1]"
                )));
            }
            if k > 0 && p > probs[k - 1] {
                return Err(Error::InvalidCurve(format!(
                    "probabilities must be non-increasing (knot {k})"
                )));
            }
        }
        Ok(Self {
            times,
            probs,
            interpolation,
            extrapolation,
            tail_zero: None,
        })
    }

    /// Step curve dropping straight from 1 to 0 at `t` (a point mass at `t`).
    pub fn heaviside(t: f64) -> Self {
        Self {
            times: vec![t],
            probs: vec![0.0],
            interpolation: Interpolation::Step,
            extrapolation: Extrapolation::LinearToZero,
            tail_zero: None,
        }
    }

    /// Rebuilds a curve from percentile times.
    ///
    /// `levels` are survival percentiles in ascending order and `pcts[l]` is
    /// the time at which the curve crosses `levels[l]`, so a valid row is
    /// non-increasing. Negative times are clamped to zero here (and only
    /// here); duplicate knot times keep the lowest probability so the curve
    /// stays a function. Linear interpolation, linear-to-zero tail.
    pub fn from_percentiles(levels: &[f64], pcts: &[f64]) -> Result<Self> {
        if levels.len() != pcts.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} levels but {} percentile times",
                levels.len(),
                pcts.len()
            )));
        }
        if levels.is_empty() {
            return Err(Error::InvalidCurve("no percentile levels".into()));
        }
        for l in 1..pcts.len() {
            if pcts[l] > pcts[l - 1] {
                return Err(Error::NonMonotonePcts { index: l });
            }
        }
        // Knots in time order = levels in descending order.
        let mut times = Vec::with_capacity(levels.len());
        let mut probs = Vec::with_capacity(levels.len());
        for l in (0..levels.len()).rev() {
            let t = pcts[l].max(0.0);
            let p = levels[l];
            match times.last() {
                Some(&last) if t <= last => {
                    // Collapse onto the existing knot, keeping the lower
                    // probability (instantaneous drop at that time).
                    let k = probs.len() - 1;
                    if p < probs[k] {
                        probs[k] = p;
                    }
                }
                _ => {
                    times.push(t);
                    probs.push(p);
                }
            }
        }
        Self::new(
            times,
            probs,
            Interpolation::Linear,
            Extrapolation::LinearToZero,
        )
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn extrapolation(&self) -> Extrapolation {
        self.extrapolation
    }

    pub(crate) fn with_tail_zero(mut self, zero: f64) -> Self {
        self.tail_zero = Some(zero);
        self
    }

    fn last_knot(&self) -> Option<(f64, f64)> {
        self.times.last().map(|&t| (t, *self.probs.last().unwrap()))
    }

    /// Time at which the extrapolated curve reaches zero, if it does.
    pub fn zero_crossing(&self) -> Option<f64> {
        let (t_max, p_max) = self.last_knot()?;
        if p_max == 0.0 {
            return Some(t_max);
        }
        match self.extrapolation {
            Extrapolation::HoldLast => None,
            Extrapolation::LinearToZero => {
                if let Some(z) = self.tail_zero {
                    return Some(z);
                }
                if t_max == 0.0 {
                    // Lone knot at the origin: all remaining mass drops at 0.
                    return Some(0.0);
                }
                // Line through (0, 1) and (t_max, p_max).
                Some(t_max / (1.0 - p_max))
            }
        }
    }

    /// Survival probability at time `t`.
    pub fn eval(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0 && t.is_finite());
        let n = self.times.len();
        if n == 0 {
            return 1.0;
        }
        if t < self.times[0] {
            return match self.interpolation {
                Interpolation::Step => 1.0,
                Interpolation::Linear => {
                    let (t0, p0) = (self.times[0], self.probs[0]);
                    if t0 == 0.0 {
                        p0
                    } else {
                        1.0 + (p0 - 1.0) * t / t0
                    }
                }
            };
        }
        let (t_max, p_max) = self.last_knot().unwrap();
        if t > t_max {
            return match self.extrapolation {
                Extrapolation::HoldLast => p_max,
                Extrapolation::LinearToZero => {
                    let zero = self.zero_crossing().unwrap();
                    if t >= zero || zero <= t_max {
                        0.0
                    } else {
                        (p_max * (zero - t) / (zero - t_max)).max(0.0)
                    }
                }
            };
        }
        // partition_point: first knot with time > t, so idx-1 is the last
        // knot at or before t.
        let idx = self.times.partition_point(|&x| x <= t) - 1;
        if self.times[idx] == t {
            return self.probs[idx];
        }
        match self.interpolation {
            Interpolation::Step => self.probs[idx],
            Interpolation::Linear => {
                let (t0, p0) = (self.times[idx], self.probs[idx]);
                let (t1, p1) = (self.times[idx + 1], self.probs[idx + 1]);
                p0 + (p1 - p0) * (t - t0) / (t1 - t0)
            }
        }
    }

    /// Smallest time at which the curve falls to `rho` or below:
    /// `inf { t : S(t) <= rho }`. On plateaus this is the left edge.
    pub fn inverse(&self, rho: f64) -> Result<f64> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::InvalidProbability(rho));
        }
        let n = self.times.len();
        let crossing = self.probs.partition_point(|&p| p > rho);
        if crossing == n {
            // Never reaches rho within the knots; use the tail.
            let (t_max, p_max) = match self.last_knot() {
                Some(k) => k,
                None => {
                    return Err(Error::UnboundedCurve { terminal: 1.0 });
                }
            };
            return match self.extrapolation {
                Extrapolation::HoldLast => Err(Error::UnboundedCurve { terminal: p_max }),
                Extrapolation::LinearToZero => {
                    let zero = self.zero_crossing().unwrap();
                    if zero <= t_max {
                        Ok(t_max)
                    } else {
                        Ok(t_max + (p_max - rho) * (zero - t_max) / p_max)
                    }
                }
            };
        }
        if crossing == 0 {
            // Already at or below rho at the first knot.
            return match self.interpolation {
                Interpolation::Step => Ok(self.times[0]),
                Interpolation::Linear => {
                    let (t0, p0) = (self.times[0], self.probs[0]);
                    if t0 == 0.0 {
                        Ok(0.0)
                    } else {
                        // Crossing on the implicit segment (0,1) -> (t0,p0);
                        // equals t0 when p0 == rho.
                        Ok(t0 * (1.0 - rho) / (1.0 - p0))
                    }
                }
            };
        }
        match self.interpolation {
            Interpolation::Step => Ok(self.times[crossing]),
            Interpolation::Linear => {
                let (t0, p0) = (self.times[crossing - 1], self.probs[crossing - 1]);
                let (t1, p1) = (self.times[crossing], self.probs[crossing]);
                debug_assert!(p0 > rho && p1 <= rho);
                Ok(t0 + (p0 - rho) * (t1 - t0) / (p0 - p1))
            }
        }
    }

    /// `inverse(0.5)`.
    pub fn median_survival_time(&self) -> Result<f64> {
        self.inverse(0.5)
    }

    /// Area under the curve from zero to its zero-crossing.
    ///
    /// Step curves integrate as rectangles, linear curves as trapezoids; the
    /// extrapolated tail contributes a triangle. Errors if the curve never
    /// reaches zero (hold-last with positive terminal probability).
    pub fn mean_survival_time(&self) -> Result<f64> {
        let (t_max, p_max) = match self.last_knot() {
            Some(k) => k,
            None => return Err(Error::UnboundedCurve { terminal: 1.0 }),
        };
        if p_max > 0.0 && self.extrapolation == Extrapolation::HoldLast {
            return Err(Error::UnboundedCurve { terminal: p_max });
        }
        let mut area = 0.0;
        // Head segment from the implicit (0, 1).
        if self.times[0] > 0.0 {
            area += match self.interpolation {
                Interpolation::Step => self.times[0],
                Interpolation::Linear => self.times[0] * (1.0 + self.probs[0]) / 2.0,
            };
        }
        for k in 1..self.times.len() {
            let dt = self.times[k] - self.times[k - 1];
            area += match self.interpolation {
                Interpolation::Step => self.probs[k - 1] * dt,
                Interpolation::Linear => (self.probs[k - 1] + self.probs[k]) / 2.0 * dt,
            };
        }
        if p_max > 0.0 {
            let zero = self.zero_crossing().unwrap();
            if zero > t_max {
                area += p_max * (zero - t_max) / 2.0;
            }
        }
        Ok(area)
    }
}

/// Strictly increasing survival percentile levels in (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct PercentileGrid {
    levels: Vec<f64>,
}

impl PercentileGrid {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidCurve("percentile grid is empty".into()));
        }
        for (l, &rho) in levels.iter().enumerate() {
            if !(rho > 0.0 && rho < 1.0) {
                return Err(Error::InvalidProbability(rho));
            }
            if l > 0 && rho <= levels[l - 1] {
                return Err(Error::InvalidCurve(
                    "percentile levels must be strictly increasing".into(),
                ));
            }
        }
        Ok(Self { levels })
    }

    /// `count` evenly spaced levels: `i / (count + 1)` for `i = 1..=count`.
    /// The usual presets are 9, 19, 39, 49 and 99 levels.
    pub fn evenly_spaced(count: usize) -> Self {
        assert!(count >= 1);
        let denom = (count + 1) as f64;
        Self {
            levels: (1..=count).map(|i| i as f64 / denom).collect(),
        }
    }

    /// Deciles 0.1 ..= 0.9, the default evaluation grid.
    pub fn deciles() -> Self {
        Self::evenly_spaced(9)
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

/// Exact integral of the piecewise-linear quantile function over [0, 1]
/// given the percentile times of one subject.
///
/// This is the percentile-domain route to the mean survival time: the head
/// piece runs from (rho_L, t_L) up to probability 1 at time 0, the interior
/// pieces are trapezoids, and the tail extends the last segment linearly to
/// the zero-crossing implied by the line through (0, 1) and the final knot.
/// The result is a fixed positive linear functional of the row, which is what
/// makes a constant per-level shift move every subject's mean by the same
/// amount. Rows may contain negative (unclamped) times.
pub fn mean_time_from_percentiles(levels: &[f64], row: &[f64]) -> f64 {
    assert_eq!(levels.len(), row.len());
    assert!(!levels.is_empty());
    let last = levels.len() - 1;
    // Head: quantile falls linearly from t_L at rho_L to 0 at probability 1.
    let mut area = row[last] * (1.0 - levels[last]) / 2.0;
    for l in 0..last {
        area += (levels[l + 1] - levels[l]) * (row[l] + row[l + 1]) / 2.0;
    }
    // Tail: extend to rho = 0 along the line through (0,1) and (t_1, rho_1).
    let t1 = row[0];
    let rho1 = levels[0];
    let q0 = t1 / (1.0 - rho1);
    area += rho1 * (q0 + t1) / 2.0;
    area
}
