use serde::{Deserialize, Serialize};

use super::StatsError;
use crate::model::{ParticipantId, ProposalId};
use crate::rng::{derive_seed, rng_from_seed};
use rand::Rng;

pub const LEVEL_95: f64 = 0.95;
pub const LEVEL_99: f64 = 0.99;
pub const DEFAULT_BOOTSTRAP_ITERATIONS: usize = 100;

/// One prediction scored against the recorded choice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoredPrediction {
    pub participant: ParticipantId,
    pub predicted: ProposalId,
    pub truth: ProposalId,
}

impl ScoredPrediction {
    pub fn is_correct(&self) -> bool {
        self.predicted == self.truth
    }

    pub fn indicator(&self) -> f64 {
        if self.is_correct() {
            1.0
        } else {
            0.0
        }
    }
}

pub fn accuracy(predictions: &[ScoredPrediction]) -> Result<f64, StatsError> {
    if predictions.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let correct = predictions.iter().filter(|p| p.is_correct()).count();
    Ok(correct as f64 / predictions.len() as f64)
}

pub fn mean(values: &[f64]) -> Result<f64, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Linearly interpolated quantile of sorted data (`h = (n-1)p`).
pub fn quantile(sorted: &[f64], p: f64) -> Result<f64, StatsError> {
    if sorted.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub level: f64,
    pub low: f64,
    pub high: f64,
    pub point_estimate: f64,
    pub iterations: usize,
}

impl ConfidenceInterval {
    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }

    pub fn half_width(&self) -> f64 {
        (self.high - self.low) / 2.0
    }
}

/// Percentile bootstrap interval for the mean. Replicate `i` resamples with
/// its own generator seeded by `derive_seed(seed, i)`.
pub fn bootstrap_ci(
    values: &[f64],
    level: f64,
    iterations: usize,
    seed: u64,
) -> Result<ConfidenceInterval, StatsError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::InvalidLevel(level));
    }
    if iterations == 0 {
        return Err(StatsError::DegenerateInput(
            "bootstrap needs at least one iteration".into(),
        ));
    }
    let point_estimate = mean(values)?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::DegenerateInput("non-finite value".into()));
    }
    let n = values.len();
    // summation drift can push a mean past the data range
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut means: Vec<f64> = (0..iterations)
        .map(|i| {
            let mut rng = rng_from_seed(derive_seed(seed, i as u64));
            let m = (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64;
            m.clamp(lo, hi)
        })
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok(ConfidenceInterval {
        level,
        low: quantile(&means, tail)?,
        high: quantile(&means, 1.0 - tail)?,
        point_estimate: point_estimate.clamp(lo, hi),
        iterations,
    })
}
