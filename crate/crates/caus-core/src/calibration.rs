//! Union Mahalanobis scores and the order-statistic radius.
//!
//! The score of a point is the minimum over mixture components of its squared
//! Mahalanobis distance to that component. Calibration draws conditional
//! samples, scores them, and returns the kappa-th smallest score with
//! `kappa = ceil((1 - epsilon) (N_s + 1))`, which delivers the marginal
//! `1 - epsilon` coverage bound for a fresh sample from the same conditional
//! law (exchangeability of the N_s + 1 scores).

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gmm::ConditionalGmm;

/// Scores of one period's calibration sample, in squared Mahalanobis units.
#[derive(Debug, Clone)]
pub struct ScoreSet {
    pub scores: Vec<f64>,
    pub period_index: usize,
}

impl ScoreSet {
    pub fn new(scores: Vec<f64>, period_index: usize) -> Result<Self, CalibrationError> {
        if scores.is_empty() {
            return Err(CalibrationError::EmptyScores);
        }
        if scores.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(CalibrationError::InvalidScore);
        }
        Ok(ScoreSet { scores, period_index })
    }

    /// Histogram with `bins` equal-width bins over [0, max]; returns
    /// (bin midpoint, count) rows for CSV export.
    pub fn histogram(&self, bins: usize) -> Vec<(f64, usize)> {
        let max = self.scores.iter().cloned().fold(0.0, f64::max).max(1e-12);
        let width = max / bins as f64;
        let mut counts = vec![0usize; bins];
        for &s in &self.scores {
            let idx = ((s / width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        counts
            .into_iter()
            .enumerate()
            .map(|(i, c)| ((i as f64 + 0.5) * width, c))
            .collect()
    }
}

/// The calibrated radius (squared Mahalanobis units) with its bookkeeping.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CalibratedRadius {
    pub gamma: f64,
    pub epsilon: f64,
    /// Rank: `ceil((1 - epsilon) (n_samples + 1))`.
    pub kappa: usize,
    pub n_samples: usize,
}

/// JSON calibration report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub period: usize,
    pub epsilon: f64,
    pub n_samples: usize,
    pub kappa: usize,
    pub gamma: f64,
    pub seed: u64,
}

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("rank unattainable: kappa={kappa} exceeds n_samples={n_samples}; raise N_s or epsilon")]
    RankUnattainable { kappa: usize, n_samples: usize },
    #[error("epsilon must lie strictly inside (0, 1), got {0}")]
    InvalidEpsilon(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("score set must be nonempty")]
    EmptyScores,
    #[error("scores must be finite and nonnegative")]
    InvalidScore,
}

/// The rank used by the order-statistic rule.
pub fn calibration_rank(epsilon: f64, n_samples: usize) -> Result<usize, CalibrationError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(CalibrationError::InvalidEpsilon(epsilon));
    }
    let kappa = ((1.0 - epsilon) * (n_samples as f64 + 1.0)).ceil() as usize;
    if kappa > n_samples || kappa == 0 {
        return Err(CalibrationError::RankUnattainable { kappa, n_samples });
    }
    Ok(kappa)
}

/// Minimum over components of the squared Mahalanobis distance, each form
/// computed with triangular solves against the cached Cholesky factors.
pub fn union_score(model: &ConditionalGmm, point: &DVector<f64>) -> Result<f64, CalibrationError> {
    let dim = model.dim();
    if point.len() != dim {
        return Err(CalibrationError::DimensionMismatch { expected: dim, got: point.len() });
    }
    Ok(model
        .components
        .iter()
        .map(|c| c.mahalanobis_sq(point))
        .fold(f64::INFINITY, f64::min))
}

/// Draw `n_samples` conditional samples, score them, and return the kappa-th
/// smallest score. Deterministic for a fixed seed.
pub fn calibrate(
    model: &ConditionalGmm,
    n_samples: usize,
    epsilon: f64,
    seed: u64,
) -> Result<CalibratedRadius, CalibrationError> {
    let kappa = calibration_rank(epsilon, n_samples)?;
    let draws = model.sample(n_samples, seed);
    let mut scores: Vec<f64> = draws
        .iter()
        .map(|p| union_score(model, p))
        .collect::<Result<Vec<_>, _>>()?;
    // Stable ascending sort; ties are benign because the rule is index-based.
    scores.sort_by(|a, b| a.partial_cmp(b).expect("scores are finite"));
    Ok(CalibratedRadius { gamma: scores[kappa - 1], epsilon, kappa, n_samples })
}

/// Fraction of `n_test` fresh conditional samples whose union score is at
/// most `radius.gamma`. The test seed must differ from the calibration seed.
pub fn empirical_coverage(
    model: &ConditionalGmm,
    radius: &CalibratedRadius,
    n_test: usize,
    seed: u64,
) -> f64 {
    let draws = model.sample(n_test, seed);
    let covered = draws
        .iter()
        .filter(|p| union_score(model, p).expect("model-drawn points have the model dimension") <= radius.gamma)
        .count();
    covered as f64 / n_test as f64
}
