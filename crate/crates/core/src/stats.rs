//! Summary statistics and likelihood queries over a trial's samples.
//!
//! Quantiles use linear interpolation on the sorted sample at continuous
//! index `h = (n - 1) * p` (Hyndman & Fan type 7). Skewness is the
//! population moment ratio `m3 / m2^(3/2)` with `m_k = (1/n) * sum((x - mean)^k)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("sample set is empty")]
    Empty,
    #[error("need at least {need} samples, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("probability {0} is outside [0, 1]")]
    InvalidProbability(f64),
    #[error("degenerate distribution: all samples are equal")]
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkewMagnitude {
    Slightly,
    Moderately,
    Significantly,
}

impl SkewMagnitude {
    pub fn as_str(self) -> &'static str {
        match self {
            SkewMagnitude::Slightly => "slightly",
            SkewMagnitude::Moderately => "moderately",
            SkewMagnitude::Significantly => "significantly",
        }
    }

    pub const ALL: [SkewMagnitude; 3] = [
        SkewMagnitude::Slightly,
        SkewMagnitude::Moderately,
        SkewMagnitude::Significantly,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkewDirection {
    Higher,
    Lower,
}

impl SkewDirection {
    pub fn as_str(self) -> &'static str {
        match self {
            SkewDirection::Higher => "higher",
            SkewDirection::Lower => "lower",
        }
    }
}

/// Cut points on `|skewness|` separating the verbal magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewThresholds {
    /// `|s|` at or above this is at least "moderately".
    pub moderate: f64,
    /// `|s|` at or above this is "significantly".
    pub significant: f64,
}

impl Default for SkewThresholds {
    fn default() -> Self {
        SkewThresholds {
            moderate: 0.5,
            significant: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub q25: f64,
    pub q75: f64,
    pub min: f64,
    pub max: f64,
    pub skewness: f64,
    pub skew_magnitude: SkewMagnitude,
    pub skew_direction: SkewDirection,
    /// Set when every sample is equal; skewness is then reported as 0.
    pub degenerate: bool,
}

pub fn mean(samples: &[f64]) -> Result<f64, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::Empty);
    }
    Ok(samples.iter().sum::<f64>() / samples.len() as f64)
}

/// Moment-ratio skewness. Returns [`StatsError::Degenerate`] when the second
/// central moment is zero.
pub fn skewness(samples: &[f64]) -> Result<f64, StatsError> {
    if samples.len() < 3 {
        return Err(StatsError::TooFew {
            need: 3,
            got: samples.len(),
        });
    }
    let n = samples.len() as f64;
    let mean = mean(samples)?;
    let (m2, m3) = samples.iter().fold((0.0, 0.0), |(m2, m3), &x| {
        let d = x - mean;
        let d2 = d * d;
        (m2 + d2, m3 + d2 * d)
    });
    let (m2, m3) = (m2 / n, m3 / n);
    if m2 == 0.0 {
        return Err(StatsError::Degenerate);
    }
    Ok(m3 / m2.powf(1.5))
}

/// Type-7 quantile. Sorts a copy; use [`quantile_sorted`] in loops.
pub fn quantile(samples: &[f64], p: f64) -> Result<f64, StatsError> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, p)
}

pub fn quantile_sorted(sorted: &[f64], p: f64) -> Result<f64, StatsError> {
    if sorted.is_empty() {
        return Err(StatsError::Empty);
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(StatsError::InvalidProbability(p));
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

pub fn skew_label(s: f64) -> (SkewMagnitude, SkewDirection) {
    skew_label_with(s, &SkewThresholds::default())
}

pub fn skew_label_with(s: f64, thresholds: &SkewThresholds) -> (SkewMagnitude, SkewDirection) {
    let a = s.abs();
    let magnitude = if a >= thresholds.significant {
        SkewMagnitude::Significantly
    } else if a >= thresholds.moderate {
        SkewMagnitude::Moderately
    } else {
        SkewMagnitude::Slightly
    };
    let direction = if s >= 0.0 {
        SkewDirection::Higher
    } else {
        SkewDirection::Lower
    };
    (magnitude, direction)
}

pub fn summary_stats(samples: &[f64]) -> Result<SummaryStats, StatsError> {
    summary_stats_with(samples, &SkewThresholds::default())
}

pub fn summary_stats_with(
    samples: &[f64],
    thresholds: &SkewThresholds,
) -> Result<SummaryStats, StatsError> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = mean(&sorted)?;
    let q25 = quantile_sorted(&sorted, 0.25)?;
    let q75 = quantile_sorted(&sorted, 0.75)?;
    let (skewness, degenerate) = match skewness(samples) {
        Ok(s) => (s, false),
        Err(StatsError::Degenerate) => (0.0, true),
        Err(e) => return Err(e),
    };
    let (skew_magnitude, skew_direction) = skew_label_with(skewness, thresholds);
    Ok(SummaryStats {
        mean,
        q25,
        q75,
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        skewness,
        skew_magnitude,
        skew_direction,
        degenerate,
    })
}

/// Fraction of samples at or below `v`.
pub fn ecdf(samples: &[f64], v: f64) -> Result<f64, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::Empty);
    }
    let at_or_below = samples.iter().filter(|&&x| x <= v).count();
    Ok(at_or_below as f64 / samples.len() as f64)
}
