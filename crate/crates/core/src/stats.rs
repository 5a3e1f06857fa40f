//! Resampling significance tests for directional-accuracy results: a
//! case-resampling bootstrap for confidence intervals, a permutation test
//! against the no-skill null, and a paired bootstrap for error comparisons.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::rng::{derive_seed, seeded_rng};
use crate::scalar::Scalar;

pub const DEFAULT_RESAMPLES: usize = 5000;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("need at least {needed} points, have {available}")]
    TooFewPoints { needed: usize, available: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Observed statistic plus its resampling distribution.
///
/// The add-one p-value estimator keeps p inside [1/(B+1), 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ResampleResult<T> {
    pub observed: T,
    pub distribution: Vec<T>,
    pub p_value: T,
    pub resamples: usize,
    pub seed: u64,
}

impl<T: Scalar> ResampleResult<T> {
    /// Quantile of the resampling distribution.
    pub fn percentile(&self, p: f64) -> T {
        let mut sorted = self.distribution.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        crate::distfit::quantile_sorted(&sorted, p)
    }

    pub fn report(&self, bins: usize) -> ResampleReport<T> {
        ResampleReport {
            observed: self.observed,
            p_value: self.p_value,
            resamples: self.resamples,
            seed: self.seed,
            histogram: Histogram::of(&self.distribution, bins),
        }
    }
}

/// Fixed-bin histogram of a resampling distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram<T> {
    pub min: T,
    pub max: T,
    pub counts: Vec<usize>,
}

impl<T: Scalar> Histogram<T> {
    pub fn of(values: &[T], bins: usize) -> Self {
        let bins = bins.max(1);
        let min = values.iter().copied().fold(T::infinity(), T::min);
        let max = values.iter().copied().fold(T::neg_infinity(), T::max);
        let mut counts = vec![0usize; bins];
        if min >= max {
            counts[0] = values.len();
            return Self { min, max, counts };
        }
        let width = (max - min) / T::from_f64_lossy(bins as f64);
        for &v in values {
            let idx = ((v - min) / width).to_f64_lossy() as usize;
            counts[idx.min(bins - 1)] += 1;
        }
        Self { min, max, counts }
    }
}

/// JSON-facing view with the distribution reduced to a histogram.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResampleReport<T> {
    pub observed: T,
    pub p_value: T,
    pub resamples: usize,
    pub seed: u64,
    pub histogram: Histogram<T>,
}

fn add_one_p<T: Scalar>(hits: usize, resamples: usize) -> T {
    T::from_f64_lossy((1 + hits) as f64 / (resamples + 1) as f64)
}

fn resample_rng(seed: u64, index: usize) -> impl Rng {
    seeded_rng(derive_seed(seed, &[index as u64]))
}

/// Case-resampling bootstrap of a hit-rate.
///
/// Each resample draws n indicators with replacement and records their mean;
/// the quantiles of `distribution` bound the model's accuracy. The reported
/// p-value is the one-sided probability of a resampled mean at or below the
/// 1/2 no-skill level.
pub fn bootstrap_statistic<T: Scalar>(
    per_point_indicators: &[bool],
    resamples: usize,
    seed: u64,
) -> Result<ResampleResult<T>, StatsError> {
    const MIN_POINTS: usize = 10;
    let n = per_point_indicators.len();
    if n < MIN_POINTS {
        return Err(StatsError::TooFewPoints {
            needed: MIN_POINTS,
            available: n,
        });
    }
    if resamples < 100 {
        return Err(StatsError::InvalidArgument(
            "need at least 100 resamples".into(),
        ));
    }

    let hits = per_point_indicators.iter().filter(|&&hit| hit).count();
    let observed = T::from_f64_lossy(hits as f64 / n as f64);

    let mut distribution = Vec::with_capacity(resamples);
    let mut at_or_below_chance = 0usize;
    for i in 0..resamples {
        let mut rng = resample_rng(seed, i);
        let drawn = (0..n)
            .filter(|_| per_point_indicators[rng.random_range(0..n)])
            .count();
        let mean = drawn as f64 / n as f64;
        if mean <= 0.5 {
            at_or_below_chance += 1;
        }
        distribution.push(T::from_f64_lossy(mean));
    }
    Ok(ResampleResult {
        observed,
        distribution,
        p_value: add_one_p(at_or_below_chance, resamples),
        resamples,
        seed,
    })
}

fn strict_sign_rate<T: Scalar>(predicted: &[i8], actual: &[i8]) -> T {
    let hits = predicted
        .iter()
        .zip(actual)
        .filter(|(&p, &a)| i32::from(p) * i32::from(a) > 0)
        .count();
    T::from_f64_lossy(hits as f64 / predicted.len() as f64)
}

/// Permutation test of directional skill.
///
/// Each resample permutes the predicted signs against the fixed actual signs
/// and recomputes the strict sign-agreement rate; the p-value is the add-one
/// fraction of resamples at or above the observed rate.
pub fn permutation_null<T: Scalar>(
    predicted_signs: &[i8],
    actual_signs: &[i8],
    resamples: usize,
    seed: u64,
) -> Result<ResampleResult<T>, StatsError> {
    const MIN_POINTS: usize = 10;
    if predicted_signs.len() != actual_signs.len() {
        return Err(StatsError::LengthMismatch {
            left: predicted_signs.len(),
            right: actual_signs.len(),
        });
    }
    if predicted_signs.len() < MIN_POINTS {
        return Err(StatsError::TooFewPoints {
            needed: MIN_POINTS,
            available: predicted_signs.len(),
        });
    }
    if resamples < 100 {
        return Err(StatsError::InvalidArgument(
            "need at least 100 resamples".into(),
        ));
    }
    if predicted_signs
        .iter()
        .chain(actual_signs)
        .any(|s| !(-1..=1).contains(s))
    {
        return Err(StatsError::InvalidArgument(
            "signs must lie in {-1, 0, 1}".into(),
        ));
    }

    let observed: T = strict_sign_rate(predicted_signs, actual_signs);
    let mut permuted = predicted_signs.to_vec();
    let mut distribution = Vec::with_capacity(resamples);
    let mut at_or_above = 0usize;
    for i in 0..resamples {
        let mut rng = resample_rng(seed, i);
        permuted.copy_from_slice(predicted_signs);
        permuted.shuffle(&mut rng);
        let stat: T = strict_sign_rate(&permuted, actual_signs);
        if stat >= observed {
            at_or_above += 1;
        }
        distribution.push(stat);
    }
    Ok(ResampleResult {
        observed,
        distribution,
        p_value: add_one_p(at_or_above, resamples),
        resamples,
        seed,
    })
}

/// Paired bootstrap of the mean absolute-error difference between two
/// models evaluated on the same points. Two-sided p-value: the add-one
/// fraction of resampled differences crossing zero, doubled and capped at 1.
pub fn accuracy_difference_test<T: Scalar>(
    errors_model_a: &[T],
    errors_model_b: &[T],
    resamples: usize,
    seed: u64,
) -> Result<ResampleResult<T>, StatsError> {
    if errors_model_a.len() != errors_model_b.len() {
        return Err(StatsError::LengthMismatch {
            left: errors_model_a.len(),
            right: errors_model_b.len(),
        });
    }
    if errors_model_a.is_empty() {
        return Err(StatsError::TooFewPoints {
            needed: 1,
            available: 0,
        });
    }
    if resamples < 100 {
        return Err(StatsError::InvalidArgument(
            "need at least 100 resamples".into(),
        ));
    }

    let diffs: Vec<T> = errors_model_a
        .iter()
        .zip(errors_model_b)
        .map(|(&a, &b)| a.abs() - b.abs())
        .collect();
    let n = diffs.len();
    let nf = T::from_f64_lossy(n as f64);
    let observed = diffs.iter().copied().sum::<T>() / nf;

    let mut distribution = Vec::with_capacity(resamples);
    let (mut at_or_above_zero, mut at_or_below_zero) = (0usize, 0usize);
    for i in 0..resamples {
        let mut rng = resample_rng(seed, i);
        let mean = (0..n).map(|_| diffs[rng.random_range(0..n)]).sum::<T>() / nf;
        if mean >= T::zero() {
            at_or_above_zero += 1;
        }
        if mean <= T::zero() {
            at_or_below_zero += 1;
        }
        distribution.push(mean);
    }
    let tail = at_or_above_zero.min(at_or_below_zero);
    let p_value = (T::from_f64_lossy(2.0) * add_one_p::<T>(tail, resamples)).min(T::one());
    Ok(ResampleResult {
        observed,
        distribution,
        p_value,
        resamples,
        seed,
    })
}
