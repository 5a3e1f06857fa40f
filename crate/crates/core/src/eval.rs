//! Chronological splitting, fixed-horizon forecast metrics, and metric grids
//! over model orders.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{
    fit_linear, init_ann_with_width, train_ann, AlignedSeries, Forecaster, ModelError, ModelOrder,
    Representation, DEFAULT_HIDDEN_WIDTH,
};
use crate::rng::derive_seed;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    Empty,
    #[error("series too short: need at least {needed}, have {available}")]
    TooShort { needed: usize, available: usize },
    #[error("train fraction {0} leaves an empty partition")]
    EmptyPartition(f64),
    #[error("invalid sweep range")]
    EmptyRange,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Chronological train/test split; the first block trains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.6,
        }
    }
}

impl SplitSpec {
    pub fn new(train_fraction: f64) -> Self {
        Self { train_fraction }
    }

    /// First test index for a series of the given length.
    pub fn split_index(&self, len: usize) -> Result<usize, EvalError> {
        if len < 5 {
            return Err(EvalError::TooShort {
                needed: 5,
                available: len,
            });
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(EvalError::EmptyPartition(self.train_fraction));
        }
        let train = (self.train_fraction * len as f64).floor() as usize;
        if train == 0 || train == len {
            return Err(EvalError::EmptyPartition(self.train_fraction));
        }
        Ok(train)
    }
}

/// Split into owned (train, test) series.
pub fn split<T: Scalar>(
    series: &AlignedSeries<T>,
    spec: &SplitSpec,
) -> Result<(AlignedSeries<T>, AlignedSeries<T>), EvalError> {
    let at = spec.split_index(series.len())?;
    let take = |from: usize, to: usize| {
        AlignedSeries::from_parts(
            series.y()[from..to].to_vec(),
            series.u().map(|u| u[from..to].to_vec()),
            series.representation(),
        )
        .expect("slicing preserves series invariants")
    };
    Ok((take(0, at), take(at, series.len())))
}

/// Training prefix of a series, up to the split index.
pub fn train_prefix<T: Scalar>(series: &AlignedSeries<T>, test_start: usize) -> AlignedSeries<T> {
    AlignedSeries::from_parts(
        series.y()[..test_start].to_vec(),
        series.u().map(|u| u[..test_start].to_vec()),
        series.representation(),
    )
    .expect("prefix preserves series invariants")
}

fn check_pair<T>(a: &[T], b: &[T]) -> Result<(), EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(())
}

/// Root mean square of e(t) = prediction - actual.
pub fn rmse<T: Scalar>(predictions: &[T], actuals: &[T]) -> Result<T, EvalError> {
    check_pair(predictions, actuals)?;
    let n = T::from_f64_lossy(predictions.len() as f64);
    let sum: T = predictions
        .iter()
        .zip(actuals)
        .map(|(&p, &a)| {
            let e = p - a;
            e * e
        })
        .sum();
    Ok((sum / n).sqrt())
}

/// Mean absolute error.
pub fn mae<T: Scalar>(predictions: &[T], actuals: &[T]) -> Result<T, EvalError> {
    check_pair(predictions, actuals)?;
    let n = T::from_f64_lossy(predictions.len() as f64);
    Ok(predictions
        .iter()
        .zip(actuals)
        .map(|(&p, &a)| (p - a).abs())
        .sum::<T>()
        / n)
}

/// Fraction of points where the predicted and actual moves away from
/// y(t - n_k) share a strict sign; zero products count as misses.
pub fn directional_accuracy<T: Scalar>(
    predictions: &[T],
    actuals: &[T],
    lagged_actuals: &[T],
) -> Result<T, EvalError> {
    check_pair(predictions, actuals)?;
    check_pair(actuals, lagged_actuals)?;
    let hits = predictions
        .iter()
        .zip(actuals)
        .zip(lagged_actuals)
        .filter(|((&p, &a), &lag)| (a - lag) * (p - lag) > T::zero())
        .count();
    Ok(T::from_f64_lossy(hits as f64 / predictions.len() as f64))
}

/// Fraction of points where predicted and actual returns share a strict
/// sign; zero products count as misses.
pub fn sign_accuracy<T: Scalar>(
    predicted_returns: &[T],
    actual_returns: &[T],
) -> Result<T, EvalError> {
    check_pair(predicted_returns, actual_returns)?;
    let hits = predicted_returns
        .iter()
        .zip(actual_returns)
        .filter(|(&p, &a)| p * a > T::zero())
        .count();
    Ok(T::from_f64_lossy(
        hits as f64 / predicted_returns.len() as f64,
    ))
}

/// Metrics for one (model, horizon) cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics<T> {
    pub rmse: T,
    pub mae: T,
    /// Directional accuracy at level, sign accuracy for returns.
    pub directional: T,
    /// Unbiased sample variance of the prediction errors.
    pub error_variance: T,
    pub n_points: usize,
}

/// Score a prediction vector over the test block of `series`.
pub fn metrics_from_predictions<T: Scalar>(
    predictions: &[T],
    series: &AlignedSeries<T>,
    test_start: usize,
    n_k: usize,
) -> Result<EvalMetrics<T>, EvalError> {
    if test_start >= series.len() {
        return Err(EvalError::TooShort {
            needed: test_start + 1,
            available: series.len(),
        });
    }
    let actuals = &series.y()[test_start..];
    check_pair(predictions, actuals)?;
    if test_start < n_k {
        return Err(EvalError::Model(ModelError::InsufficientHistory {
            t: test_start,
        }));
    }

    let err_rmse = rmse(predictions, actuals)?;
    let err_mae = mae(predictions, actuals)?;
    let directional = match series.representation() {
        Representation::AtLevel => {
            let lagged: Vec<T> = (test_start..series.len())
                .map(|t| series.y()[t - n_k])
                .collect();
            directional_accuracy(predictions, actuals, &lagged)?
        }
        Representation::LogReturn => sign_accuracy(predictions, actuals)?,
    };

    let n = predictions.len();
    let errors: Vec<T> = predictions
        .iter()
        .zip(actuals)
        .map(|(&p, &a)| p - a)
        .collect();
    let error_variance = if n < 2 {
        T::zero()
    } else {
        let mean = errors.iter().copied().sum::<T>() / T::from_f64_lossy(n as f64);
        errors.iter().map(|&e| (e - mean) * (e - mean)).sum::<T>()
            / T::from_f64_lossy((n - 1) as f64)
    };

    Ok(EvalMetrics {
        rmse: err_rmse,
        mae: err_mae,
        directional,
        error_variance,
        n_points: n,
    })
}

/// Static one-step-per-index forecasts over the test block: each prediction
/// reads actual history only, never model feedback.
pub fn test_predictions<T: Scalar>(
    model: &impl Forecaster<T>,
    series: &AlignedSeries<T>,
    test_start: usize,
) -> Result<Vec<T>, EvalError> {
    if test_start >= series.len() {
        return Err(EvalError::TooShort {
            needed: test_start + 1,
            available: series.len(),
        });
    }
    (test_start..series.len())
        .map(|t| model.predict(series, t).map_err(EvalError::from))
        .collect()
}

/// Evaluate a fitted model over the test block that starts at `test_start`.
/// Lag windows may reach back into the training prefix, so every test index
/// is scored.
pub fn evaluate<T: Scalar>(
    model: &impl Forecaster<T>,
    series: &AlignedSeries<T>,
    test_start: usize,
) -> Result<EvalMetrics<T>, EvalError> {
    let predictions = test_predictions(model, series, test_start)?;
    metrics_from_predictions(&predictions, series, test_start, model.order().n_k)
}

/// Predicted and actual directional signs over the test block, for
/// resampling tests. At level these are the signs of the moves away from
/// y(t - n_k); for returns they are the raw signs.
pub fn directional_signs<T: Scalar>(
    predictions: &[T],
    series: &AlignedSeries<T>,
    test_start: usize,
    n_k: usize,
) -> Result<(Vec<i8>, Vec<i8>), EvalError> {
    if test_start >= series.len() || test_start < n_k {
        return Err(EvalError::TooShort {
            needed: test_start + 1,
            available: series.len(),
        });
    }
    let actuals = &series.y()[test_start..];
    check_pair(predictions, actuals)?;
    let sign = |v: T| {
        if v > T::zero() {
            1i8
        } else if v < T::zero() {
            -1i8
        } else {
            0i8
        }
    };
    Ok(match series.representation() {
        Representation::AtLevel => {
            let predicted = predictions
                .iter()
                .enumerate()
                .map(|(i, &p)| sign(p - series.y()[test_start + i - n_k]))
                .collect();
            let actual = actuals
                .iter()
                .enumerate()
                .map(|(i, &a)| sign(a - series.y()[test_start + i - n_k]))
                .collect();
            (predicted, actual)
        }
        Representation::LogReturn => (
            predictions.iter().map(|&p| sign(p)).collect(),
            actuals.iter().map(|&a| sign(a)).collect(),
        ),
    })
}

/// Model family swept over the order grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ar,
    Arx,
    Ann,
}

/// Knobs for fitting sweep cells.
#[derive(Debug, Clone, Copy)]
pub struct SweepConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Seeds averaged per ANN cell to damp initialization variance.
    pub ann_seeds: usize,
    pub hidden_width: usize,
    pub base_seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            learning_rate: 0.05,
            ann_seeds: 3,
            hidden_width: DEFAULT_HIDDEN_WIDTH,
            base_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellOutcome<T> {
    Ok { metrics: EvalMetrics<T> },
    Failed { error: String },
}

impl<T> CellOutcome<T> {
    pub fn metrics(&self) -> Option<&EvalMetrics<T>> {
        match self {
            CellOutcome::Ok { metrics } => Some(metrics),
            CellOutcome::Failed { .. } => None,
        }
    }
}

/// Metric grid over (n_a, n_b); the AR family collapses n_b to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid<T> {
    pub model_kind: ModelKind,
    pub n_k: usize,
    pub representation: Representation,
    pub cells: BTreeMap<(usize, usize), CellOutcome<T>>,
}

/// Which metric a matrix file reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Rmse,
    Mae,
    Directional,
    ErrorVariance,
}

impl MetricKind {
    pub const ALL: [MetricKind; 4] = [
        MetricKind::Rmse,
        MetricKind::Mae,
        MetricKind::Directional,
        MetricKind::ErrorVariance,
    ];

    pub fn file_stem(&self) -> &'static str {
        match self {
            MetricKind::Rmse => "rmse",
            MetricKind::Mae => "mae",
            MetricKind::Directional => "directional",
            MetricKind::ErrorVariance => "error_variance",
        }
    }

    fn pick<T: Copy>(&self, m: &EvalMetrics<T>) -> T {
        match self {
            MetricKind::Rmse => m.rmse,
            MetricKind::Mae => m.mae,
            MetricKind::Directional => m.directional,
            MetricKind::ErrorVariance => m.error_variance,
        }
    }
}

impl<T: Scalar> SweepGrid<T> {
    /// Cell with the smallest RMSE; ties resolve to the smallest (n_a, n_b).
    pub fn best_by_rmse(&self) -> Option<((usize, usize), &EvalMetrics<T>)> {
        self.cells
            .iter()
            .filter_map(|(&key, outcome)| outcome.metrics().map(|m| (key, m)))
            .min_by(|a, b| a.1.rmse.partial_cmp(&b.1.rmse).unwrap())
    }

    /// One metric as a comma-separated matrix: rows n_a, columns n_b.
    pub fn metric_csv(&self, metric: MetricKind) -> String {
        let mut nas: Vec<usize> = self.cells.keys().map(|k| k.0).collect();
        nas.dedup();
        let mut nbs: Vec<usize> = self.cells.keys().map(|k| k.1).collect();
        nbs.sort_unstable();
        nbs.dedup();

        let mut out = String::from("n_a\\n_b");
        for nb in &nbs {
            out.push_str(&format!(",{nb}"));
        }
        out.push('\n');
        for na in &nas {
            out.push_str(&na.to_string());
            for nb in &nbs {
                let value = self
                    .cells
                    .get(&(*na, *nb))
                    .and_then(CellOutcome::metrics)
                    .map_or_else(|| "nan".to_string(), |m| metric.pick(m).to_string());
                out.push_str(&format!(",{value}"));
            }
            out.push('\n');
        }
        out
    }
}

impl<T: Scalar + Serialize> SweepGrid<T> {
    /// JSON bundle of every cell and metric.
    pub fn to_json(&self) -> serde_json::Value {
        let cells: Vec<serde_json::Value> = self
            .cells
            .iter()
            .map(|(&(n_a, n_b), outcome)| {
                let mut obj = serde_json::json!({ "n_a": n_a, "n_b": n_b });
                let entry = serde_json::to_value(outcome).expect("cell serializes");
                obj.as_object_mut()
                    .unwrap()
                    .extend(entry.as_object().unwrap().clone());
                obj
            })
            .collect();
        serde_json::json!({
            "model_kind": self.model_kind,
            "n_k": self.n_k,
            "representation": self.representation,
            "cells": cells,
        })
    }
}

/// Fit one cell and forecast the test block, once per model instance.
///
/// Linear families return a single prediction vector; the ANN returns one
/// per averaged seed, each derived from (base_seed, n_a, n_b, replicate).
pub fn cell_predictions<T: Scalar>(
    series: &AlignedSeries<T>,
    test_start: usize,
    kind: ModelKind,
    order: &ModelOrder,
    config: &SweepConfig,
) -> Result<Vec<Vec<T>>, EvalError> {
    let train = train_prefix(series, test_start);
    match kind {
        ModelKind::Ar | ModelKind::Arx => {
            let model = fit_linear(&train, order)?;
            Ok(vec![test_predictions(&model, series, test_start)?])
        }
        ModelKind::Ann => {
            let mut all = Vec::with_capacity(config.ann_seeds.max(1));
            for replicate in 0..config.ann_seeds.max(1) {
                let seed = derive_seed(
                    config.base_seed,
                    &[order.n_a as u64, order.n_b as u64, replicate as u64],
                );
                let fresh = init_ann_with_width(order, config.hidden_width, seed);
                let trained = train_ann(
                    &fresh,
                    &train,
                    config.epochs,
                    T::from_f64_lossy(config.learning_rate),
                )?;
                all.push(test_predictions(&trained.model, series, test_start)?);
            }
            Ok(all)
        }
    }
}

fn average_metrics<T: Scalar>(all: &[EvalMetrics<T>]) -> EvalMetrics<T> {
    let n = T::from_f64_lossy(all.len() as f64);
    EvalMetrics {
        rmse: all.iter().map(|m| m.rmse).sum::<T>() / n,
        mae: all.iter().map(|m| m.mae).sum::<T>() / n,
        directional: all.iter().map(|m| m.directional).sum::<T>() / n,
        error_variance: all.iter().map(|m| m.error_variance).sum::<T>() / n,
        n_points: all[0].n_points,
    }
}

/// Fit and evaluate every (n_a, n_b) cell on the identical test block.
/// Failed cells are recorded, not fatal.
pub fn sweep<T: Scalar>(
    series: &AlignedSeries<T>,
    test_start: usize,
    kind: ModelKind,
    na_range: RangeInclusive<usize>,
    nb_range: RangeInclusive<usize>,
    n_k: usize,
    config: &SweepConfig,
) -> Result<SweepGrid<T>, EvalError> {
    if na_range.is_empty() || (kind != ModelKind::Ar && nb_range.is_empty()) {
        return Err(EvalError::EmptyRange);
    }
    if test_start >= series.len() {
        return Err(EvalError::TooShort {
            needed: test_start + 1,
            available: series.len(),
        });
    }
    let nb_values: Vec<usize> = match kind {
        ModelKind::Ar => vec![0],
        _ => nb_range.collect(),
    };

    let mut cells = BTreeMap::new();
    for n_a in na_range {
        for &n_b in &nb_values {
            let outcome = (|| -> Result<EvalMetrics<T>, EvalError> {
                let order = ModelOrder::new(n_a, n_b, n_k)?;
                let instances = cell_predictions(series, test_start, kind, &order, config)?;
                let scored = instances
                    .iter()
                    .map(|p| metrics_from_predictions(p, series, test_start, n_k))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(average_metrics(&scored))
            })();
            let cell = match outcome {
                Ok(metrics) => CellOutcome::Ok { metrics },
                Err(e) => CellOutcome::Failed {
                    error: e.to_string(),
                },
            };
            cells.insert((n_a, n_b), cell);
        }
    }
    Ok(SweepGrid {
        model_kind: kind,
        n_k,
        representation: series.representation(),
        cells,
    })
}
