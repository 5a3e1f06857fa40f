//! Moving-average trading rule on model forecasts, with per-step and
//! cumulative return accounting.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum TradingError {
    #[error("length mismatch: {left} predictions vs {right} actuals")]
    LengthMismatch { left: usize, right: usize },
    #[error("series of length {available} leaves no tradable step (first is {first})")]
    InsufficientHistory { first: usize, available: usize },
    #[error("invalid trading config: {0}")]
    InvalidConfig(String),
}

/// Moving-average order, holding horizon, and rule variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradingConfig {
    /// Moving-average order m.
    pub m: usize,
    /// Holding horizon n_k; returns compare y(t) against y(t - n_k).
    pub n_k: usize,
    /// Evaluate the moving average at t itself instead of at the decision
    /// time t - n_k. This reads y(t) before it is known; off by default.
    pub literal_ma: bool,
    /// Resolve prediction == moving average to +1 instead of -1.
    pub tie_long: bool,
    /// Compound per-step returns instead of summing them.
    pub compound: bool,
}

impl Default for TradingConfig {
    fn default() -> Self {
        Self {
            m: 4,
            n_k: 1,
            literal_ma: false,
            tie_long: false,
            compound: false,
        }
    }
}

impl TradingConfig {
    pub fn new(m: usize, n_k: usize) -> Result<Self, TradingError> {
        if m < 1 {
            return Err(TradingError::InvalidConfig("m must be >= 1".into()));
        }
        if n_k < 1 {
            return Err(TradingError::InvalidConfig("n_k must be >= 1".into()));
        }
        Ok(Self {
            m,
            n_k,
            ..Self::default()
        })
    }

    /// First index with enough history for the moving average and the
    /// holding-horizon return.
    pub fn first_tradable(&self) -> usize {
        if self.literal_ma {
            (self.m - 1).max(self.n_k)
        } else {
            self.n_k + self.m - 1
        }
    }
}

/// Mean of y(t), y(t-1), ..., y(t-m+1).
pub fn moving_average<T: Scalar>(y: &[T], m: usize, t: usize) -> Result<T, TradingError> {
    if m < 1 {
        return Err(TradingError::InvalidConfig("m must be >= 1".into()));
    }
    if t + 1 < m || t >= y.len() {
        return Err(TradingError::InsufficientHistory {
            first: m - 1,
            available: y.len(),
        });
    }
    let sum: T = y[t + 1 - m..=t].iter().copied().sum();
    Ok(sum / T::from_f64_lossy(m as f64))
}

/// Buy (+1) when the forecast exceeds the moving average, sell (-1) when it
/// is below; exact ties go to the sell side.
pub fn signal<T: Scalar>(prediction: T, ma: T) -> i8 {
    signal_with_tie(prediction, ma, false)
}

pub fn signal_with_tie<T: Scalar>(prediction: T, ma: T, tie_long: bool) -> i8 {
    if prediction > ma {
        1
    } else if prediction < ma {
        -1
    } else if tie_long {
        1
    } else {
        -1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeStep<T> {
    pub t: usize,
    pub signal: i8,
    /// Signed percent return of the step.
    pub return_pct: T,
    pub cumulative_pct: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeLedger<T> {
    pub steps: Vec<TradeStep<T>>,
    pub final_cumulative: T,
}

/// Run the trading rule over aligned prediction/actual series.
///
/// At each tradable t the signal compares the forecast for t against the
/// moving average available at decision time, then earns
/// R(t) = signal * 100 * (y(t) - y(t-n_k)) / y(t-n_k).
pub fn simulate<T: Scalar>(
    predictions: &[T],
    actuals: &[T],
    config: &TradingConfig,
) -> Result<TradeLedger<T>, TradingError> {
    if predictions.len() != actuals.len() {
        return Err(TradingError::LengthMismatch {
            left: predictions.len(),
            right: actuals.len(),
        });
    }
    let first = config.first_tradable();
    if first >= actuals.len() {
        return Err(TradingError::InsufficientHistory {
            first,
            available: actuals.len(),
        });
    }

    let hundred = T::from_f64_lossy(100.0);
    let mut steps = Vec::with_capacity(actuals.len() - first);
    let mut cumulative = T::zero();
    for t in first..actuals.len() {
        let ma_at = if config.literal_ma { t } else { t - config.n_k };
        let ma = moving_average(actuals, config.m, ma_at)?;
        let sig = signal_with_tie(predictions[t], ma, config.tie_long);
        let base = actuals[t - config.n_k];
        let move_pct = (actuals[t] - base) / base * hundred;
        let return_pct = if sig > 0 { move_pct } else { -move_pct };
        cumulative = if config.compound {
            ((T::one() + cumulative / hundred) * (T::one() + return_pct / hundred) - T::one())
                * hundred
        } else {
            cumulative + return_pct
        };
        steps.push(TradeStep {
            t,
            signal: sig,
            return_pct,
            cumulative_pct: cumulative,
        });
    }
    Ok(TradeLedger {
        final_cumulative: cumulative,
        steps,
    })
}

/// Serialize a ledger as `t,signal,return_pct,cumulative_pct`.
pub fn ledger_csv<T: Scalar>(ledger: &TradeLedger<T>) -> String {
    let mut out = String::from("t,signal,return_pct,cumulative_pct\n");
    for step in &ledger.steps {
        out.push_str(&format!(
            "{},{},{},{}\n",
            step.t, step.signal, step.return_pct, step.cumulative_pct
        ));
    }
    out
}

/// Final cumulative return per (n_a, n_b) cell, averaged over the cell's
/// model instances; failed cells carry the error text.
pub fn mean_cumulative_grid<T: Scalar>(
    cell_predictions: &BTreeMap<(usize, usize), Vec<Vec<T>>>,
    actuals: &[T],
    config: &TradingConfig,
) -> BTreeMap<(usize, usize), Result<T, String>> {
    cell_predictions
        .iter()
        .map(|(&key, instances)| {
            let outcome = (|| {
                if instances.is_empty() {
                    return Err("cell has no prediction instances".to_string());
                }
                let mut total = T::zero();
                for predictions in instances {
                    total += simulate(predictions, actuals, config)
                        .map_err(|e| e.to_string())?
                        .final_cumulative;
                }
                Ok(total / T::from_f64_lossy(instances.len() as f64))
            })();
            (key, outcome)
        })
        .collect()
}

/// Matrix CSV (rows n_a, columns n_b) of a cumulative-return grid.
pub fn cumulative_grid_csv<T: Scalar>(
    grid: &BTreeMap<(usize, usize), Result<T, String>>,
) -> String {
    let mut nas: Vec<usize> = grid.keys().map(|k| k.0).collect();
    nas.dedup();
    let mut nbs: Vec<usize> = grid.keys().map(|k| k.1).collect();
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
            let value = match grid.get(&(*na, *nb)) {
                Some(Ok(v)) => v.to_string(),
                _ => "nan".to_string(),
            };
            out.push_str(&format!(",{value}"));
        }
        out.push('\n');
    }
    out
}
