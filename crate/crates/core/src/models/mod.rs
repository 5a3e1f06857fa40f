//! Forecasting models: lagged series structure, least-squares AR/ARX fits,
//! and the small feedforward network.

mod ann;
mod linear;

pub use ann::{
    ann_gradient, ann_loss, baum_haussler_check, init_ann, init_ann_with_width, train_ann,
    weight_count, AnnGradient, AnnModel, TrainOutcome, DEFAULT_HIDDEN_WIDTH,
};
pub use linear::{fit_linear, Convention, LinearModel};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{LinalgError, Mat};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("series too short: need at least {needed}, have {available}")]
    TooShort { needed: usize, available: usize },
    #[error("non-positive value at index {index} in an at-level series")]
    NonPositiveValue { index: usize },
    #[error("order has n_b > 0 but the series carries no exogenous channel")]
    MissingExogenous,
    #[error("series is already differenced")]
    NotAtLevel,
    #[error("design matrix is rank deficient (rank {rank} of {cols})")]
    RankDeficient { rank: usize, cols: usize },
    #[error("history cannot supply the lags for index {t}")]
    InsufficientHistory { t: usize },
    #[error("training loss became non-finite at epoch {epoch}")]
    DivergedLoss { epoch: usize },
    #[error("invalid model order: {0}")]
    InvalidOrder(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("series channels differ in length: y has {y_len}, u has {u_len}")]
    ChannelMismatch { y_len: usize, u_len: usize },
}

impl From<LinalgError> for ModelError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::RankDeficient { rank, cols } => ModelError::RankDeficient { rank, cols },
            LinalgError::UnderDetermined { rows, cols } => ModelError::TooShort {
                needed: cols,
                available: rows,
            },
            LinalgError::ShapeMismatch(msg) => ModelError::ShapeMismatch(msg),
        }
    }
}

/// Whether a series holds raw rates or percent log returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    AtLevel,
    LogReturn,
}

/// (n_a, n_b, n_k): autoregressive order, exogenous order, pure delay.
///
/// `n_b = 0` means a pure AR model; `n_k` is the forecast horizon in steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelOrder {
    pub n_a: usize,
    pub n_b: usize,
    pub n_k: usize,
}

impl ModelOrder {
    pub fn new(n_a: usize, n_b: usize, n_k: usize) -> Result<Self, ModelError> {
        if n_a < 1 {
            return Err(ModelError::InvalidOrder("n_a must be >= 1".into()));
        }
        if n_k < 1 {
            return Err(ModelError::InvalidOrder("n_k must be >= 1".into()));
        }
        Ok(Self { n_a, n_b, n_k })
    }

    pub fn ar(n_a: usize, n_k: usize) -> Result<Self, ModelError> {
        Self::new(n_a, 0, n_k)
    }

    /// Indices below this cannot serve as regression targets.
    pub fn burn_in(&self) -> usize {
        self.n_k + self.n_a.max(self.n_b) - 1
    }

    pub fn input_width(&self) -> usize {
        self.n_a + self.n_b
    }
}

/// The actual-rate channel y(t) with an optional tweet-mean channel u(t).
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedSeries<T> {
    y: Vec<T>,
    u: Option<Vec<T>>,
    representation: Representation,
}

impl<T: Scalar> AlignedSeries<T> {
    pub fn from_parts(
        y: Vec<T>,
        u: Option<Vec<T>>,
        representation: Representation,
    ) -> Result<Self, ModelError> {
        if let Some(u) = &u {
            if u.len() != y.len() {
                return Err(ModelError::ChannelMismatch {
                    y_len: y.len(),
                    u_len: u.len(),
                });
            }
        }
        if representation == Representation::AtLevel {
            let check = |values: &[T]| {
                values
                    .iter()
                    .position(|v| !v.is_finite() || *v <= T::zero())
            };
            if let Some(index) = check(&y).or_else(|| u.as_deref().and_then(check)) {
                return Err(ModelError::NonPositiveValue { index });
            }
        }
        Ok(Self {
            y,
            u,
            representation,
        })
    }

    pub fn at_level(y: Vec<T>, u: Option<Vec<T>>) -> Result<Self, ModelError> {
        Self::from_parts(y, u, Representation::AtLevel)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    pub fn u(&self) -> Option<&[T]> {
        self.u.as_deref()
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }

    /// Percent log returns: y'(t) = 100 (ln y(t) - ln y(t-1)), one element
    /// shorter than the input; applied to both channels.
    pub fn log_returns(&self) -> Result<Self, ModelError> {
        if self.representation != Representation::AtLevel {
            return Err(ModelError::NotAtLevel);
        }
        if self.len() < 2 {
            return Err(ModelError::TooShort {
                needed: 2,
                available: self.len(),
            });
        }
        let transform = |values: &[T]| {
            values
                .windows(2)
                .map(|w| T::from_f64_lossy(100.0) * (w[1].ln() - w[0].ln()))
                .collect::<Vec<T>>()
        };
        Ok(Self {
            y: transform(&self.y),
            u: self.u.as_deref().map(transform),
            representation: Representation::LogReturn,
        })
    }
}

/// Regression row for target index `t`:
/// `[y(t-n_k), ..., y(t-n_k-n_a+1), u(t-n_k), ..., u(t-n_k-n_b+1)]`.
pub fn lag_row<T: Scalar>(
    series: &AlignedSeries<T>,
    order: &ModelOrder,
    t: usize,
) -> Result<Vec<T>, ModelError> {
    if order.n_b > 0 && series.u().is_none() {
        return Err(ModelError::MissingExogenous);
    }
    // Admit t == len (a one-step-ahead forecast past the recorded history).
    if t < order.burn_in() || t >= series.len() + order.n_k {
        return Err(ModelError::InsufficientHistory { t });
    }
    let mut row = Vec::with_capacity(order.input_width());
    for i in 0..order.n_a {
        row.push(series.y()[t - order.n_k - i]);
    }
    if let Some(u) = series.u() {
        for j in 0..order.n_b {
            row.push(u[t - order.n_k - j]);
        }
    }
    Ok(row)
}

/// Stack every valid lag row into a design matrix with its target vector.
pub fn build_lag_matrix<T: Scalar>(
    series: &AlignedSeries<T>,
    order: &ModelOrder,
) -> Result<(Mat<T>, Vec<T>), ModelError> {
    let burn = order.burn_in();
    if series.len() <= burn {
        return Err(ModelError::TooShort {
            needed: burn + 1,
            available: series.len(),
        });
    }
    if order.n_b > 0 && series.u().is_none() {
        return Err(ModelError::MissingExogenous);
    }
    let mut rows = Vec::with_capacity(series.len() - burn);
    let mut targets = Vec::with_capacity(series.len() - burn);
    for t in burn..series.len() {
        rows.push(lag_row(series, order, t)?);
        targets.push(series.y()[t]);
    }
    Ok((Mat::from_rows(rows).map_err(ModelError::from)?, targets))
}

/// A fitted model that can produce static forecasts over a series.
pub trait Forecaster<T: Scalar> {
    fn order(&self) -> ModelOrder;

    /// Forecast y(t) from actual history only; nothing after t - n_k is read.
    fn predict(&self, series: &AlignedSeries<T>, t: usize) -> Result<T, ModelError>;
}

/// Persistence benchmark: forecast y(t) as y(t - n_k).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomWalk {
    pub n_k: usize,
}

impl RandomWalk {
    pub fn new(n_k: usize) -> Result<Self, ModelError> {
        if n_k < 1 {
            return Err(ModelError::InvalidOrder("n_k must be >= 1".into()));
        }
        Ok(Self { n_k })
    }
}

impl<T: Scalar> Forecaster<T> for RandomWalk {
    fn order(&self) -> ModelOrder {
        ModelOrder {
            n_a: 1,
            n_b: 0,
            n_k: self.n_k,
        }
    }

    fn predict(&self, series: &AlignedSeries<T>, t: usize) -> Result<T, ModelError> {
        if t < self.n_k || t >= series.len() + self.n_k {
            return Err(ModelError::InsufficientHistory { t });
        }
        Ok(series.y()[t - self.n_k])
    }
}
