//! fxcast: intraday exchange-rate forecasting and trading simulation.
//!
//! The pipeline runs from raw quote-message ingestion through AR/ARX/ANN
//! model fitting, metric grids over model orders, a moving-average trading
//! simulation, and resampling significance tests. Every stochastic step is
//! seeded and reproducible.
//!
//! # Modules
//!
//! - [`ingest`]: price-token normalization, observation windows, hourly bars
//! - [`distfit`]: alpha-stable fitting/sampling, KS test, sparse-day fill
//! - [`models`]: lag matrices, least-squares AR/ARX, backprop network
//! - [`eval`]: chronological split, RMSE/MAE/directional metrics, grid sweeps
//! - [`trading`]: moving-average rule, return ledgers, cumulative grids
//! - [`stats`]: bootstrap and permutation significance tests
//! - [`synth`]: seeded synthetic series with a tunable exogenous channel
//!
//! Numeric code is generic over [`scalar::Scalar`] (`f32` or `f64`); the
//! aliases below pin the common double-precision instantiation.

pub mod distfit;
pub mod eval;
pub mod ingest;
pub mod linalg;
pub mod models;
pub mod rng;
pub mod scalar;
pub mod stats;
pub mod synth;
pub mod trading;

pub use scalar::Scalar;

pub type HourlyBarF64 = ingest::HourlyBar<f64>;
pub type QuoteObservationF64 = ingest::QuoteObservation<f64>;
pub type PlausibilityBandF64 = ingest::PlausibilityBand<f64>;
pub type StableParamsF64 = distfit::StableParams<f64>;
pub type AlignedSeriesF64 = models::AlignedSeries<f64>;
pub type LinearModelF64 = models::LinearModel<f64>;
pub type AnnModelF64 = models::AnnModel<f64>;
pub type EvalMetricsF64 = eval::EvalMetrics<f64>;
pub type SweepGridF64 = eval::SweepGrid<f64>;
pub type TradeLedgerF64 = trading::TradeLedger<f64>;
pub type ResampleResultF64 = stats::ResampleResult<f64>;
