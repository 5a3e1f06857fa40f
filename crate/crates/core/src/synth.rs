//! Seeded synthetic hour series with a tunable exogenous channel.
//!
//! The close follows a random walk whose next step is partially previewed by
//! the exogenous channel: u(t) is the noise-free next close plus Gaussian
//! observation noise, and the coupling weight decides how much of that
//! preview actually moves the close. With coupling 0 the channel carries no
//! information about future moves; with strong coupling and small noise an
//! exogenous model must beat the random walk.

use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::distfit::StableParams;
use crate::ingest::HourlyBar;
use crate::models::{AlignedSeries, ModelError};
use crate::rng::{seeded_rng, standard_normal};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Generator knobs; every field is surfaced as a CLI flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub n_hours: usize,
    /// Scale of the stable step innovations.
    pub step_sigma: f64,
    /// Exogenous predictiveness kappa in [0, 1).
    pub coupling: f64,
    /// Std of the Gaussian observation noise on the preview channel.
    pub exo_noise: f64,
    /// Deterministic per-hour drift.
    pub trend: f64,
    /// Stability index of the innovations; 2 is Gaussian.
    pub tail_alpha: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_hours: 2000,
            step_sigma: 0.0013,
            coupling: 0.0,
            exo_noise: 0.00026,
            trend: 0.0,
            tail_alpha: 2.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::InvalidSpec(msg));
        if self.n_hours < 2 {
            return bad(format!("n_hours {} must be >= 2", self.n_hours));
        }
        if !(self.step_sigma >= 0.0 && self.step_sigma.is_finite()) {
            return bad(format!("step_sigma {} must be >= 0", self.step_sigma));
        }
        // coupling = 1 makes the preview self-referential with no solution.
        if !(0.0..1.0).contains(&self.coupling) {
            return bad(format!("coupling {} must lie in [0, 1)", self.coupling));
        }
        if !(self.exo_noise >= 0.0 && self.exo_noise.is_finite()) {
            return bad(format!("exo_noise {} must be >= 0", self.exo_noise));
        }
        if !self.trend.is_finite() {
            return bad("trend must be finite".into());
        }
        if !(self.tail_alpha > 0.0 && self.tail_alpha <= 2.0) {
            return bad(format!("tail_alpha {} must lie in (0, 2]", self.tail_alpha));
        }
        Ok(())
    }
}

/// Generate the coupled (y, u) series at level, starting from y(0) = 1.35.
///
/// Per step: eta ~ N(0, exo_noise), eps ~ stable(tail_alpha, scale),
///   u(t)   = y(t) + (trend + eta) / (1 - coupling)
///   y(t+1) = y(t) + trend + coupling * (u(t) - y(t)) + eps
/// so u(t) equals what y(t+1) would be with eps = 0, observed through eta.
pub fn generate_synthetic<T: Scalar>(spec: &SynthSpec) -> Result<AlignedSeries<T>, SynthError> {
    spec.validate()?;
    let innovations: StableParams<f64> =
        StableParams::new(spec.tail_alpha, 0.0, spec.step_sigma, 0.0)
            .map_err(|e| SynthError::InvalidSpec(e.to_string()))?;

    let mut rng = seeded_rng(spec.seed);
    let mut y = Vec::with_capacity(spec.n_hours);
    let mut u = Vec::with_capacity(spec.n_hours);
    y.push(1.35f64);
    for t in 0..spec.n_hours - 1 {
        let eta: f64 = spec.exo_noise * standard_normal::<f64>(&mut rng);
        let eps: f64 = crate::distfit::stable_draw(&innovations, &mut rng);
        let preview = y[t] + (spec.trend + eta) / (1.0 - spec.coupling);
        u.push(preview);
        y.push(y[t] + spec.trend + spec.coupling * (preview - y[t]) + eps);
    }
    let eta: f64 = spec.exo_noise * standard_normal::<f64>(&mut rng);
    u.push(y[spec.n_hours - 1] + (spec.trend + eta) / (1.0 - spec.coupling));

    if let Some(bad) = y.iter().position(|v| !v.is_finite() || *v <= 0.0) {
        return Err(SynthError::InvalidSpec(format!(
            "close went non-positive at hour {bad}; shrink step_sigma or trend"
        )));
    }
    if let Some(bad) = u.iter().position(|v| !v.is_finite() || *v <= 0.0) {
        return Err(SynthError::InvalidSpec(format!(
            "preview went non-positive at hour {bad}; shrink exo_noise"
        )));
    }

    let to_t = |values: Vec<f64>| values.into_iter().map(T::from_f64_lossy).collect();
    Ok(AlignedSeries::at_level(to_t(y), Some(to_t(u)))?)
}

/// Wrap a generated series into hourly bars for the file pipeline.
pub fn series_to_bars<T: Scalar>(
    series: &AlignedSeries<T>,
    start: DateTime<Utc>,
) -> Vec<HourlyBar<T>> {
    let u = series.u().expect("synthetic series always carries u");
    series
        .y()
        .iter()
        .zip(u)
        .enumerate()
        .map(|(i, (&close, &mean))| HourlyBar {
            hour_start: start + chrono::Duration::hours(i as i64),
            close,
            tweet_mean: Some(mean),
            tweet_count: 1,
            filled: false,
        })
        .collect()
}

/// Read a bar file back into the aligned series; u is present only when
/// every bar carries a tweet mean.
pub fn series_from_bars<T: Scalar>(bars: &[HourlyBar<T>]) -> Result<AlignedSeries<T>, ModelError> {
    let y: Vec<T> = bars.iter().map(|b| b.close).collect();
    let u: Option<Vec<T>> = bars.iter().map(|b| b.tweet_mean).collect();
    AlignedSeries::at_level(y, u)
}
