//! Flag/config-file plumbing: every flag has an optional mirror in a flat
//! JSON config, with flags taking precedence over the file and the file over
//! built-in defaults.

use std::fmt;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use fxcast::models::Representation;
use serde::Deserialize;

/// Error split that decides the process exit code: validation problems exit
/// with 1, data problems with 2.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Data(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(msg) => write!(f, "invalid arguments: {msg}"),
            CliError::Data(msg) => write!(f, "data error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

pub fn validation(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

pub fn data_err(msg: impl fmt::Display) -> CliError {
    CliError::Data(msg.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindArg {
    Ar,
    Arx,
    Ann,
    Rw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepArg {
    Level,
    Returns,
}

impl RepArg {
    pub fn to_representation(self) -> Representation {
        match self {
            RepArg::Level => Representation::AtLevel,
            RepArg::Returns => Representation::LogReturn,
        }
    }
}

/// Flat config file mirroring every flag by name.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub messages: Option<PathBuf>,
    pub closes: Option<PathBuf>,
    pub bars: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub grid_out: Option<PathBuf>,
    pub hours: Option<usize>,
    pub step_sigma: Option<f64>,
    pub kappa: Option<f64>,
    pub exo_noise: Option<f64>,
    pub trend: Option<f64>,
    pub tail_alpha: Option<f64>,
    pub start: Option<String>,
    pub band_low: Option<f64>,
    pub band_high: Option<f64>,
    pub sparse_threshold: Option<usize>,
    pub kind: Option<KindArg>,
    pub na: Option<usize>,
    pub nb: Option<usize>,
    pub nk: Option<String>,
    pub na_range: Option<String>,
    pub nb_range: Option<String>,
    pub representation: Option<RepArg>,
    pub split: Option<f64>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub ann_seeds: Option<usize>,
    pub hidden: Option<usize>,
    pub m: Option<usize>,
    pub literal_ma: Option<bool>,
    pub tie_long: Option<bool>,
    pub compound: Option<bool>,
    pub seed: Option<u64>,
    pub boot: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| validation(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| validation(format!("bad config {}: {e}", path.display())))
    }
}

/// Parse "A:B" into an inclusive range.
pub fn parse_range(text: &str) -> Result<RangeInclusive<usize>, CliError> {
    let (lo, hi) = text
        .split_once(':')
        .ok_or_else(|| validation(format!("range {text:?} is not of the form A:B")))?;
    let lo: usize = lo
        .trim()
        .parse()
        .map_err(|e| validation(format!("range start {lo:?}: {e}")))?;
    let hi: usize = hi
        .trim()
        .parse()
        .map_err(|e| validation(format!("range end {hi:?}: {e}")))?;
    if lo < 1 || hi < lo {
        return Err(validation(format!(
            "range {text:?} must satisfy 1 <= A <= B"
        )));
    }
    Ok(lo..=hi)
}

/// Parse "1,2,4" into horizon values.
pub fn parse_nk_list(text: &str) -> Result<Vec<usize>, CliError> {
    let values = text
        .split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .map_err(|e| validation(format!("horizon {part:?}: {e}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() || values.iter().any(|&nk| nk < 1) {
        return Err(validation("horizons must be integers >= 1"));
    }
    Ok(values)
}
