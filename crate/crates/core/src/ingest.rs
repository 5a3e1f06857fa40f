//! Quote-message ingestion: token normalization, the intra-hour observation
//! window, and aligned hourly bars.
//!
//! Posted target prices arrive in inconsistent renderings ("1.345", "1,345",
//! "13,45", "134.5", ...). Normalization strips the separators and places the
//! digit string at the unique power of ten that lands inside a configured
//! plausibility band.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, Datelike, NaiveDate, TimeZone, Timelike, Utc};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("token {token:?} holds no digits")]
    NotNumeric { token: String },
    #[error("no power-of-ten placement of {token:?} lands in [{low}, {high}]")]
    NoPlacement {
        token: String,
        low: String,
        high: String,
    },
    #[error("token {token:?} has {count} in-band placements: {candidates}")]
    Ambiguous {
        token: String,
        count: usize,
        candidates: String,
    },
    #[error("invalid plausibility band: low {low} must satisfy 0 < low < high {high}")]
    InvalidBand { low: String, high: String },
    #[error("empty input")]
    EmptyInput,
    #[error("closes are not strictly hour-increasing at row {index}")]
    NonMonotonicCloses { index: usize },
    #[error("every one of the {count} messages failed token normalization")]
    AllTokensUnparseable { count: usize },
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("missing column {name:?}")]
    MissingColumn { name: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// One raw quote message as scraped: a posted target price plus metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct RawMessage<T> {
    pub timestamp: DateTime<Utc>,
    pub author: String,
    pub price_token: String,
    /// Order size; `None` means the source had no volume field.
    pub volume: Option<T>,
}

impl<T: Scalar> RawMessage<T> {
    /// Volume with the unweighted default of 1.
    pub fn volume_or_default(&self) -> T {
        self.volume.unwrap_or_else(T::one)
    }
}

/// A normalized quote: rate in target units, positive volume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuoteObservation<T> {
    pub timestamp: DateTime<Utc>,
    pub rate: T,
    pub volume: T,
}

/// One aligned hour: the actual close and the tweet-derived mean.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlyBar<T> {
    pub hour_start: DateTime<Utc>,
    pub close: T,
    /// Volume-weighted mean of the hour's windowed quotes; `None` until the
    /// hour is observed or gap-filled.
    pub tweet_mean: Option<T>,
    pub tweet_count: u32,
    /// True when `tweet_mean` was synthesized by the gap fill.
    pub filled: bool,
}

impl<T> HourlyBar<T> {
    pub fn day(&self) -> NaiveDate {
        self.hour_start.date_naive()
    }
}

/// Admissible rate interval used to disambiguate token placements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlausibilityBand<T> {
    low: T,
    high: T,
}

impl<T: Scalar> PlausibilityBand<T> {
    pub fn new(low: T, high: T) -> Result<Self, IngestError> {
        if !(low > T::zero() && low < high) || !low.is_finite() || !high.is_finite() {
            return Err(IngestError::InvalidBand {
                low: low.to_string(),
                high: high.to_string(),
            });
        }
        Ok(Self { low, high })
    }

    /// Band covering EUR/USD over the study horizon.
    pub fn eur_usd() -> Self {
        Self {
            low: T::from_f64_lossy(1.0),
            high: T::from_f64_lossy(1.6),
        }
    }

    pub fn low(&self) -> T {
        self.low
    }

    pub fn high(&self) -> T {
        self.high
    }

    pub fn contains(&self, v: T) -> bool {
        v >= self.low && v <= self.high
    }
}

/// Place a price token's digit string at the unique in-band power of ten.
///
/// Both "." and "," are treated as positional noise, so "1.345", "1,345",
/// "13,45" and "134.5" all normalize to the same rate.
pub fn normalize_price_token<T: Scalar>(
    token: &str,
    band: &PlausibilityBand<T>,
) -> Result<T, IngestError> {
    let digits: String = token.chars().filter(|c| c.is_ascii_digit()).collect();
    if digits.is_empty() {
        return Err(IngestError::NotNumeric {
            token: token.to_string(),
        });
    }
    let trimmed = digits.trim_start_matches('0');
    let trimmed = if trimmed.is_empty() { "0" } else { trimmed };
    let (significant, dropped_zeros) = match trimmed.trim_end_matches('0') {
        "" => ("0", 0usize),
        s => (s, trimmed.len() - s.len()),
    };
    let no_placement = || IngestError::NoPlacement {
        token: token.to_string(),
        low: band.low().to_string(),
        high: band.high().to_string(),
    };
    if significant == "0" {
        return Err(no_placement());
    }

    // Trailing zeros only shift the exponent; overlong strings keep their
    // leading digits and fold the rest into the exponent as well.
    const MAX_DIGITS: usize = 30;
    let kept = significant.len().min(MAX_DIGITS);
    let mantissa: f64 = significant[..kept]
        .parse::<f64>()
        .map_err(|_| no_placement())?;
    let extra = (significant.len() - kept + dropped_zeros) as i32;
    let d = T::from_f64_lossy(mantissa);

    let mut candidates: Vec<T> = Vec::new();
    for k in -320i32..=320 {
        let shift = k + extra;
        let v = if shift >= 0 {
            d * T::from_f64_lossy(10.0).powi(shift)
        } else {
            d / T::from_f64_lossy(10.0).powi(-shift)
        };
        if v.is_finite() && band.contains(v) {
            candidates.push(v);
        }
    }
    match candidates.as_slice() {
        [] => Err(no_placement()),
        [v] => Ok(*v),
        many => Err(IngestError::Ambiguous {
            token: token.to_string(),
            count: many.len(),
            candidates: many
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(", "),
        }),
    }
}

/// Keep the observations posted from minute :01 up to and including :50.
///
/// `hour_start` documents which hour the slice belongs to; callers pass
/// observations already restricted to `[hour_start, hour_start + 1h)`.
pub fn window_filter<T: Scalar>(
    observations: &[QuoteObservation<T>],
    hour_start: DateTime<Utc>,
) -> Vec<QuoteObservation<T>> {
    debug_assert!(observations.iter().all(
        |o| o.timestamp >= hour_start && o.timestamp < hour_start + chrono::Duration::hours(1)
    ));
    observations
        .iter()
        .copied()
        .filter(|o| (1..51).contains(&o.timestamp.minute()))
        .collect()
}

/// Mean rate weighted by transaction volume.
pub fn volume_weighted_mean<T: Scalar>(
    observations: &[QuoteObservation<T>],
) -> Result<T, IngestError> {
    if observations.is_empty() {
        return Err(IngestError::EmptyInput);
    }
    let mut num = T::zero();
    let mut den = T::zero();
    for o in observations {
        num += o.rate * o.volume;
        den += o.volume;
    }
    Ok(num / den)
}

/// Outcome of assembling the aligned bar series.
#[derive(Debug, Clone)]
pub struct IngestReport<T> {
    pub bars: Vec<HourlyBar<T>>,
    /// All normalized observations (any hour), for downstream gap filling.
    pub observations: Vec<QuoteObservation<T>>,
    pub messages_seen: usize,
    pub duplicates_removed: usize,
    pub tokens_skipped: usize,
}

/// Build one bar per close, attaching each hour's windowed quote mean.
///
/// Unparseable tokens are skipped and counted; only a dataset where every
/// message fails is an error. Exact duplicate rows are dropped first.
pub fn build_hourly_bars<T: Scalar>(
    messages: &[RawMessage<T>],
    closes: &[(DateTime<Utc>, T)],
    band: &PlausibilityBand<T>,
) -> Result<IngestReport<T>, IngestError> {
    for (i, pair) in closes.windows(2).enumerate() {
        if pair[1].0 <= pair[0].0 {
            return Err(IngestError::NonMonotonicCloses { index: i + 1 });
        }
    }

    let mut seen: HashSet<(i64, String, String, u64)> = HashSet::new();
    let mut duplicates_removed = 0usize;
    let mut tokens_skipped = 0usize;
    let mut observations: Vec<QuoteObservation<T>> = Vec::new();
    for msg in messages {
        let key = (
            msg.timestamp.timestamp(),
            msg.author.clone(),
            msg.price_token.clone(),
            msg.volume_or_default().to_f64_lossy().to_bits(),
        );
        if !seen.insert(key) {
            duplicates_removed += 1;
            continue;
        }
        match normalize_price_token(&msg.price_token, band) {
            Ok(rate) => observations.push(QuoteObservation {
                timestamp: msg.timestamp,
                rate,
                volume: msg.volume_or_default(),
            }),
            Err(_) => tokens_skipped += 1,
        }
    }
    if !messages.is_empty() && observations.is_empty() {
        return Err(IngestError::AllTokensUnparseable {
            count: messages.len(),
        });
    }

    let mut by_hour: BTreeMap<DateTime<Utc>, Vec<QuoteObservation<T>>> = BTreeMap::new();
    for obs in &observations {
        by_hour
            .entry(truncate_to_hour(obs.timestamp))
            .or_default()
            .push(*obs);
    }

    let bars = closes
        .iter()
        .map(|&(hour, close)| {
            let hour_start = truncate_to_hour(hour);
            let windowed = by_hour
                .get(&hour_start)
                .map(|obs| window_filter(obs, hour_start))
                .unwrap_or_default();
            let tweet_mean = if windowed.is_empty() {
                None
            } else {
                Some(volume_weighted_mean(&windowed)?)
            };
            Ok(HourlyBar {
                hour_start,
                close,
                tweet_mean,
                tweet_count: windowed.len() as u32,
                filled: false,
            })
        })
        .collect::<Result<Vec<_>, IngestError>>()?;

    Ok(IngestReport {
        bars,
        observations,
        messages_seen: messages.len(),
        duplicates_removed,
        tokens_skipped,
    })
}

pub fn truncate_to_hour(t: DateTime<Utc>) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(t.year(), t.month(), t.day(), t.hour(), 0, 0)
        .unwrap()
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize, IngestError> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| IngestError::MissingColumn {
            name: name.to_string(),
        })
}

fn row_line(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn malformed(record: &csv::StringRecord, reason: impl Into<String>) -> IngestError {
    IngestError::MalformedRow {
        line: row_line(record),
        reason: reason.into(),
    }
}

fn parse_rfc3339(record: &csv::StringRecord, field: &str) -> Result<DateTime<Utc>, IngestError> {
    DateTime::parse_from_rfc3339(field)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| malformed(record, format!("bad timestamp {field:?}: {e}")))
}

/// Read a `timestamp,author,price_token,volume` file.
pub fn read_messages<T: Scalar, R: Read>(reader: R) -> Result<Vec<RawMessage<T>>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let ts_col = column_index(&headers, "timestamp")?;
    let author_col = column_index(&headers, "author")?;
    let token_col = column_index(&headers, "price_token")?;
    let volume_col = column_index(&headers, "volume")?;

    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let field = |i: usize| {
            record
                .get(i)
                .ok_or_else(|| malformed(&record, format!("missing field {i}")))
        };
        let timestamp = parse_rfc3339(&record, field(ts_col)?)?;
        let token = field(token_col)?.trim();
        if token.is_empty() {
            return Err(malformed(&record, "empty price_token"));
        }
        let volume_field = field(volume_col)?.trim();
        let volume = if volume_field.is_empty() {
            None
        } else {
            let v: f64 = volume_field
                .parse()
                .map_err(|e| malformed(&record, format!("bad volume {volume_field:?}: {e}")))?;
            if !v.is_finite() || v <= 0.0 {
                return Err(malformed(&record, format!("volume {v} is not positive")));
            }
            Some(T::from_f64_lossy(v))
        };
        out.push(RawMessage {
            timestamp,
            author: field(author_col)?.to_string(),
            price_token: token.to_string(),
            volume,
        });
    }
    Ok(out)
}

/// Read an `hour,close` file; hours must be exactly on the hour.
pub fn read_closes<T: Scalar, R: Read>(reader: R) -> Result<Vec<(DateTime<Utc>, T)>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let hour_col = column_index(&headers, "hour")?;
    let close_col = column_index(&headers, "close")?;

    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let field = |i: usize| {
            record
                .get(i)
                .ok_or_else(|| malformed(&record, format!("missing field {i}")))
        };
        let hour = parse_rfc3339(&record, field(hour_col)?)?;
        if hour != truncate_to_hour(hour) {
            return Err(malformed(&record, "hour is not aligned to :00"));
        }
        let close: f64 = field(close_col)?
            .trim()
            .parse()
            .map_err(|e| malformed(&record, format!("bad close: {e}")))?;
        if !close.is_finite() || close <= 0.0 {
            return Err(malformed(&record, format!("close {close} is not positive")));
        }
        out.push((hour, T::from_f64_lossy(close)));
    }
    Ok(out)
}

pub fn load_messages<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<RawMessage<T>>, IngestError> {
    read_messages(std::fs::File::open(path)?)
}

pub fn load_closes<T: Scalar>(
    path: impl AsRef<Path>,
) -> Result<Vec<(DateTime<Utc>, T)>, IngestError> {
    read_closes(std::fs::File::open(path)?)
}

/// Write bars as `hour,close,tweet_mean,tweet_count,filled`.
pub fn write_bars<T: Scalar, W: Write>(
    bars: &[HourlyBar<T>],
    writer: W,
) -> Result<(), IngestError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["hour", "close", "tweet_mean", "tweet_count", "filled"])?;
    for bar in bars {
        wtr.write_record([
            bar.hour_start
                .to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            bar.close.to_string(),
            bar.tweet_mean.map(|m| m.to_string()).unwrap_or_default(),
            bar.tweet_count.to_string(),
            bar.filled.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Read a bar series written by [`write_bars`].
pub fn read_bars<T: Scalar, R: Read>(reader: R) -> Result<Vec<HourlyBar<T>>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let hour_col = column_index(&headers, "hour")?;
    let close_col = column_index(&headers, "close")?;
    let mean_col = column_index(&headers, "tweet_mean")?;
    let count_col = column_index(&headers, "tweet_count")?;
    let filled_col = column_index(&headers, "filled")?;

    let mut bars: Vec<HourlyBar<T>> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let field = |i: usize| {
            record
                .get(i)
                .ok_or_else(|| malformed(&record, format!("missing field {i}")))
        };
        let hour_start = parse_rfc3339(&record, field(hour_col)?)?;
        if let Some(prev) = bars.last() {
            if hour_start <= prev.hour_start {
                return Err(malformed(&record, "bars are not strictly hour-increasing"));
            }
        }
        let close: f64 = field(close_col)?
            .parse()
            .map_err(|e| malformed(&record, format!("bad close: {e}")))?;
        if !close.is_finite() || close <= 0.0 {
            return Err(malformed(&record, format!("close {close} is not positive")));
        }
        let mean_field = field(mean_col)?.trim();
        let tweet_mean = if mean_field.is_empty() {
            None
        } else {
            let m: f64 = mean_field
                .parse()
                .map_err(|e| malformed(&record, format!("bad tweet_mean: {e}")))?;
            if !m.is_finite() || m <= 0.0 {
                return Err(malformed(
                    &record,
                    format!("tweet_mean {m} is not positive"),
                ));
            }
            Some(T::from_f64_lossy(m))
        };
        let tweet_count: u32 = field(count_col)?
            .parse()
            .map_err(|e| malformed(&record, format!("bad tweet_count: {e}")))?;
        let filled: bool = field(filled_col)?
            .parse()
            .map_err(|e| malformed(&record, format!("bad filled flag: {e}")))?;
        if tweet_mean.is_none() && (tweet_count > 0 || filled) {
            return Err(malformed(&record, "populated bar without tweet_mean"));
        }
        bars.push(HourlyBar {
            hour_start,
            close: T::from_f64_lossy(close),
            tweet_mean,
            tweet_count,
            filled,
        });
    }
    Ok(bars)
}
