//! Subcommand implementations: pipeline wiring around the library calls.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use fxcast::distfit::fill_series;
use fxcast::eval::{
    cell_predictions, directional_signs, metrics_from_predictions, sweep, test_predictions,
    train_prefix, MetricKind, ModelKind, SplitSpec, SweepConfig,
};
use fxcast::ingest::{
    build_hourly_bars, load_closes, load_messages, read_bars, truncate_to_hour, write_bars,
    PlausibilityBand,
};
use fxcast::models::{
    fit_linear, init_ann_with_width, train_ann, ModelOrder, RandomWalk, Representation,
};
use fxcast::rng::derive_seed;
use fxcast::stats::{bootstrap_statistic, permutation_null};
use fxcast::synth::{generate_synthetic, series_from_bars, series_to_bars, SynthSpec};
use fxcast::trading::{
    cumulative_grid_csv, ledger_csv, mean_cumulative_grid, simulate, TradingConfig,
};
use fxcast::{AlignedSeriesF64, AnnModelF64, HourlyBarF64, LinearModelF64};
use serde::{Deserialize, Serialize};

use crate::config::{data_err, validation, CliError, KindArg, RepArg};

/// Fitted model file: the representation it was trained on plus the weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SavedModel {
    Linear {
        representation: Representation,
        model: LinearModelF64,
    },
    Ann {
        representation: Representation,
        model: AnnModelF64,
    },
    RandomWalk {
        representation: Representation,
        n_k: usize,
    },
}

impl SavedModel {
    pub fn representation(&self) -> Representation {
        match self {
            SavedModel::Linear { representation, .. }
            | SavedModel::Ann { representation, .. }
            | SavedModel::RandomWalk { representation, .. } => *representation,
        }
    }

    pub fn n_k(&self) -> usize {
        match self {
            SavedModel::Linear { model, .. } => model.order.n_k,
            SavedModel::Ann { model, .. } => model.order.n_k,
            SavedModel::RandomWalk { n_k, .. } => *n_k,
        }
    }

    pub fn predictions(
        &self,
        series: &AlignedSeriesF64,
        test_start: usize,
    ) -> Result<Vec<f64>, CliError> {
        match self {
            SavedModel::Linear { model, .. } => {
                test_predictions(model, series, test_start).map_err(data_err)
            }
            SavedModel::Ann { model, .. } => {
                test_predictions(model, series, test_start).map_err(data_err)
            }
            SavedModel::RandomWalk { n_k, .. } => {
                let rw = RandomWalk::new(*n_k).map_err(data_err)?;
                test_predictions(&rw, series, test_start).map_err(data_err)
            }
        }
    }
}

/// Write through a temp file and rename, so failures leave no partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| data_err(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    let tmp = path.with_extension("tmp-partial");
    std::fs::write(&tmp, bytes)
        .map_err(|e| data_err(format!("cannot write {}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        data_err(format!("cannot move output into {}: {e}", path.display()))
    })
}

pub fn load_bar_file(path: &Path) -> Result<Vec<HourlyBarF64>, CliError> {
    let file = std::fs::File::open(path)
        .map_err(|e| data_err(format!("cannot open {}: {e}", path.display())))?;
    let bars = read_bars(file).map_err(data_err)?;
    if bars.is_empty() {
        return Err(data_err(format!("{} holds no bars", path.display())));
    }
    Ok(bars)
}

/// Series in the requested representation; exogenous channel present only
/// when every bar carries a tweet mean.
pub fn bars_to_series(
    bars: &[HourlyBarF64],
    representation: Representation,
) -> Result<AlignedSeriesF64, CliError> {
    let level = series_from_bars(bars).map_err(data_err)?;
    match representation {
        Representation::AtLevel => Ok(level),
        Representation::LogReturn => level.log_returns().map_err(data_err),
    }
}

fn require_exogenous(series: &AlignedSeriesF64, kind: KindArg) -> Result<(), CliError> {
    if matches!(kind, KindArg::Arx | KindArg::Ann) && series.u().is_none() {
        return Err(data_err(
            "bars are missing tweet means on some hours; run the fill (ingest) first \
             or use an AR/random-walk model",
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// synth

pub struct SynthCmd {
    pub spec: SynthSpec,
    pub start: DateTime<Utc>,
    pub out: PathBuf,
}

pub fn run_synth(cmd: &SynthCmd) -> Result<(), CliError> {
    let series: AlignedSeriesF64 =
        generate_synthetic(&cmd.spec).map_err(|e| validation(e.to_string()))?;
    if cmd.start != truncate_to_hour(cmd.start) {
        return Err(validation("start must be aligned to a whole hour"));
    }
    let bars = series_to_bars(&series, cmd.start);
    let mut buffer = Vec::new();
    write_bars(&bars, &mut buffer).map_err(data_err)?;
    write_atomic(&cmd.out, &buffer)?;
    println!(
        "synth: wrote {} hourly bars (coupling {}, seed {}) to {}",
        bars.len(),
        cmd.spec.coupling,
        cmd.spec.seed,
        cmd.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// ingest

pub struct IngestCmd {
    pub messages: PathBuf,
    pub closes: PathBuf,
    pub band: PlausibilityBand<f64>,
    pub sparse_threshold: usize,
    pub seed: u64,
    pub out: PathBuf,
}

pub fn run_ingest(cmd: &IngestCmd) -> Result<(), CliError> {
    let messages = load_messages::<f64>(&cmd.messages).map_err(data_err)?;
    let closes = load_closes::<f64>(&cmd.closes).map_err(data_err)?;
    if closes.is_empty() {
        return Err(data_err("closes file holds no rows"));
    }
    let report = build_hourly_bars(&messages, &closes, &cmd.band).map_err(data_err)?;
    let filled = fill_series(
        &report.bars,
        &report.observations,
        cmd.sparse_threshold,
        cmd.seed,
    )
    .map_err(data_err)?;

    let mut buffer = Vec::new();
    write_bars(&filled.bars, &mut buffer).map_err(data_err)?;
    write_atomic(&cmd.out, &buffer)?;

    println!(
        "ingest: {} messages ({} duplicates removed, {} tokens skipped) over {} closes",
        report.messages_seen,
        report.duplicates_removed,
        report.tokens_skipped,
        closes.len()
    );
    println!(
        "ingest: filled {} bars; dropped {} day(s) without observations; wrote {}",
        filled.bars_filled,
        filled.dropped_days.len(),
        cmd.out.display()
    );
    if let Some(params) = filled.params {
        println!(
            "ingest: fill distribution alpha {:.3} beta {:.3} scale {:.5}",
            params.alpha, params.beta, params.scale
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// fit

pub struct FitCmd {
    pub bars: PathBuf,
    pub kind: KindArg,
    pub order: ModelOrder,
    pub representation: RepArg,
    pub split: SplitSpec,
    pub epochs: usize,
    pub learning_rate: f64,
    pub hidden: usize,
    pub seed: u64,
    pub out: PathBuf,
}

pub fn run_fit(cmd: &FitCmd) -> Result<(), CliError> {
    let bars = load_bar_file(&cmd.bars)?;
    let representation = cmd.representation.to_representation();
    let series = bars_to_series(&bars, representation)?;
    require_exogenous(&series, cmd.kind)?;
    let test_start = cmd.split.split_index(series.len()).map_err(data_err)?;
    let train = train_prefix(&series, test_start);

    let saved = match cmd.kind {
        KindArg::Rw => SavedModel::RandomWalk {
            representation,
            n_k: cmd.order.n_k,
        },
        KindArg::Ar | KindArg::Arx => {
            let model = fit_linear(&train, &cmd.order).map_err(data_err)?;
            SavedModel::Linear {
                representation,
                model,
            }
        }
        KindArg::Ann => {
            let fresh = init_ann_with_width(&cmd.order, cmd.hidden, cmd.seed);
            let outcome =
                train_ann(&fresh, &train, cmd.epochs, cmd.learning_rate).map_err(data_err)?;
            if !outcome.capacity_ok {
                eprintln!(
                    "warning: {} weights against {} training rows fails the capacity \
                     condition n_weights < 0.1 * n_train; expect overfitting",
                    fxcast::models::weight_count(&cmd.order, cmd.hidden),
                    train.len().saturating_sub(cmd.order.burn_in()),
                );
            }
            SavedModel::Ann {
                representation,
                model: outcome.model,
            }
        }
    };

    let predictions = saved.predictions(&series, test_start)?;
    let metrics = metrics_from_predictions(&predictions, &series, test_start, saved.n_k())
        .map_err(data_err)?;
    let json = serde_json::to_string_pretty(&saved)
        .map_err(|e| data_err(format!("cannot serialize model: {e}")))?;
    write_atomic(&cmd.out, json.as_bytes())?;
    println!(
        "fit: test rmse {:.6} mae {:.6} directional {:.4} on {} points; wrote {}",
        metrics.rmse,
        metrics.mae,
        metrics.directional,
        metrics.n_points,
        cmd.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// sweep

pub struct SweepGridCmd {
    pub bars: PathBuf,
    pub kind: KindArg,
    pub na_range: std::ops::RangeInclusive<usize>,
    pub nb_range: std::ops::RangeInclusive<usize>,
    pub horizons: Vec<usize>,
    pub representation: RepArg,
    pub split: SplitSpec,
    pub config: SweepConfig,
    pub out_dir: PathBuf,
}

fn sweep_model_kind(kind: KindArg) -> Result<ModelKind, CliError> {
    match kind {
        KindArg::Ar => Ok(ModelKind::Ar),
        KindArg::Arx => Ok(ModelKind::Arx),
        KindArg::Ann => Ok(ModelKind::Ann),
        KindArg::Rw => Err(validation("sweep supports kinds ar, arx and ann")),
    }
}

fn kind_stem(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::Ar => "ar",
        ModelKind::Arx => "arx",
        ModelKind::Ann => "ann",
    }
}

fn rep_stem(representation: Representation) -> &'static str {
    match representation {
        Representation::AtLevel => "level",
        Representation::LogReturn => "returns",
    }
}

pub fn run_sweep(cmd: &SweepGridCmd) -> Result<(), CliError> {
    let kind = sweep_model_kind(cmd.kind)?;
    let bars = load_bar_file(&cmd.bars)?;
    let representation = cmd.representation.to_representation();
    let series = bars_to_series(&bars, representation)?;
    require_exogenous(&series, cmd.kind)?;
    let test_start = cmd.split.split_index(series.len()).map_err(data_err)?;

    // Build every file's content first so a failing horizon writes nothing.
    let mut outputs: Vec<(PathBuf, Vec<u8>)> = Vec::new();
    let mut summaries = Vec::new();
    for &n_k in &cmd.horizons {
        let grid = sweep(
            &series,
            test_start,
            kind,
            cmd.na_range.clone(),
            cmd.nb_range.clone(),
            n_k,
            &cmd.config,
        )
        .map_err(data_err)?;
        let stem = format!(
            "sweep_{}_{}_nk{}",
            kind_stem(kind),
            rep_stem(representation),
            n_k
        );
        for metric in MetricKind::ALL {
            outputs.push((
                cmd.out_dir
                    .join(format!("{stem}_{}.csv", metric.file_stem())),
                grid.metric_csv(metric).into_bytes(),
            ));
        }
        outputs.push((
            cmd.out_dir.join(format!("{stem}.json")),
            serde_json::to_string_pretty(&grid.to_json())
                .map_err(|e| data_err(format!("cannot serialize grid: {e}")))?
                .into_bytes(),
        ));
        match grid.best_by_rmse() {
            Some(((n_a, n_b), best)) => summaries.push(format!(
                "sweep: nk {n_k}: best rmse {:.6} at (n_a {n_a}, n_b {n_b}), directional {:.4}",
                best.rmse, best.directional
            )),
            None => summaries.push(format!("sweep: nk {n_k}: every cell failed")),
        }
    }
    for (path, bytes) in &outputs {
        write_atomic(path, bytes)?;
    }
    for line in summaries {
        println!("{line}");
    }
    println!(
        "sweep: wrote {} files to {}",
        outputs.len(),
        cmd.out_dir.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// trade

pub struct TradeCmd {
    pub bars: PathBuf,
    pub model: Option<PathBuf>,
    pub kind: Option<KindArg>,
    pub na_range: std::ops::RangeInclusive<usize>,
    pub nb_range: std::ops::RangeInclusive<usize>,
    pub n_k: usize,
    pub representation: RepArg,
    pub split: SplitSpec,
    pub trading: TradingConfig,
    pub sweep_config: SweepConfig,
    pub out: Option<PathBuf>,
    pub grid_out: Option<PathBuf>,
}

pub fn load_model(path: &Path) -> Result<SavedModel, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| data_err(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| data_err(format!("bad model file {}: {e}", path.display())))
}

pub fn run_trade(cmd: &TradeCmd) -> Result<(), CliError> {
    let bars = load_bar_file(&cmd.bars)?;
    match (&cmd.model, cmd.kind) {
        (Some(model_path), None) => {
            let saved = load_model(model_path)?;
            if saved.representation() != Representation::AtLevel {
                return Err(validation(
                    "trading needs an at-level model; returns have no price to trade",
                ));
            }
            let out = cmd
                .out
                .as_ref()
                .ok_or_else(|| validation("--out is required when trading a single model"))?;
            let series = bars_to_series(&bars, Representation::AtLevel)?;
            let test_start = cmd.split.split_index(series.len()).map_err(data_err)?;
            let predictions = saved.predictions(&series, test_start)?;
            let trading = TradingConfig {
                n_k: saved.n_k(),
                ..cmd.trading
            };
            let ledger =
                simulate(&predictions, &series.y()[test_start..], &trading).map_err(data_err)?;
            write_atomic(out, ledger_csv(&ledger).as_bytes())?;
            println!(
                "trade: {} steps, final cumulative {:.4}%; wrote {}",
                ledger.steps.len(),
                ledger.final_cumulative,
                out.display()
            );
            Ok(())
        }
        (None, Some(kind)) => {
            let model_kind = sweep_model_kind(kind)?;
            let grid_out = cmd
                .grid_out
                .as_ref()
                .ok_or_else(|| validation("--grid-out is required when sweeping a trading grid"))?;
            if cmd.representation != RepArg::Level {
                return Err(validation(
                    "trading needs at-level data; returns have no price to trade",
                ));
            }
            let series = bars_to_series(&bars, Representation::AtLevel)?;
            require_exogenous(&series, kind)?;
            let test_start = cmd.split.split_index(series.len()).map_err(data_err)?;
            let trading = TradingConfig {
                n_k: cmd.n_k,
                ..cmd.trading
            };

            let nb_values: Vec<usize> = match model_kind {
                ModelKind::Ar => vec![0],
                _ => cmd.nb_range.clone().collect(),
            };
            let mut cells: BTreeMap<(usize, usize), Vec<Vec<f64>>> = BTreeMap::new();
            for n_a in cmd.na_range.clone() {
                for &n_b in &nb_values {
                    let order = match ModelOrder::new(n_a, n_b, cmd.n_k) {
                        Ok(order) => order,
                        Err(_) => continue,
                    };
                    if let Ok(instances) =
                        cell_predictions(&series, test_start, model_kind, &order, &cmd.sweep_config)
                    {
                        cells.insert((n_a, n_b), instances);
                    } else {
                        cells.insert((n_a, n_b), Vec::new());
                    }
                }
            }
            let grid = mean_cumulative_grid(&cells, &series.y()[test_start..], &trading);
            write_atomic(grid_out, cumulative_grid_csv(&grid).as_bytes())?;
            let best = grid
                .iter()
                .filter_map(|(k, v)| v.as_ref().ok().map(|&c| (k, c)))
                .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
            if let Some(((n_a, n_b), cumulative)) = best {
                println!(
                    "trade: best mean cumulative {:.4}% at (n_a {n_a}, n_b {n_b}); wrote {}",
                    cumulative,
                    grid_out.display()
                );
            } else {
                println!("trade: every cell failed; wrote {}", grid_out.display());
            }
            Ok(())
        }
        _ => Err(validation(
            "pass exactly one of --model (ledger mode) or --kind (grid mode)",
        )),
    }
}

// ---------------------------------------------------------------------------
// signif

pub struct SignifCmd {
    pub bars: PathBuf,
    pub model: PathBuf,
    pub split: SplitSpec,
    pub resamples: usize,
    pub seed: u64,
    pub out: PathBuf,
}

pub fn run_signif(cmd: &SignifCmd) -> Result<(), CliError> {
    let bars = load_bar_file(&cmd.bars)?;
    let saved = load_model(&cmd.model)?;
    let series = bars_to_series(&bars, saved.representation())?;
    let test_start = cmd.split.split_index(series.len()).map_err(data_err)?;
    let predictions = saved.predictions(&series, test_start)?;
    let (pred_signs, actual_signs) =
        directional_signs(&predictions, &series, test_start, saved.n_k()).map_err(data_err)?;

    let permutation: fxcast::ResampleResultF64 =
        permutation_null(&pred_signs, &actual_signs, cmd.resamples, cmd.seed).map_err(data_err)?;
    let indicators: Vec<bool> = pred_signs
        .iter()
        .zip(&actual_signs)
        .map(|(&p, &a)| i32::from(p) * i32::from(a) > 0)
        .collect();
    let bootstrap: fxcast::ResampleResultF64 =
        bootstrap_statistic(&indicators, cmd.resamples, derive_seed(cmd.seed, &[1]))
            .map_err(data_err)?;

    let report = serde_json::json!({
        "permutation": permutation.report(50),
        "bootstrap": bootstrap.report(50),
    });
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| data_err(format!("cannot serialize result: {e}")))?;
    write_atomic(&cmd.out, json.as_bytes())?;
    println!(
        "signif: observed {:.4}, permutation p {:.5}, bootstrap 5-95% [{:.4}, {:.4}]; wrote {}",
        permutation.observed,
        permutation.p_value,
        bootstrap.percentile(0.05),
        bootstrap.percentile(0.95),
        cmd.out.display()
    );
    Ok(())
}
