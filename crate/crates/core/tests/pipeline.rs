//! Cross-module pipeline behavior on seeded synthetic data.

use chrono::{TimeZone, Utc};
use fxcast::distfit::fill_series;
use fxcast::eval::{evaluate, sweep, ModelKind, SplitSpec, SweepConfig};
use fxcast::ingest::{build_hourly_bars, PlausibilityBand, RawMessage};
use fxcast::models::{fit_linear, ModelOrder, RandomWalk};
use fxcast::stats::permutation_null;
use fxcast::synth::{generate_synthetic, series_from_bars, series_to_bars, SynthSpec};
use fxcast::trading::{simulate, TradingConfig};
use fxcast::AlignedSeriesF64;

fn coupled_spec(seed: u64) -> SynthSpec {
    SynthSpec {
        n_hours: 3000,
        coupling: 0.8,
        exo_noise: 0.2 * SynthSpec::default().step_sigma,
        seed,
        ..SynthSpec::default()
    }
}

#[test]
fn coupled_arx_beats_the_random_walk() {
    let series: AlignedSeriesF64 = generate_synthetic(&coupled_spec(7)).unwrap();
    let test_start = SplitSpec::default().split_index(series.len()).unwrap();
    let train = fxcast::eval::train_prefix(&series, test_start);

    let arx = fit_linear(&train, &ModelOrder::new(1, 2, 1).unwrap()).unwrap();
    let arx_metrics = evaluate(&arx, &series, test_start).unwrap();
    let rw_metrics = evaluate(&RandomWalk::new(1).unwrap(), &series, test_start).unwrap();
    assert!(
        arx_metrics.rmse < rw_metrics.rmse,
        "arx {} vs rw {}",
        arx_metrics.rmse,
        rw_metrics.rmse
    );
}

#[test]
fn best_sweep_cell_uses_the_exogenous_channel() {
    let series: AlignedSeriesF64 = generate_synthetic(&coupled_spec(11)).unwrap();
    let test_start = SplitSpec::default().split_index(series.len()).unwrap();
    let grid = sweep(
        &series,
        test_start,
        ModelKind::Arx,
        1..=6,
        1..=6,
        1,
        &SweepConfig::default(),
    )
    .unwrap();
    let ((_, n_b), _) = grid.best_by_rmse().unwrap();
    assert!(n_b >= 1);
}

#[test]
fn coupled_best_cell_is_significant_under_permutation() {
    let series: AlignedSeriesF64 = generate_synthetic(&coupled_spec(13)).unwrap();
    let returns = series.log_returns().unwrap();
    let test_start = SplitSpec::default().split_index(returns.len()).unwrap();
    let train = fxcast::eval::train_prefix(&returns, test_start);
    let model = fit_linear(&train, &ModelOrder::new(1, 2, 1).unwrap()).unwrap();
    let predictions = fxcast::eval::test_predictions(&model, &returns, test_start).unwrap();
    let (pred_signs, actual_signs) =
        fxcast::eval::directional_signs(&predictions, &returns, test_start, 1).unwrap();
    let result: fxcast::ResampleResultF64 =
        permutation_null(&pred_signs, &actual_signs, 2000, 99).unwrap();
    assert!(result.p_value < 0.05, "p {}", result.p_value);
    assert!(result.observed > 0.55, "observed {}", result.observed);
}

#[test]
fn ingest_fill_model_chain_runs_end_to_end() {
    // Build a message stream over six dense days plus one sparse day, derive
    // bars, fill the gap, and fit a model on the resulting series.
    let band = PlausibilityBand::eur_usd();
    let mut messages: Vec<RawMessage<f64>> = Vec::new();
    let mut closes = Vec::new();
    let spec = SynthSpec {
        n_hours: 7 * 8,
        coupling: 0.4,
        seed: 3,
        ..SynthSpec::default()
    };
    let series: AlignedSeriesF64 = generate_synthetic(&spec).unwrap();

    let mut hour_index = 0usize;
    for day in 0..7u32 {
        for hour_of_day in 9..17u32 {
            let hour = Utc
                .with_ymd_and_hms(2010, 11, 1 + day, hour_of_day, 0, 0)
                .unwrap();
            closes.push((hour, series.y()[hour_index]));
            let sparse_day = day == 6;
            let post_messages = if sparse_day { hour_of_day == 9 } else { true };
            if post_messages {
                let rate = series.u().unwrap()[hour_index];
                messages.push(RawMessage {
                    timestamp: hour + chrono::Duration::minutes(10),
                    author: format!("trader{day}"),
                    price_token: format!("{rate:.4}").replace('.', ","),
                    volume: Some(1.0 + f64::from(day)),
                });
            }
            hour_index += 1;
        }
    }

    let report = build_hourly_bars(&messages, &closes, &band).unwrap();
    assert_eq!(report.bars.len(), 56);
    assert_eq!(report.tokens_skipped, 0);
    let empty = report.bars.iter().filter(|b| b.tweet_count == 0).count();
    assert_eq!(empty, 7);

    let outcome = fill_series(&report.bars, &report.observations, 4, 17).unwrap();
    assert_eq!(outcome.bars_filled, 7);
    assert!(outcome.dropped_days.is_empty());
    let filled_series = series_from_bars(&outcome.bars).unwrap();
    assert!(filled_series.u().is_some());

    let order = ModelOrder::new(1, 1, 1).unwrap();
    let model = fit_linear(&filled_series, &order).unwrap();
    assert!(model.a_coeffs[0].is_finite());
}

#[test]
fn library_pipeline_is_deterministic() {
    let run = || {
        let spec = SynthSpec {
            n_hours: 600,
            coupling: 0.6,
            seed: 21,
            ..SynthSpec::default()
        };
        let series: AlignedSeriesF64 = generate_synthetic(&spec).unwrap();
        let test_start = SplitSpec::default().split_index(series.len()).unwrap();
        let grid = sweep(
            &series,
            test_start,
            ModelKind::Ann,
            1..=2,
            1..=2,
            1,
            &SweepConfig {
                epochs: 20,
                ..SweepConfig::default()
            },
        )
        .unwrap();
        let train = fxcast::eval::train_prefix(&series, test_start);
        let model = fit_linear(&train, &ModelOrder::new(1, 1, 1).unwrap()).unwrap();
        let predictions = fxcast::eval::test_predictions(&model, &series, test_start).unwrap();
        let ledger = simulate(
            &predictions,
            &series.y()[test_start..],
            &TradingConfig::default(),
        )
        .unwrap();
        let (pred_signs, actual_signs) =
            fxcast::eval::directional_signs(&predictions, &series, test_start, 1).unwrap();
        let result: fxcast::ResampleResultF64 =
            permutation_null(&pred_signs, &actual_signs, 500, 5).unwrap();
        (grid.to_json().to_string(), ledger, result)
    };
    let (grid_a, ledger_a, result_a) = run();
    let (grid_b, ledger_b, result_b) = run();
    assert_eq!(grid_a, grid_b);
    assert_eq!(ledger_a, ledger_b);
    assert_eq!(result_a, result_b);
}

#[test]
fn uncoupled_walks_show_no_reliable_skill_margin() {
    // Over 20 seeds, the best ARX cell should rarely beat persistence by
    // more than one bootstrap standard error of its own RMSE.
    let mut confident_wins = 0;
    for seed in 0..20 {
        let spec = SynthSpec {
            n_hours: 1200,
            coupling: 0.0,
            seed: 400 + seed,
            ..SynthSpec::default()
        };
        let series: AlignedSeriesF64 = generate_synthetic(&spec).unwrap();
        let test_start = SplitSpec::default().split_index(series.len()).unwrap();
        let grid = sweep(
            &series,
            test_start,
            ModelKind::Arx,
            1..=5,
            1..=5,
            1,
            &SweepConfig::default(),
        )
        .unwrap();
        let (best_key, best) = grid.best_by_rmse().unwrap();
        let rw = evaluate(&RandomWalk::new(1).unwrap(), &series, test_start).unwrap();

        // Bootstrap SE of the best cell's RMSE from its squared errors.
        let order = ModelOrder::new(best_key.0, best_key.1, 1).unwrap();
        let train = fxcast::eval::train_prefix(&series, test_start);
        let model = fit_linear(&train, &order).unwrap();
        let predictions = fxcast::eval::test_predictions(&model, &series, test_start).unwrap();
        let sq_errors: Vec<f64> = predictions
            .iter()
            .zip(&series.y()[test_start..])
            .map(|(p, a)| (p - a) * (p - a))
            .collect();
        let mut rng = fxcast::rng::seeded_rng(900 + seed);
        let n = sq_errors.len();
        let resampled: Vec<f64> = (0..400)
            .map(|_| {
                use rand::Rng;
                let mean: f64 = (0..n)
                    .map(|_| sq_errors[rng.random_range(0..n)])
                    .sum::<f64>()
                    / n as f64;
                mean.sqrt()
            })
            .collect();
        let mean = resampled.iter().sum::<f64>() / resampled.len() as f64;
        let se = (resampled
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / (resampled.len() - 1) as f64)
            .sqrt();

        if best.rmse < rw.rmse - se {
            confident_wins += 1;
        }
    }
    assert!(
        confident_wins <= 3,
        "{confident_wins}/20 seeds showed false skill"
    );
}

#[test]
fn synthetic_bars_survive_the_file_format() {
    let spec = SynthSpec {
        n_hours: 100,
        coupling: 0.5,
        seed: 31,
        ..SynthSpec::default()
    };
    let series: AlignedSeriesF64 = generate_synthetic(&spec).unwrap();
    let start = Utc.with_ymd_and_hms(2010, 10, 25, 0, 0, 0).unwrap();
    let bars = series_to_bars(&series, start);
    let mut buffer = Vec::new();
    fxcast::ingest::write_bars(&bars, &mut buffer).unwrap();
    let reread: Vec<fxcast::HourlyBarF64> = fxcast::ingest::read_bars(buffer.as_slice()).unwrap();
    let back = series_from_bars(&reread).unwrap();
    assert_eq!(back, series);
}
