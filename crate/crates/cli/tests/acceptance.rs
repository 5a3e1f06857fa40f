//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with the measured values (run with --nocapture to see them).

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use fxcast::distfit::{ks_test, normal_cdf, quantile_sorted, sample_stable, StableParams};
use fxcast::eval::{
    directional_accuracy, evaluate, mae, rmse, sign_accuracy, sweep, ModelKind, SplitSpec,
    SweepConfig,
};
use fxcast::ingest::{normalize_price_token, PlausibilityBand};
use fxcast::models::{
    ann_gradient, ann_loss, fit_linear, init_ann, init_ann_with_width, train_ann, AlignedSeries,
    AnnModel, ModelOrder, RandomWalk,
};
use fxcast::rng::seeded_rng;
use fxcast::stats::{bootstrap_statistic, permutation_null};
use fxcast::synth::{generate_synthetic, SynthSpec};
use fxcast::trading::{moving_average, simulate, TradingConfig};
use fxcast::{AlignedSeriesF64, ResampleResultF64};
use rand::Rng;

fn pass(criterion: &str, detail: String) {
    println!("[acceptance] {criterion}: PASS ({detail})");
}

#[test]
fn c01_parser_golden_suite() {
    let started = Instant::now();
    let band: PlausibilityBand<f64> = PlausibilityBand::eur_usd();
    for token in ["1.345", "1,345", "13,45", "134.5"] {
        assert_eq!(
            normalize_price_token(token, &band).unwrap(),
            1.345,
            "token {token}"
        );
    }

    let mut rng = seeded_rng(1);
    let mut fuzzed = 0;
    while fuzzed < 200 {
        let mantissa: u32 = rng.random_range(10_000..=16_000);
        let rate = f64::from(mantissa) / 1e4;
        let digits = mantissa.to_string();
        let split = rng.random_range(0..=digits.len());
        let separator = if rng.random::<bool>() { "." } else { "," };
        let token = if split == 0 || split == digits.len() {
            digits.clone()
        } else {
            format!("{}{}{}", &digits[..split], separator, &digits[split..])
        };
        assert_eq!(
            normalize_price_token(&token, &band).unwrap(),
            rate,
            "token {token} must round-trip exactly"
        );
        fuzzed += 1;
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    pass(
        "C1 parser golden suite",
        format!("4 published forms + 200 fuzzed round-trips in {elapsed:?}"),
    );
}

#[test]
fn c02_least_squares_exactness() {
    let started = Instant::now();
    let (a1, a2, b1, b2) = (0.5f64, -0.3, 0.3, 0.1);
    let mut rng = seeded_rng(2);
    let mut y = vec![1.2f64, 1.1];
    let mut u = vec![1.0 + rng.random::<f64>(), 1.0 + rng.random::<f64>()];
    for t in 2..500 {
        y.push(a1 * y[t - 1] + a2 * y[t - 2] + b1 * u[t - 1] + b2 * u[t - 2]);
        u.push(1.0 + rng.random::<f64>());
    }
    let series = AlignedSeries::at_level(y, Some(u)).unwrap();
    let model = fit_linear(&series, &ModelOrder::new(2, 2, 1).unwrap()).unwrap();
    let worst = [
        (model.a_coeffs[0] - a1).abs(),
        (model.a_coeffs[1] - a2).abs(),
        (model.b_coeffs[0] - b1).abs(),
        (model.b_coeffs[1] - b2).abs(),
    ]
    .into_iter()
    .fold(0.0f64, f64::max);
    assert!(worst < 1e-8, "max coefficient error {worst}");
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    pass(
        "C2 least-squares exactness",
        format!("max coefficient error {worst:.2e} in {elapsed:?}"),
    );
}

#[test]
fn c03_random_walk_recovery() {
    let started = Instant::now();
    let spec = SynthSpec {
        n_hours: 5000,
        coupling: 0.0,
        seed: 42,
        ..SynthSpec::default()
    };
    let series: AlignedSeriesF64 = generate_synthetic(&spec).unwrap();
    let model = fit_linear(&series, &ModelOrder::ar(1, 1).unwrap()).unwrap();
    assert!(
        model.a_coeffs[0] >= 0.98 && model.a_coeffs[0] <= 1.02,
        "regression a1 {}",
        model.a_coeffs[0]
    );

    let test_start = SplitSpec::default().split_index(series.len()).unwrap();
    let rw = evaluate(&RandomWalk::new(1).unwrap(), &series, test_start).unwrap();
    let innovation_scale = 2f64.sqrt() * spec.step_sigma;
    let ratio = rw.rmse / innovation_scale;
    assert!((ratio - 1.0).abs() < 0.02, "rmse/scale ratio {ratio}");
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 2.0, "took {elapsed:?}");
    pass(
        "C3 random-walk recovery",
        format!(
            "a1 {:.5}, persistence rmse within {:.2}% of the innovation scale",
            model.a_coeffs[0],
            (ratio - 1.0).abs() * 100.0
        ),
    );
}

#[test]
fn c04_arx_skill_detection() {
    let started = Instant::now();
    let mut passes = 0;
    for seed in 0..20u64 {
        let spec = SynthSpec {
            n_hours: 3000,
            coupling: 0.8,
            exo_noise: 0.2 * SynthSpec::default().step_sigma,
            seed: 100 + seed,
            ..SynthSpec::default()
        };
        let series: AlignedSeriesF64 = generate_synthetic(&spec).unwrap();
        let test_start = SplitSpec::default().split_index(series.len()).unwrap();
        let grid = sweep(
            &series,
            test_start,
            ModelKind::Arx,
            1..=10,
            1..=10,
            1,
            &SweepConfig::default(),
        )
        .unwrap();
        let (_, best) = grid.best_by_rmse().unwrap();
        let rw = evaluate(&RandomWalk::new(1).unwrap(), &series, test_start).unwrap();
        if best.rmse < 0.9 * rw.rmse && best.directional >= 0.6 {
            passes += 1;
        }
    }
    assert!(
        passes >= 18,
        "only {passes}/20 seeds showed the coupled skill"
    );
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    pass(
        "C4 ARX skill detection",
        format!("{passes}/20 seeds in {elapsed:?}"),
    );
}

#[test]
fn c05_no_false_skill() {
    let started = Instant::now();
    let mut nulls = 0;
    for seed in 0..20u64 {
        let spec = SynthSpec {
            n_hours: 3000,
            coupling: 0.0,
            seed: 200 + seed,
            ..SynthSpec::default()
        };
        let series: AlignedSeriesF64 = generate_synthetic(&spec).unwrap();
        let returns = series.log_returns().unwrap();
        let test_start = SplitSpec::default().split_index(returns.len()).unwrap();
        let grid = sweep(
            &returns,
            test_start,
            ModelKind::Arx,
            1..=10,
            1..=10,
            1,
            &SweepConfig::default(),
        )
        .unwrap();
        let ((n_a, n_b), _) = grid.best_by_rmse().unwrap();
        let train = fxcast::eval::train_prefix(&returns, test_start);
        let model = fit_linear(&train, &ModelOrder::new(n_a, n_b, 1).unwrap()).unwrap();
        let predictions = fxcast::eval::test_predictions(&model, &returns, test_start).unwrap();
        let (pred_signs, actual_signs) =
            fxcast::eval::directional_signs(&predictions, &returns, test_start, 1).unwrap();
        let result: ResampleResultF64 =
            permutation_null(&pred_signs, &actual_signs, 5000, 300 + seed).unwrap();
        if result.p_value > 0.05 {
            nulls += 1;
        }
    }
    assert!(nulls >= 17, "only {nulls}/20 seeds were null");
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    pass(
        "C5 no false skill",
        format!("{nulls}/20 seeds null in {elapsed:?}"),
    );
}

// Finite-difference oracle over every weight and bias of a network.
fn flatten(model: &AnnModel<f64>) -> Vec<f64> {
    let mut out = Vec::new();
    for layer in &model.layers {
        for r in 0..layer.weights.rows() {
            out.extend_from_slice(layer.weights.row(r));
        }
        out.extend_from_slice(&layer.biases);
    }
    out
}

fn perturbed(model: &AnnModel<f64>, flat_index: usize, delta: f64) -> AnnModel<f64> {
    let mut m = model.clone();
    let mut i = flat_index;
    for layer in m.layers.iter_mut() {
        let n_w = layer.weights.rows() * layer.weights.cols();
        if i < n_w {
            let (r, c) = (i / layer.weights.cols(), i % layer.weights.cols());
            layer.weights.set(r, c, layer.weights.get(r, c) + delta);
            return m;
        }
        i -= n_w;
        if i < layer.biases.len() {
            layer.biases[i] += delta;
            return m;
        }
        i -= layer.biases.len();
    }
    unreachable!("flat index {flat_index} out of range");
}

#[test]
fn c06_ann_gradient_check() {
    let started = Instant::now();
    let mut worst_overall: f64 = 0.0;
    for config in 0..50u64 {
        let mut setup = seeded_rng(600 + config);
        let order = ModelOrder::new(
            setup.random_range(1..=3),
            setup.random_range(0..=3),
            setup.random_range(1..=2),
        )
        .unwrap();
        let width = setup.random_range(2..=5);
        let model: AnnModel<f64> = init_ann_with_width(&order, width, 700 + config);
        let rows: Vec<Vec<f64>> = (0..8)
            .map(|_| {
                (0..order.input_width())
                    .map(|_| 2.0 * setup.random::<f64>() - 1.0)
                    .collect()
            })
            .collect();
        let targets: Vec<f64> = (0..8).map(|_| 2.0 * setup.random::<f64>() - 1.0).collect();

        let analytic = ann_gradient(&model, &rows, &targets).unwrap();
        let flat_analytic = flatten(&AnnModel {
            layers: analytic.layers,
            ..model.clone()
        });
        let flat_weights = flatten(&model);

        for (i, (&g, &w)) in flat_analytic.iter().zip(&flat_weights).enumerate() {
            let h = 1e-5 * w.abs().max(1.0);
            let plus = ann_loss(&perturbed(&model, i, h), &rows, &targets).unwrap();
            let minus = ann_loss(&perturbed(&model, i, -h), &rows, &targets).unwrap();
            let fd = (plus - minus) / (2.0 * h);
            let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-6);
            worst_overall = worst_overall.max(rel);
        }
    }
    assert!(worst_overall < 1e-4, "max relative error {worst_overall}");
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    pass(
        "C6 ANN gradient check",
        format!("50 configurations, max relative error {worst_overall:.2e} in {elapsed:?}"),
    );
}

#[test]
fn c07_ann_learnability() {
    let started = Instant::now();
    let mut rng = seeded_rng(7);
    let mut y = vec![1.0f64];
    let mut u = vec![1.0 + rng.random::<f64>()];
    for t in 1..400 {
        y.push(0.5 * y[t - 1] + 0.3 * u[t - 1]);
        u.push(1.0 + rng.random::<f64>());
    }
    let series = AlignedSeries::at_level(y, Some(u)).unwrap();
    let order = ModelOrder::new(1, 1, 1).unwrap();

    let mut ratios = Vec::new();
    for seed in 0..3u64 {
        let fresh: AnnModel<f64> = init_ann(&order, seed);
        let outcome = train_ann(&fresh, &series, 100, 0.05).unwrap();
        let ratio = outcome.initial_mse / outcome.final_mse;
        assert!(
            outcome.final_mse < outcome.initial_mse / 5.0,
            "seed {seed}: initial {} final {}",
            outcome.initial_mse,
            outcome.final_mse
        );
        ratios.push(ratio);
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    pass(
        "C7 ANN learnability",
        format!(
            "3/3 seeds, loss reduction factors {:.1} / {:.1} / {:.1} in {elapsed:?}",
            ratios[0], ratios[1], ratios[2]
        ),
    );
}

#[test]
fn c08_metric_identities() {
    let started = Instant::now();
    let mut rng = seeded_rng(8);
    for case in 0..1000 {
        let n = rng.random_range(1..40);
        let p: Vec<f64> = (0..n).map(|_| 4.0 * rng.random::<f64>() - 2.0).collect();
        let a: Vec<f64> = (0..n).map(|_| 4.0 * rng.random::<f64>() - 2.0).collect();
        let r = rmse(&p, &a).unwrap();
        let m = mae(&p, &a).unwrap();
        assert!(r >= m - 1e-12, "case {case}: rmse {r} < mae {m}");
    }

    // Perfect foresight on zero-move-free data.
    let lagged: Vec<f64> = (0..50).map(|i| 1.3 + 0.001 * f64::from(i)).collect();
    let actuals: Vec<f64> = lagged
        .iter()
        .enumerate()
        .map(|(i, l)| l + if i % 2 == 0 { 0.002 } else { -0.002 })
        .collect();
    assert_eq!(
        directional_accuracy(&actuals.clone(), &actuals, &lagged).unwrap(),
        1.0
    );
    let returns: Vec<f64> = (0..50)
        .map(|i| if i % 3 == 0 { -0.4 } else { 0.7 })
        .collect();
    assert_eq!(sign_accuracy(&returns.clone(), &returns).unwrap(), 1.0);

    // Persistence predicts zero moves, which score zero.
    assert_eq!(
        directional_accuracy(&lagged.clone(), &actuals, &lagged).unwrap(),
        0.0
    );

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 2.0, "took {elapsed:?}");
    pass(
        "C8 metric identities",
        format!("1000 rmse>=mae pairs plus DA/Sgn identities in {elapsed:?}"),
    );
}

#[test]
fn c09_stable_sampler_calibration() {
    let started = Instant::now();
    let scale = 0.021;
    let location = 1.3475;
    let gaussian = StableParams::new(2.0, 0.0, scale, location).unwrap();
    let sqrt2 = 2f64.sqrt();
    let ks_passes = (0..10u64)
        .filter(|&seed| {
            let draws = sample_stable(&gaussian, 10_000, 1000 + seed).unwrap();
            ks_test(&draws, |x| normal_cdf(x, location, sqrt2 * scale))
                .unwrap()
                .p_value
                > 0.01
        })
        .count();
    assert!(
        ks_passes >= 9,
        "only {ks_passes}/10 seeds passed the KS check"
    );

    let cauchy: StableParams<f64> = StableParams::new(1.0, 0.0, 0.7, 0.0).unwrap();
    let mut draws = sample_stable(&cauchy, 100_000, 9).unwrap();
    draws.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let iqr = quantile_sorted(&draws, 0.75) - quantile_sorted(&draws, 0.25);
    let expected = 2.0 * 0.7;
    assert!(
        (iqr - expected).abs() / expected < 0.05,
        "iqr {iqr} vs {expected}"
    );

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    pass(
        "C9 stable sampler calibration",
        format!(
            "KS {ks_passes}/10 seeds, Cauchy IQR within {:.2}% in {elapsed:?}",
            (iqr - expected).abs() / expected * 100.0
        ),
    );
}

#[test]
fn c10_trading_hand_trace() {
    let started = Instant::now();

    // Hand trace of the rule on [100, 101, 100] with m = 1, n_k = 1 and a
    // perfect-foresight predictor: long at t=1 (+1%), short at t=2, which
    // gains +100/101 percent as the price falls.
    let actuals = vec![100.0f64, 101.0, 100.0];
    let ledger = simulate(
        &actuals.clone(),
        &actuals,
        &TradingConfig::new(1, 1).unwrap(),
    )
    .unwrap();
    let signals: Vec<i8> = ledger.steps.iter().map(|s| s.signal).collect();
    assert_eq!(signals, vec![1, -1]);
    assert!((ledger.steps[0].return_pct - 1.0).abs() < 1e-12);
    assert!((ledger.steps[1].return_pct - 100.0 / 101.0).abs() < 1e-12);
    assert!((ledger.final_cumulative - (1.0 + 100.0 / 101.0)).abs() < 1e-12);

    // Antisymmetry and flat-market nullity over 200 random instances.
    let mut rng = seeded_rng(10);
    for case in 0..200u64 {
        let n = rng.random_range(10..40);
        let m = rng.random_range(1..5);
        let n_k = rng.random_range(1..3);
        let config = TradingConfig::new(m, n_k).unwrap();
        let mut actuals = vec![100.0f64];
        for _ in 1..n {
            actuals.push(actuals.last().unwrap() + 4.0 * (rng.random::<f64>() - 0.5));
        }
        let predictions: Vec<f64> = actuals
            .iter()
            .map(|a| a + 2.0 * (rng.random::<f64>() - 0.5))
            .collect();

        let ledger = simulate(&predictions, &actuals, &config).unwrap();
        let mirrored: Vec<f64> = predictions
            .iter()
            .enumerate()
            .map(|(t, &p)| {
                if t >= config.first_tradable() {
                    2.0 * moving_average(&actuals, m, t - n_k).unwrap() - p
                } else {
                    p
                }
            })
            .collect();
        let anti = simulate(&mirrored, &actuals, &config).unwrap();
        for (a, b) in ledger.steps.iter().zip(&anti.steps) {
            assert_eq!(a.signal, -b.signal, "case {case}");
            assert!((a.return_pct + b.return_pct).abs() < 1e-9, "case {case}");
        }
        assert!(
            (ledger.final_cumulative + anti.final_cumulative).abs() < 1e-9,
            "case {case}"
        );

        let flat = vec![actuals[0]; n];
        let flat_ledger = simulate(&predictions, &flat, &config).unwrap();
        assert!(
            flat_ledger.steps.iter().all(|s| s.return_pct == 0.0),
            "case {case}"
        );
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    pass(
        "C10 trading hand-trace",
        format!("3-point trace exact, 200 random instances in {elapsed:?}"),
    );
}

#[test]
fn c11_resampling_calibration() {
    let started = Instant::now();

    let mut rng = seeded_rng(12);
    let indicators: Vec<bool> = (0..500).map(|_| rng.random::<f64>() < 0.5).collect();
    let boot: ResampleResultF64 = bootstrap_statistic(&indicators, 5000, 3).unwrap();
    let mean = boot.distribution.iter().sum::<f64>() / boot.distribution.len() as f64;
    assert!((mean - 0.5).abs() < 0.02, "bootstrap mean {mean}");
    let std = {
        let var = boot
            .distribution
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / (boot.distribution.len() - 1) as f64;
        var.sqrt()
    };
    let theory = (0.25f64 / 500.0).sqrt();
    assert!(
        (std - theory).abs() / theory < 0.2,
        "bootstrap std {std} vs {theory}"
    );

    let mut rng = seeded_rng(13);
    let actual: Vec<i8> = (0..200)
        .map(|_| if rng.random::<f64>() < 0.5 { -1 } else { 1 })
        .collect();
    let perm: ResampleResultF64 = permutation_null(&actual.clone(), &actual, 5000, 14).unwrap();
    assert_eq!(perm.observed, 1.0);
    assert!(perm.p_value < 0.01, "perfect predictor p {}", perm.p_value);

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    pass(
        "C11 resampling calibration",
        format!(
            "coin mean {mean:.4}, std within {:.1}%, perfect-predictor p {:.5} in {elapsed:?}",
            (std - theory).abs() / theory * 100.0,
            perm.p_value
        ),
    );
}

fn run_pipeline(dir: &Path) {
    let bin = env!("CARGO_BIN_EXE_fxcast");
    let bars = dir.join("bars.csv");
    let run = |args: &[&str]| {
        let output = Command::new(bin).args(args).output().expect("binary runs");
        assert!(
            output.status.success(),
            "step {:?} failed: {}",
            args.first(),
            String::from_utf8_lossy(&output.stderr)
        );
    };
    run(&[
        "synth",
        "--hours",
        "1200",
        "--kappa",
        "0.8",
        "--exo-noise",
        "0.00026",
        "--seed",
        "7",
        "--out",
        bars.to_str().unwrap(),
    ]);
    run(&[
        "sweep",
        "--bars",
        bars.to_str().unwrap(),
        "--kind",
        "arx",
        "--na-range",
        "1:6",
        "--nb-range",
        "1:6",
        "--nk",
        "1",
        "--seed",
        "3",
        "--out-dir",
        dir.join("sweeps").to_str().unwrap(),
    ]);
    run(&[
        "fit",
        "--bars",
        bars.to_str().unwrap(),
        "--kind",
        "arx",
        "--na",
        "1",
        "--nb",
        "2",
        "--nk",
        "1",
        "--out",
        dir.join("arx.json").to_str().unwrap(),
    ]);
    run(&[
        "trade",
        "--bars",
        bars.to_str().unwrap(),
        "--model",
        dir.join("arx.json").to_str().unwrap(),
        "--m",
        "4",
        "--out",
        dir.join("ledger.csv").to_str().unwrap(),
    ]);
    run(&[
        "signif",
        "--bars",
        bars.to_str().unwrap(),
        "--model",
        dir.join("arx.json").to_str().unwrap(),
        "--boot",
        "2000",
        "--seed",
        "11",
        "--out",
        dir.join("signif.json").to_str().unwrap(),
    ]);
}

fn collect_files(root: &Path, base: &Path, into: &mut BTreeMap<String, Vec<u8>>) {
    for entry in std::fs::read_dir(root).expect("readable dir") {
        let path = entry.expect("entry").path();
        if path.is_dir() {
            collect_files(&path, base, into);
        } else {
            let rel = path
                .strip_prefix(base)
                .unwrap()
                .to_string_lossy()
                .into_owned();
            into.insert(rel, std::fs::read(&path).expect("readable file"));
        }
    }
}

#[test]
fn c12_end_to_end_determinism() {
    let started = Instant::now();
    let scratch = tempfile::tempdir().expect("tempdir");
    let (dir_a, dir_b) = (scratch.path().join("a"), scratch.path().join("b"));
    std::fs::create_dir_all(&dir_a).unwrap();
    std::fs::create_dir_all(&dir_b).unwrap();

    run_pipeline(&dir_a);
    run_pipeline(&dir_b);

    let mut files_a = BTreeMap::new();
    let mut files_b = BTreeMap::new();
    collect_files(&dir_a, &dir_a, &mut files_a);
    collect_files(&dir_b, &dir_b, &mut files_b);

    assert_eq!(
        files_a.keys().collect::<Vec<_>>(),
        files_b.keys().collect::<Vec<_>>(),
        "the two runs wrote different file sets"
    );
    assert!(
        files_a.len() >= 8,
        "expected the full output set, got {}",
        files_a.len()
    );
    for (name, bytes) in &files_a {
        assert_eq!(bytes, &files_b[name], "{name} differs between runs");
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 90.0, "took {elapsed:?}");
    pass(
        "C12 end-to-end determinism",
        format!(
            "{} output files byte-identical across reruns in {elapsed:?}",
            files_a.len()
        ),
    );
}
