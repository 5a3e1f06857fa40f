//! The numeric core compiles and behaves for both scalar widths.

use fxcast::distfit::{estimate_stable, sample_stable, StableParams};
use fxcast::eval::{evaluate, rmse, SplitSpec};
use fxcast::models::{fit_linear, AlignedSeries, ModelOrder, RandomWalk};
use fxcast::rng::{seeded_rng, standard_normal};
use fxcast::scalar::Scalar;
use fxcast::trading::{simulate, TradingConfig};

fn walk<T: Scalar>(n: usize, seed: u64) -> AlignedSeries<T> {
    let mut rng = seeded_rng(seed);
    let mut y = vec![T::from_f64_lossy(1.35)];
    for _ in 1..n {
        let step = T::from_f64_lossy(0.002) * standard_normal::<T>(&mut rng);
        y.push(*y.last().unwrap() + step);
    }
    AlignedSeries::at_level(y, None).unwrap()
}

fn exercise<T: Scalar>(tolerance: f64) {
    let series = walk::<T>(2000, 5);
    let model = fit_linear(&series, &ModelOrder::ar(1, 1).unwrap()).unwrap();
    let a1 = model.a_coeffs[0].to_f64_lossy();
    assert!((a1 - 1.0).abs() < 0.05, "a1 {a1}");

    let test_start = SplitSpec::default().split_index(series.len()).unwrap();
    let metrics = evaluate(&RandomWalk::new(1).unwrap(), &series, test_start).unwrap();
    assert!(metrics.rmse.to_f64_lossy() > 0.0);

    let params = StableParams::new(
        T::from_f64_lossy(2.0),
        T::zero(),
        T::from_f64_lossy(0.5),
        T::zero(),
    )
    .unwrap();
    let draws = sample_stable(&params, 5000, 3).unwrap();
    let est = estimate_stable(&draws).unwrap();
    assert!(est.alpha.to_f64_lossy() > 1.8, "alpha {}", est.alpha);

    let actuals: Vec<T> = series.y()[..50].to_vec();
    let ledger = simulate(&actuals.clone(), &actuals, &TradingConfig::default()).unwrap();
    assert!(ledger.final_cumulative.is_finite());

    let zero = rmse(&actuals, &actuals).unwrap().to_f64_lossy();
    assert!(zero.abs() < tolerance);
}

#[test]
fn double_precision_core() {
    exercise::<f64>(1e-12);
}

#[test]
fn single_precision_core() {
    exercise::<f32>(1e-5);
}
