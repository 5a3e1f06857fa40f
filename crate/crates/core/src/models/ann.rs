//! Two-hidden-layer feedforward network trained by full-batch
//! backpropagation on mean squared error.
//!
//! Hidden nodes use f(x) = 2/(1 + e^(-2x)) - 1 (the bipolar sigmoid, equal to
//! tanh), the output node is linear. Inputs and targets are standardized with
//! training-set statistics that live on the model.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{build_lag_matrix, lag_row, AlignedSeries, Forecaster, ModelError, ModelOrder};
use crate::linalg::Mat;
use crate::rng::seeded_rng;
use crate::scalar::Scalar;

pub const DEFAULT_HIDDEN_WIDTH: usize = 4;
/// Expected average approximating error used for the capacity warning.
const CAPACITY_TARGET_ERROR: f64 = 0.1;

/// One dense layer: `out = weights * in + biases`, row-major weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer<T> {
    pub weights: Mat<T>,
    pub biases: Vec<T>,
}

/// Per-column standardization parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaler<T> {
    pub means: Vec<T>,
    pub stds: Vec<T>,
}

impl<T: Scalar> ColumnScaler<T> {
    fn identity(width: usize) -> Self {
        Self {
            means: vec![T::zero(); width],
            stds: vec![T::one(); width],
        }
    }

    fn apply(&self, row: &[T]) -> Vec<T> {
        row.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(&x, (&m, &s))| (x - m) / s)
            .collect()
    }
}

/// Scalar standardization for the target channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueScaler<T> {
    pub mean: T,
    pub std: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnModel<T> {
    pub order: ModelOrder,
    pub hidden_width: usize,
    pub seed: u64,
    /// Two squashing hidden layers followed by the linear output layer.
    pub layers: Vec<DenseLayer<T>>,
    pub input_scaler: ColumnScaler<T>,
    pub target_scaler: ValueScaler<T>,
}

/// Gradient of the batch loss, shaped like the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnGradient<T> {
    pub layers: Vec<DenseLayer<T>>,
}

/// Outcome of a training run; losses are in target units.
#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub model: AnnModel<T>,
    pub initial_mse: T,
    pub final_mse: T,
    /// False when the weight count fails the capacity condition
    /// n_weights < e * n_train; training proceeds regardless.
    pub capacity_ok: bool,
}

/// Total number of trainable parameters, biases included.
pub fn weight_count(order: &ModelOrder, hidden_width: usize) -> usize {
    let (inputs, w) = (order.input_width(), hidden_width);
    (inputs * w + w) + (w * w + w) + (w + 1)
}

/// Capacity condition for a fair interpolation of the input space:
/// the weight count must stay below `target_error * n_train`.
pub fn baum_haussler_check(n_weights: usize, n_train: usize, target_error: f64) -> bool {
    (n_weights as f64) < target_error * n_train as f64
}

/// Fresh network with weights uniform in +-1/sqrt(fan_in) and zero biases.
pub fn init_ann<T: Scalar>(order: &ModelOrder, seed: u64) -> AnnModel<T> {
    init_ann_with_width(order, DEFAULT_HIDDEN_WIDTH, seed)
}

pub fn init_ann_with_width<T: Scalar>(
    order: &ModelOrder,
    hidden_width: usize,
    seed: u64,
) -> AnnModel<T> {
    assert!(hidden_width >= 1, "hidden width must be >= 1");
    let mut rng = seeded_rng(seed);
    let widths = [order.input_width(), hidden_width, hidden_width, 1];
    let layers = widths
        .windows(2)
        .map(|pair| {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = 1.0 / (fan_in as f64).sqrt();
            let mut weights = Mat::zeros(fan_out, fan_in);
            for r in 0..fan_out {
                for c in 0..fan_in {
                    let u: f64 = rng.random();
                    weights.set(r, c, T::from_f64_lossy(limit * (2.0 * u - 1.0)));
                }
            }
            DenseLayer {
                weights,
                biases: vec![T::zero(); fan_out],
            }
        })
        .collect();
    AnnModel {
        order: *order,
        hidden_width,
        seed,
        layers,
        input_scaler: ColumnScaler::identity(order.input_width()),
        target_scaler: ValueScaler {
            mean: T::zero(),
            std: T::one(),
        },
    }
}

fn squash<T: Scalar>(x: T) -> T {
    x.tanh()
}

/// Activations per layer boundary; index 0 is the input row, the last entry
/// is the single linear output.
fn forward_trace<T: Scalar>(layers: &[DenseLayer<T>], input: &[T]) -> Vec<Vec<T>> {
    let mut acts = Vec::with_capacity(layers.len() + 1);
    acts.push(input.to_vec());
    for (i, layer) in layers.iter().enumerate() {
        let mut z = layer.weights.mul_vec(acts.last().unwrap());
        for (slot, &b) in z.iter_mut().zip(&layer.biases) {
            *slot += b;
        }
        if i + 1 < layers.len() {
            for slot in z.iter_mut() {
                *slot = squash(*slot);
            }
        }
        acts.push(z);
    }
    acts
}

fn network_output<T: Scalar>(model: &AnnModel<T>, input: &[T]) -> T {
    forward_trace(&model.layers, input).last().unwrap()[0]
}

fn check_batch<T: Scalar>(
    model: &AnnModel<T>,
    rows: &[Vec<T>],
    targets: &[T],
) -> Result<(), ModelError> {
    if rows.len() != targets.len() {
        return Err(ModelError::ShapeMismatch(format!(
            "{} rows for {} targets",
            rows.len(),
            targets.len()
        )));
    }
    let width = model.order.input_width();
    if let Some(bad) = rows.iter().find(|r| r.len() != width) {
        return Err(ModelError::ShapeMismatch(format!(
            "row width {} does not match input width {width}",
            bad.len()
        )));
    }
    Ok(())
}

/// Mean squared error of the network over rows already in network space.
pub fn ann_loss<T: Scalar>(
    model: &AnnModel<T>,
    rows: &[Vec<T>],
    targets: &[T],
) -> Result<T, ModelError> {
    check_batch(model, rows, targets)?;
    let n = T::from_f64_lossy(rows.len() as f64);
    Ok(rows
        .iter()
        .zip(targets)
        .map(|(row, &t)| {
            let e = network_output(model, row) - t;
            e * e
        })
        .sum::<T>()
        / n)
}

/// Exact gradient of [`ann_loss`] with respect to every weight and bias.
pub fn ann_gradient<T: Scalar>(
    model: &AnnModel<T>,
    rows: &[Vec<T>],
    targets: &[T],
) -> Result<AnnGradient<T>, ModelError> {
    check_batch(model, rows, targets)?;
    let mut grads: Vec<DenseLayer<T>> = model
        .layers
        .iter()
        .map(|l| DenseLayer {
            weights: Mat::zeros(l.weights.rows(), l.weights.cols()),
            biases: vec![T::zero(); l.biases.len()],
        })
        .collect();
    let n = T::from_f64_lossy(rows.len() as f64);
    let two = T::from_f64_lossy(2.0);

    for (row, &target) in rows.iter().zip(targets) {
        let acts = forward_trace(&model.layers, row);
        let output = acts.last().unwrap()[0];
        // Linear output node: dL/dz = 2 (o - t) / N.
        let mut delta = vec![two * (output - target) / n];
        for l in (0..model.layers.len()).rev() {
            let input_act = &acts[l];
            for (i, &d) in delta.iter().enumerate() {
                grads[l].biases[i] += d;
                for (j, &x) in input_act.iter().enumerate() {
                    let cur = grads[l].weights.get(i, j);
                    grads[l].weights.set(i, j, cur + d * x);
                }
            }
            if l > 0 {
                // f'(x) = 1 - f(x)^2 on the squashed activation feeding layer l.
                let mut next = vec![T::zero(); model.layers[l].weights.cols()];
                for (i, &d) in delta.iter().enumerate() {
                    for (j, slot) in next.iter_mut().enumerate() {
                        *slot += model.layers[l].weights.get(i, j) * d;
                    }
                }
                for (j, slot) in next.iter_mut().enumerate() {
                    let a = acts[l][j];
                    *slot *= T::one() - a * a;
                }
                delta = next;
            }
        }
    }
    Ok(AnnGradient { layers: grads })
}

fn apply_gradient<T: Scalar>(model: &mut AnnModel<T>, grad: &AnnGradient<T>, learning_rate: T) {
    for (layer, g) in model.layers.iter_mut().zip(&grad.layers) {
        for r in 0..layer.weights.rows() {
            for c in 0..layer.weights.cols() {
                let w = layer.weights.get(r, c);
                layer
                    .weights
                    .set(r, c, w - learning_rate * g.weights.get(r, c));
            }
        }
        for (b, &gb) in layer.biases.iter_mut().zip(&g.biases) {
            *b -= learning_rate * gb;
        }
    }
}

fn column_stats<T: Scalar>(design: &Mat<T>) -> ColumnScaler<T> {
    let n = T::from_f64_lossy(design.rows() as f64);
    let mut means = vec![T::zero(); design.cols()];
    for r in 0..design.rows() {
        for (c, mean) in means.iter_mut().enumerate() {
            *mean += design.get(r, c);
        }
    }
    for mean in means.iter_mut() {
        *mean /= n;
    }
    let mut stds = vec![T::zero(); design.cols()];
    for r in 0..design.rows() {
        for (c, std) in stds.iter_mut().enumerate() {
            let d = design.get(r, c) - means[c];
            *std += d * d;
        }
    }
    for std in stds.iter_mut() {
        *std = (*std / n).sqrt();
        if *std == T::zero() {
            *std = T::one();
        }
    }
    ColumnScaler { means, stds }
}

/// Full-batch gradient descent for `epochs` passes.
///
/// Fits the scalers on the training rows, then descends the standardized
/// MSE; reported losses are converted back to target units.
pub fn train_ann<T: Scalar>(
    model: &AnnModel<T>,
    train: &AlignedSeries<T>,
    epochs: usize,
    learning_rate: T,
) -> Result<TrainOutcome<T>, ModelError> {
    if !learning_rate.is_finite() || learning_rate <= T::zero() {
        return Err(ModelError::InvalidOrder("learning rate must be > 0".into()));
    }
    let (design, raw_targets) = build_lag_matrix(train, &model.order)?;
    let n_rows = design.rows();

    let mut model = model.clone();
    model.input_scaler = column_stats(&design);
    let t_mean = raw_targets.iter().copied().sum::<T>() / T::from_f64_lossy(n_rows as f64);
    let t_var = raw_targets
        .iter()
        .map(|&t| (t - t_mean) * (t - t_mean))
        .sum::<T>()
        / T::from_f64_lossy(n_rows as f64);
    let t_std = if t_var > T::zero() {
        t_var.sqrt()
    } else {
        T::one()
    };
    model.target_scaler = ValueScaler {
        mean: t_mean,
        std: t_std,
    };

    let rows: Vec<Vec<T>> = (0..n_rows)
        .map(|r| model.input_scaler.apply(design.row(r)))
        .collect();
    let targets: Vec<T> = raw_targets.iter().map(|&t| (t - t_mean) / t_std).collect();

    let to_target_units = |loss: T| loss * t_std * t_std;
    let initial = ann_loss(&model, &rows, &targets)?;
    let mut last = initial;
    for epoch in 0..epochs {
        let grad = ann_gradient(&model, &rows, &targets)?;
        apply_gradient(&mut model, &grad, learning_rate);
        last = ann_loss(&model, &rows, &targets)?;
        if !last.is_finite() {
            return Err(ModelError::DivergedLoss { epoch });
        }
    }
    let capacity_ok = baum_haussler_check(
        weight_count(&model.order, model.hidden_width),
        n_rows,
        CAPACITY_TARGET_ERROR,
    );
    Ok(TrainOutcome {
        model,
        initial_mse: to_target_units(initial),
        final_mse: to_target_units(last),
        capacity_ok,
    })
}

impl<T: Scalar> Forecaster<T> for AnnModel<T> {
    fn order(&self) -> ModelOrder {
        self.order
    }

    fn predict(&self, series: &AlignedSeries<T>, t: usize) -> Result<T, ModelError> {
        let row = lag_row(series, &self.order, t)?;
        let out = network_output(self, &self.input_scaler.apply(&row));
        Ok(out * self.target_scaler.std + self.target_scaler.mean)
    }
}
