//! AR and ARX models estimated by least squares.

use serde::{Deserialize, Serialize};

use super::{build_lag_matrix, lag_row, AlignedSeries, Forecaster, ModelError, ModelOrder};
use crate::linalg::lstsq;
use crate::scalar::Scalar;

/// Sign convention of the stored a-coefficients.
///
/// `Regression` writes the forecast as an inner product,
/// yhat(t) = sum a_i y(t-n_k-i+1) + sum b_j u(t-n_k-j+1).
/// `MonicPolynomial` writes the monic lag-polynomial form A(z)y(t) = e(t),
/// whose a-coefficients are the negation of the regression ones (a random
/// walk has regression a1 = +1, polynomial a1 = -1). The b side is identical
/// in both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    Regression,
    MonicPolynomial,
}

/// Least-squares AR/ARX fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel<T> {
    pub order: ModelOrder,
    pub convention: Convention,
    pub a_coeffs: Vec<T>,
    pub b_coeffs: Vec<T>,
    /// Standard deviations for the a block then the b block.
    pub coeff_std: Vec<T>,
}

impl<T: Scalar> LinearModel<T> {
    /// The same model expressed in the other sign convention.
    pub fn to_convention(&self, convention: Convention) -> Self {
        if convention == self.convention {
            return self.clone();
        }
        Self {
            convention,
            a_coeffs: self.a_coeffs.iter().map(|&a| -a).collect(),
            ..self.clone()
        }
    }

    fn regression_a(&self) -> Vec<T> {
        match self.convention {
            Convention::Regression => self.a_coeffs.clone(),
            Convention::MonicPolynomial => self.a_coeffs.iter().map(|&a| -a).collect(),
        }
    }
}

/// Fit the order's lag structure to `train` by ordinary least squares.
///
/// Coefficient standard deviations come from the diagonal of
/// sigma^2 (X'X)^-1 with the unbiased residual variance.
pub fn fit_linear<T: Scalar>(
    train: &AlignedSeries<T>,
    order: &ModelOrder,
) -> Result<LinearModel<T>, ModelError> {
    let (design, targets) = build_lag_matrix(train, order)?;
    let fit = lstsq(&design, &targets)?;
    let (a_coeffs, b_coeffs) = fit.coefficients.split_at(order.n_a);
    Ok(LinearModel {
        order: *order,
        convention: Convention::Regression,
        a_coeffs: a_coeffs.to_vec(),
        b_coeffs: b_coeffs.to_vec(),
        coeff_std: fit.std_errors,
    })
}

impl<T: Scalar> Forecaster<T> for LinearModel<T> {
    fn order(&self) -> ModelOrder {
        self.order
    }

    fn predict(&self, series: &AlignedSeries<T>, t: usize) -> Result<T, ModelError> {
        let row = lag_row(series, &self.order, t)?;
        let coeffs: Vec<T> = self
            .regression_a()
            .into_iter()
            .chain(self.b_coeffs.iter().copied())
            .collect();
        Ok(row.iter().zip(&coeffs).map(|(&x, &c)| x * c).sum())
    }
}
