//! Ordinary least squares with an intercept.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::standardize::check_dim;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinRegModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinRegModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
    }
}

/// Minimum-norm least-squares fit via SVD of the design matrix
/// (a column of ones is appended for the intercept).
pub fn fit_linreg(data: &[Vec<f64>], targets: &[f64]) -> Result<LinRegModel> {
    if data.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: data.len(),
            right: targets.len(),
        });
    }
    let d = data
        .first()
        .ok_or(Error::NotEnoughData { needed: 1, got: 0 })?
        .len();
    for row in data {
        check_dim(d, row.len())?;
    }
    let n = data.len();
    let x = DMatrix::from_fn(n, d + 1, |i, j| if j < d { data[i][j] } else { 1.0 });
    let y = DVector::from_column_slice(targets);
    let svd = x.svd(true, true);
    let beta = svd
        .solve(&y, 1e-12)
        .map_err(|e| Error::InvalidConfig(format!("least squares failed: {e}")))?;
    Ok(LinRegModel {
        weights: beta.iter().take(d).copied().collect(),
        intercept: beta[d],
    })
}
