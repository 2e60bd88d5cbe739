use serde::{Deserialize, Serialize};

use super::standardize::check_dim;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogRegConfig {
    pub l2_lambda: f64,
    pub max_iter: usize,
    /// Stop once the gradient norm falls below this.
    pub tol: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        Self {
            l2_lambda: 1e-3,
            max_iter: 5000,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub l2_lambda: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
}

impl LogRegModel {
    pub fn probability(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.weights.len(), x.len())?;
        Ok(sigmoid(dot(&self.weights, x) + self.bias))
    }

    pub fn converged(&self, tol: f64) -> bool {
        self.gradient_norm < tol
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Regularized mean cross-entropy and its gradient; `params` is the weight
/// vector followed by the bias (which is not penalized).
pub fn objective_and_gradient(
    data: &[Vec<f64>],
    labels: &[bool],
    lambda: f64,
    params: &[f64],
) -> (f64, Vec<f64>) {
    let dim = params.len() - 1;
    let (w, b) = (&params[..dim], params[dim]);
    let n = data.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; dim + 1];
    for (x, &y) in data.iter().zip(labels) {
        let z = dot(w, x) + b;
        let t = if y { 1.0 } else { 0.0 };
        loss += softplus(z) - t * z;
        let err = sigmoid(z) - t;
        for (g, v) in grad.iter_mut().zip(x) {
            *g += err * v;
        }
        grad[dim] += err;
    }
    loss /= n;
    grad.iter_mut().for_each(|g| *g /= n);
    for (g, wi) in grad[..dim].iter_mut().zip(w) {
        *g += lambda * wi;
    }
    loss += 0.5 * lambda * dot(w, w);
    (loss, grad)
}

fn objective(data: &[Vec<f64>], labels: &[bool], lambda: f64, params: &[f64]) -> f64 {
    let dim = params.len() - 1;
    let (w, b) = (&params[..dim], params[dim]);
    let mut loss = 0.0;
    for (x, &y) in data.iter().zip(labels) {
        let z = dot(w, x) + b;
        loss += softplus(z) - if y { z } else { 0.0 };
    }
    loss / data.len() as f64 + 0.5 * lambda * dot(w, w)
}

/// L2-regularized logistic regression from zero initialization.
pub fn fit_logreg(data: &[Vec<f64>], labels: &[bool], cfg: &LogRegConfig) -> Result<LogRegModel> {
    let dim = data.first().map_or(0, |r| r.len());
    fit_logreg_from(data, labels, cfg, &vec![0.0; dim + 1])
}

/// Full-batch gradient descent with Armijo backtracking. The first trial
/// step of each line search is the Barzilai–Borwein step from the previous
/// iteration.
pub fn fit_logreg_from(
    data: &[Vec<f64>],
    labels: &[bool],
    cfg: &LogRegConfig,
    init: &[f64],
) -> Result<LogRegModel> {
    if data.is_empty() {
        return Err(Error::NotEnoughData { needed: 2, got: 0 });
    }
    if data.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: data.len(),
            right: labels.len(),
        });
    }
    let dim = data[0].len();
    for row in data {
        check_dim(dim, row.len())?;
    }
    check_dim(dim + 1, init.len())?;
    if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
        return Err(Error::SingleClass);
    }
    let lambda = cfg.l2_lambda;
    let mut params = init.to_vec();
    let (mut loss, mut grad) = objective_and_gradient(data, labels, lambda, &params);
    let mut step = 1.0;
    let mut iterations = 0;
    let mut gnorm = norm(&grad);
    while gnorm >= cfg.tol && iterations < cfg.max_iter {
        iterations += 1;
        let g2 = gnorm * gnorm;
        let mut t = step;
        let mut candidate;
        loop {
            candidate = params
                .iter()
                .zip(&grad)
                .map(|(p, g)| p - t * g)
                .collect::<Vec<_>>();
            let trial = objective(data, labels, lambda, &candidate);
            if trial <= loss - 0.5 * t * g2 || t < 1e-20 {
                break;
            }
            t *= 0.5;
        }
        let (new_loss, new_grad) = objective_and_gradient(data, labels, lambda, &candidate);
        if new_loss > loss {
            // no descent possible at machine precision
            break;
        }
        let s: Vec<f64> = candidate.iter().zip(&params).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = new_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        step = if sy > 0.0 {
            (dot(&s, &s) / sy).clamp(1e-10, 1e10)
        } else {
            t * 2.0
        };
        params = candidate;
        loss = new_loss;
        grad = new_grad;
        gnorm = norm(&grad);
    }
    Ok(LogRegModel {
        weights: params[..dim].to_vec(),
        bias: params[dim],
        l2_lambda: lambda,
        iterations,
        gradient_norm: gnorm,
    })
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}
