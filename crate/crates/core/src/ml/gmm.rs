use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::kmeans::{fit_kmeans, kmeans_labels, KMeansConfig};
use super::standardize::check_dim;
use crate::error::{Error, Result};

/// Lower bound applied to every variance after each M-step.
pub const VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GmmConfig {
    pub max_iter: usize,
    /// Stop when the mean per-sample log-likelihood improves by less.
    pub tol: f64,
    pub kmeans: KMeansConfig,
}

impl Default for GmmConfig {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-6,
            kmeans: KMeansConfig::default(),
        }
    }
}

/// Diagonal-covariance Gaussian mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
    /// Mean per-sample log-likelihood before the first and after every
    /// M-step.
    #[serde(skip)]
    pub log_likelihood_history: Vec<f64>,
}

impl GmmModel {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    fn component_log_densities(&self, x: &[f64]) -> Vec<f64> {
        (0..self.k())
            .map(|c| {
                let mut lp = self.weights[c].max(f64::MIN_POSITIVE).ln();
                for ((v, m), var) in x.iter().zip(&self.means[c]).zip(&self.variances[c]) {
                    lp -= 0.5 * ((2.0 * PI * var).ln() + (v - m) * (v - m) / var);
                }
                lp
            })
            .collect()
    }

    /// Posterior component probabilities of `x`.
    pub fn responsibilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.means[0].len(), x.len())?;
        let lp = self.component_log_densities(x);
        let lse = log_sum_exp(&lp);
        Ok(lp.iter().map(|l| (l - lse).exp()).collect())
    }

    /// Most probable component (lowest index on ties).
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let r = self.responsibilities(x)?;
        Ok(argmax(&r))
    }

    /// Mean per-sample log-likelihood.
    pub fn mean_log_likelihood(&self, data: &[Vec<f64>]) -> f64 {
        data.iter()
            .map(|x| log_sum_exp(&self.component_log_densities(x)))
            .sum::<f64>()
            / data.len() as f64
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// EM for a diagonal GMM, initialized from a K-means partition.
pub fn fit_gmm(data: &[Vec<f64>], k: usize, seed: u64, cfg: &GmmConfig) -> Result<GmmModel> {
    if k == 0 || data.len() < 2 * k {
        return Err(Error::NotEnoughData {
            needed: 2 * k.max(1),
            got: data.len(),
        });
    }
    let dim = data[0].len();
    for row in data {
        check_dim(dim, row.len())?;
    }
    let n = data.len() as f64;
    let global_mean: Vec<f64> = (0..dim)
        .map(|d| data.iter().map(|x| x[d]).sum::<f64>() / n)
        .collect();
    let global_var: Vec<f64> = (0..dim)
        .map(|d| {
            data.iter()
                .map(|x| (x[d] - global_mean[d]).powi(2))
                .sum::<f64>()
                / n
        })
        .collect();
    if global_var.iter().all(|&v| v == 0.0) {
        return Err(Error::VarianceCollapse);
    }

    let km = fit_kmeans(data, k, seed, &cfg.kmeans)?;
    let labels = kmeans_labels(&km, data)?;
    let mut model = GmmModel {
        weights: vec![0.0; k],
        means: km.centroids.clone(),
        variances: vec![vec![0.0; dim]; k],
        log_likelihood_history: vec![],
    };
    let mut counts = vec![0usize; k];
    for (&l, x) in labels.iter().zip(data) {
        counts[l] += 1;
        for d in 0..dim {
            model.variances[l][d] += (x[d] - model.means[l][d]).powi(2);
        }
    }
    for c in 0..k {
        if counts[c] == 0 {
            model.weights[c] = 1.0 / n;
            model.variances[c] = global_var.iter().map(|v| v.max(VARIANCE_FLOOR)).collect();
        } else {
            model.weights[c] = counts[c] as f64 / n;
            for v in &mut model.variances[c] {
                *v = (*v / counts[c] as f64).max(VARIANCE_FLOOR);
            }
        }
    }
    let total: f64 = model.weights.iter().sum();
    model.weights.iter_mut().for_each(|w| *w /= total);

    let mut ll = model.mean_log_likelihood(data);
    model.log_likelihood_history.push(ll);
    for _ in 0..cfg.max_iter {
        // E-step and sufficient statistics in one pass
        let mut nk = vec![0.0; k];
        let mut sx = vec![vec![0.0; dim]; k];
        let mut sxx = vec![vec![0.0; dim]; k];
        for x in data {
            let r = model.responsibilities(x)?;
            for c in 0..k {
                nk[c] += r[c];
                for d in 0..dim {
                    sx[c][d] += r[c] * x[d];
                    sxx[c][d] += r[c] * x[d] * x[d];
                }
            }
        }
        for c in 0..k {
            model.weights[c] = nk[c] / n;
            if nk[c] < 1e-10 {
                continue;
            }
            for d in 0..dim {
                let mean = sx[c][d] / nk[c];
                let var = sxx[c][d] / nk[c] - mean * mean;
                model.means[c][d] = mean;
                model.variances[c][d] = var.max(VARIANCE_FLOOR);
            }
        }
        let next = model.mean_log_likelihood(data);
        debug_assert!(
            next >= ll - 1e-9 * (1.0 + ll.abs()),
            "EM log-likelihood decreased: {ll} -> {next}"
        );
        model.log_likelihood_history.push(next);
        let gain = next - ll;
        ll = next;
        if gain < cfg.tol {
            break;
        }
    }
    Ok(model)
}
