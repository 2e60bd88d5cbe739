//! Feed-forward network with rectified-linear hidden layers, trained by
//! mini-batch SGD with momentum and early stopping.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::standardize::check_dim;
use crate::error::{Error, Result};

/// Hidden layer widths used for voicing and index prediction.
pub const DEFAULT_HIDDEN: [usize; 2] = [20, 10];

/// Output non-linearity and the loss paired with it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    /// One logistic output, binary cross-entropy.
    Sigmoid,
    /// Class probabilities, categorical cross-entropy.
    Softmax,
    /// Identity outputs, half squared error.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpHyper {
    pub lr: f64,
    pub momentum: f64,
    pub batch: usize,
    pub epochs: usize,
    pub patience: usize,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for MlpHyper {
    fn default() -> Self {
        Self {
            lr: 1e-2,
            momentum: 0.9,
            batch: 64,
            epochs: 100,
            patience: 10,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingHistory {
    pub train_loss: Vec<f64>,
    pub validation_loss: Vec<f64>,
    pub stopped_early: bool,
}

/// Weights live in one flat vector: for each layer the row-major
/// `(outputs × inputs)` matrix followed by the bias vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub sizes: Vec<usize>,
    pub head: Head,
    pub params: Vec<f64>,
    #[serde(skip)]
    pub history: TrainingHistory,
}

struct Scratch {
    /// Post-activation values per layer; `acts[0]` is the input.
    acts: Vec<Vec<f64>>,
    /// Pre-activation values per layer (index 0 unused).
    pre: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
}

impl MlpModel {
    /// Uniform initialization in `±1/sqrt(fan_in)`, biases included.
    pub fn new(sizes: &[usize], head: Head, seed: u64) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "invalid layer sizes {sizes:?}"
            )));
        }
        let out = *sizes.last().unwrap();
        match head {
            Head::Sigmoid if out != 1 => {
                return Err(Error::InvalidConfig("sigmoid head needs one output".into()))
            }
            Head::Softmax if out < 2 => {
                return Err(Error::InvalidConfig(
                    "softmax head needs two or more outputs".into(),
                ))
            }
            _ => {}
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        for w in sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for _ in 0..w[0] * w[1] + w[1] {
                params.push(rng.random_range(-bound..bound));
            }
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            head,
            params,
            history: TrainingHistory::default(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    fn offsets(&self) -> Vec<usize> {
        let mut offs = vec![0];
        for w in self.sizes.windows(2) {
            offs.push(offs.last().unwrap() + w[0] * w[1] + w[1]);
        }
        offs
    }

    fn scratch(&self) -> Scratch {
        Scratch {
            acts: self.sizes.iter().map(|&n| vec![0.0; n]).collect(),
            pre: self.sizes.iter().map(|&n| vec![0.0; n]).collect(),
            delta: self.sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// Forward pass leaving the output layer's raw values in `s.pre[last]`.
    fn forward_into(&self, x: &[f64], offsets: &[usize], s: &mut Scratch) {
        s.acts[0].copy_from_slice(x);
        let last = self.sizes.len() - 1;
        for l in 0..last {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[offsets[l]..offsets[l] + n_in * n_out];
            let b = &self.params[offsets[l] + n_in * n_out..offsets[l + 1]];
            let (prev, rest) = s.acts.split_at_mut(l + 1);
            let input = &prev[l];
            for j in 0..n_out {
                let row = &w[j * n_in..(j + 1) * n_in];
                let z = b[j] + row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
                s.pre[l + 1][j] = z;
                rest[0][j] = if l + 1 < last { z.max(0.0) } else { z };
            }
        }
    }

    /// Loss of one sample from the raw outputs, and `dL/dz` written into `delta`.
    fn head_loss(&self, raw: &[f64], target: &[f64], delta: &mut [f64]) -> f64 {
        match self.head {
            Head::Sigmoid => {
                let z = raw[0];
                let p = super::logreg::sigmoid(z);
                delta[0] = p - target[0];
                let softplus = if z > 0.0 {
                    z + (-z).exp().ln_1p()
                } else {
                    z.exp().ln_1p()
                };
                softplus - target[0] * z
            }
            Head::Softmax => {
                let m = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = raw.iter().map(|z| (z - m).exp()).sum();
                let lse = m + sum.ln();
                let mut loss = 0.0;
                for ((d, z), t) in delta.iter_mut().zip(raw).zip(target) {
                    *d = (z - lse).exp() - t;
                    loss += t * (lse - z);
                }
                loss
            }
            Head::Linear => {
                let mut loss = 0.0;
                for ((d, z), t) in delta.iter_mut().zip(raw).zip(target) {
                    *d = z - t;
                    loss += 0.5 * (z - t) * (z - t);
                }
                loss
            }
        }
    }

    /// Network output after the head (probabilities or values).
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.input_dim(), x.len())?;
        let offsets = self.offsets();
        let mut s = self.scratch();
        self.forward_into(x, &offsets, &mut s);
        let raw = s.pre.last().unwrap();
        Ok(match self.head {
            Head::Sigmoid => vec![super::logreg::sigmoid(raw[0])],
            Head::Softmax => {
                let m = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = raw.iter().map(|z| (z - m).exp()).collect();
                let sum: f64 = e.iter().sum();
                e.into_iter().map(|v| v / sum).collect()
            }
            Head::Linear => raw.clone(),
        })
    }

    /// Index of the largest output (lowest index on ties).
    pub fn predict_class(&self, x: &[f64]) -> Result<usize> {
        let p = self.predict(x)?;
        Ok(p.iter()
            .enumerate()
            .fold(0, |best, (i, v)| if *v > p[best] { i } else { best }))
    }

    fn check_batch(&self, data: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<()> {
        if data.len() != targets.len() {
            return Err(Error::LengthMismatch {
                left: data.len(),
                right: targets.len(),
            });
        }
        for (x, t) in data.iter().zip(targets) {
            check_dim(self.input_dim(), x.len())?;
            check_dim(self.output_dim(), t.len())?;
        }
        Ok(())
    }

    /// Mean loss over the given samples.
    pub fn loss(&self, data: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
        self.check_batch(data, targets)?;
        let idx: Vec<usize> = (0..data.len()).collect();
        Ok(self.batch_loss(data, targets, &idx))
    }

    fn batch_loss(&self, data: &[Vec<f64>], targets: &[Vec<f64>], idx: &[usize]) -> f64 {
        if idx.is_empty() {
            return 0.0;
        }
        let offsets = self.offsets();
        let mut s = self.scratch();
        let mut delta = vec![0.0; self.output_dim()];
        let mut total = 0.0;
        for &i in idx {
            self.forward_into(&data[i], &offsets, &mut s);
            total += self.head_loss(s.pre.last().unwrap(), &targets[i], &mut delta);
        }
        total / idx.len() as f64
    }

    /// Mean loss and its gradient with respect to `params`.
    pub fn loss_and_gradient(
        &self,
        data: &[Vec<f64>],
        targets: &[Vec<f64>],
    ) -> Result<(f64, Vec<f64>)> {
        self.check_batch(data, targets)?;
        let idx: Vec<usize> = (0..data.len()).collect();
        let mut grad = vec![0.0; self.params.len()];
        let loss = self.accumulate_gradient(data, targets, &idx, &mut grad);
        Ok((loss, grad))
    }

    fn accumulate_gradient(
        &self,
        data: &[Vec<f64>],
        targets: &[Vec<f64>],
        idx: &[usize],
        grad: &mut [f64],
    ) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let offsets = self.offsets();
        let mut s = self.scratch();
        let last = self.sizes.len() - 1;
        let mut total = 0.0;
        for &i in idx {
            self.forward_into(&data[i], &offsets, &mut s);
            let raw = s.pre[last].clone();
            total += self.head_loss(&raw, &targets[i], &mut s.delta[last]);
            for l in (0..last).rev() {
                let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
                let w_off = offsets[l];
                let b_off = w_off + n_in * n_out;
                for j in 0..n_out {
                    let d = s.delta[l + 1][j];
                    if d == 0.0 {
                        continue;
                    }
                    let gw = &mut grad[w_off + j * n_in..w_off + (j + 1) * n_in];
                    for (g, a) in gw.iter_mut().zip(&s.acts[l]) {
                        *g += d * a;
                    }
                    grad[b_off + j] += d;
                }
                if l > 0 {
                    let w = &self.params[w_off..b_off];
                    for p in 0..n_in {
                        let mut acc = 0.0;
                        if s.pre[l][p] > 0.0 {
                            for j in 0..n_out {
                                acc += w[j * n_in + p] * s.delta[l + 1][j];
                            }
                        }
                        s.delta[l][p] = acc;
                    }
                }
            }
        }
        let n = idx.len() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        total / n
    }
}

/// Trains a network of shape `[input, hidden.., output]`.
///
/// A `validation_fraction` share of the samples (when there are at least
/// ten) is held out; training stops once its loss has not improved for
/// `patience` epochs and the best weights seen are restored.
pub fn fit_mlp(
    data: &[Vec<f64>],
    targets: &[Vec<f64>],
    head: Head,
    hidden: &[usize],
    hyper: &MlpHyper,
) -> Result<MlpModel> {
    let first = data
        .first()
        .ok_or(Error::NotEnoughData { needed: 1, got: 0 })?;
    let out_dim = targets.first().map_or(0, |t| t.len());
    let mut sizes = vec![first.len()];
    sizes.extend_from_slice(hidden);
    sizes.push(out_dim);
    let mut model = MlpModel::new(&sizes, head, hyper.seed)?;
    model.check_batch(data, targets)?;
    if hyper.batch == 0 {
        return Err(Error::InvalidConfig("batch size must be positive".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed.wrapping_add(0x9e37_79b9));
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng);
    let n_val = if data.len() >= 10 {
        ((hyper.validation_fraction * data.len() as f64).round() as usize).clamp(1, data.len() - 1)
    } else {
        0
    };
    let (val_idx, train_idx) = order.split_at(n_val);
    let mut train_idx = train_idx.to_vec();
    let val_idx = val_idx.to_vec();
    let monitor = |m: &MlpModel| {
        if val_idx.is_empty() {
            m.batch_loss(data, targets, &train_idx_all(data.len()))
        } else {
            m.batch_loss(data, targets, &val_idx)
        }
    };

    let mut velocity = vec![0.0; model.params.len()];
    let mut grad = vec![0.0; model.params.len()];
    let mut best_params = model.params.clone();
    let mut best_val = monitor(&model);
    let mut stale = 0;
    let mut history = TrainingHistory::default();
    for epoch in 0..hyper.epochs {
        train_idx.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in train_idx.chunks(hyper.batch) {
            let loss = model.accumulate_gradient(data, targets, batch, &mut grad);
            epoch_loss += loss * batch.len() as f64;
            for ((p, v), g) in model.params.iter_mut().zip(&mut velocity).zip(&grad) {
                *v = hyper.momentum * *v - hyper.lr * g;
                *p += *v;
            }
        }
        epoch_loss /= train_idx.len() as f64;
        if !epoch_loss.is_finite() || model.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFiniteLoss {
                epoch,
                loss: epoch_loss,
            });
        }
        let val = monitor(&model);
        history.train_loss.push(epoch_loss);
        history.validation_loss.push(val);
        if val < best_val {
            best_val = val;
            best_params.copy_from_slice(&model.params);
            stale = 0;
        } else {
            stale += 1;
            if stale >= hyper.patience {
                history.stopped_early = true;
                break;
            }
        }
    }
    model.params = best_params;
    model.history = history;
    Ok(model)
}

fn train_idx_all(n: usize) -> Vec<usize> {
    (0..n).collect()
}
