use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::squared_distance;
use super::standardize::check_dim;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iter: usize,
    /// Stop once no centroid moves further than this.
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iter: 300,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squares of the retained restart.
    pub inertia: f64,
    /// Inertia after each assignment step of the retained restart.
    #[serde(skip)]
    pub inertia_history: Vec<f64>,
    /// Two or more centroids coincide.
    pub degenerate: bool,
}

impl KMeansModel {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    /// Index of the nearest centroid (lowest index on ties).
    pub fn assign(&self, x: &[f64]) -> Result<usize> {
        check_dim(self.centroids[0].len(), x.len())?;
        Ok(nearest(&self.centroids, x).0)
    }
}

fn nearest(centroids: &[Vec<f64>], x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = squared_distance(c, x);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn plus_plus_init(data: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![data[rng.random_range(0..data.len())].clone()];
    let mut d2: Vec<f64> = data
        .iter()
        .map(|x| squared_distance(x, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = data.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..data.len())
        };
        let c = data[idx].clone();
        for (d, x) in d2.iter_mut().zip(data) {
            *d = d.min(squared_distance(x, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Lloyd iterations from one k-means++ start. Returns centroids, assignment,
/// inertia history.
fn lloyd(
    data: &[Vec<f64>],
    k: usize,
    cfg: &KMeansConfig,
    rng: &mut ChaCha8Rng,
) -> (Vec<Vec<f64>>, Vec<usize>, Vec<f64>) {
    let dim = data[0].len();
    let mut centroids = plus_plus_init(data, k, rng);
    let mut labels = vec![0; data.len()];
    let mut history = Vec::new();
    for _ in 0..cfg.max_iter {
        let mut inertia = 0.0;
        for (l, x) in labels.iter_mut().zip(data) {
            let (i, d) = nearest(&centroids, x);
            *l = i;
            inertia += d;
        }
        history.push(inertia);
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (&l, x) in labels.iter().zip(data) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(x) {
                *s += v;
            }
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            // an empty cluster keeps its centroid
            if counts[c] == 0 {
                continue;
            }
            let new: Vec<f64> = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            shift = shift.max(squared_distance(&new, &centroids[c]).sqrt());
            centroids[c] = new;
        }
        if shift < cfg.tol {
            break;
        }
    }
    let mut final_inertia = 0.0;
    for (l, x) in labels.iter_mut().zip(data) {
        let (i, d) = nearest(&centroids, x);
        *l = i;
        final_inertia += d;
    }
    history.push(final_inertia);
    (centroids, labels, history)
}

/// K-means with k-means++ seeding, keeping the restart with the lowest
/// within-cluster sum of squares.
pub fn fit_kmeans(
    data: &[Vec<f64>],
    k: usize,
    seed: u64,
    cfg: &KMeansConfig,
) -> Result<KMeansModel> {
    if k == 0 || data.len() < k {
        return Err(Error::NotEnoughData {
            needed: k.max(1),
            got: data.len(),
        });
    }
    let dim = data[0].len();
    for row in data {
        check_dim(dim, row.len())?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<Vec<f64>>, Vec<f64>)> = None;
    for _ in 0..cfg.restarts.max(1) {
        let (centroids, _, history) = lloyd(data, k, cfg, &mut rng);
        let inertia = *history.last().unwrap();
        if best
            .as_ref()
            .is_none_or(|(_, h)| inertia < *h.last().unwrap())
        {
            best = Some((centroids, history));
        }
    }
    let (centroids, history) = best.unwrap();
    let degenerate = (0..k).any(|i| (i + 1..k).any(|j| centroids[i] == centroids[j]));
    Ok(KMeansModel {
        inertia: *history.last().unwrap(),
        inertia_history: history,
        centroids,
        degenerate,
    })
}

/// Assignment of every point to its nearest centroid.
pub fn kmeans_labels(model: &KMeansModel, data: &[Vec<f64>]) -> Result<Vec<usize>> {
    data.iter().map(|x| model.assign(x)).collect()
}
