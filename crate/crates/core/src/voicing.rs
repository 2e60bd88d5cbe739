//! Frame-wise voiced/unvoiced decisions from stacked voicing features.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Feature, VoicingFeatureVector};
use crate::ml::{
    fit_gmm, fit_kmeans, fit_logreg, fit_mlp, GmmConfig, GmmModel, Head, KMeansConfig, KMeansModel,
    KnnModel, LogRegConfig, LogRegModel, MlpHyper, MlpModel, Standardizer, DEFAULT_HIDDEN,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VoicingKind {
    Kmeans,
    Gmm,
    Logreg,
    Knn,
    Mlp,
}

impl VoicingKind {
    pub const ALL: [VoicingKind; 5] = [
        VoicingKind::Kmeans,
        VoicingKind::Gmm,
        VoicingKind::Logreg,
        VoicingKind::Knn,
        VoicingKind::Mlp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VoicingKind::Kmeans => "kmeans",
            VoicingKind::Gmm => "gmm",
            VoicingKind::Logreg => "logreg",
            VoicingKind::Knn => "knn",
            VoicingKind::Mlp => "mlp",
        }
    }

    /// Clustering kinds need no labels.
    pub fn is_unsupervised(self) -> bool {
        matches!(self, VoicingKind::Kmeans | VoicingKind::Gmm)
    }
}

impl fmt::Display for VoicingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VoicingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown voicing learner {s:?}")))
    }
}

/// Hyperparameters for every voicing learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VoicingParams {
    pub context_radius: usize,
    /// MLP and logistic-regression decision threshold on P(voiced).
    pub threshold: f64,
    pub knn_k: usize,
    /// Training points kept by the KNN classifier (random subset).
    pub knn_max_points: usize,
    pub kmeans: KMeansConfig,
    pub gmm: GmmConfig,
    pub logreg: LogRegConfig,
    pub mlp: MlpHyper,
    pub hidden: Vec<usize>,
}

impl Default for VoicingParams {
    fn default() -> Self {
        Self {
            context_radius: 1,
            threshold: 0.5,
            knn_k: 5,
            knn_max_points: 5000,
            kmeans: KMeansConfig::default(),
            gmm: GmmConfig::default(),
            logreg: LogRegConfig::default(),
            mlp: MlpHyper::default(),
            hidden: DEFAULT_HIDDEN.to_vec(),
        }
    }
}

impl VoicingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "voicing threshold {} outside (0, 1)",
                self.threshold
            )));
        }
        if self.knn_k == 0 || self.knn_k.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "knn k must be odd, got {}",
                self.knn_k
            )));
        }
        if self.knn_max_points == 0 {
            return Err(Error::InvalidConfig(
                "knn_max_points must be positive".into(),
            ));
        }
        if self.hidden.contains(&0) {
            return Err(Error::InvalidConfig(
                "hidden layer widths must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "lowercase")]
pub enum VoicingLearner {
    Kmeans(KMeansModel),
    Gmm(GmmModel),
    Logreg(LogRegModel),
    Knn(KnnModel),
    Mlp(MlpModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoicingModel {
    pub context_radius: usize,
    pub standardizer: Standardizer,
    pub learner: VoicingLearner,
    /// Cluster index judged voiced (clustering learners only).
    pub voiced_cluster: Option<usize>,
    pub threshold: f64,
    /// Set when the two clusters barely differ in SSH.
    pub low_separation: bool,
}

impl VoicingModel {
    pub fn kind(&self) -> VoicingKind {
        match self.learner {
            VoicingLearner::Kmeans(_) => VoicingKind::Kmeans,
            VoicingLearner::Gmm(_) => VoicingKind::Gmm,
            VoicingLearner::Logreg(_) => VoicingKind::Logreg,
            VoicingLearner::Knn(_) => VoicingKind::Knn,
            VoicingLearner::Mlp(_) => VoicingKind::Mlp,
        }
    }

    pub fn input_dim(&self) -> usize {
        Feature::COUNT * (2 * self.context_radius + 1)
    }

    fn decide(&self, x: &[f64]) -> Result<bool> {
        Ok(match &self.learner {
            VoicingLearner::Kmeans(m) => Some(m.assign(x)?) == self.voiced_cluster,
            VoicingLearner::Gmm(m) => Some(m.predict(x)?) == self.voiced_cluster,
            VoicingLearner::Logreg(m) => m.probability(x)? >= self.threshold,
            VoicingLearner::Knn(m) => m.classify(x)?,
            VoicingLearner::Mlp(m) => m.predict(x)?[0] >= self.threshold,
        })
    }
}

/// Concatenates each frame with its `radius` neighbours on both sides,
/// replicating the edge frames past the ends.
pub fn stack_context(features: &[Vec<f64>], radius: usize) -> Vec<Vec<f64>> {
    let n = features.len();
    (0..n)
        .map(|k| {
            let mut row = Vec::with_capacity(features[k].len() * (2 * radius + 1));
            for off in 0..=2 * radius {
                let j = (k + off).saturating_sub(radius).min(n - 1);
                row.extend_from_slice(&features[j]);
            }
            row
        })
        .collect()
}

fn as_rows(features: &[VoicingFeatureVector]) -> Vec<Vec<f64>> {
    features.iter().map(|f| f.0.to_vec()).collect()
}

fn prepare(
    features: &[VoicingFeatureVector],
    radius: usize,
) -> Result<(Standardizer, Vec<Vec<f64>>)> {
    let rows = as_rows(features);
    let standardizer = Standardizer::fit(&rows)?;
    let stacked = stack_context(&standardizer.apply(&rows)?, radius);
    Ok((standardizer, stacked))
}

/// Clusters the frames into two groups and calls voiced the cluster whose
/// frames have the higher mean SSH.
pub fn fit_voicing_unsupervised(
    features: &[VoicingFeatureVector],
    kind: VoicingKind,
    params: &VoicingParams,
    seed: u64,
) -> Result<VoicingModel> {
    params.validate()?;
    if features.len() < 4 {
        return Err(Error::NotEnoughData {
            needed: 4,
            got: features.len(),
        });
    }
    let (standardizer, data) = prepare(features, params.context_radius)?;
    let (learner, labels) = match kind {
        VoicingKind::Kmeans => {
            let m = fit_kmeans(&data, 2, seed, &params.kmeans)?;
            let labels = data
                .iter()
                .map(|x| m.assign(x))
                .collect::<Result<Vec<_>>>()?;
            (VoicingLearner::Kmeans(m), labels)
        }
        VoicingKind::Gmm => {
            let m = fit_gmm(&data, 2, seed, &params.gmm)?;
            let labels = data
                .iter()
                .map(|x| m.predict(x))
                .collect::<Result<Vec<_>>>()?;
            (VoicingLearner::Gmm(m), labels)
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "{other} is a supervised learner"
            )));
        }
    };
    let mut sum = [0.0; 2];
    let mut count = [0usize; 2];
    for (f, &c) in features.iter().zip(&labels) {
        sum[c] += f.get(Feature::Ssh);
        count[c] += 1;
    }
    let mean = |c: usize| {
        if count[c] == 0 {
            f64::NEG_INFINITY
        } else {
            sum[c] / count[c] as f64
        }
    };
    let voiced = if mean(1) > mean(0) { 1 } else { 0 };
    let (v, u) = (mean(voiced), mean(1 - voiced));
    let low_separation = !(v.is_finite() && u.is_finite()) || v - u < 0.5 * u.abs();
    Ok(VoicingModel {
        context_radius: params.context_radius,
        standardizer,
        learner,
        voiced_cluster: Some(voiced),
        threshold: params.threshold,
        low_separation,
    })
}

/// Trains a classifier on frames labelled voiced (`true`) or unvoiced.
pub fn fit_voicing_supervised(
    features: &[VoicingFeatureVector],
    labels: &[bool],
    kind: VoicingKind,
    params: &VoicingParams,
    seed: u64,
) -> Result<VoicingModel> {
    params.validate()?;
    if features.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: features.len(),
            right: labels.len(),
        });
    }
    if !labels.contains(&true) || !labels.contains(&false) {
        return Err(Error::SingleClass);
    }
    let (standardizer, data) = prepare(features, params.context_radius)?;
    let learner = match kind {
        VoicingKind::Logreg => VoicingLearner::Logreg(fit_logreg(&data, labels, &params.logreg)?),
        VoicingKind::Knn => {
            let (points, subset): (Vec<Vec<f64>>, Vec<bool>) = if data.len() > params.knn_max_points
            {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut idx = sample(&mut rng, data.len(), params.knn_max_points).into_vec();
                idx.sort_unstable();
                idx.into_iter()
                    .map(|i| (data[i].clone(), labels[i]))
                    .unzip()
            } else {
                (data, labels.to_vec())
            };
            VoicingLearner::Knn(KnnModel::classifier(params.knn_k, points, &subset)?)
        }
        VoicingKind::Mlp => {
            let targets: Vec<Vec<f64>> = labels
                .iter()
                .map(|&l| vec![if l { 1.0 } else { 0.0 }])
                .collect();
            let hyper = MlpHyper {
                seed,
                ..params.mlp.clone()
            };
            VoicingLearner::Mlp(fit_mlp(
                &data,
                &targets,
                Head::Sigmoid,
                &params.hidden,
                &hyper,
            )?)
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "{other} is an unsupervised learner"
            )));
        }
    };
    Ok(VoicingModel {
        context_radius: params.context_radius,
        standardizer,
        learner,
        voiced_cluster: None,
        threshold: params.threshold,
        low_separation: false,
    })
}

/// One decision per frame (`true` = voiced).
pub fn predict_voicing(
    model: &VoicingModel,
    features: &[VoicingFeatureVector],
) -> Result<Vec<bool>> {
    if features.is_empty() {
        return Ok(Vec::new());
    }
    let rows = model.standardizer.apply(&as_rows(features))?;
    let stacked = stack_context(&rows, model.context_radius);
    stacked.par_iter().map(|x| model.decide(x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    /// Two well-separated blobs: the voiced one has high SSH.
    fn blobs(n: usize, seed: u64) -> (Vec<VoicingFeatureVector>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.3).unwrap();
        let mut feats = vec![];
        let mut labels = vec![];
        for k in 0..n {
            let voiced = (k / 25) % 2 == 0;
            let mut v = [0.0; Feature::COUNT];
            for (i, x) in v.iter_mut().enumerate() {
                let centre = if voiced { 3.0 } else { -1.0 } * if i % 3 == 0 { 1.0 } else { 0.5 };
                *x = centre + noise.sample(&mut rng);
            }
            feats.push(VoicingFeatureVector(v));
            labels.push(voiced);
        }
        (feats, labels)
    }

    #[test]
    fn stacking_shapes_and_edges() {
        let f: Vec<Vec<f64>> = (0..3).map(|i| vec![i as f64; 16]).collect();
        assert_eq!(stack_context(&f, 0), f);
        let s = stack_context(&f, 1);
        assert_eq!(s[1].len(), 48);
        assert_eq!(s[1], [f[0].clone(), f[1].clone(), f[2].clone()].concat());
        assert_eq!(s[0], [f[0].clone(), f[0].clone(), f[1].clone()].concat());
        assert_eq!(s[2], [f[1].clone(), f[2].clone(), f[2].clone()].concat());
        assert_eq!(stack_context(&f[..1], 2)[0], vec![0.0; 80]);
    }

    #[test]
    fn clustering_finds_voiced_blob() {
        let (f, labels) = blobs(400, 1);
        for kind in [VoicingKind::Kmeans, VoicingKind::Gmm] {
            let m = fit_voicing_unsupervised(&f, kind, &VoicingParams::default(), 3).unwrap();
            assert!(!m.low_separation);
            let d = predict_voicing(&m, &f).unwrap();
            let agree = d.iter().zip(&labels).filter(|(a, b)| a == b).count();
            assert!(agree as f64 / 400.0 > 0.95, "{kind}: {agree}");
        }
    }

    #[test]
    fn cluster_seed_does_not_change_decisions() {
        let (f, _) = blobs(300, 2);
        let p = VoicingParams::default();
        let a = predict_voicing(
            &fit_voicing_unsupervised(&f, VoicingKind::Kmeans, &p, 1).unwrap(),
            &f,
        )
        .unwrap();
        for seed in 2..6 {
            let b = predict_voicing(
                &fit_voicing_unsupervised(&f, VoicingKind::Kmeans, &p, seed).unwrap(),
                &f,
            )
            .unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn swapped_cluster_indices_give_same_decisions() {
        let (f, _) = blobs(200, 4);
        let m = fit_voicing_unsupervised(&f, VoicingKind::Kmeans, &VoicingParams::default(), 0)
            .unwrap();
        let mut swapped = m.clone();
        if let VoicingLearner::Kmeans(km) = &mut swapped.learner {
            km.centroids.swap(0, 1);
        }
        swapped.voiced_cluster = m.voiced_cluster.map(|c| 1 - c);
        assert_eq!(
            predict_voicing(&m, &f).unwrap(),
            predict_voicing(&swapped, &f).unwrap()
        );
    }

    #[test]
    fn all_noise_flags_low_separation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f: Vec<VoicingFeatureVector> = (0..200)
            .map(|_| {
                let mut v = [0.0; Feature::COUNT];
                v.iter_mut().for_each(|x| *x = rng.random_range(0.0..0.1));
                v[Feature::Ssh.index()] = 1.0 + rng.random_range(0.0..0.1);
                VoicingFeatureVector(v)
            })
            .collect();
        let m =
            fit_voicing_unsupervised(&f, VoicingKind::Gmm, &VoicingParams::default(), 0).unwrap();
        assert!(m.low_separation);
    }

    #[test]
    fn supervised_learners_fit_separable_data() {
        let (f, labels) = blobs(400, 5);
        for kind in [VoicingKind::Logreg, VoicingKind::Knn, VoicingKind::Mlp] {
            let m =
                fit_voicing_supervised(&f, &labels, kind, &VoicingParams::default(), 0).unwrap();
            let d = predict_voicing(&m, &f).unwrap();
            assert_eq!(d, labels, "{kind}");
            assert_eq!(m.kind(), kind);
        }
    }

    #[test]
    fn inverted_labels_complement_logreg() {
        let (f, labels) = blobs(300, 6);
        let p = VoicingParams::default();
        let a = predict_voicing(
            &fit_voicing_supervised(&f, &labels, VoicingKind::Logreg, &p, 0).unwrap(),
            &f,
        )
        .unwrap();
        let inv: Vec<bool> = labels.iter().map(|l| !l).collect();
        let b = predict_voicing(
            &fit_voicing_supervised(&f, &inv, VoicingKind::Logreg, &p, 0).unwrap(),
            &f,
        )
        .unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x != y));
    }

    #[test]
    fn errors() {
        let (f, labels) = blobs(50, 7);
        let p = VoicingParams::default();
        assert!(matches!(
            fit_voicing_supervised(&f, &[true; 50], VoicingKind::Logreg, &p, 0),
            Err(Error::SingleClass)
        ));
        assert!(fit_voicing_unsupervised(&f[..3], VoicingKind::Kmeans, &p, 0).is_err());
        assert!(fit_voicing_supervised(&f, &labels, VoicingKind::Kmeans, &p, 0).is_err());
        let m = fit_voicing_supervised(&f, &labels, VoicingKind::Logreg, &p, 0).unwrap();
        assert_eq!(predict_voicing(&m, &f[..1]).unwrap().len(), 1);
        assert!("svm".parse::<VoicingKind>().is_err());
    }

    #[test]
    fn model_serializes() {
        let (f, labels) = blobs(100, 8);
        let m = fit_voicing_supervised(&f, &labels, VoicingKind::Mlp, &VoicingParams::default(), 0)
            .unwrap();
        let text = serde_json::to_string(&m).unwrap();
        let back: VoicingModel = serde_json::from_str(&text).unwrap();
        assert_eq!(
            predict_voicing(&back, &f).unwrap(),
            predict_voicing(&m, &f).unwrap()
        );
    }
}
