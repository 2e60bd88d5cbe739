//! Small learners used for voicing decisions and candidate fusion.

pub mod gmm;
pub mod kmeans;
pub mod knn;
pub mod linreg;
pub mod logreg;
pub mod mlp;
pub mod standardize;

pub use gmm::{fit_gmm, GmmConfig, GmmModel};
pub use kmeans::{fit_kmeans, kmeans_labels, KMeansConfig, KMeansModel};
pub use knn::KnnModel;
pub use linreg::{fit_linreg, LinRegModel};
pub use logreg::{fit_logreg, fit_logreg_from, objective_and_gradient, LogRegConfig, LogRegModel};
pub use mlp::{fit_mlp, Head, MlpHyper, MlpModel, TrainingHistory, DEFAULT_HIDDEN};
pub use standardize::{Standardizer, STD_FLOOR};

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
