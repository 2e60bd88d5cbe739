//! Pitch detection from engineered acoustic features and shallow learners.
//!
//! The pipeline runs in four stages:
//!
//! ```text
//! waveform -> features (16 voicing features + 7 F0 candidates per 5 ms frame)
//!          -> voicing (K-means / GMM / logistic regression / KNN / MLP)
//!          -> f0 (median, linear, KNN or MLP-index fusion of candidates)
//!          -> PitchTrack
//! ```
//!
//! Reference tracks come from EGG recordings (`ground_truth`) and are scored
//! with the usual VDE/GPE/FPE/FFE metrics (`evaluation`).

pub mod error;
pub mod evaluation;
pub mod f0;
pub mod features;
pub mod ground_truth;
pub mod ml;
pub mod pipeline;
pub mod signal;
pub mod track;
pub mod voicing;

pub use error::{Error, Result};
pub use evaluation::EvalReport;
pub use f0::F0Fuser;
pub use features::{Candidate, F0SearchRange, Feature, FeatureConfig, FeatureMatrix};
pub use pipeline::{Config, ModelDocument};
pub use signal::{FrameGrid, Waveform};
pub use track::PitchTrack;
pub use voicing::VoicingModel;
