//! Per-frame voicing features and F0 candidates.

pub mod cepstrum;
mod extract;
pub mod harmonic;
pub mod lpc;
pub mod mean_signal;
mod range;
pub mod time_domain;

pub use cepstrum::cpp;
pub use extract::{
    extract_all, feature_csv_header, read_feature_csv, write_feature_csv, BasicFeatures, Candidate,
    ExtractionMeta, F0CandidateVector, Feature, FeatureConfig, FeatureMatrix, FeatureTable,
    FrameAnalyzer, VoicingFeatureVector,
};
pub use harmonic::{harmonic_summation, spectral_tilt, HarmonicScores};
pub use lpc::{levinson_durbin, lp_residual, LpResidual};
pub use mean_signal::{estimate_mean_f0, mean_based_signal, MeanBasedSignal, MeanF0};
pub use range::F0SearchRange;
pub use time_domain::{ac_peak_and_f0, clarity, zcr};
