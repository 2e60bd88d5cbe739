//! Configuration, corpus handling, training, tracking and the synthetic
//! corpus generator.

mod config;
mod loso;
mod manifest;
mod model;
mod synth;

pub use config::Config;
pub use loso::{audit_split, leave_one_speaker_out, Fold};
pub use manifest::{CorpusManifest, ManifestEntry};
pub use model::{
    load_corpus, prepare_utterance, track, track_features, train_on, train_pipeline, ModelDocument,
    TrainingSummary, Utterance, MODEL_VERSION,
};
pub use synth::{synth_all, synth_corpus, synth_utterance, SpeakerSpec, SynthSpec, SynthUtterance};
