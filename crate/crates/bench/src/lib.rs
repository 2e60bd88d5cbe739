//! Shared fixtures for the benchmarks.

use pitchml_core::pipeline::{
    prepare_utterance, synth_utterance, train_on, SynthSpec, SynthUtterance, Utterance,
};
use pitchml_core::{Config, ModelDocument};

/// A seeded single-utterance corpus spec of `seconds` per utterance.
pub fn spec(seconds: f64, utterances_per_speaker: usize) -> SynthSpec {
    SynthSpec {
        utterance_s: seconds,
        utterances_per_speaker,
        seed: 2024,
        ..SynthSpec::default()
    }
}

/// One synthetic utterance of the first speaker.
pub fn utterance(seconds: f64) -> SynthUtterance {
    synth_utterance(&spec(seconds, 1), 0, 0).expect("valid spec")
}

/// Features and references for every utterance of `spec`.
pub fn corpus(spec: &SynthSpec, config: &Config) -> Vec<Utterance> {
    pitchml_core::pipeline::synth_all(spec)
        .expect("valid spec")
        .iter()
        .map(|u| {
            prepare_utterance(&u.speaker, &u.name, &u.speech, Some(&u.egg), config)
                .expect("extraction")
        })
        .collect()
}

/// A model trained on `corpus`.
pub fn model(corpus: &[Utterance], config: &Config) -> ModelDocument {
    let refs: Vec<&Utterance> = corpus.iter().collect();
    train_on(&refs, config).expect("training")
}
