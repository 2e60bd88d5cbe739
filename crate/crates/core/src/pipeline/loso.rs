use rayon::prelude::*;

use super::model::{track_features, train_on, Utterance};
use super::Config;
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_by_speaker, CorpusReport};
use crate::track::PitchTrack;

/// One leave-one-speaker-out fold.
#[derive(Debug, Clone)]
pub struct Fold {
    pub test_speaker: String,
    pub train_speakers: Vec<String>,
    /// Indices into the corpus of the held-out utterances.
    pub test_indices: Vec<usize>,
    /// Predicted tracks, aligned with `test_indices`.
    pub predictions: Vec<PitchTrack>,
    /// Against the EGG-derived references, when every test utterance has one.
    pub report: Option<CorpusReport>,
}

/// Fails if any training utterance belongs to the held-out speaker.
pub fn audit_split(train: &[&Utterance], test_speaker: &str) -> Result<()> {
    if let Some(u) = train.iter().find(|u| u.speaker == test_speaker) {
        return Err(Error::InvalidConfig(format!(
            "test speaker {test_speaker} leaked into training via {}",
            u.name
        )));
    }
    Ok(())
}

/// Trains on all speakers but one and tracks the held-out speaker's
/// utterances, for every speaker in order of first appearance.
pub fn leave_one_speaker_out(corpus: &[Utterance], config: &Config) -> Result<Vec<Fold>> {
    let mut speakers: Vec<String> = Vec::new();
    for u in corpus {
        if !speakers.contains(&u.speaker) {
            speakers.push(u.speaker.clone());
        }
    }
    if speakers.len() < 2 {
        return Err(Error::NotEnoughData {
            needed: 2,
            got: speakers.len(),
        });
    }
    speakers
        .iter()
        .map(|test| {
            let train: Vec<&Utterance> = corpus.iter().filter(|u| &u.speaker != test).collect();
            audit_split(&train, test)?;
            let model = train_on(&train, config)?;
            let test_indices: Vec<usize> = (0..corpus.len())
                .filter(|&i| &corpus[i].speaker == test)
                .collect();
            let predictions: Vec<PitchTrack> = test_indices
                .par_iter()
                .map(|&i| track_features(&corpus[i].features, &model))
                .collect::<Result<_>>()?;
            let report = if test_indices.iter().all(|&i| corpus[i].reference.is_some()) {
                Some(evaluate_by_speaker(
                    test_indices.iter().zip(&predictions).map(|(&i, p)| {
                        (
                            corpus[i].speaker.as_str(),
                            p,
                            corpus[i].reference.as_ref().expect("checked"),
                        )
                    }),
                )?)
            } else {
                None
            };
            Ok(Fold {
                test_speaker: test.clone(),
                train_speakers: model.summary.speakers.clone(),
                test_indices,
                predictions,
                report,
            })
        })
        .collect()
}
