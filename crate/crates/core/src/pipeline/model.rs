use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Config, CorpusManifest};
use crate::error::{Error, Result};
use crate::f0::{fit_fuser, predict_track, F0Fuser, FuserKind};
use crate::features::{extract_all, F0CandidateVector, FeatureMatrix, VoicingFeatureVector};
use crate::ground_truth::reference_for_pair;
use crate::signal::{load_waveform, Waveform};
use crate::track::PitchTrack;
use crate::voicing::{
    fit_voicing_supervised, fit_voicing_unsupervised, predict_voicing, VoicingModel,
};

/// Version written into, and required from, every model document.
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub speakers: Vec<String>,
    /// Frames per speaker after balancing.
    pub frames_per_speaker: BTreeMap<String, usize>,
    /// Whether EGG-derived labels were used.
    pub labelled: bool,
}

/// A trained voicing model and F0 fuser together with the configuration
/// they were trained under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub version: u32,
    pub config: Config,
    pub voicing: VoicingModel,
    pub fuser: F0Fuser,
    pub summary: TrainingSummary,
}

impl ModelDocument {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses a document, checking the version before anything else.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let version = value
            .get("version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::Parse {
                what: "model document".into(),
                detail: "missing or non-integer `version` field".into(),
            })?;
        if version != MODEL_VERSION as u64 {
            return Err(Error::VersionMismatch {
                found: version,
                expected: MODEL_VERSION as u64,
            });
        }
        let doc: ModelDocument = serde_json::from_value(value)?;
        doc.config.validate()?;
        Ok(doc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Unreadable {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// Features of one recording, with its EGG-derived reference when available.
#[derive(Debug, Clone)]
pub struct Utterance {
    pub speaker: String,
    pub name: String,
    pub features: FeatureMatrix,
    pub reference: Option<PitchTrack>,
}

/// Extracts features and, given the paired EGG, the reference track. The
/// features are truncated to the reference grid.
pub fn prepare_utterance(
    speaker: &str,
    name: &str,
    speech: &Waveform,
    egg: Option<&Waveform>,
    config: &Config,
) -> Result<Utterance> {
    let mut features = extract_all(speech, &config.features)?;
    let reference = match egg {
        Some(egg) => {
            let r = reference_for_pair(speech, egg, &config.range(), &config.ground_truth)?;
            features.truncate(r.track.len());
            Some(r.track)
        }
        None => None,
    };
    Ok(Utterance {
        speaker: speaker.to_string(),
        name: name.to_string(),
        features,
        reference,
    })
}

/// Loads and analyses every manifest entry, in manifest order.
pub fn load_corpus(manifest: &CorpusManifest, config: &Config) -> Result<Vec<Utterance>> {
    manifest.check_files()?;
    manifest
        .entries
        .par_iter()
        .map(|e| {
            let speech = load_waveform(&e.speech)?;
            let egg = e.egg.as_deref().map(load_waveform).transpose()?;
            prepare_utterance(&e.speaker, &e.stem(), &speech, egg.as_ref(), config)
        })
        .collect()
}

/// Concatenated training frames.
struct TrainingSet {
    features: Vec<VoicingFeatureVector>,
    candidates: Vec<F0CandidateVector>,
    truth: Vec<Option<f64>>,
    frames_per_speaker: BTreeMap<String, usize>,
}

fn assemble(utterances: &[&Utterance], balance: bool, labelled: bool) -> TrainingSet {
    let mut totals: BTreeMap<String, usize> = BTreeMap::new();
    for u in utterances {
        *totals.entry(u.speaker.clone()).or_default() += u.features.n_frames();
    }
    let cap = if balance {
        totals.values().copied().min().unwrap_or(0)
    } else {
        usize::MAX
    };
    let mut used: BTreeMap<String, usize> = totals.keys().map(|s| (s.clone(), 0)).collect();
    let mut set = TrainingSet {
        features: vec![],
        candidates: vec![],
        truth: vec![],
        frames_per_speaker: BTreeMap::new(),
    };
    for u in utterances {
        let taken = used.get_mut(&u.speaker).expect("speaker counted");
        let n = u.features.n_frames().min(cap - *taken);
        *taken += n;
        set.features.extend_from_slice(&u.features.features[..n]);
        set.candidates
            .extend_from_slice(&u.features.candidates[..n]);
        match (&u.reference, labelled) {
            (Some(r), true) => set.truth.extend_from_slice(&r.f0[..n]),
            _ => set.truth.extend(std::iter::repeat_n(None, n)),
        }
    }
    set.frames_per_speaker = used;
    set
}

/// Fits the voicing model and fuser named in `config` on `utterances`.
pub fn train_on(utterances: &[&Utterance], config: &Config) -> Result<ModelDocument> {
    config.validate()?;
    if utterances.is_empty() {
        return Err(Error::EmptyManifest);
    }
    let needs_labels =
        !config.voicing_kind.is_unsupervised() || config.fuser_kind != FuserKind::Median;
    if needs_labels {
        let missing: Vec<String> = utterances
            .iter()
            .filter(|u| u.reference.is_none())
            .map(|u| u.name.clone())
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingEgg(missing));
        }
    }
    let set = assemble(utterances, config.balance_speakers, needs_labels);
    let seed = config.seed;
    let voicing = if config.voicing_kind.is_unsupervised() {
        fit_voicing_unsupervised(&set.features, config.voicing_kind, &config.voicing, seed)?
    } else {
        let labels: Vec<bool> = set.truth.iter().map(Option::is_some).collect();
        fit_voicing_supervised(
            &set.features,
            &labels,
            config.voicing_kind,
            &config.voicing,
            seed,
        )?
    };
    let fuser = if config.fuser_kind == FuserKind::Median {
        F0Fuser::median(&config.fuser, config.range())?
    } else {
        fit_fuser(
            &set.candidates,
            &set.truth,
            config.fuser_kind,
            &config.fuser,
            config.range(),
            seed,
        )?
    };
    let mut speakers: Vec<String> = Vec::new();
    for u in utterances {
        if !speakers.contains(&u.speaker) {
            speakers.push(u.speaker.clone());
        }
    }
    Ok(ModelDocument {
        version: MODEL_VERSION,
        config: config.clone(),
        voicing,
        fuser,
        summary: TrainingSummary {
            speakers,
            frames_per_speaker: set.frames_per_speaker,
            labelled: needs_labels,
        },
    })
}

/// Loads the manifest's recordings and trains on all of them.
pub fn train_pipeline(manifest: &CorpusManifest, config: &Config) -> Result<ModelDocument> {
    config.validate()?;
    if manifest.entries.is_empty() {
        return Err(Error::EmptyManifest);
    }
    let needs_labels =
        !config.voicing_kind.is_unsupervised() || config.fuser_kind != FuserKind::Median;
    if needs_labels {
        let missing = manifest.missing_egg();
        if !missing.is_empty() {
            return Err(Error::MissingEgg(missing));
        }
    }
    let corpus = load_corpus(manifest, config)?;
    let refs: Vec<&Utterance> = corpus.iter().collect();
    train_on(&refs, config)
}

/// Pitch track from already extracted features.
pub fn track_features(features: &FeatureMatrix, model: &ModelDocument) -> Result<PitchTrack> {
    if model.version != MODEL_VERSION {
        return Err(Error::VersionMismatch {
            found: model.version as u64,
            expected: MODEL_VERSION as u64,
        });
    }
    if features.n_frames() == 0 {
        return Ok(PitchTrack::unvoiced(&features.grid));
    }
    let voicing = predict_voicing(&model.voicing, &features.features)?;
    predict_track(&features.grid, &voicing, &features.candidates, &model.fuser)
}

/// Extract, decide voicing, fuse F0.
pub fn track(waveform: &Waveform, model: &ModelDocument) -> Result<PitchTrack> {
    let features = extract_all(waveform, &model.config.features)?;
    track_features(&features, model)
}
