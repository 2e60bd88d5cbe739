use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CorpusManifest, ManifestEntry};
use crate::error::{Error, Result};
use crate::features::F0SearchRange;
use crate::ground_truth::{gci_to_reference, GroundTruthParams};
use crate::signal::{write_waveform, FrameGrid, WavEncoding, Waveform};
use crate::track::PitchTrack;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeakerSpec {
    pub id: String,
    /// Range the per-segment base F0 is drawn from, in Hz.
    pub f0_range: [f64; 2],
}

/// Synthetic corpus description. Voiced stretches are formant-filtered
/// impulse trains; they alternate with high-pass noise, low-pass noise or
/// near-silence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub sample_rate: u32,
    pub speakers: Vec<SpeakerSpec>,
    pub utterances_per_speaker: usize,
    pub utterance_s: f64,
    /// Additive white noise level; `null` means no noise.
    pub snr_db: Option<f64>,
    pub voiced_s: [f64; 2],
    pub unvoiced_s: [f64; 2],
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            sample_rate: 16000,
            speakers: vec![
                SpeakerSpec {
                    id: "spk1".into(),
                    f0_range: [90.0, 150.0],
                },
                SpeakerSpec {
                    id: "spk2".into(),
                    f0_range: [170.0, 280.0],
                },
            ],
            utterances_per_speaker: 5,
            utterance_s: 30.0,
            snr_db: Some(20.0),
            voiced_s: [0.8, 2.0],
            unvoiced_s: [0.4, 1.0],
            seed: 0,
        }
    }
}

/// Contours never leave this band, well inside the default search range.
const F0_LIMITS: (f64, f64) = (65.0, 380.0);
const VOICED_RMS: f64 = 0.1;
const FADE_S: f64 = 0.002;

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.speakers.is_empty() || self.utterances_per_speaker == 0 {
            return bad("synthesis needs at least one speaker and one utterance".into());
        }
        if self.sample_rate < crate::signal::MIN_FILE_SAMPLE_RATE {
            return bad(format!("sample rate {} too low", self.sample_rate));
        }
        if self.utterance_s.is_nan() || self.utterance_s <= 0.0 {
            return bad("utterance_s must be positive".into());
        }
        for [lo, hi] in [self.voiced_s, self.unvoiced_s] {
            if !(lo > 0.0 && lo <= hi) {
                return bad(format!("invalid segment duration range [{lo}, {hi}]"));
            }
        }
        let mut ids: Vec<&str> = self.speakers.iter().map(|s| s.id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.speakers.len()
            || ids.iter().any(|s| s.is_empty() || s.contains(['\t', '/']))
        {
            return bad("speaker ids must be unique, nonempty and free of tabs and slashes".into());
        }
        for s in &self.speakers {
            let [lo, hi] = s.f0_range;
            if !(F0_LIMITS.0 <= lo && lo <= hi && hi <= F0_LIMITS.1) {
                return bad(format!(
                    "speaker {} F0 range must lie within {F0_LIMITS:?}",
                    s.id
                ));
            }
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return bad("snr_db must be finite (use null for no noise)".into());
            }
        }
        Ok(())
    }

    pub fn utterance_name(&self, speaker: usize, utterance: usize) -> String {
        format!("{}_{:03}", self.speakers[speaker].id, utterance + 1)
    }
}

/// One synthesized recording.
#[derive(Debug, Clone)]
pub struct SynthUtterance {
    pub speaker: String,
    pub name: String,
    pub speech: Waveform,
    pub egg: Waveform,
    pub gcis: Vec<usize>,
    /// Reference derived from the true closure instants.
    pub truth: PitchTrack,
}

fn resonator(x: &mut [f64], freq: f64, bandwidth: f64, fs: f64) {
    let r = (-PI * bandwidth / fs).exp();
    let a1 = 2.0 * r * (2.0 * PI * freq / fs).cos();
    let a2 = -r * r;
    let (mut y1, mut y2) = (0.0, 0.0);
    for v in x.iter_mut() {
        let y = *v + a1 * y1 + a2 * y2;
        y2 = y1;
        y1 = y;
        *v = y;
    }
}

fn scale_to_rms(x: &mut [f64], target: f64) {
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt();
    if rms > 0.0 {
        x.iter_mut().for_each(|v| *v *= target / rms);
    }
}

fn fade(x: &mut [f64], len: usize) {
    let len = len.min(x.len() / 2);
    let n = x.len();
    for i in 0..len {
        let g = 0.5 * (1.0 - (PI * i as f64 / len as f64).cos());
        x[i] *= g;
        x[n - 1 - i] *= g;
    }
}

fn white(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Voiced segment over `len` samples: returns the signal and closure
/// instants relative to the segment start.
fn voiced_segment(
    rng: &mut ChaCha8Rng,
    len: usize,
    fs: f64,
    f0_range: [f64; 2],
) -> (Vec<f64>, Vec<usize>) {
    let base = rng.random_range(f0_range[0]..=f0_range[1]);
    let depth = rng.random_range(0.03..0.12);
    let rate = rng.random_range(0.5..2.0);
    let phase = rng.random_range(0.0..2.0 * PI);
    let drift = rng.random_range(-0.1..0.1);
    let duration = len as f64 / fs;
    let f0_at = |t: f64| {
        let f = base * (1.0 + depth * (2.0 * PI * rate * t + phase).sin() + drift * t / duration);
        f.clamp(F0_LIMITS.0, F0_LIMITS.1)
    };
    let mut gcis = Vec::new();
    let mut t = rng.random_range(0.0..fs / f0_at(0.0));
    while (t.round() as usize) < len {
        gcis.push(t.round() as usize);
        t += fs / f0_at(t / fs);
    }
    let mut x = vec![0.0; len];
    for &g in &gcis {
        x[g] = 1.0;
    }
    // glottal roll-off, then three formants
    let mut prev = 0.0;
    for v in x.iter_mut() {
        prev = *v + 0.7 * prev;
        *v = prev;
    }
    let formants = [
        (
            rng.random_range(300.0..800.0),
            rng.random_range(60.0..160.0),
        ),
        (
            rng.random_range(900.0..2300.0),
            rng.random_range(80.0..200.0),
        ),
        (
            rng.random_range(2400.0..3300.0),
            rng.random_range(100.0..250.0),
        ),
    ];
    for (f, bw) in formants {
        if f < 0.45 * fs {
            resonator(&mut x, f, bw, fs);
        }
    }
    scale_to_rms(&mut x, VOICED_RMS * rng.random_range(0.5..1.5));
    fade(&mut x, (FADE_S * fs) as usize);
    (x, gcis)
}

fn unvoiced_segment(rng: &mut ChaCha8Rng, len: usize, fs: f64) -> Vec<f64> {
    let mut x = white(rng, len);
    let level = match rng.random_range(0..3) {
        0 => {
            // fricative-like: first difference
            for i in (1..len).rev() {
                x[i] -= 0.95 * x[i - 1];
            }
            0.3
        }
        1 => {
            // murmur-like: one-pole low-pass
            let mut prev = 0.0;
            for v in x.iter_mut() {
                prev = *v + 0.9 * prev;
                *v = prev;
            }
            0.3
        }
        _ => 0.01,
    };
    scale_to_rms(&mut x, level * VOICED_RMS * rng.random_range(0.5..1.5));
    fade(&mut x, (FADE_S * fs) as usize);
    x
}

/// Pseudo-EGG: a sharp rise at every closure followed by a linear decay
/// over the period.
fn pseudo_egg(len: usize, segments: &[Vec<usize>]) -> Vec<f64> {
    let mut x = vec![0.0; len];
    for gcis in segments {
        for (i, &g) in gcis.iter().enumerate() {
            let period = match (gcis.get(i + 1), i) {
                (Some(&next), _) => next - g,
                (None, i) if i > 0 => g - gcis[i - 1],
                _ => 100,
            };
            let end = (g + period).min(len);
            for (j, v) in x[g..end].iter_mut().enumerate() {
                *v = 0.5 * (1.0 - j as f64 / period as f64);
            }
        }
    }
    x
}

/// Synthesizes one utterance. Each (speaker, utterance) pair draws from
/// its own random stream, so results do not depend on generation order.
pub fn synth_utterance(
    spec: &SynthSpec,
    speaker: usize,
    utterance: usize,
) -> Result<SynthUtterance> {
    spec.validate()?;
    let spk = spec
        .speakers
        .get(speaker)
        .ok_or_else(|| Error::InvalidConfig(format!("no speaker {speaker}")))?;
    let fs = spec.sample_rate as f64;
    let total = (spec.utterance_s * fs).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(((speaker as u64) << 32) | utterance as u64);

    let mut speech = Vec::with_capacity(total);
    let mut gcis = Vec::new();
    let mut gci_segments = Vec::new();
    let mut voiced = false;
    while speech.len() < total {
        let [lo, hi] = if voiced {
            spec.voiced_s
        } else {
            spec.unvoiced_s
        };
        let len = ((rng.random_range(lo..=hi) * fs) as usize).min(total - speech.len());
        if voiced {
            let (x, g) = voiced_segment(&mut rng, len, fs, spk.f0_range);
            let offset = speech.len();
            let seg: Vec<usize> = g.iter().map(|v| v + offset).collect();
            gcis.extend_from_slice(&seg);
            gci_segments.push(seg);
            speech.extend(x);
        } else {
            speech.extend(unvoiced_segment(&mut rng, len, fs));
        }
        voiced = !voiced;
    }
    if let Some(snr) = spec.snr_db {
        let power = speech.iter().map(|v| v * v).sum::<f64>() / speech.len() as f64;
        let sigma = (power / 10f64.powf(snr / 10.0)).sqrt();
        for v in speech.iter_mut() {
            let n: f64 = StandardNormal.sample(&mut rng);
            *v += sigma * n;
        }
    }
    let peak = speech.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.99 {
        speech.iter_mut().for_each(|v| *v *= 0.99 / peak);
    }
    let egg = pseudo_egg(total, &gci_segments);
    let speech = Waveform::new(speech, spec.sample_rate)?;
    let grid = FrameGrid::for_waveform(&speech)?;
    let truth = gci_to_reference(
        &gcis,
        &grid,
        &F0SearchRange::default(),
        &GroundTruthParams::default(),
    )?
    .track;
    Ok(SynthUtterance {
        speaker: spk.id.clone(),
        name: spec.utterance_name(speaker, utterance),
        speech,
        egg: Waveform::new(egg, spec.sample_rate)?,
        gcis,
        truth,
    })
}

/// Every utterance of the spec, speaker-major.
pub fn synth_all(spec: &SynthSpec) -> Result<Vec<SynthUtterance>> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> = (0..spec.speakers.len())
        .flat_map(|s| (0..spec.utterances_per_speaker).map(move |u| (s, u)))
        .collect();
    jobs.par_iter()
        .map(|&(s, u)| synth_utterance(spec, s, u))
        .collect()
}

/// Writes `speech/`, `egg/` (32-bit float WAV), `truth/` (pitch-track CSV)
/// and `manifest.tsv` under `dir`, returning the manifest.
pub fn synth_corpus(spec: &SynthSpec, dir: &Path) -> Result<CorpusManifest> {
    let utterances = synth_all(spec)?;
    for sub in ["speech", "egg", "truth"] {
        std::fs::create_dir_all(dir.join(sub))?;
    }
    let mut manifest = CorpusManifest::default();
    for u in &utterances {
        let speech = dir.join("speech").join(format!("{}.wav", u.name));
        let egg = dir.join("egg").join(format!("{}.wav", u.name));
        write_waveform(&speech, &u.speech, WavEncoding::Float32)?;
        write_waveform(&egg, &u.egg, WavEncoding::Float32)?;
        let file = std::fs::File::create(dir.join("truth").join(format!("{}.csv", u.name)))?;
        u.truth.write_csv(std::io::BufWriter::new(file))?;
        manifest.entries.push(ManifestEntry {
            speaker: u.speaker.clone(),
            speech,
            egg: Some(egg),
        });
    }
    std::fs::write(dir.join("manifest.tsv"), manifest.to_tsv(dir))?;
    Ok(manifest)
}
