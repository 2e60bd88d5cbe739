//! Two-pass extraction of the 16 voicing features and 7 F0 candidates.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::harmonic::{harmonic_summation, rms, spectral_tilt};
use super::lpc::lp_residual;
use super::mean_signal::{estimate_mean_f0, mean_based_signal};
use super::time_domain::{ac_peak_and_f0, clarity, zcr};
use super::{cepstrum, F0SearchRange};
use crate::error::{Error, Result};
use crate::signal::{default_fft_size, FftPlan, FrameGrid, Waveform};

/// The voicing features, in export order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Zcr,
    AcPeak,
    Clarity,
    Ssh,
    SshStar,
    Srh,
    SrhStar,
    Tilt,
    Cpp,
    ZcrMs,
    AcMs,
    ClarityMs,
    SshMs,
    SshStarMs,
    TiltMs,
    CppMs,
}

impl Feature {
    pub const COUNT: usize = 16;
    pub const ALL: [Feature; 16] = [
        Feature::Zcr,
        Feature::AcPeak,
        Feature::Clarity,
        Feature::Ssh,
        Feature::SshStar,
        Feature::Srh,
        Feature::SrhStar,
        Feature::Tilt,
        Feature::Cpp,
        Feature::ZcrMs,
        Feature::AcMs,
        Feature::ClarityMs,
        Feature::SshMs,
        Feature::SshStarMs,
        Feature::TiltMs,
        Feature::CppMs,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Feature::Zcr => "zcr",
            Feature::AcPeak => "ac_peak",
            Feature::Clarity => "clarity",
            Feature::Ssh => "ssh",
            Feature::SshStar => "ssh_star",
            Feature::Srh => "srh",
            Feature::SrhStar => "srh_star",
            Feature::Tilt => "tilt",
            Feature::Cpp => "cpp",
            Feature::ZcrMs => "zcr_ms",
            Feature::AcMs => "ac_ms",
            Feature::ClarityMs => "clarity_ms",
            Feature::SshMs => "ssh_ms",
            Feature::SshStarMs => "ssh_star_ms",
            Feature::TiltMs => "tilt_ms",
            Feature::CppMs => "cpp_ms",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }

    /// Features that scale with the signal amplitude.
    pub fn is_amplitude_dependent(self) -> bool {
        matches!(
            self,
            Feature::SshStar | Feature::SrhStar | Feature::SshStarMs
        )
    }
}

/// The F0 candidates, in export order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Candidate {
    F0Ac,
    F0Ssh,
    F0Srh,
    F0Cpp,
    F0AcMs,
    F0SshMs,
    F0CppMs,
}

impl Candidate {
    pub const COUNT: usize = 7;
    pub const ALL: [Candidate; 7] = [
        Candidate::F0Ac,
        Candidate::F0Ssh,
        Candidate::F0Srh,
        Candidate::F0Cpp,
        Candidate::F0AcMs,
        Candidate::F0SshMs,
        Candidate::F0CppMs,
    ];
    /// The three most reliable estimators, used by default for fusion.
    pub const RETAINED: [Candidate; 3] = [Candidate::F0Ac, Candidate::F0Ssh, Candidate::F0AcMs];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Candidate::F0Ac => "f0_ac",
            Candidate::F0Ssh => "f0_ssh",
            Candidate::F0Srh => "f0_srh",
            Candidate::F0Cpp => "f0_cpp",
            Candidate::F0AcMs => "f0_ac_ms",
            Candidate::F0SshMs => "f0_ssh_ms",
            Candidate::F0CppMs => "f0_cpp_ms",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoicingFeatureVector(pub [f64; Feature::COUNT]);

impl VoicingFeatureVector {
    pub fn get(&self, f: Feature) -> f64 {
        self.0[f.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F0CandidateVector(pub [f64; Candidate::COUNT]);

impl F0CandidateVector {
    pub fn get(&self, c: Candidate) -> f64 {
        self.0[c.index()]
    }
}

/// Feature-extraction settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub range: F0SearchRange,
    pub n_harmonics: usize,
    /// FFT size for harmonic summation. `None` picks the smallest power of
    /// two giving bins of at most 2 Hz (and at least twice the frame).
    pub harmonic_fft_size: Option<usize>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            range: F0SearchRange::default(),
            n_harmonics: 5,
            harmonic_fft_size: None,
        }
    }
}

/// Features that are computed identically on the speech signal and on the
/// mean-based signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasicFeatures {
    pub zcr: f64,
    pub ac_peak: f64,
    pub f0_ac: f64,
    pub clarity: f64,
    pub ssh: f64,
    pub ssh_star: f64,
    pub f0_ssh: f64,
    pub tilt: f64,
    pub cpp: f64,
    pub f0_cpp: f64,
}

/// Per-frame analysis state shared by both passes.
#[derive(Debug, Clone)]
pub struct FrameAnalyzer {
    grid: FrameGrid,
    window: Vec<f64>,
    spectrum: FftPlan,
    harmonic: FftPlan,
    config: FeatureConfig,
}

impl FrameAnalyzer {
    pub fn new(grid: FrameGrid, config: &FeatureConfig) -> Result<Self> {
        config.range.validate_for(grid.sample_rate)?;
        let spectral_size = default_fft_size(grid.frame_length);
        let harmonic_size = match config.harmonic_fft_size {
            Some(n) => n,
            None => {
                ((grid.sample_rate as usize).div_ceil(2).next_power_of_two()).max(spectral_size)
            }
        };
        if harmonic_size < grid.frame_length {
            return Err(Error::FftTooSmall {
                fft_size: harmonic_size,
                frame_length: grid.frame_length,
            });
        }
        Ok(Self {
            window: grid.window(),
            spectrum: FftPlan::new(spectral_size)?,
            harmonic: FftPlan::new(harmonic_size)?,
            grid,
            config: config.clone(),
        })
    }

    pub fn grid(&self) -> &FrameGrid {
        &self.grid
    }

    fn harmonic_scores(&self, windowed: &[f64]) -> Result<super::HarmonicScores> {
        let amp = self.harmonic.amplitude(windowed)?;
        harmonic_summation(
            &amp,
            rms(windowed),
            self.grid.sample_rate,
            self.harmonic.size(),
            &self.config.range,
            self.config.n_harmonics,
        )
    }

    /// Features of frame `k` of `samples`.
    pub fn basic(&self, samples: &[f64], k: usize) -> Result<BasicFeatures> {
        let fs = self.grid.sample_rate;
        let range = &self.config.range;
        let raw = self.grid.raw_frame(samples, k);
        let windowed = self.grid.windowed_frame(samples, k, &self.window);
        let (ac_peak, f0_ac) = ac_peak_and_f0(&raw, fs, range)?;
        let harmonic = self.harmonic_scores(&windowed)?;
        let db = self.spectrum.magnitude_db(&windowed)?;
        let tilt = spectral_tilt(&db, fs, self.spectrum.size())?;
        let (cpp, f0_cpp) = if windowed.iter().all(|&x| x == 0.0) {
            (0.0, range.f0_min)
        } else {
            cepstrum::cpp_from_db(&db, &self.spectrum, fs, range)?
        };
        Ok(BasicFeatures {
            zcr: zcr(&raw)?,
            ac_peak,
            f0_ac,
            clarity: clarity(&raw, fs, range)?,
            ssh: harmonic.normalized,
            ssh_star: harmonic.star,
            f0_ssh: harmonic.f0,
            tilt,
            cpp,
            f0_cpp,
        })
    }

    /// SRH features of frame `k` of the residual: `(srh, srh_star, f0_srh)`.
    pub fn residual(&self, residual: &[f64], k: usize) -> Result<(f64, f64, f64)> {
        let windowed = self.grid.windowed_frame(residual, k, &self.window);
        let s = self.harmonic_scores(&windowed)?;
        Ok((s.normalized, s.star, s.f0))
    }
}

/// Bookkeeping from an extraction run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionMeta {
    pub mean_f0: f64,
    /// No frame was confidently periodic; the mean F0 is a global median.
    pub mean_f0_fallback: bool,
    pub unstable_lpc_frames: usize,
}

/// Per-frame features and candidates on one frame grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub grid: FrameGrid,
    pub features: Vec<VoicingFeatureVector>,
    pub candidates: Vec<F0CandidateVector>,
    pub meta: ExtractionMeta,
}

impl FeatureMatrix {
    pub fn n_frames(&self) -> usize {
        self.features.len()
    }

    pub fn column(&self, f: Feature) -> Vec<f64> {
        self.features.iter().map(|v| v.get(f)).collect()
    }

    /// Keeps the first `n` frames.
    pub fn truncate(&mut self, n: usize) {
        self.features.truncate(n);
        self.candidates.truncate(n);
        self.grid = self.grid.truncated(n);
    }
}

/// Runs both extraction passes: speech features and the residual-based SRH,
/// then a rough mean F0 from the AC track, then the same speech features on
/// the mean-based signal. Both passes share one grid.
pub fn extract_all(w: &Waveform, config: &FeatureConfig) -> Result<FeatureMatrix> {
    let grid = FrameGrid::for_waveform(w)?;
    let analyzer = FrameAnalyzer::new(grid.clone(), config)?;
    let residual = lp_residual(w)?;
    let speech = w.samples();
    let res = residual.residual.samples();

    let first: Vec<(BasicFeatures, (f64, f64, f64))> = (0..grid.n_frames)
        .into_par_iter()
        .map(|k| Ok((analyzer.basic(speech, k)?, analyzer.residual(res, k)?)))
        .collect::<Result<_>>()?;

    let ac_track: Vec<(f64, f64)> = first.iter().map(|(b, _)| (b.ac_peak, b.f0_ac)).collect();
    let mean_f0 = estimate_mean_f0(&ac_track)?;
    let ms = mean_based_signal(w, config.range.clamp(mean_f0.f0))?;
    let ms_samples = ms.signal.samples();

    let second: Vec<BasicFeatures> = (0..grid.n_frames)
        .into_par_iter()
        .map(|k| analyzer.basic(ms_samples, k))
        .collect::<Result<_>>()?;

    let mut features = Vec::with_capacity(grid.n_frames);
    let mut candidates = Vec::with_capacity(grid.n_frames);
    for ((s, (srh, srh_star, f0_srh)), m) in first.iter().zip(&second) {
        features.push(VoicingFeatureVector([
            s.zcr, s.ac_peak, s.clarity, s.ssh, s.ssh_star, *srh, *srh_star, s.tilt, s.cpp, m.zcr,
            m.ac_peak, m.clarity, m.ssh, m.ssh_star, m.tilt, m.cpp,
        ]));
        candidates.push(F0CandidateVector([
            s.f0_ac, s.f0_ssh, *f0_srh, s.f0_cpp, m.f0_ac, m.f0_ssh, m.f0_cpp,
        ]));
    }
    Ok(FeatureMatrix {
        grid,
        features,
        candidates,
        meta: ExtractionMeta {
            mean_f0: mean_f0.f0,
            mean_f0_fallback: mean_f0.fallback,
            unstable_lpc_frames: residual.unstable_frames,
        },
    })
}

/// The 24-column CSV header.
pub fn feature_csv_header() -> String {
    let mut cols = vec!["frame_time_s"];
    cols.extend(Feature::ALL.iter().map(|f| f.name()));
    cols.extend(Candidate::ALL.iter().map(|c| c.name()));
    cols.join(",")
}

/// Writes one row per frame: time, 16 features, 7 candidates.
pub fn write_feature_csv(mut out: impl Write, m: &FeatureMatrix) -> Result<()> {
    writeln!(out, "{}", feature_csv_header())?;
    for (k, (f, c)) in m.features.iter().zip(&m.candidates).enumerate() {
        let mut row = vec![m.grid.time_of(k).to_string()];
        row.extend(f.0.iter().map(|v| v.to_string()));
        row.extend(c.0.iter().map(|v| v.to_string()));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Rows read back from a feature CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub times: Vec<f64>,
    pub features: Vec<VoicingFeatureVector>,
    pub candidates: Vec<F0CandidateVector>,
}

pub fn read_feature_csv(input: impl BufRead) -> Result<FeatureTable> {
    let parse_err = |detail: String| Error::Parse {
        what: "feature CSV".into(),
        detail,
    };
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err("missing header".into()))??;
    if header.trim() != feature_csv_header() {
        return Err(parse_err(format!("unexpected header `{}`", header.trim())));
    }
    let mut table = FeatureTable {
        times: vec![],
        features: vec![],
        candidates: vec![],
    };
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let values: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(format!("row {}: {e}", i + 2)))?;
        if values.len() != 24 {
            return Err(parse_err(format!(
                "row {} has {} columns",
                i + 2,
                values.len()
            )));
        }
        table.times.push(values[0]);
        let mut f = [0.0; 16];
        f.copy_from_slice(&values[1..17]);
        let mut c = [0.0; 7];
        c.copy_from_slice(&values[17..24]);
        table.features.push(VoicingFeatureVector(f));
        table.candidates.push(F0CandidateVector(c));
    }
    Ok(table)
}
