use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the analysis, training and evaluation stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported encoding in {path}: {detail}")]
    UnsupportedEncoding { path: PathBuf, detail: String },
    #[error("expected mono audio, found {channels} channels")]
    MultiChannel { channels: u16 },
    #[error("invalid waveform: {0}")]
    InvalidWaveform(String),
    #[error("empty waveform")]
    EmptyWaveform,
    #[error("lag range [{lag_min}, {lag_max}] is invalid for a frame of {frame_length} samples")]
    InvalidLagRange {
        lag_min: usize,
        lag_max: usize,
        frame_length: usize,
    },
    #[error("FFT size {fft_size} is smaller than the frame length {frame_length}")]
    FftTooSmall {
        fft_size: usize,
        frame_length: usize,
    },
    #[error("only {bins} spectral bins fall inside the {what} band (need at least {needed})")]
    BandTooNarrow {
        what: &'static str,
        bins: usize,
        needed: usize,
    },
    #[error("{n_harmonics} harmonics of {f0_min} Hz exceed the Nyquist frequency {nyquist} Hz")]
    HarmonicsAboveNyquist {
        n_harmonics: usize,
        f0_min: f64,
        nyquist: f64,
    },
    #[error("invalid F0 search range [{f0_min}, {f0_max}] Hz at sample rate {sample_rate} Hz")]
    InvalidSearchRange {
        f0_min: f64,
        f0_max: f64,
        sample_rate: u32,
    },
    #[error("mean-based-signal window of {window} samples exceeds the signal length {len}")]
    WindowTooLong { window: usize, len: usize },
    #[error("need at least {needed} points, got {got}")]
    NotEnoughData { needed: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("labels contain a single class")]
    SingleClass,
    #[error("variance collapse: every input dimension is constant")]
    VarianceCollapse,
    #[error("training diverged: loss became {loss} at epoch {epoch}")]
    NonFiniteLoss { epoch: usize, loss: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("model document version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u64, expected: u64 },
    #[error("malformed {what}: {detail}")]
    Parse { what: String, detail: String },
    #[error("missing EGG recordings for supervised training: {0:?}")]
    MissingEgg(Vec<String>),
    #[error("empty manifest")]
    EmptyManifest,
    #[error("no voiced frames available for fitting the F0 fuser")]
    NoVoicedFrames,
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Wav(#[from] hound::Error),
}

impl Error {
    /// Errors caused by bad inputs or configuration rather than by a failure
    /// while computing.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::NonFiniteLoss { .. } | Error::Io(_) | Error::Wav(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
