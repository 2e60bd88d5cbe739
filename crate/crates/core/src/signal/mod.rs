//! Waveform ingestion, framing and the spectral/correlation primitives shared
//! by every feature extractor.

mod correlation;
mod frame;
mod spectrum;
mod waveform;

pub use correlation::{normalized_autocorrelation, nsdf};
pub use frame::{frame_signal, hanning, FrameGrid, FRAME_DURATION_S, HOP_DURATION_S};
pub use spectrum::{bin_frequency, default_fft_size, magnitude_spectrum_db, FftPlan, LOG_EPS};
pub use waveform::{load_waveform, write_waveform, WavEncoding, Waveform, MIN_FILE_SAMPLE_RATE};
