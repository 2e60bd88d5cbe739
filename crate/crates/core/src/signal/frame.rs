use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::Waveform;
use crate::error::{Error, Result};

/// Analysis window duration in seconds.
pub const FRAME_DURATION_S: f64 = 0.030;
/// Frame shift in seconds.
pub const HOP_DURATION_S: f64 = 0.005;

/// Hanning window without the zero end points (`N + 1` denominator), so a
/// windowed frame keeps the sign of every sample.
pub fn hanning(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * PI * (i + 1) as f64 / (n + 1) as f64).cos()))
        .collect()
}

/// The 30 ms / 5 ms analysis grid shared by feature extraction, prediction
/// and ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameGrid {
    pub sample_rate: u32,
    pub frame_length: usize,
    pub hop: usize,
    pub n_frames: usize,
}

impl FrameGrid {
    /// Grid for a signal of `len` samples. Tail frames are zero-padded, so
    /// `n_frames = ceil(len / hop)`.
    pub fn new(sample_rate: u32, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::EmptyWaveform);
        }
        let frame_length = ((FRAME_DURATION_S * sample_rate as f64).round() as usize).max(1);
        let hop = ((HOP_DURATION_S * sample_rate as f64).round() as usize).max(1);
        Ok(Self {
            sample_rate,
            frame_length,
            hop,
            n_frames: len.div_ceil(hop),
        })
    }

    pub fn for_waveform(w: &Waveform) -> Result<Self> {
        Self::new(w.sample_rate(), w.len())
    }

    pub fn window(&self) -> Vec<f64> {
        hanning(self.frame_length)
    }

    /// Start time of frame `k` in seconds.
    pub fn time_of(&self, k: usize) -> f64 {
        (k * self.hop) as f64 / self.sample_rate as f64
    }

    pub fn start_of(&self, k: usize) -> usize {
        k * self.hop
    }

    /// Frame `k` without windowing, zero-padded past the end of `samples`.
    pub fn raw_frame(&self, samples: &[f64], k: usize) -> Vec<f64> {
        let start = self.start_of(k);
        let mut out = vec![0.0; self.frame_length];
        if start < samples.len() {
            let end = (start + self.frame_length).min(samples.len());
            out[..end - start].copy_from_slice(&samples[start..end]);
        }
        out
    }

    /// Frame `k` multiplied by `window` (which must have `frame_length` taps).
    pub fn windowed_frame(&self, samples: &[f64], k: usize, window: &[f64]) -> Vec<f64> {
        let mut f = self.raw_frame(samples, k);
        for (x, w) in f.iter_mut().zip(window) {
            *x *= w;
        }
        f
    }

    /// Truncates to `n` frames (used when pairing signals of slightly
    /// different lengths).
    pub fn truncated(&self, n: usize) -> Self {
        Self {
            n_frames: self.n_frames.min(n),
            ..self.clone()
        }
    }
}

/// Splits a waveform into Hanning-windowed frames on the standard grid.
pub fn frame_signal(w: &Waveform) -> Result<(FrameGrid, Vec<Vec<f64>>)> {
    let grid = FrameGrid::for_waveform(w)?;
    let window = grid.window();
    let frames = (0..grid.n_frames)
        .map(|k| grid.windowed_frame(w.samples(), k, &window))
        .collect();
    Ok((grid, frames))
}
