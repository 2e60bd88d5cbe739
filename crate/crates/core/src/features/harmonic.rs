//! Spectral tilt and harmonic summation (SSH on speech, SRH on the
//! prediction residual).

use super::F0SearchRange;
use crate::error::{Error, Result};

/// Minimum number of bins for a tilt regression.
const MIN_TILT_BINS: usize = 8;

/// Least-squares slope in dB/kHz of a dB spectrum between 1 kHz and
/// `min(7 kHz, 0.95 × Nyquist)`.
pub fn spectral_tilt(spectrum_db: &[f64], sample_rate: u32, fft_size: usize) -> Result<f64> {
    let nyquist = sample_rate as f64 / 2.0;
    let (lo_hz, hi_hz) = (1000.0, 7000.0f64.min(0.95 * nyquist));
    let bin_hz = sample_rate as f64 / fft_size as f64;
    let points: Vec<(f64, f64)> = spectrum_db
        .iter()
        .enumerate()
        .map(|(k, &db)| (k as f64 * bin_hz, db))
        .filter(|&(f, _)| f >= lo_hz && f <= hi_hz)
        .map(|(f, db)| (f / 1000.0, db))
        .collect();
    if points.len() < MIN_TILT_BINS {
        return Err(Error::BandTooNarrow {
            what: "spectral tilt",
            bins: points.len(),
            needed: MIN_TILT_BINS,
        });
    }
    Ok(least_squares_line(&points).0)
}

/// `(slope, intercept)` of the least-squares line through `points`.
pub(crate) fn least_squares_line(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(x, y) in points {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// Outcome of a harmonic summation over the F0 search range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicScores {
    /// Maximum score on the raw amplitude spectrum.
    pub star: f64,
    /// Maximum score after dividing the spectrum by the frame RMS.
    pub normalized: f64,
    /// Frequency of the maximum.
    pub f0: f64,
}

/// Harmonic summation of a one-sided amplitude spectrum:
///
/// `score(f) = Σ_{k=1..n} [E(k f) − E((k − ½) f)]`
///
/// evaluated for every bin frequency inside the search range, `E` being the
/// amplitude at the nearest bin (zero above Nyquist). The inter-harmonic
/// terms penalize subharmonic candidates. `frame_rms` is the RMS of the
/// analysed frame; a silent frame yields zero scores and `f0_min`.
pub fn harmonic_summation(
    amplitude: &[f64],
    frame_rms: f64,
    sample_rate: u32,
    fft_size: usize,
    range: &F0SearchRange,
    n_harmonics: usize,
) -> Result<HarmonicScores> {
    let nyquist = sample_rate as f64 / 2.0;
    if n_harmonics == 0 || n_harmonics as f64 * range.f0_min > nyquist {
        return Err(Error::HarmonicsAboveNyquist {
            n_harmonics,
            f0_min: range.f0_min,
            nyquist,
        });
    }
    let bin_hz = sample_rate as f64 / fft_size as f64;
    let first = (range.f0_min / bin_hz).ceil() as usize;
    let last = (range.f0_max / bin_hz).floor() as usize;
    if first > last {
        return Err(Error::BandTooNarrow {
            what: "harmonic search",
            bins: 0,
            needed: 1,
        });
    }
    if frame_rms <= 0.0 || amplitude.iter().all(|&a| a == 0.0) {
        return Ok(HarmonicScores {
            star: 0.0,
            normalized: 0.0,
            f0: range.f0_min,
        });
    }
    let e = |pos: f64| -> f64 { amplitude.get(pos.round() as usize).copied().unwrap_or(0.0) };
    let mut best = (f64::NEG_INFINITY, first);
    for b in first..=last {
        let f = b as f64;
        let score: f64 = (1..=n_harmonics)
            .map(|k| e(k as f64 * f) - e((k as f64 - 0.5) * f))
            .sum();
        if score > best.0 {
            best = (score, b);
        }
    }
    Ok(HarmonicScores {
        star: best.0,
        normalized: best.0 / frame_rms,
        f0: range.clamp(best.1 as f64 * bin_hz),
    })
}

/// Root mean square of a frame.
pub fn rms(frame: &[f64]) -> f64 {
    if frame.is_empty() {
        return 0.0;
    }
    (frame.iter().map(|x| x * x).sum::<f64>() / frame.len() as f64).sqrt()
}
