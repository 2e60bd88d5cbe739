use rustfft::num_complex::Complex64;

use super::harmonic::least_squares_line;
use super::F0SearchRange;
use crate::error::{Error, Result};
use crate::signal::FftPlan;

const MIN_QUEFRENCY_BINS: usize = 8;

/// Cepstral peak prominence of a windowed frame.
///
/// The real cepstrum is the inverse FFT of the dB magnitude spectrum
/// (`20 log10 |X|`), so cepstral values are in dB. Over the quefrencies of
/// the F0 search range a regression line is fitted; the prominence is the
/// cepstral peak minus the line at the peak. Returns `(cpp_db, f0_cpp)`;
/// a silent frame yields `(0, f0_min)`.
pub fn cpp(
    frame: &[f64],
    plan: &FftPlan,
    sample_rate: u32,
    range: &F0SearchRange,
) -> Result<(f64, f64)> {
    quefrency_band(plan, sample_rate as f64, range)?;
    if frame.iter().all(|&x| x == 0.0) {
        return Ok((0.0, range.f0_min));
    }
    cpp_from_db(&plan.magnitude_db(frame)?, plan, sample_rate, range)
}

fn quefrency_band(plan: &FftPlan, fs: f64, range: &F0SearchRange) -> Result<(usize, usize)> {
    let q_lo = (fs / range.f0_max).ceil() as usize;
    let q_hi = ((fs / range.f0_min).floor() as usize).min(plan.size() / 2 - 1);
    let n_bins = (q_hi + 1).saturating_sub(q_lo);
    if n_bins < MIN_QUEFRENCY_BINS {
        return Err(Error::BandTooNarrow {
            what: "cepstral quefrency",
            bins: n_bins,
            needed: MIN_QUEFRENCY_BINS,
        });
    }
    Ok((q_lo, q_hi))
}

/// As [`cpp`], from the one-sided dB spectrum of a non-silent frame.
pub fn cpp_from_db(
    db: &[f64],
    plan: &FftPlan,
    sample_rate: u32,
    range: &F0SearchRange,
) -> Result<(f64, f64)> {
    let fs = sample_rate as f64;
    let (q_lo, q_hi) = quefrency_band(plan, fs, range)?;
    let spectrum: Vec<Complex64> = db.iter().map(|&v| v.into()).collect();
    let cepstrum = plan.inverse_real(&spectrum);
    let band: Vec<(f64, f64)> = (q_lo..=q_hi).map(|q| (q as f64, cepstrum[q])).collect();
    let (slope, intercept) = least_squares_line(&band);
    let (q_peak, c_peak) =
        band.iter()
            .copied()
            .fold((q_lo as f64, f64::NEG_INFINITY), |best, p| {
                if p.1 > best.1 {
                    p
                } else {
                    best
                }
            });
    let prominence = c_peak - (slope * q_peak + intercept);
    Ok((prominence, range.clamp(fs / q_peak)))
}
