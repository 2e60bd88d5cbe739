use std::sync::Arc;

use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Floor added to magnitudes before taking logarithms, relative to the
/// spectral peak (absolute for an all-zero frame).
pub const LOG_EPS: f64 = 1e-6;

/// Smallest power of two that is at least twice the frame length.
pub fn default_fft_size(frame_length: usize) -> usize {
    (2 * frame_length.max(1)).next_power_of_two()
}

/// Forward and inverse transforms of one size, planned once and shared.
#[derive(Clone)]
pub struct FftPlan {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    real_forward: Arc<dyn RealToComplex<f64>>,
    real_inverse: Arc<dyn ComplexToReal<f64>>,
}

impl std::fmt::Debug for FftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftPlan").field("size", &self.size).finish()
    }
}

impl FftPlan {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 || !size.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "FFT size {size} is not a power of two"
            )));
        }
        let mut planner = FftPlanner::new();
        let mut real = RealFftPlanner::new();
        Ok(Self {
            size,
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
            real_forward: real.plan_fft_forward(size),
            real_inverse: real.plan_fft_inverse(size),
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Number of one-sided bins, `size / 2 + 1`.
    pub fn n_bins(&self) -> usize {
        self.size / 2 + 1
    }

    /// Full complex spectrum of `frame`, zero-padded to the plan size.
    pub fn forward(&self, frame: &[f64]) -> Result<Vec<Complex64>> {
        if frame.len() > self.size {
            return Err(Error::FftTooSmall {
                fft_size: self.size,
                frame_length: frame.len(),
            });
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); self.size];
        for (b, &x) in buf.iter_mut().zip(frame) {
            b.re = x;
        }
        self.forward.process(&mut buf);
        Ok(buf)
    }

    /// Inverse transform including the 1/N normalization.
    pub fn inverse(&self, spectrum: &[Complex64]) -> Vec<Complex64> {
        let mut buf = spectrum.to_vec();
        buf.resize(self.size, Complex64::new(0.0, 0.0));
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.size as f64;
        for b in &mut buf {
            *b *= scale;
        }
        buf
    }

    /// One-sided spectrum of a real frame (`size / 2 + 1` bins).
    pub fn forward_real(&self, frame: &[f64]) -> Result<Vec<Complex64>> {
        if frame.len() > self.size {
            return Err(Error::FftTooSmall {
                fft_size: self.size,
                frame_length: frame.len(),
            });
        }
        let mut input = vec![0.0; self.size];
        input[..frame.len()].copy_from_slice(frame);
        let mut out = self.real_forward.make_output_vec();
        self.real_forward
            .process(&mut input, &mut out)
            .expect("buffer sizes match the plan");
        Ok(out)
    }

    /// Real signal whose spectrum is the Hermitian extension of the
    /// one-sided `spectrum`, normalized by `1 / size`. Imaginary parts of
    /// the DC and Nyquist bins are ignored.
    pub fn inverse_real(&self, spectrum: &[Complex64]) -> Vec<f64> {
        let mut input = spectrum.to_vec();
        input.resize(self.n_bins(), Complex64::new(0.0, 0.0));
        input[0].im = 0.0;
        input[self.size / 2].im = 0.0;
        let mut out = self.real_inverse.make_output_vec();
        self.real_inverse
            .process(&mut input, &mut out)
            .expect("buffer sizes match the plan");
        let scale = 1.0 / self.size as f64;
        out.iter_mut().for_each(|v| *v *= scale);
        out
    }

    /// One-sided linear amplitude spectrum over [0, fs/2].
    pub fn amplitude(&self, frame: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_real(frame)?.iter().map(|c| c.norm()).collect())
    }

    /// One-sided spectrum in dB, `20 log10(|X| + eps * max|X|)`.
    pub fn magnitude_db(&self, frame: &[f64]) -> Result<Vec<f64>> {
        let amp = self.amplitude(frame)?;
        let peak = amp.iter().fold(0.0f64, |m, &a| m.max(a));
        let eps = if peak > 0.0 { LOG_EPS * peak } else { LOG_EPS };
        Ok(amp.into_iter().map(|a| 20.0 * (a + eps).log10()).collect())
    }
}

/// Magnitude spectrum in dB of a windowed frame; bin `k` sits at
/// `k * sample_rate / fft_size` Hz.
pub fn magnitude_spectrum_db(frame: &[f64], fft_size: usize) -> Result<Vec<f64>> {
    if fft_size < frame.len() {
        return Err(Error::FftTooSmall {
            fft_size,
            frame_length: frame.len(),
        });
    }
    FftPlan::new(fft_size)?.magnitude_db(frame)
}

/// Frequency in Hz of bin `k`.
pub fn bin_frequency(k: usize, sample_rate: u32, fft_size: usize) -> f64 {
    k as f64 * sample_rate as f64 / fft_size as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::hanning;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn on_bin_sine_has_one_dominant_bin() {
        let (n, fft, fs) = (480usize, 1024usize, 16_000u32);
        let k0 = 64; // 1000 Hz
        let w = hanning(n);
        let frame: Vec<f64> = (0..n)
            .map(|i| w[i] * (2.0 * PI * k0 as f64 * i as f64 / fft as f64).sin())
            .collect();
        let db = magnitude_spectrum_db(&frame, fft).unwrap();
        let peak = db
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(peak, k0);
        assert!((bin_frequency(peak, fs, fft) - 1000.0).abs() < 1e-9);
        // Bins past the first sidelobe of the Hanning response sit at least
        // 40 dB down; the main lobe and first sidelobe (about -31 dB) do not.
        let lobe = 3 * fft / n + 1;
        for (k, &v) in db.iter().enumerate() {
            if k.abs_diff(k0) > lobe {
                assert!(db[k0] - v >= 40.0, "bin {k}: {} dB below peak", db[k0] - v);
            }
        }
    }

    #[test]
    fn zero_frame_is_flat_at_floor() {
        let db = magnitude_spectrum_db(&[0.0; 480], 1024).unwrap();
        assert_eq!(db.len(), 513);
        let floor = 20.0 * LOG_EPS.log10();
        assert!(db.iter().all(|&v| (v - floor).abs() < 1e-9));
    }

    #[test]
    fn impulse_is_flat() {
        let mut frame = vec![0.0; 480];
        frame[100] = 0.7;
        let db = magnitude_spectrum_db(&frame, 1024).unwrap();
        let (lo, hi) = db
            .iter()
            .fold((f64::MAX, f64::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        assert!(hi - lo < 0.1);
    }

    #[test]
    fn rejects_small_or_odd_sizes() {
        assert!(matches!(
            magnitude_spectrum_db(&[0.0; 480], 256),
            Err(Error::FftTooSmall { .. })
        ));
        assert!(magnitude_spectrum_db(&[0.0; 480], 1000).is_err());
        assert_eq!(default_fft_size(480), 1024);
        assert_eq!(default_fft_size(512), 1024);
    }

    proptest! {
        #[test]
        fn parseval(xs in proptest::collection::vec(-1.0f64..1.0, 1..256)) {
            let plan = FftPlan::new(256).unwrap();
            let spec = plan.forward(&xs).unwrap();
            let time: f64 = xs.iter().map(|x| x * x).sum();
            let freq: f64 = spec.iter().map(|c| c.norm_sqr()).sum::<f64>() / 256.0;
            prop_assert!((time - freq).abs() <= 1e-6 * time.max(1e-300));
        }
    }
}
