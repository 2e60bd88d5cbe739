//! Mean-based signal: a Blackman-weighted moving average whose length spans
//! 1.75 mean pitch periods, turning voiced speech into a quasi-sinusoid at F0.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::signal::Waveform;

/// Frames whose AC peak reaches this value vote for the mean F0.
pub const MEAN_F0_PEAK_THRESHOLD: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanF0 {
    pub f0: f64,
    /// Set when no frame passed the peak threshold and all frames voted.
    pub fallback: bool,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median `f0_ac` over frames with `ac_peak >= 0.6`, or over all frames when
/// none qualifies. `track` holds `(ac_peak, f0_ac)` per frame.
pub fn estimate_mean_f0(track: &[(f64, f64)]) -> Result<MeanF0> {
    if track.is_empty() {
        return Err(Error::NotEnoughData { needed: 1, got: 0 });
    }
    let mut voted: Vec<f64> = track
        .iter()
        .filter(|(peak, _)| *peak >= MEAN_F0_PEAK_THRESHOLD)
        .map(|&(_, f0)| f0)
        .collect();
    if voted.is_empty() {
        let mut all: Vec<f64> = track.iter().map(|&(_, f0)| f0).collect();
        return Ok(MeanF0 {
            f0: median(&mut all),
            fallback: true,
        });
    }
    Ok(MeanF0 {
        f0: median(&mut voted),
        fallback: false,
    })
}

#[derive(Debug, Clone)]
pub struct MeanBasedSignal {
    pub signal: Waveform,
    pub window_halfwidth: usize,
}

/// Blackman window of `len` taps.
pub fn blackman(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let m = (len - 1) as f64;
    (0..len)
        .map(|i| {
            let x = i as f64 / m;
            0.42 - 0.5 * (2.0 * PI * x).cos() + 0.08 * (4.0 * PI * x).cos()
        })
        .collect()
}

/// Window length `round(1.75 fs / mean_f0)`, forced odd.
pub fn mean_signal_window_length(sample_rate: u32, mean_f0: f64) -> usize {
    let len = (1.75 * sample_rate as f64 / mean_f0).round() as usize;
    len.max(1) | 1
}

/// Centred Blackman-weighted average with unit DC gain; samples beyond the
/// signal edges count as zero.
pub fn mean_based_signal(w: &Waveform, mean_f0: f64) -> Result<MeanBasedSignal> {
    let len = mean_signal_window_length(w.sample_rate(), mean_f0);
    if len > w.len() {
        return Err(Error::WindowTooLong {
            window: len,
            len: w.len(),
        });
    }
    let half = len / 2;
    let taps = blackman(len);
    let gain: f64 = taps.iter().sum();
    let taps: Vec<f64> = taps.iter().map(|t| t / gain).collect();
    let x = w.samples();
    let n = x.len();
    let out: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|t| {
            let lo = t.saturating_sub(half);
            let hi = (t + half).min(n - 1);
            (lo..=hi).map(|i| taps[i + half - t] * x[i]).sum()
        })
        .collect();
    Ok(MeanBasedSignal {
        signal: Waveform::new(out, w.sample_rate())?,
        window_halfwidth: half.max(1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{hanning, FftPlan};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    const FS: u32 = 16_000;

    #[test]
    fn mean_f0_cases() {
        let all = vec![(0.99, 200.0); 10];
        assert_eq!(
            estimate_mean_f0(&all).unwrap(),
            MeanF0 {
                f0: 200.0,
                fallback: false
            }
        );

        let mut mixed: Vec<(f64, f64)> = (0..10).map(|i| (0.2, 70.0 + 30.0 * i as f64)).collect();
        mixed.extend(vec![(0.9, 150.0); 10]);
        assert_eq!(estimate_mean_f0(&mixed).unwrap().f0, 150.0);

        let low = vec![(0.1, 100.0), (0.2, 300.0), (0.3, 120.0)];
        assert_eq!(
            estimate_mean_f0(&low).unwrap(),
            MeanF0 {
                f0: 120.0,
                fallback: true
            }
        );
        assert!(estimate_mean_f0(&[]).is_err());
    }

    #[test]
    fn window_length_is_odd() {
        assert_eq!(mean_signal_window_length(FS, 200.0), 141);
        assert_eq!(mean_signal_window_length(FS, 100.0), 281);
    }

    #[test]
    fn dc_is_preserved_away_from_edges() {
        let w = Waveform::new(vec![0.37; 4000], FS).unwrap();
        let ms = mean_based_signal(&w, 200.0).unwrap();
        let half = ms.window_halfwidth;
        for &v in &ms.signal.samples()[half..4000 - half] {
            assert!((v - 0.37).abs() < 1e-12);
        }
        assert_eq!(ms.signal.len(), 4000);
    }

    /// Amplitude of a pure tone component estimated by correlation.
    fn tone_amplitude(x: &[f64], f: f64) -> f64 {
        let (mut c, mut s) = (0.0, 0.0);
        for (i, v) in x.iter().enumerate() {
            let ph = 2.0 * PI * f * i as f64 / FS as f64;
            c += v * ph.cos();
            s += v * ph.sin();
        }
        2.0 * (c * c + s * s).sqrt() / x.len() as f64
    }

    #[test]
    fn harmonics_are_attenuated_relative_to_f0() {
        // equal-amplitude 200, 400, 600 and 1000 Hz tones over 0.5 s
        let n = 8000;
        let x: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / FS as f64;
                [200.0, 400.0, 600.0, 1000.0]
                    .iter()
                    .map(|f| (2.0 * PI * f * t).sin())
                    .sum()
            })
            .collect();
        let ms = mean_based_signal(&Waveform::new(x, FS).unwrap(), 200.0).unwrap();
        let interior = &ms.signal.samples()[400..n - 400];
        let a0 = tone_amplitude(interior, 200.0);
        for f in [400.0, 600.0, 1000.0] {
            let att = 20.0 * (a0 / tone_amplitude(interior, f)).log10();
            assert!(att > 20.0, "{f} Hz only {att} dB below F0");
        }
    }

    #[test]
    fn white_noise_becomes_lowpass() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<f64> = (0..32_000)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let ms = mean_based_signal(&Waveform::new(x.clone(), FS).unwrap(), 150.0).unwrap();
        let plan = FftPlan::new(1024).unwrap();
        let win = hanning(1024);
        let high_energy = |sig: &[f64]| -> f64 {
            let mut total = 0.0;
            for chunk in sig.chunks_exact(1024) {
                let f: Vec<f64> = chunk.iter().zip(&win).map(|(a, b)| a * b).collect();
                let amp = plan.amplitude(&f).unwrap();
                let cut = (300.0 / (FS as f64 / 1024.0)).ceil() as usize;
                total += amp[cut..].iter().map(|a| a * a).sum::<f64>();
            }
            total
        };
        let reduction = 10.0 * (high_energy(&x) / high_energy(ms.signal.samples())).log10();
        assert!(reduction > 10.0, "{reduction} dB");
    }

    #[test]
    fn too_short_signal() {
        let w = Waveform::new(vec![0.0; 100], FS).unwrap();
        assert!(matches!(
            mean_based_signal(&w, 60.0),
            Err(Error::WindowTooLong { .. })
        ));
    }
}
