//! Zero-crossing rate, autocorrelation peak and clarity.

use super::F0SearchRange;
use crate::error::{Error, Result};
use crate::signal::{normalized_autocorrelation, nsdf};

/// Fraction of adjacent sample pairs whose signs differ; zero counts as
/// non-negative.
pub fn zcr(frame: &[f64]) -> Result<f64> {
    if frame.is_empty() {
        return Err(Error::EmptyWaveform);
    }
    if frame.len() == 1 {
        return Ok(0.0);
    }
    let crossings = frame
        .windows(2)
        .filter(|p| (p[0] >= 0.0) != (p[1] >= 0.0))
        .count();
    Ok(crossings as f64 / (frame.len() - 1) as f64)
}

/// Fraction of the global autocorrelation maximum a shorter-lag local
/// maximum needs to be preferred.
pub const AC_KEY_FRACTION: f64 = 0.9;

/// Vertex offset of the parabola through three equally spaced points, in
/// [-0.5, 0.5].
pub(crate) fn parabolic_offset(left: f64, centre: f64, right: f64) -> f64 {
    let curvature = left - 2.0 * centre + right;
    if curvature < 0.0 {
        (0.5 * (left - right) / curvature).clamp(-0.5, 0.5)
    } else {
        0.0
    }
}

/// Peak of the normalized autocorrelation over the search lags and the F0
/// of its (parabolically refined) lag.
///
/// The peak is the shortest-lag local maximum reaching 0.9 of the global
/// maximum, so period multiples do not win on rounding noise. An all-zero
/// frame returns `(0, f0_min)`.
pub fn ac_peak_and_f0(
    frame: &[f64],
    sample_rate: u32,
    range: &F0SearchRange,
) -> Result<(f64, f64)> {
    let (lo, hi) = range.lag_range(sample_rate, frame.len())?;
    if frame.iter().all(|&x| x == 0.0) {
        return Ok((0.0, range.f0_min));
    }
    // one extra lag on each side for the interpolation
    let ext_lo = lo.saturating_sub(1).max(1);
    let ext_hi = (hi + 1).min(frame.len() - 1);
    let ac = normalized_autocorrelation(frame, ext_lo, ext_hi)?;
    let at = |lag: usize| ac[lag - ext_lo];
    let mut best = lo;
    for lag in lo..=hi {
        if at(lag) > at(best) {
            best = lag;
        }
    }
    let threshold = AC_KEY_FRACTION * at(best);
    if threshold > 0.0 {
        if let Some(first) = (lo..best)
            .find(|&l| l > ext_lo && at(l) >= threshold && at(l) >= at(l - 1) && at(l) > at(l + 1))
        {
            best = first;
        }
    }
    let peak = at(best);
    let mut lag = best as f64;
    if best > ext_lo && best < ext_hi {
        lag += parabolic_offset(at(best - 1), peak, at(best + 1));
    }
    Ok((peak, range.clamp(sample_rate as f64 / lag)))
}

/// Height of the first key maximum of the normalized square difference
/// function: the first local maximum reaching 0.8 of the global maximum over
/// the search lags, or the global maximum when none qualifies.
pub fn clarity(frame: &[f64], sample_rate: u32, range: &F0SearchRange) -> Result<f64> {
    let (lo, hi) = range.lag_range(sample_rate, frame.len())?;
    if frame.iter().all(|&x| x == 0.0) {
        return Ok(0.0);
    }
    let curve = nsdf(frame, lo, hi)?;
    let global = curve.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if global > 0.0 {
        let threshold = 0.8 * global;
        for i in 1..curve.len().saturating_sub(1) {
            let v = curve[i];
            if v >= curve[i - 1] && v > curve[i + 1] && v >= threshold {
                return Ok(v);
            }
        }
    }
    Ok(global)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};
    use std::f64::consts::PI;

    fn sine(f: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| (2.0 * PI * f * i as f64 / fs + 0.3).sin())
            .collect()
    }

    fn noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| StandardNormal.sample(rng)).collect()
    }

    #[test]
    fn zcr_cases() {
        assert_eq!(zcr(&[1.0, -1.0, 1.0, -1.0]).unwrap(), 1.0);
        assert_eq!(zcr(&[0.3; 20]).unwrap(), 0.0);
        assert!(zcr(&[]).is_err());
        // crossing-count oracle: 3 periods of 100 Hz in 30 ms -> 6 crossings
        let frame = sine(100.0, 16_000.0, 480);
        let expected = 6.0 / 479.0;
        let z = zcr(&frame).unwrap();
        assert!((z - expected).abs() < 1e-12);
        assert!((z - 0.0125).abs() < 0.002);
    }

    #[test]
    fn ac_on_sine() {
        let range = F0SearchRange::default();
        let (peak, f0) = ac_peak_and_f0(&sine(200.0, 16_000.0, 480), 16_000, &range).unwrap();
        assert!(peak >= 0.99, "{peak}");
        assert!((f0 - 200.0).abs() <= 1.0, "{f0}");
    }

    #[test]
    fn ac_parabolic_refinement_beats_integer_lag() {
        // 16000 / 230 = 69.57 samples: integer lags give 228.6 or 231.9 Hz
        let range = F0SearchRange::default();
        let (_, f0) = ac_peak_and_f0(&sine(230.0, 16_000.0, 480), 16_000, &range).unwrap();
        assert!((f0 - 230.0).abs() < 1.0, "{f0}");
    }

    #[test]
    fn ac_on_noise_is_low() {
        // Monte-Carlo oracle: 1000 white-noise frames, none may exceed 0.5
        let range = F0SearchRange::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let high = (0..1000)
            .filter(|_| {
                ac_peak_and_f0(&noise(&mut rng, 480), 16_000, &range)
                    .unwrap()
                    .0
                    >= 0.5
            })
            .count();
        assert!(high <= 10, "{high} of 1000 noise frames peaked above 0.5");
    }

    #[test]
    fn ac_zero_frame_convention() {
        let range = F0SearchRange::default();
        assert_eq!(
            ac_peak_and_f0(&[0.0; 480], 16_000, &range).unwrap(),
            (0.0, 60.0)
        );
    }

    #[test]
    fn ac_empty_lag_range() {
        let range = F0SearchRange::default();
        assert!(matches!(
            ac_peak_and_f0(&[1.0; 20], 16_000, &range),
            Err(Error::InvalidLagRange { .. })
        ));
    }

    #[test]
    fn clarity_cases() {
        let range = F0SearchRange::default();
        assert!(clarity(&sine(200.0, 16_000.0, 480), 16_000, &range).unwrap() >= 0.99);
        assert_eq!(clarity(&[0.0; 480], 16_000, &range).unwrap(), 0.0);
    }

    #[test]
    fn clarity_monotone_in_snr() {
        // averaged over trials; noise-only and clean values bracket the rest
        let range = F0SearchRange::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let trials = 200;
        let clean = sine(150.0, 16_000.0, 480);
        let signal_power = 0.5;
        let mut mean_at = |snr_db: Option<f64>| {
            let mut acc = 0.0;
            for _ in 0..trials {
                let n = noise(&mut rng, 480);
                let frame: Vec<f64> = match snr_db {
                    Some(snr) => {
                        let sigma = (signal_power / 10f64.powf(snr / 10.0)).sqrt();
                        clean.iter().zip(&n).map(|(s, v)| s + sigma * v).collect()
                    }
                    None => n,
                };
                acc += clarity(&frame, 16_000, &range).unwrap();
            }
            acc / trials as f64
        };
        let noise_only = mean_at(None);
        let levels: Vec<f64> = [-10.0, 0.0, 10.0, 30.0]
            .iter()
            .map(|&s| mean_at(Some(s)))
            .collect();
        let clean_value = clarity(&clean, 16_000, &range).unwrap();
        assert!(levels.windows(2).all(|w| w[0] < w[1]), "{levels:?}");
        assert!(noise_only < levels[1] && levels[1] < clean_value);
    }
}
