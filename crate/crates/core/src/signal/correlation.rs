use std::cell::RefCell;

use realfft::RealFftPlanner;

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<RealFftPlanner<f64>> = RefCell::new(RealFftPlanner::new());
}

/// `r[τ] = Σ x[n] x[n+τ]` for every lag below `frame.len()`, computed through
/// a zero-padded FFT of at least twice the frame length.
fn lag_products(frame: &[f64]) -> Vec<f64> {
    let n = frame.len();
    let size = (2 * n).next_power_of_two();
    let (forward, inverse) = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(size), p.plan_fft_inverse(size))
    });
    let mut buf = vec![0.0; size];
    buf[..n].copy_from_slice(frame);
    let mut spec = forward.make_output_vec();
    forward
        .process(&mut buf, &mut spec)
        .expect("buffer sizes match the plan");
    for c in spec.iter_mut() {
        *c = (c.norm_sqr()).into();
    }
    inverse
        .process(&mut spec, &mut buf)
        .expect("buffer sizes match the plan");
    let scale = 1.0 / size as f64;
    buf.truncate(n);
    buf.iter_mut().for_each(|v| *v *= scale);
    buf
}

/// Prefix sums of squares: `p[i] = Σ_{n<i} x[n]²`.
fn energy_prefix(frame: &[f64]) -> Vec<f64> {
    let mut p = Vec::with_capacity(frame.len() + 1);
    p.push(0.0);
    let mut acc = 0.0;
    for x in frame {
        acc += x * x;
        p.push(acc);
    }
    p
}

fn check_lags(frame: &[f64], lag_min: usize, lag_max: usize) -> Result<()> {
    if lag_max >= frame.len() || lag_min > lag_max {
        return Err(Error::InvalidLagRange {
            lag_min,
            lag_max,
            frame_length: frame.len(),
        });
    }
    Ok(())
}

/// Overlap energies below this fraction of the frame energy count as empty.
const ENERGY_FLOOR: f64 = 1e-12;

/// Normalized autocorrelation over lags `lag_min..=lag_max`.
///
/// Each lag is normalized by the energies of the two overlapping segments,
/// which bounds the curve to [-1, 1]. Lags whose overlap carries no energy
/// yield 0. Element `i` of the result corresponds to lag `lag_min + i`.
pub fn normalized_autocorrelation(
    frame: &[f64],
    lag_min: usize,
    lag_max: usize,
) -> Result<Vec<f64>> {
    check_lags(frame, lag_min, lag_max)?;
    let n = frame.len();
    if frame.iter().all(|&x| x == 0.0) {
        return Ok(vec![0.0; lag_max - lag_min + 1]);
    }
    let r = lag_products(frame);
    let p = energy_prefix(frame);
    let floor = ENERGY_FLOOR * p[n];
    Ok((lag_min..=lag_max)
        .map(|lag| {
            let e_head = p[n - lag];
            let e_tail = p[n] - p[lag];
            if e_head > floor && e_tail > floor {
                (r[lag] / (e_head * e_tail).sqrt()).clamp(-1.0, 1.0)
            } else {
                0.0
            }
        })
        .collect())
}

/// Normalized square difference function, `2 Σ x[n]x[n+τ] / Σ (x[n]² + x[n+τ]²)`.
pub fn nsdf(frame: &[f64], lag_min: usize, lag_max: usize) -> Result<Vec<f64>> {
    check_lags(frame, lag_min, lag_max)?;
    let n = frame.len();
    if frame.iter().all(|&x| x == 0.0) {
        return Ok(vec![0.0; lag_max - lag_min + 1]);
    }
    let r = lag_products(frame);
    let p = energy_prefix(frame);
    let floor = ENERGY_FLOOR * p[n];
    Ok((lag_min..=lag_max)
        .map(|lag| {
            let energy = p[n - lag] + p[n] - p[lag];
            if energy > floor {
                (2.0 * r[lag] / energy).clamp(-1.0, 1.0)
            } else {
                0.0
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn sine_is_periodic() {
        let frame: Vec<f64> = (0..480)
            .map(|i| (2.0 * PI * i as f64 / 80.0).sin())
            .collect();
        let ac = normalized_autocorrelation(&frame, 40, 200).unwrap();
        assert!(ac[80 - 40] >= 0.99);
    }

    #[test]
    fn zero_frame_is_zero() {
        let ac = normalized_autocorrelation(&[0.0; 64], 1, 40).unwrap();
        assert!(ac.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_computed_lag_two() {
        let frame = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        let ac = normalized_autocorrelation(&frame, 2, 2).unwrap();
        assert!((ac[0] - 1.0).abs() < 1e-12);
    }

    fn direct(frame: &[f64], lag: usize) -> (f64, f64) {
        let n = frame.len();
        let (mut cross, mut e1, mut e2) = (0.0, 0.0, 0.0);
        for (a, b) in frame[..n - lag].iter().zip(&frame[lag..]) {
            cross += a * b;
            e1 += a * a;
            e2 += b * b;
        }
        let ac = if e1 > 0.0 && e2 > 0.0 {
            cross / (e1 * e2).sqrt()
        } else {
            0.0
        };
        let ns = if e1 + e2 > 0.0 {
            2.0 * cross / (e1 + e2)
        } else {
            0.0
        };
        (ac, ns)
    }

    #[test]
    fn lag_beyond_frame_is_rejected() {
        assert!(normalized_autocorrelation(&[1.0; 8], 1, 8).is_err());
        assert!(nsdf(&[1.0; 8], 3, 2).is_err());
    }

    proptest! {
        #[test]
        fn bounded(xs in proptest::collection::vec(-1e3f64..1e3, 4..128)) {
            let ac = normalized_autocorrelation(&xs, 1, xs.len() - 1).unwrap();
            prop_assert!(ac.iter().all(|v| (-1.0..=1.0).contains(v)));
            let n = nsdf(&xs, 1, xs.len() - 1).unwrap();
            prop_assert!(n.iter().all(|v| (-1.0..=1.0).contains(v)));
        }

        #[test]
        fn matches_direct_sums(xs in proptest::collection::vec(-1.0f64..1.0, 16..200)) {
            let hi = xs.len() - 4;
            let ac = normalized_autocorrelation(&xs, 1, hi).unwrap();
            let ns = nsdf(&xs, 1, hi).unwrap();
            for lag in 1..=hi {
                let (a, b) = direct(&xs, lag);
                prop_assert!((ac[lag - 1] - a).abs() < 1e-9, "lag {}: {} vs {}", lag, ac[lag - 1], a);
                prop_assert!((ns[lag - 1] - b).abs() < 1e-9);
            }
        }
    }
}
