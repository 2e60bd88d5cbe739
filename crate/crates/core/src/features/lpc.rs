//! Linear-prediction inverse filtering.

use crate::error::Result;
use crate::signal::{FrameGrid, Waveform};

/// Prediction order used for a given sample rate: `round(fs / 1000) + 2`.
pub fn lpc_order(sample_rate: u32) -> usize {
    (sample_rate as f64 / 1000.0).round() as usize + 2
}

/// Autocorrelation `r[0..=order]` of a (windowed) frame.
pub fn autocorrelation(frame: &[f64], order: usize) -> Vec<f64> {
    (0..=order)
        .map(|lag| {
            if lag >= frame.len() {
                0.0
            } else {
                frame[..frame.len() - lag]
                    .iter()
                    .zip(&frame[lag..])
                    .map(|(a, b)| a * b)
                    .sum()
            }
        })
        .collect()
}

/// Levinson–Durbin recursion.
///
/// Returns the inverse filter `[1, a1, .., ap]` (so that
/// `e[n] = x[n] + Σ a_i x[n-i]`) and the final prediction error, or `None`
/// when a reflection coefficient leaves the open unit interval.
pub fn levinson_durbin(r: &[f64], order: usize) -> Option<(Vec<f64>, f64)> {
    if r.is_empty() || r[0] <= 0.0 || r.len() <= order {
        return None;
    }
    let mut a = vec![0.0; order + 1];
    a[0] = 1.0;
    let mut err = r[0];
    let mut prev = a.clone();
    for i in 1..=order {
        let acc: f64 = (1..i).map(|j| prev[j] * r[i - j]).sum::<f64>() + r[i];
        let k = -acc / err;
        if !k.is_finite() || k.abs() >= 1.0 {
            return None;
        }
        a[i] = k;
        for j in 1..i {
            a[j] = prev[j] + k * prev[i - j];
        }
        err *= 1.0 - k * k;
        if err <= 0.0 {
            return None;
        }
        prev.copy_from_slice(&a);
    }
    Some((a, err))
}

/// Inverse-filtered signal plus the number of frames that fell back to
/// pass-through because the recursion was unstable.
#[derive(Debug, Clone)]
pub struct LpResidual {
    pub residual: Waveform,
    pub unstable_frames: usize,
}

/// Per-frame autocorrelation-method LPC on the analysis grid, each frame
/// inverse filtered, Hanning weighted and overlap-added. The sum of window
/// weights is divided out, so a pass-through filter reproduces the input.
pub fn lp_residual(w: &Waveform) -> Result<LpResidual> {
    let grid = FrameGrid::for_waveform(w)?;
    let window = grid.window();
    let order = lpc_order(w.sample_rate());
    let x = w.samples();
    let len = x.len();
    let mut out = vec![0.0; len];
    let mut weight = vec![0.0; len];
    let mut unstable = 0;
    for k in 0..grid.n_frames {
        let frame = grid.windowed_frame(x, k, &window);
        let r = autocorrelation(&frame, order);
        let coeffs = if r[0] > 0.0 {
            match levinson_durbin(&r, order) {
                Some((a, _)) => a,
                None => {
                    unstable += 1;
                    vec![1.0]
                }
            }
        } else {
            vec![1.0]
        };
        let start = grid.start_of(k);
        let end = (start + grid.frame_length).min(len);
        for n in start..end {
            let mut e = 0.0;
            for (i, &a) in coeffs.iter().enumerate() {
                if n >= i {
                    e += a * x[n - i];
                }
            }
            let wv = window[n - start];
            out[n] += wv * e;
            weight[n] += wv;
        }
    }
    for (o, &wt) in out.iter_mut().zip(&weight) {
        if wt > 0.0 {
            *o /= wt;
        }
    }
    Ok(LpResidual {
        residual: Waveform::new(out, w.sample_rate())?,
        unstable_frames: unstable,
    })
}
