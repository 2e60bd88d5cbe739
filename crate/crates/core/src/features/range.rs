use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inclusive F0 search interval in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F0SearchRange {
    pub f0_min: f64,
    pub f0_max: f64,
}

impl Default for F0SearchRange {
    fn default() -> Self {
        Self {
            f0_min: 60.0,
            f0_max: 400.0,
        }
    }
}

impl F0SearchRange {
    pub fn new(f0_min: f64, f0_max: f64) -> Result<Self> {
        let r = Self { f0_min, f0_max };
        if !(f0_min.is_finite() && f0_max.is_finite() && 0.0 < f0_min && f0_min < f0_max) {
            return Err(Error::InvalidSearchRange {
                f0_min,
                f0_max,
                sample_rate: 0,
            });
        }
        Ok(r)
    }

    /// Checks `f0_max < sample_rate / 4`.
    pub fn validate_for(&self, sample_rate: u32) -> Result<()> {
        if !(0.0 < self.f0_min
            && self.f0_min < self.f0_max
            && self.f0_max < sample_rate as f64 / 4.0)
        {
            return Err(Error::InvalidSearchRange {
                f0_min: self.f0_min,
                f0_max: self.f0_max,
                sample_rate,
            });
        }
        Ok(())
    }

    pub fn clamp(&self, f0: f64) -> f64 {
        f0.clamp(self.f0_min, self.f0_max)
    }

    pub fn contains(&self, f0: f64) -> bool {
        (self.f0_min..=self.f0_max).contains(&f0)
    }

    /// Lag interval `[floor(fs / f0_max), ceil(fs / f0_min)]` clipped to the
    /// lags available in a frame of `frame_length` samples.
    pub fn lag_range(&self, sample_rate: u32, frame_length: usize) -> Result<(usize, usize)> {
        let fs = sample_rate as f64;
        let lo = ((fs / self.f0_max).floor() as usize).max(1);
        let hi = ((fs / self.f0_min).ceil() as usize).min(frame_length.saturating_sub(1));
        if lo > hi {
            return Err(Error::InvalidLagRange {
                lag_min: lo,
                lag_max: hi,
                frame_length,
            });
        }
        Ok((lo, hi))
    }
}
