//! Reference voicing and F0 from EGG recordings: peaks of the differenced
//! EGG mark glottal closures, and inter-closure periods give F0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::F0SearchRange;
use crate::signal::{FrameGrid, Waveform};
use crate::track::PitchTrack;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundTruthParams {
    /// Peak threshold relative to the local percentile of |dEGG|.
    pub relative_threshold: f64,
    pub percentile: f64,
    /// Length of the centred window the local percentile is taken over.
    pub window_s: f64,
    /// Floor relative to the whole-signal percentile, so stretches without
    /// any glottal activity do not promote noise to peaks.
    pub global_floor: f64,
    /// Largest relative difference between adjacent periods.
    pub continuity: f64,
}

impl Default for GroundTruthParams {
    fn default() -> Self {
        Self {
            relative_threshold: 0.2,
            percentile: 95.0,
            window_s: 0.2,
            global_floor: 0.05,
            continuity: 0.25,
        }
    }
}

impl GroundTruthParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.relative_threshold >= 0.0
            && (0.0..=100.0).contains(&self.percentile)
            && self.window_s > 0.0
            && self.global_floor >= 0.0
            && self.continuity > 0.0;
        if !ok {
            return Err(Error::InvalidConfig(format!(
                "invalid ground-truth parameters {self:?}"
            )));
        }
        Ok(())
    }
}

/// Nearest-rank percentile; reorders `values`.
fn percentile(values: &mut [f64], p: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let rank = ((p / 100.0) * values.len() as f64).ceil() as usize;
    let idx = rank.clamp(1, values.len()) - 1;
    *values.select_nth_unstable_by(idx, f64::total_cmp).1
}

/// Glottal closure instants as sample indices, strictly increasing.
///
/// A sample `n` is a closure candidate when the first difference
/// `x[n] - x[n-1]` is a local maximum above both the local threshold
/// (computed once per 5 ms block) and the global floor. Candidates closer
/// than one `f0_max` period are merged, keeping the larger.
pub fn degg_peaks(egg: &Waveform, f0_max: f64, params: &GroundTruthParams) -> Result<Vec<usize>> {
    params.validate()?;
    let x = egg.samples();
    let fs = egg.sample_rate() as f64;
    if x.len() < 3 {
        return Ok(Vec::new());
    }
    let mut d = vec![0.0; x.len()];
    for n in 1..x.len() {
        d[n] = x[n] - x[n - 1];
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let floor = params.global_floor * percentile(&mut abs.clone(), params.percentile);
    if floor == 0.0 && abs.iter().all(|&v| v == 0.0) {
        return Ok(Vec::new());
    }

    let block = ((0.005 * fs).round() as usize).max(1);
    let half = ((params.window_s * fs / 2.0).round() as usize).max(1);
    let n_blocks = x.len().div_ceil(block);
    let mut thresholds = Vec::with_capacity(n_blocks);
    let mut scratch = Vec::new();
    for b in 0..n_blocks {
        let centre = b * block + block / 2;
        let lo = centre.saturating_sub(half);
        let hi = (centre + half).min(x.len());
        scratch.clear();
        scratch.extend_from_slice(&abs[lo..hi]);
        let local = params.relative_threshold * percentile(&mut scratch, params.percentile);
        thresholds.push(local.max(floor));
    }

    let min_gap = fs / f0_max;
    let mut peaks: Vec<usize> = Vec::new();
    for n in 1..x.len() - 1 {
        let v = d[n];
        if v > 0.0 && v > d[n - 1] && v >= d[n + 1] && v > thresholds[n / block] {
            match peaks.last().copied() {
                Some(p) if ((n - p) as f64) < min_gap => {
                    if v > d[p] {
                        *peaks.last_mut().unwrap() = n;
                    }
                }
                _ => peaks.push(n),
            }
        }
    }
    Ok(peaks)
}

/// Reference track with the number of periods behind each frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrack {
    pub track: PitchTrack,
    pub n_periods: Vec<usize>,
}

/// Frame-wise reference from closure instants.
///
/// A frame uses every period whose midpoint falls inside it. It is voiced
/// when it uses at least one period, each of them maps into the search
/// range, and none differs from an in-range neighbouring period by
/// `continuity` or more (relative to the shorter one). F0 is the sample
/// rate over the mean used period.
pub fn gci_to_reference(
    gcis: &[usize],
    grid: &FrameGrid,
    range: &F0SearchRange,
    params: &GroundTruthParams,
) -> Result<ReferenceTrack> {
    params.validate()?;
    if gcis.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(
            "closure instants must be strictly increasing".into(),
        ));
    }
    let fs = grid.sample_rate as f64;
    let periods: Vec<f64> = gcis.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
    let in_range = |p: f64| range.contains(fs / p);
    let differs = |a: f64, b: f64| (a - b).abs() / a.min(b) >= params.continuity;
    let good: Vec<bool> = (0..periods.len())
        .map(|i| {
            let p = periods[i];
            if !in_range(p) {
                return false;
            }
            let neighbour_ok = |j: usize| !in_range(periods[j]) || !differs(p, periods[j]);
            (i == 0 || neighbour_ok(i - 1)) && (i + 1 == periods.len() || neighbour_ok(i + 1))
        })
        .collect();
    // midpoints doubled to stay in integers
    let mids2: Vec<usize> = gcis.windows(2).map(|w| w[0] + w[1]).collect();

    let mut f0 = vec![None; grid.n_frames];
    let mut n_periods = vec![0; grid.n_frames];
    let mut first = 0;
    for k in 0..grid.n_frames {
        let start2 = 2 * grid.start_of(k);
        let end2 = 2 * (grid.start_of(k) + grid.frame_length);
        while first < mids2.len() && mids2[first] < start2 {
            first += 1;
        }
        let used: Vec<usize> = (first..mids2.len())
            .take_while(|&i| mids2[i] < end2)
            .collect();
        n_periods[k] = used.len();
        if !used.is_empty() && used.iter().all(|&i| good[i]) {
            let mean = used.iter().map(|&i| periods[i]).sum::<f64>() / used.len() as f64;
            f0[k] = Some(range.clamp(fs / mean));
        }
    }
    Ok(ReferenceTrack {
        track: PitchTrack::from_grid(grid, f0)?,
        n_periods,
    })
}

/// Reference for an EGG recording on the grid of its paired speech file.
/// The two may differ by one hop; the longer grid is truncated.
pub fn reference_for_pair(
    speech: &Waveform,
    egg: &Waveform,
    range: &F0SearchRange,
    params: &GroundTruthParams,
) -> Result<ReferenceTrack> {
    if speech.sample_rate() != egg.sample_rate() {
        return Err(Error::InvalidWaveform(format!(
            "speech at {} Hz but EGG at {} Hz",
            speech.sample_rate(),
            egg.sample_rate()
        )));
    }
    let speech_grid = FrameGrid::for_waveform(speech)?;
    let egg_grid = FrameGrid::for_waveform(egg)?;
    if speech_grid.n_frames.abs_diff(egg_grid.n_frames) > 1 {
        return Err(Error::LengthMismatch {
            left: speech_grid.n_frames,
            right: egg_grid.n_frames,
        });
    }
    let grid = speech_grid.truncated(egg_grid.n_frames);
    let gcis = degg_peaks(egg, range.f0_max, params)?;
    gci_to_reference(&gcis, &grid, range, params)
}
