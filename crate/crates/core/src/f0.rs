//! F0 estimation inside voiced segments by fusing candidate estimators.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Candidate, F0CandidateVector, F0SearchRange};
use crate::ml::{
    fit_linreg, fit_mlp, Head, KnnModel, LinRegModel, MlpHyper, MlpModel, Standardizer,
    DEFAULT_HIDDEN,
};
use crate::signal::FrameGrid;
use crate::track::PitchTrack;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FuserKind {
    Median,
    Linreg,
    KnnReg,
    MlpIdx,
}

impl FuserKind {
    pub const ALL: [FuserKind; 4] = [
        FuserKind::Median,
        FuserKind::Linreg,
        FuserKind::KnnReg,
        FuserKind::MlpIdx,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FuserKind::Median => "median",
            FuserKind::Linreg => "linreg",
            FuserKind::KnnReg => "knn",
            FuserKind::MlpIdx => "mlp-idx",
        }
    }
}

impl fmt::Display for FuserKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FuserKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "median" => Ok(FuserKind::Median),
            "linreg" => Ok(FuserKind::Linreg),
            "knn" | "knn_reg" | "knn-reg" => Ok(FuserKind::KnnReg),
            "mlp-idx" | "mlp_idx" => Ok(FuserKind::MlpIdx),
            _ => Err(Error::InvalidConfig(format!("unknown F0 fuser {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FuserParams {
    pub context_radius: usize,
    pub candidates: Vec<Candidate>,
    pub knn_k: usize,
    /// Training points kept by the KNN regressor (random subset).
    pub knn_max_points: usize,
    pub mlp: MlpHyper,
    pub hidden: Vec<usize>,
}

impl Default for FuserParams {
    fn default() -> Self {
        Self {
            context_radius: 2,
            candidates: Candidate::RETAINED.to_vec(),
            knn_k: 5,
            knn_max_points: 5000,
            mlp: MlpHyper::default(),
            hidden: DEFAULT_HIDDEN.to_vec(),
        }
    }
}

impl FuserParams {
    pub fn validate(&self) -> Result<()> {
        if self.candidates.is_empty() {
            return Err(Error::InvalidConfig("candidate subset is empty".into()));
        }
        let mut seen = self.candidates.clone();
        seen.sort_by_key(|c| c.index());
        seen.dedup();
        if seen.len() != self.candidates.len() {
            return Err(Error::InvalidConfig(
                "candidate subset has duplicates".into(),
            ));
        }
        if self.knn_k == 0 || self.knn_max_points == 0 {
            return Err(Error::InvalidConfig(
                "knn_k and knn_max_points must be positive".into(),
            ));
        }
        if self.hidden.contains(&0) {
            return Err(Error::InvalidConfig(
                "hidden layer widths must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.candidates.len() * (2 * self.context_radius + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FuserLearner {
    Median,
    Linreg {
        model: LinRegModel,
    },
    KnnReg {
        standardizer: Standardizer,
        model: KnnModel,
    },
    MlpIdx {
        standardizer: Standardizer,
        model: MlpModel,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F0Fuser {
    pub candidates: Vec<Candidate>,
    pub context_radius: usize,
    pub range: F0SearchRange,
    pub learner: FuserLearner,
}

impl F0Fuser {
    /// The untrained median fuser.
    pub fn median(params: &FuserParams, range: F0SearchRange) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            candidates: params.candidates.clone(),
            context_radius: params.context_radius,
            range,
            learner: FuserLearner::Median,
        })
    }

    pub fn kind(&self) -> FuserKind {
        match self.learner {
            FuserLearner::Median => FuserKind::Median,
            FuserLearner::Linreg { .. } => FuserKind::Linreg,
            FuserLearner::KnnReg { .. } => FuserKind::KnnReg,
            FuserLearner::MlpIdx { .. } => FuserKind::MlpIdx,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.candidates.len() * (2 * self.context_radius + 1)
    }

    fn fuse_frame(
        &self,
        candidates: &[F0CandidateVector],
        segment: &Range<usize>,
        k: usize,
    ) -> Result<f64> {
        let raw = match &self.learner {
            FuserLearner::Median => {
                let mut stack = median_stack(
                    candidates,
                    &self.candidates,
                    segment,
                    k,
                    self.context_radius,
                );
                stacked_median(&mut stack)
            }
            FuserLearner::Linreg { model } => model.predict(&stacked_row(
                candidates,
                &self.candidates,
                segment,
                k,
                self.context_radius,
            ))?,
            FuserLearner::KnnReg {
                standardizer,
                model,
            } => {
                let x = stacked_row(
                    candidates,
                    &self.candidates,
                    segment,
                    k,
                    self.context_radius,
                );
                model.regress(&standardizer.apply_one(&x)?)?
            }
            FuserLearner::MlpIdx {
                standardizer,
                model,
            } => {
                let x = stacked_row(
                    candidates,
                    &self.candidates,
                    segment,
                    k,
                    self.context_radius,
                );
                let idx = model.predict_class(&standardizer.apply_one(&x)?)?;
                candidates[k].get(self.candidates[idx])
            }
        };
        Ok(self.range.clamp(raw))
    }
}

/// Maximal runs of `true` in `mask`.
pub fn voiced_segments(mask: &[bool]) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = None;
    for (k, &v) in mask.iter().enumerate() {
        match (v, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                out.push(s..k);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(s..mask.len());
    }
    out
}

/// Median of `values` (mean of the two central values for even counts).
/// Sorts in place. Panics on an empty slice.
pub fn stacked_median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty stack");
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// All subset candidates of frames `k - radius ..= k + radius` that lie in
/// `segment`.
fn median_stack(
    candidates: &[F0CandidateVector],
    subset: &[Candidate],
    segment: &Range<usize>,
    k: usize,
    radius: usize,
) -> Vec<f64> {
    let lo = k.saturating_sub(radius).max(segment.start);
    let hi = (k + radius + 1).min(segment.end);
    (lo..hi)
        .flat_map(|j| subset.iter().map(move |&c| candidates[j].get(c)))
        .collect()
}

/// Fixed-size stacked input: neighbours outside `segment` are replaced by
/// the nearest frame inside it.
fn stacked_row(
    candidates: &[F0CandidateVector],
    subset: &[Candidate],
    segment: &Range<usize>,
    k: usize,
    radius: usize,
) -> Vec<f64> {
    let mut row = Vec::with_capacity(subset.len() * (2 * radius + 1));
    for off in 0..=2 * radius {
        let j = (k + off)
            .saturating_sub(radius)
            .clamp(segment.start, segment.end - 1);
        row.extend(subset.iter().map(|&c| candidates[j].get(c)));
    }
    row
}

/// Median-fused F0 for every frame of `mask` that is voiced; `None`
/// elsewhere.
pub fn fuse_median(
    candidates: &[F0CandidateVector],
    mask: &[bool],
    subset: &[Candidate],
    radius: usize,
) -> Result<Vec<Option<f64>>> {
    if subset.is_empty() {
        return Err(Error::InvalidConfig("candidate subset is empty".into()));
    }
    check_lengths(candidates.len(), mask.len())?;
    let mut out = vec![None; mask.len()];
    for seg in voiced_segments(mask) {
        for k in seg.clone() {
            let mut stack = median_stack(candidates, subset, &seg, k, radius);
            out[k] = Some(stacked_median(&mut stack));
        }
    }
    Ok(out)
}

fn check_lengths(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::LengthMismatch { left, right });
    }
    Ok(())
}

/// Trains a fuser on frames whose reference F0 is present. Context is
/// bounded by the reference voiced segments.
pub fn fit_fuser(
    candidates: &[F0CandidateVector],
    truth: &[Option<f64>],
    kind: FuserKind,
    params: &FuserParams,
    range: F0SearchRange,
    seed: u64,
) -> Result<F0Fuser> {
    params.validate()?;
    check_lengths(candidates.len(), truth.len())?;
    let mask: Vec<bool> = truth.iter().map(Option::is_some).collect();
    let segments = voiced_segments(&mask);
    if segments.is_empty() {
        return Err(Error::NoVoicedFrames);
    }
    if kind == FuserKind::Median {
        return F0Fuser::median(params, range);
    }
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    let mut centres = Vec::new();
    for seg in &segments {
        for k in seg.clone() {
            rows.push(stacked_row(
                candidates,
                &params.candidates,
                seg,
                k,
                params.context_radius,
            ));
            targets.push(truth[k].expect("voiced frame"));
            centres.push(k);
        }
    }
    let learner = match kind {
        FuserKind::Median => unreachable!(),
        FuserKind::Linreg => FuserLearner::Linreg {
            model: fit_linreg(&rows, &targets)?,
        },
        FuserKind::KnnReg => {
            let standardizer = Standardizer::fit(&rows)?;
            let mut data = standardizer.apply(&rows)?;
            let mut t = targets;
            if data.len() > params.knn_max_points {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut idx = sample(&mut rng, data.len(), params.knn_max_points).into_vec();
                idx.sort_unstable();
                data = idx.iter().map(|&i| data[i].clone()).collect();
                t = idx.iter().map(|&i| t[i]).collect();
            }
            FuserLearner::KnnReg {
                standardizer,
                model: KnnModel::new(params.knn_k, data, t)?,
            }
        }
        FuserKind::MlpIdx => {
            let n_classes = params.candidates.len();
            if n_classes < 2 {
                return Err(Error::InvalidConfig(
                    "mlp-idx needs two or more candidates".into(),
                ));
            }
            let standardizer = Standardizer::fit(&rows)?;
            let data = standardizer.apply(&rows)?;
            let labels: Vec<Vec<f64>> = centres
                .iter()
                .zip(&targets)
                .map(|(&k, &t)| {
                    let best = best_candidate(&candidates[k], &params.candidates, t);
                    (0..n_classes)
                        .map(|c| if c == best { 1.0 } else { 0.0 })
                        .collect()
                })
                .collect();
            let hyper = MlpHyper {
                seed,
                ..params.mlp.clone()
            };
            FuserLearner::MlpIdx {
                standardizer,
                model: fit_mlp(&data, &labels, Head::Softmax, &params.hidden, &hyper)?,
            }
        }
    };
    Ok(F0Fuser {
        candidates: params.candidates.clone(),
        context_radius: params.context_radius,
        range,
        learner,
    })
}

/// Position in `subset` of the candidate closest to `truth` (lowest
/// position on ties).
pub fn best_candidate(c: &F0CandidateVector, subset: &[Candidate], truth: f64) -> usize {
    let err = |i: usize| (c.get(subset[i]) - truth).abs();
    (1..subset.len()).fold(0, |best, i| if err(i) < err(best) { i } else { best })
}

/// Builds the pitch track: F0 on exactly the voiced frames, clipped to the
/// fuser's search range.
pub fn predict_track(
    grid: &FrameGrid,
    voicing: &[bool],
    candidates: &[F0CandidateVector],
    fuser: &F0Fuser,
) -> Result<PitchTrack> {
    check_lengths(candidates.len(), voicing.len())?;
    let mut f0 = vec![None; voicing.len()];
    let segments = voiced_segments(voicing);
    let fused: Vec<(usize, f64)> = segments
        .par_iter()
        .map(|seg| {
            seg.clone()
                .map(|k| fuser.fuse_frame(candidates, seg, k).map(|v| (k, v)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    for (k, v) in fused {
        f0[k] = Some(v);
    }
    PitchTrack::from_grid(grid, f0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn cands(values: &[[f64; 3]]) -> Vec<F0CandidateVector> {
        values
            .iter()
            .map(|v| {
                let mut c = [0.0; Candidate::COUNT];
                for (i, cand) in Candidate::RETAINED.iter().enumerate() {
                    c[cand.index()] = v[i];
                }
                F0CandidateVector(c)
            })
            .collect()
    }

    fn grid(n: usize) -> FrameGrid {
        FrameGrid::new(16000, n * 80).unwrap()
    }

    #[test]
    fn median_examples() {
        assert_eq!(stacked_median(&mut [180.0; 15]), 180.0);
        assert_eq!(
            stacked_median(&mut [100.0, 100.0, 100.0, 200.0, 100.0]),
            100.0
        );
        assert_eq!(stacked_median(&mut [1.0, 4.0, 2.0, 3.0]), 2.5);
        let c = cands(&[[180.0; 3]; 6]);
        let out = fuse_median(&c, &[true; 6], &Candidate::RETAINED, 2).unwrap();
        assert!(out.iter().all(|v| *v == Some(180.0)));
    }

    #[test]
    fn segments() {
        assert_eq!(
            voiced_segments(&[false, true, true, false, true]),
            vec![1..3, 4..5]
        );
        assert!(voiced_segments(&[false; 3]).is_empty());
        assert_eq!(voiced_segments(&[true; 2]), vec![0..2]);
    }

    #[test]
    fn one_frame_island_uses_own_candidates() {
        let c = cands(&[[300.0; 3], [100.0, 110.0, 120.0], [300.0; 3]]);
        let out = fuse_median(&c, &[false, true, false], &Candidate::RETAINED, 2).unwrap();
        assert_eq!(out, vec![None, Some(110.0), None]);
        let f = F0Fuser::median(&FuserParams::default(), F0SearchRange::default()).unwrap();
        let t = predict_track(&grid(3), &[false, true, false], &c, &f).unwrap();
        assert_eq!(t.f0, vec![None, Some(110.0), None]);
    }

    #[test]
    fn all_unvoiced_track_is_empty() {
        let c = cands(&[[150.0; 3]; 4]);
        let f = F0Fuser::median(&FuserParams::default(), F0SearchRange::default()).unwrap();
        let t = predict_track(&grid(4), &[false; 4], &c, &f).unwrap();
        assert_eq!(t.n_voiced(), 0);
        assert!(predict_track(&grid(4), &[false; 3], &c, &f).is_err());
    }

    #[test]
    fn output_is_clipped_to_range() {
        let c = cands(&[[30.0; 3], [900.0; 3]]);
        let f = F0Fuser::median(&FuserParams::default(), F0SearchRange::default()).unwrap();
        let t = predict_track(&grid(2), &[true, false], &c, &f).unwrap();
        assert_eq!(t.f0[0], Some(60.0));
        let t = predict_track(&grid(2), &[false, true], &c, &f).unwrap();
        assert_eq!(t.f0[1], Some(400.0));
    }

    #[test]
    fn knn_single_neighbour_returns_target() {
        let c = cands(&[
            [100.0, 120.0, 140.0],
            [200.0, 210.0, 190.0],
            [150.0, 160.0, 155.0],
        ]);
        let truth = vec![Some(111.0), Some(222.0), Some(155.5)];
        let params = FuserParams {
            context_radius: 0,
            knn_k: 1,
            ..Default::default()
        };
        let f = fit_fuser(
            &c,
            &truth,
            FuserKind::KnnReg,
            &params,
            F0SearchRange::default(),
            0,
        )
        .unwrap();
        let t = predict_track(&grid(3), &[true; 3], &c, &f).unwrap();
        assert_eq!(t.f0, truth);
    }

    #[test]
    fn mlp_idx_learns_exact_candidate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 2000;
        let truth: Vec<Option<f64>> = (0..n)
            .map(|k| Some(150.0 + 50.0 * (k as f64 * 0.01).sin()))
            .collect();
        let rows: Vec<[f64; 3]> = truth
            .iter()
            .map(|t| {
                let t = t.unwrap();
                [
                    t * rng.random_range(0.5..0.8),
                    t,
                    t * rng.random_range(1.3..1.9),
                ]
            })
            .collect();
        let c = cands(&rows);
        let f = fit_fuser(
            &c,
            &truth,
            FuserKind::MlpIdx,
            &FuserParams::default(),
            F0SearchRange::default(),
            0,
        )
        .unwrap();
        let t = predict_track(
            &FrameGrid::new(16000, n * 80).unwrap(),
            &vec![true; n],
            &c,
            &f,
        )
        .unwrap();
        let hits = t.f0.iter().zip(&truth).filter(|(a, b)| a == b).count();
        assert!(hits as f64 >= 0.99 * n as f64, "{hits}");
    }

    #[test]
    fn linreg_beats_best_single_candidate() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 10_000;
        let sd = [6.0, 8.0, 10.0];
        let truth: Vec<Option<f64>> = (0..n)
            .map(|k| Some(180.0 + 60.0 * (k as f64 * 0.003).sin()))
            .collect();
        let rows: Vec<[f64; 3]> = truth
            .iter()
            .map(|t| {
                let t = t.unwrap();
                let mut r = [0.0; 3];
                for (v, s) in r.iter_mut().zip(sd) {
                    *v = t + Normal::new(0.0, s).unwrap().sample(&mut rng);
                }
                r
            })
            .collect();
        let c = cands(&rows);
        let f = fit_fuser(
            &c,
            &truth,
            FuserKind::Linreg,
            &FuserParams::default(),
            F0SearchRange::default(),
            0,
        )
        .unwrap();
        let t = predict_track(
            &FrameGrid::new(16000, n * 80).unwrap(),
            &vec![true; n],
            &c,
            &f,
        )
        .unwrap();
        let var = |e: Vec<f64>| {
            let m = e.iter().sum::<f64>() / e.len() as f64;
            e.iter().map(|x| (x - m).powi(2)).sum::<f64>() / e.len() as f64
        };
        let fused = var(t
            .f0
            .iter()
            .zip(&truth)
            .map(|(a, b)| a.unwrap() - b.unwrap())
            .collect());
        let best_single = (0..3)
            .map(|i| {
                var(rows
                    .iter()
                    .zip(&truth)
                    .map(|(r, t)| r[i] - t.unwrap())
                    .collect())
            })
            .fold(f64::INFINITY, f64::min);
        assert!(fused < best_single, "{fused} vs {best_single}");
    }

    #[test]
    fn fit_errors() {
        let c = cands(&[[100.0; 3]; 3]);
        let p = FuserParams::default();
        let r = F0SearchRange::default();
        assert!(matches!(
            fit_fuser(&c, &[None; 3], FuserKind::Linreg, &p, r, 0),
            Err(Error::NoVoicedFrames)
        ));
        assert!(fit_fuser(&c, &[None; 2], FuserKind::Linreg, &p, r, 0).is_err());
        let empty = FuserParams {
            candidates: vec![],
            ..Default::default()
        };
        assert!(fit_fuser(&c, &[Some(1.0); 3], FuserKind::Median, &empty, r, 0).is_err());
        assert_eq!("mlp-idx".parse::<FuserKind>().unwrap(), FuserKind::MlpIdx);
        assert!("tree".parse::<FuserKind>().is_err());
    }

    proptest! {
        #[test]
        fn median_within_stack_bounds(mut v in proptest::collection::vec(50.0f64..500.0, 1..40)) {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let m = stacked_median(&mut v);
            prop_assert!(lo <= m && m <= hi);
        }

        #[test]
        fn median_permutation_invariant(v in proptest::collection::vec(50.0f64..500.0, 1..30), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut a = v.clone();
            let mut b = v;
            b.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(stacked_median(&mut a), stacked_median(&mut b));
        }

        #[test]
        fn minority_corruption_stays_in_clean_range(
            clean in proptest::collection::vec(100.0f64..200.0, 1..12),
            bad in proptest::collection::vec(prop_oneof![0.0f64..50.0, 1000.0f64..5000.0], 0..12),
        ) {
            prop_assume!(bad.len() < clean.len());
            let lo = clean.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = clean.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut all: Vec<f64> = clean.iter().chain(&bad).copied().collect();
            let m = stacked_median(&mut all);
            prop_assert!(lo <= m && m <= hi, "{m} outside [{lo}, {hi}]");
        }

        #[test]
        fn f0_exactly_on_voiced_frames(mask in proptest::collection::vec(any::<bool>(), 1..60)) {
            let c = cands(&vec![[120.0, 125.0, 130.0]; mask.len()]);
            let f = F0Fuser::median(&FuserParams::default(), F0SearchRange::default()).unwrap();
            let t = predict_track(&grid(mask.len()), &mask, &c, &f).unwrap();
            prop_assert_eq!(t.voicing(), mask);
        }
    }
}
