//! Pitch-tracking error metrics and feature informativeness.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::track::PitchTrack;

/// Relative F0 deviation above which a frame counts as a gross error.
pub const GROSS_ERROR_THRESHOLD: f64 = 0.2;
pub const DEFAULT_NMI_BINS: usize = 32;

/// Frame tallies shared by all metrics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameTally {
    pub n_frames: usize,
    pub voiced_to_unvoiced: usize,
    pub unvoiced_to_voiced: usize,
    pub both_voiced: usize,
    pub gross: usize,
    /// Percent relative errors of the both-voiced frames within threshold.
    pub fine_errors: Vec<f64>,
}

impl FrameTally {
    pub fn new(pred: &PitchTrack, reference: &PitchTrack, threshold: f64) -> Result<Self> {
        if pred.len() != reference.len() {
            return Err(Error::LengthMismatch {
                left: pred.len(),
                right: reference.len(),
            });
        }
        let mut t = FrameTally {
            n_frames: pred.len(),
            ..Default::default()
        };
        t.add(pred, reference, threshold);
        Ok(t)
    }

    fn add(&mut self, pred: &PitchTrack, reference: &PitchTrack, threshold: f64) {
        for (p, r) in pred.f0.iter().zip(&reference.f0) {
            match (p, r) {
                (None, Some(_)) => self.voiced_to_unvoiced += 1,
                (Some(_), None) => self.unvoiced_to_voiced += 1,
                (Some(p), Some(r)) => {
                    self.both_voiced += 1;
                    let rel = (p - r) / r;
                    if rel.abs() > threshold {
                        self.gross += 1;
                    } else {
                        self.fine_errors.push(100.0 * rel);
                    }
                }
                (None, None) => {}
            }
        }
    }

    /// Pools another pair of tracks into the tally.
    pub fn merge(
        &mut self,
        pred: &PitchTrack,
        reference: &PitchTrack,
        threshold: f64,
    ) -> Result<()> {
        let other = FrameTally::new(pred, reference, threshold)?;
        self.n_frames += other.n_frames;
        self.voiced_to_unvoiced += other.voiced_to_unvoiced;
        self.unvoiced_to_voiced += other.unvoiced_to_voiced;
        self.both_voiced += other.both_voiced;
        self.gross += other.gross;
        self.fine_errors.extend(other.fine_errors);
        Ok(())
    }

    fn percent(&self, count: usize) -> f64 {
        if self.n_frames == 0 {
            0.0
        } else {
            100.0 * count as f64 / self.n_frames as f64
        }
    }

    pub fn vde(&self) -> f64 {
        self.percent(self.voiced_to_unvoiced + self.unvoiced_to_voiced)
    }

    pub fn gpe(&self) -> Option<f64> {
        (self.both_voiced > 0).then(|| 100.0 * self.gross as f64 / self.both_voiced as f64)
    }

    /// Population standard deviation of the fine relative errors.
    pub fn fpe(&self) -> Option<f64> {
        if self.fine_errors.is_empty() {
            return None;
        }
        let n = self.fine_errors.len() as f64;
        let mean = self.fine_errors.iter().sum::<f64>() / n;
        Some(
            (self
                .fine_errors
                .iter()
                .map(|e| (e - mean).powi(2))
                .sum::<f64>()
                / n)
                .sqrt(),
        )
    }

    pub fn ffe(&self) -> f64 {
        self.percent(self.voiced_to_unvoiced + self.unvoiced_to_voiced + self.gross)
    }

    pub fn report(&self) -> EvalReport {
        EvalReport {
            vde: self.vde(),
            gpe: self.gpe(),
            fpe: self.fpe(),
            ffe: self.ffe(),
            n_frames: self.n_frames,
            voiced_to_unvoiced: self.percent(self.voiced_to_unvoiced),
            unvoiced_to_voiced: self.percent(self.unvoiced_to_voiced),
        }
    }
}

/// Voicing decision error in percent of all frames.
pub fn vde(pred: &PitchTrack, reference: &PitchTrack) -> Result<f64> {
    Ok(FrameTally::new(pred, reference, GROSS_ERROR_THRESHOLD)?.vde())
}

/// Gross pitch error in percent of both-voiced frames; `None` when no frame
/// is voiced in both.
pub fn gpe(pred: &PitchTrack, reference: &PitchTrack, threshold: f64) -> Result<Option<f64>> {
    Ok(FrameTally::new(pred, reference, threshold)?.gpe())
}

/// Fine pitch error: standard deviation in percent of the relative error
/// over both-voiced frames without a gross error.
pub fn fpe(pred: &PitchTrack, reference: &PitchTrack, threshold: f64) -> Result<Option<f64>> {
    Ok(FrameTally::new(pred, reference, threshold)?.fpe())
}

/// F0 frame error: voicing errors plus gross errors, in percent of all frames.
pub fn ffe(pred: &PitchTrack, reference: &PitchTrack, threshold: f64) -> Result<f64> {
    Ok(FrameTally::new(pred, reference, threshold)?.ffe())
}

/// All metrics in percent. `gpe` and `fpe` are absent when their
/// denominators are empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub vde: f64,
    pub gpe: Option<f64>,
    pub fpe: Option<f64>,
    pub ffe: f64,
    pub n_frames: usize,
    /// Reference-voiced frames predicted unvoiced, in percent of all frames.
    pub voiced_to_unvoiced: f64,
    /// Reference-unvoiced frames predicted voiced, in percent of all frames.
    pub unvoiced_to_voiced: f64,
}

impl EvalReport {
    pub fn evaluate(pred: &PitchTrack, reference: &PitchTrack) -> Result<Self> {
        Ok(FrameTally::new(pred, reference, GROSS_ERROR_THRESHOLD)?.report())
    }

    /// Aligned plain-text table.
    pub fn to_table(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3}"));
        let rows = [
            ("VDE (%)", fmt(Some(self.vde))),
            ("  voiced->unvoiced (%)", fmt(Some(self.voiced_to_unvoiced))),
            ("  unvoiced->voiced (%)", fmt(Some(self.unvoiced_to_voiced))),
            ("GPE (%)", fmt(self.gpe)),
            ("FPE (%)", fmt(self.fpe)),
            ("FFE (%)", fmt(Some(self.ffe))),
            ("frames", self.n_frames.to_string()),
        ];
        let mut out = String::new();
        for (name, value) in rows {
            let _ = writeln!(out, "{name:<24}{value:>12}");
        }
        out
    }
}

/// Per-speaker reports (frames pooled within a speaker) and their unweighted
/// mean across speakers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub per_speaker: BTreeMap<String, EvalReport>,
    pub mean: EvalReport,
}

impl CorpusReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<16}{:>10}{:>10}{:>10}{:>10}{:>10}",
            "speaker", "VDE", "GPE", "FPE", "FFE", "frames"
        );
        let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3}"));
        let mut line = |name: &str, r: &EvalReport| {
            let _ = writeln!(
                out,
                "{:<16}{:>10}{:>10}{:>10}{:>10}{:>10}",
                name,
                fmt(Some(r.vde)),
                fmt(r.gpe),
                fmt(r.fpe),
                fmt(Some(r.ffe)),
                r.n_frames
            );
        };
        for (s, r) in &self.per_speaker {
            line(s, r);
        }
        line("mean", &self.mean);
        out
    }
}

/// Evaluates `(speaker, prediction, reference)` triples giving every
/// speaker equal weight.
pub fn evaluate_by_speaker<'a>(
    items: impl IntoIterator<Item = (&'a str, &'a PitchTrack, &'a PitchTrack)>,
) -> Result<CorpusReport> {
    let mut tallies: BTreeMap<String, FrameTally> = BTreeMap::new();
    for (speaker, pred, reference) in items {
        tallies.entry(speaker.to_string()).or_default().merge(
            pred,
            reference,
            GROSS_ERROR_THRESHOLD,
        )?;
    }
    if tallies.is_empty() {
        return Err(Error::EmptyManifest);
    }
    let per_speaker: BTreeMap<String, EvalReport> = tallies
        .iter()
        .map(|(s, t)| (s.clone(), t.report()))
        .collect();
    let reports: Vec<&EvalReport> = per_speaker.values().collect();
    let mean_of = |f: &dyn Fn(&EvalReport) -> f64| {
        reports.iter().map(|r| f(r)).sum::<f64>() / reports.len() as f64
    };
    let mean_opt = |f: &dyn Fn(&EvalReport) -> Option<f64>| {
        let v: Vec<f64> = reports.iter().filter_map(|r| f(r)).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    let mean = EvalReport {
        vde: mean_of(&|r| r.vde),
        gpe: mean_opt(&|r| r.gpe),
        fpe: mean_opt(&|r| r.fpe),
        ffe: mean_of(&|r| r.ffe),
        n_frames: reports.iter().map(|r| r.n_frames).sum(),
        voiced_to_unvoiced: mean_of(&|r| r.voiced_to_unvoiced),
        unvoiced_to_voiced: mean_of(&|r| r.unvoiced_to_voiced),
    };
    Ok(CorpusReport { per_speaker, mean })
}

/// Equal-frequency bin index per value. Equal values always share a bin,
/// so bins can be uneven or empty.
pub fn equal_frequency_bins(values: &[f64], n_bins: usize) -> Vec<usize> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut bins = vec![0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let bin = (start * n_bins / n).min(n_bins - 1);
        for &i in &order[start..end] {
            bins[i] = bin;
        }
        start = end;
    }
    bins
}

fn entropy(counts: impl Iterator<Item = usize>, total: usize) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / total as f64;
            -p * p.ln()
        })
        .sum()
}

/// Mutual information between the binned feature and the voicing labels,
/// divided by the label entropy, in `[0, 1]`.
pub fn nmi(feature: &[f64], labels: &[bool], n_bins: usize) -> Result<f64> {
    if feature.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: feature.len(),
            right: labels.len(),
        });
    }
    if feature.len() < 2 {
        return Err(Error::NotEnoughData {
            needed: 2,
            got: feature.len(),
        });
    }
    if n_bins < 2 {
        return Err(Error::InvalidConfig(format!(
            "NMI needs at least 2 bins, got {n_bins}"
        )));
    }
    if feature.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("non-finite feature value".into()));
    }
    let n = labels.len();
    let n_voiced = labels.iter().filter(|&&l| l).count();
    if n_voiced == 0 || n_voiced == n {
        return Err(Error::SingleClass);
    }
    let bins = equal_frequency_bins(feature, n_bins);
    let mut joint = vec![[0usize; 2]; n_bins];
    for (&b, &l) in bins.iter().zip(labels) {
        joint[b][l as usize] += 1;
    }
    let h_y = entropy([n - n_voiced, n_voiced].into_iter(), n);
    let h_y_given_x: f64 = joint
        .iter()
        .map(|c| {
            let total = c[0] + c[1];
            if total == 0 {
                0.0
            } else {
                total as f64 / n as f64 * entropy(c.iter().copied(), total)
            }
        })
        .sum();
    Ok(((h_y - h_y_given_x) / h_y).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn track(f0: Vec<Option<f64>>) -> PitchTrack {
        let times = (0..f0.len()).map(|k| k as f64 * 0.005).collect();
        PitchTrack::new(times, f0).unwrap()
    }

    #[test]
    fn vde_examples() {
        let r = track(vec![Some(100.0); 200]);
        assert_eq!(vde(&r, &r).unwrap(), 0.0);
        let inv = track(vec![None; 200]);
        assert_eq!(vde(&inv, &r).unwrap(), 100.0);
        let mut p = r.clone();
        for k in [3, 50, 199] {
            p.f0[k] = None;
        }
        assert_eq!(vde(&p, &r).unwrap(), 1.5);
        assert!(vde(&track(vec![None; 3]), &r).is_err());
    }

    #[test]
    fn gpe_examples() {
        let r = track(vec![Some(150.0); 50]);
        assert_eq!(gpe(&r, &r, 0.2).unwrap(), Some(0.0));
        let oct = track(vec![Some(300.0); 50]);
        assert_eq!(gpe(&oct, &r, 0.2).unwrap(), Some(100.0));
        let mut one = r.clone();
        one.f0[7] = Some(300.0);
        assert_eq!(gpe(&one, &r, 0.2).unwrap(), Some(2.0));
        assert_eq!(gpe(&track(vec![None; 50]), &r, 0.2).unwrap(), None);
    }

    #[test]
    fn fpe_examples() {
        let r = track(vec![Some(100.0); 40]);
        assert_eq!(fpe(&r, &r, 0.2).unwrap(), Some(0.0));
        let alt = track(
            (0..40)
                .map(|k| Some(if k % 2 == 0 { 102.0 } else { 98.0 }))
                .collect(),
        );
        assert!((fpe(&alt, &r, 0.2).unwrap().unwrap() - 2.0).abs() < 1e-12);
        let bias = track(vec![Some(105.0); 40]);
        assert!(fpe(&bias, &r, 0.2).unwrap().unwrap() < 1e-12);
        assert_eq!(fpe(&track(vec![Some(300.0); 40]), &r, 0.2).unwrap(), None);
    }

    #[test]
    fn ffe_examples() {
        let r = track(vec![Some(100.0); 100]);
        assert_eq!(ffe(&r, &r, 0.2).unwrap(), 0.0);
        assert_eq!(ffe(&track(vec![None; 100]), &r, 0.2).unwrap(), 100.0);
        let mut p = r.clone();
        p.f0[0] = None;
        p.f0[1] = None;
        p.f0[2] = Some(200.0);
        assert_eq!(ffe(&p, &r, 0.2).unwrap(), 3.0);
    }

    #[test]
    fn report_breakdown_and_table() {
        let r = track(vec![Some(100.0), Some(100.0), None, None, Some(100.0)]);
        let p = track(vec![None, Some(100.0), Some(120.0), None, Some(500.0)]);
        let rep = EvalReport::evaluate(&p, &r).unwrap();
        assert!((rep.vde - rep.voiced_to_unvoiced - rep.unvoiced_to_voiced).abs() < 1e-9);
        assert!(rep.ffe >= rep.vde);
        assert_eq!(rep.gpe, Some(50.0));
        let table = rep.to_table();
        assert!(table.contains("VDE (%)") && table.contains("40.000"));
        let json = serde_json::to_string(&rep).unwrap();
        assert_eq!(serde_json::from_str::<EvalReport>(&json).unwrap(), rep);
    }

    #[test]
    fn speakers_weigh_equally() {
        let r1 = track(vec![Some(100.0); 10]);
        let p1 = track(vec![None; 10]);
        let r2 = track(vec![Some(100.0); 1000]);
        let rep = evaluate_by_speaker([("a", &p1, &r1), ("b", &r2, &r2)]).unwrap();
        assert_eq!(rep.mean.vde, 50.0);
        assert_eq!(rep.per_speaker["a"].vde, 100.0);
        assert_eq!(rep.mean.gpe, Some(0.0));
        assert!(rep.to_table().contains("mean"));
        // two utterances of one speaker are pooled
        let rep = evaluate_by_speaker([("a", &p1, &r1), ("a", &r2, &r2)]).unwrap();
        assert_eq!(rep.per_speaker["a"].n_frames, 1010);
    }

    #[test]
    fn nmi_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let labels: Vec<bool> = (0..10_000).map(|_| rng.random_bool(0.4)).collect();
        let same: Vec<f64> = labels.iter().map(|&l| l as u8 as f64).collect();
        assert_eq!(nmi(&same, &labels, 32).unwrap(), 1.0);
        let mut shuffled = same.clone();
        shuffled.shuffle(&mut rng);
        let noise: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        assert!(nmi(&noise, &labels, 32).unwrap() < 0.05);
        assert!(nmi(&shuffled, &labels, 32).unwrap() < 0.05);
        assert!(matches!(
            nmi(&same, &vec![true; 10_000], 32),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn nmi_monotone_in_flip_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let labels: Vec<bool> = (0..10_000).map(|_| rng.random_bool(0.5)).collect();
        let values: Vec<f64> = [0.0, 0.1, 0.3, 0.5]
            .iter()
            .map(|&rate| {
                let f: Vec<f64> = labels
                    .iter()
                    .map(|&l| (l ^ rng.random_bool(rate)) as u8 as f64 + rng.random::<f64>() * 0.5)
                    .collect();
                nmi(&f, &labels, 32).unwrap()
            })
            .collect();
        assert!(values[0] > 0.95, "{values:?}");
        assert!(0.0 < values[1] && values[1] < 1.0);
        assert!(values.windows(2).all(|w| w[0] > w[1]), "{values:?}");
    }

    #[test]
    fn ties_share_bins() {
        let b = equal_frequency_bins(&[1.0, 1.0, 1.0, 2.0], 4);
        assert_eq!(b, vec![0, 0, 0, 3]);
    }

    /// Independent counting oracle over explicit frame lists.
    fn oracle(p: &[Option<f64>], r: &[Option<f64>]) -> (f64, Option<f64>, Option<f64>, f64) {
        let n = p.len() as f64;
        let mut voicing_errors = 0;
        let mut both = 0;
        let mut gross = 0;
        let mut fine = vec![];
        for i in 0..p.len() {
            if p[i].is_some() != r[i].is_some() {
                voicing_errors += 1;
            }
            if let (Some(a), Some(b)) = (p[i], r[i]) {
                both += 1;
                if ((a - b) / b).abs() > 0.2 {
                    gross += 1;
                } else {
                    fine.push(100.0 * (a - b) / b);
                }
            }
        }
        let gpe = (both > 0).then(|| 100.0 * gross as f64 / both as f64);
        let fpe = (!fine.is_empty()).then(|| {
            let m = fine.iter().sum::<f64>() / fine.len() as f64;
            (fine.iter().map(|e| (e - m) * (e - m)).sum::<f64>() / fine.len() as f64).sqrt()
        });
        (
            100.0 * voicing_errors as f64 / n,
            gpe,
            fpe,
            100.0 * (voicing_errors + gross) as f64 / n,
        )
    }

    proptest! {
        #[test]
        fn metrics_match_oracle(frames in proptest::collection::vec(
            (proptest::option::of(50.0f64..500.0), proptest::option::of(50.0f64..500.0)), 1..40)) {
            let (p, r): (Vec<_>, Vec<_>) = frames.into_iter().unzip();
            let rep = EvalReport::evaluate(&track(p.clone()), &track(r.clone())).unwrap();
            let (v, g, f, e) = oracle(&p, &r);
            prop_assert_eq!(rep.vde, v);
            prop_assert_eq!(rep.gpe, g);
            prop_assert_eq!(rep.ffe, e);
            match (rep.fpe, f) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-9),
                (a, b) => prop_assert_eq!(a, b),
            }
            prop_assert!(rep.ffe >= rep.vde);
            prop_assert!((rep.vde - rep.voiced_to_unvoiced - rep.unvoiced_to_voiced).abs() < 1e-9);
        }

        #[test]
        fn metrics_permutation_invariant(frames in proptest::collection::vec(
            (proptest::option::of(50.0f64..500.0), proptest::option::of(50.0f64..500.0)), 1..30), seed in any::<u64>()) {
            let mut shuffled = frames.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let eval = |f: &Vec<(Option<f64>, Option<f64>)>| {
                let (p, r): (Vec<_>, Vec<_>) = f.iter().copied().unzip();
                EvalReport::evaluate(&track(p), &track(r)).unwrap()
            };
            let (a, b) = (eval(&frames), eval(&shuffled));
            prop_assert_eq!(a.vde, b.vde);
            prop_assert_eq!(a.gpe, b.gpe);
            prop_assert_eq!(a.ffe, b.ffe);
        }

        #[test]
        fn nmi_monotone_transform_invariant(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let labels: Vec<bool> = (0..500).map(|_| rng.random_bool(0.5)).collect();
            let f: Vec<f64> = labels.iter().map(|&l| l as u8 as f64 + rng.random::<f64>() * 1.5).collect();
            let g: Vec<f64> = f.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
            let a = nmi(&f, &labels, 32).unwrap();
            prop_assert_eq!(a, nmi(&g, &labels, 32).unwrap());
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}
