//! Frame-wise pitch contours and their CSV form.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::FrameGrid;

pub const TRACK_CSV_HEADER: &str = "time_s,voiced,f0_hz";

/// Per-frame voicing and F0. A frame is voiced exactly when its F0 is
/// present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitchTrack {
    pub times: Vec<f64>,
    pub f0: Vec<Option<f64>>,
}

impl PitchTrack {
    pub fn new(times: Vec<f64>, f0: Vec<Option<f64>>) -> Result<Self> {
        if times.len() != f0.len() {
            return Err(Error::LengthMismatch {
                left: times.len(),
                right: f0.len(),
            });
        }
        if let Some(bad) = f0.iter().flatten().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Parse {
                what: "pitch track".into(),
                detail: format!("invalid F0 value {bad}"),
            });
        }
        Ok(Self { times, f0 })
    }

    /// Track on `grid` with frame times taken from the grid.
    pub fn from_grid(grid: &FrameGrid, f0: Vec<Option<f64>>) -> Result<Self> {
        let times = (0..f0.len()).map(|k| grid.time_of(k)).collect();
        Self::new(times, f0)
    }

    pub fn unvoiced(grid: &FrameGrid) -> Self {
        Self {
            times: (0..grid.n_frames).map(|k| grid.time_of(k)).collect(),
            f0: vec![None; grid.n_frames],
        }
    }

    pub fn len(&self) -> usize {
        self.f0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f0.is_empty()
    }

    pub fn is_voiced(&self, k: usize) -> bool {
        self.f0[k].is_some()
    }

    pub fn voicing(&self) -> Vec<bool> {
        self.f0.iter().map(Option::is_some).collect()
    }

    pub fn n_voiced(&self) -> usize {
        self.f0.iter().filter(|v| v.is_some()).count()
    }

    /// Keeps the first `n` frames.
    pub fn truncate(&mut self, n: usize) {
        self.times.truncate(n);
        self.f0.truncate(n);
    }

    /// Writes the CSV form. Floats use the shortest representation that
    /// parses back to the same value.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "{TRACK_CSV_HEADER}")?;
        for (t, f) in self.times.iter().zip(&self.f0) {
            match f {
                Some(v) => writeln!(out, "{t},1,{v}")?,
                None => writeln!(out, "{t},0,")?,
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn read_csv(input: impl BufRead) -> Result<Self> {
        let err = |line: usize, detail: String| Error::Parse {
            what: "pitch track CSV".into(),
            detail: format!("line {line}: {detail}"),
        };
        let mut lines = input.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if header.trim() != TRACK_CSV_HEADER {
            return Err(err(1, format!("expected header {TRACK_CSV_HEADER:?}")));
        }
        let mut times = Vec::new();
        let mut f0 = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let n = i + 2;
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(err(n, format!("expected 3 columns, found {}", cols.len())));
            }
            let t: f64 = cols[0]
                .parse()
                .map_err(|_| err(n, format!("bad time {:?}", cols[0])))?;
            let value = match (cols[1], cols[2]) {
                ("0", "") => None,
                ("1", v) => Some(
                    v.parse::<f64>()
                        .map_err(|_| err(n, format!("bad F0 {v:?}")))?,
                ),
                (v, f) => return Err(err(n, format!("inconsistent voicing {v:?} with F0 {f:?}"))),
            };
            times.push(t);
            f0.push(value);
        }
        Self::new(times, f0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn csv_layout() {
        let t = PitchTrack::new(vec![0.0, 0.005], vec![None, Some(123.5)]).unwrap();
        assert_eq!(
            t.to_csv_string(),
            "time_s,voiced,f0_hz\n0,0,\n0.005,1,123.5\n"
        );
    }

    #[test]
    fn rejects_inconsistent_rows() {
        for body in [
            "0,1,\n",
            "0,0,100\n",
            "0,2,\n",
            "0,1,abc\n",
            "0,1,-5\n",
            "x,0,\n",
        ] {
            let text = format!("{TRACK_CSV_HEADER}\n{body}");
            assert!(PitchTrack::read_csv(text.as_bytes()).is_err(), "{body:?}");
        }
        assert!(PitchTrack::read_csv("a,b,c\n".as_bytes()).is_err());
    }

    #[test]
    fn grid_times() {
        let g = FrameGrid::new(16000, 16000).unwrap();
        let t = PitchTrack::unvoiced(&g);
        assert_eq!(t.len(), 200);
        assert_eq!(t.times[3], 0.015);
        assert_eq!(t.n_voiced(), 0);
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_bit_exact(rows in proptest::collection::vec((0.0f64..1e4, proptest::option::of(1e-3f64..1e5)), 0..50)) {
            let (times, f0): (Vec<f64>, Vec<Option<f64>>) = rows.into_iter().unzip();
            let t = PitchTrack::new(times, f0).unwrap();
            let back = PitchTrack::read_csv(t.to_csv_string().as_bytes()).unwrap();
            prop_assert_eq!(back.times.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), t.times.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            prop_assert_eq!(back.f0.iter().map(|v| v.map(f64::to_bits)).collect::<Vec<_>>(), t.f0.iter().map(|v| v.map(f64::to_bits)).collect::<Vec<_>>());
        }
    }
}
