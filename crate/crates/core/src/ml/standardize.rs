use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard deviations below this are replaced by it.
pub const STD_FLOOR: f64 = 1e-8;

/// Per-dimension z-scoring fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(data: &[Vec<f64>]) -> Result<Self> {
        let first = data
            .first()
            .ok_or(Error::NotEnoughData { needed: 1, got: 0 })?;
        let dim = first.len();
        let n = data.len() as f64;
        let mut mean = vec![0.0; dim];
        for row in data {
            check_dim(dim, row.len())?;
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for row in data {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| (s / n).sqrt().max(STD_FLOOR))
            .collect();
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_one(&self, row: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), row.len())?;
        Ok(row
            .iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect())
    }

    pub fn apply(&self, data: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        data.iter().map(|r| self.apply_one(r)).collect()
    }

    pub fn inverse_one(&self, row: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), row.len())?;
        Ok(row
            .iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((z, m), s)| z * s + m)
            .collect())
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_mean_unit_std() {
        let data: Vec<Vec<f64>> = (0..50)
            .map(|i| vec![i as f64, (i * i) as f64 * 0.1 - 3.0])
            .collect();
        let s = Standardizer::fit(&data).unwrap();
        let z = s.apply(&data).unwrap();
        for d in 0..2 {
            let m: f64 = z.iter().map(|r| r[d]).sum::<f64>() / 50.0;
            let v: f64 = z.iter().map(|r| (r[d] - m).powi(2)).sum::<f64>() / 50.0;
            assert!(m.abs() < 1e-9);
            assert!((v.sqrt() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_dimension_maps_to_zero() {
        let data = vec![vec![3.0, 1.0], vec![3.0, 2.0]];
        let s = Standardizer::fit(&data).unwrap();
        assert_eq!(s.std[0], STD_FLOOR);
        assert!(s.apply(&data).unwrap().iter().all(|r| r[0] == 0.0));
    }

    #[test]
    fn dimension_mismatch() {
        let s = Standardizer::fit(&[vec![1.0, 2.0], vec![2.0, 3.0]]).unwrap();
        assert!(matches!(
            s.apply_one(&[1.0]),
            Err(Error::DimensionMismatch {
                expected: 2,
                got: 1
            })
        ));
        assert!(Standardizer::fit(&[]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(rows in proptest::collection::vec(proptest::collection::vec(-1e3f64..1e3, 3), 2..20)) {
            let s = Standardizer::fit(&rows).unwrap();
            for r in &rows {
                let back = s.inverse_one(&s.apply_one(r).unwrap()).unwrap();
                for (a, b) in back.iter().zip(r) {
                    prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
                }
            }
        }
    }
}
