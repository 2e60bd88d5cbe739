use serde::{Deserialize, Serialize};

use super::squared_distance;
use super::standardize::check_dim;
use crate::error::{Error, Result};

/// Brute-force nearest neighbours over stored (standardized) points.
///
/// Distance ties are broken by the lower training index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub points: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl KnnModel {
    pub fn new(k: usize, points: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        if points.is_empty() || k == 0 {
            return Err(Error::NotEnoughData {
                needed: k.max(1),
                got: points.len(),
            });
        }
        if points.len() != targets.len() {
            return Err(Error::LengthMismatch {
                left: points.len(),
                right: targets.len(),
            });
        }
        let dim = points[0].len();
        for p in &points {
            check_dim(dim, p.len())?;
        }
        Ok(Self { k, points, targets })
    }

    /// Binary classifier; `k` must be odd so votes cannot tie.
    pub fn classifier(k: usize, points: Vec<Vec<f64>>, labels: &[bool]) -> Result<Self> {
        if k.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "KNN classifier needs odd k, got {k}"
            )));
        }
        Self::new(
            k,
            points,
            labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    /// Indices of the `k` nearest training points, nearest first.
    pub fn neighbours(&self, query: &[f64]) -> Result<Vec<usize>> {
        check_dim(self.dim(), query.len())?;
        let mut d: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (squared_distance(p, query), i))
            .collect();
        let k = self.k.min(d.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, cmp);
            d.truncate(k);
        }
        d.sort_by(cmp);
        Ok(d.into_iter().map(|(_, i)| i).collect())
    }

    /// Majority vote of the neighbours' labels.
    pub fn classify(&self, query: &[f64]) -> Result<bool> {
        let nn = self.neighbours(query)?;
        let votes = nn.iter().filter(|&&i| self.targets[i] > 0.5).count();
        Ok(2 * votes > nn.len())
    }

    /// Mean of the neighbours' targets.
    pub fn regress(&self, query: &[f64]) -> Result<f64> {
        let nn = self.neighbours(query)?;
        Ok(nn.iter().map(|&i| self.targets[i]).sum::<f64>() / nn.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_match_with_k1() {
        let m = KnnModel::classifier(
            1,
            vec![vec![0.0], vec![1.0], vec![2.0]],
            &[false, true, false],
        )
        .unwrap();
        assert!(m.classify(&[1.0]).unwrap());
        let r = KnnModel::new(1, vec![vec![0.0], vec![1.0]], vec![5.0, 7.0]).unwrap();
        assert_eq!(r.regress(&[1.0]).unwrap(), 7.0);
    }

    #[test]
    fn three_two_vote() {
        // three voiced points close by, two unvoiced slightly further, one far unvoiced
        let pts = vec![
            vec![0.1],
            vec![-0.1],
            vec![0.2],
            vec![0.3],
            vec![-0.3],
            vec![5.0],
        ];
        let labels = [true, true, true, false, false, false];
        let m = KnnModel::classifier(5, pts, &labels).unwrap();
        assert!(m.classify(&[0.0]).unwrap());
    }

    #[test]
    fn equidistant_tie_prefers_lower_index() {
        let m = KnnModel::classifier(1, vec![vec![-1.0], vec![1.0]], &[false, true]).unwrap();
        assert!(!m.classify(&[0.0]).unwrap());
        let m = KnnModel::classifier(1, vec![vec![1.0], vec![-1.0]], &[true, false]).unwrap();
        assert!(m.classify(&[0.0]).unwrap());
    }

    #[test]
    fn errors() {
        let m = KnnModel::new(1, vec![vec![0.0, 1.0]], vec![1.0]).unwrap();
        assert!(matches!(
            m.regress(&[0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(KnnModel::classifier(4, vec![vec![0.0]], &[true]).is_err());
        assert!(KnnModel::new(5, vec![], vec![]).is_err());
    }
}
