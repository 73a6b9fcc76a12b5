use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{Masker, RESAMPLE_COUNT};
use crate::error::{Error, Result};
use crate::explanation::FeatureSubset;
use crate::model::Dataset;

const IMPUTE_RIDGE: f64 = 1e-6;

/// Training statistics the maskers draw on.
#[derive(Debug, Clone)]
pub struct MaskStats {
    means: Vec<f64>,
    covariance: DMatrix<f64>,
    rows: Vec<Vec<f64>>,
    resample_count: usize,
}

impl MaskStats {
    /// Column means and covariance ignore missing values (covariance uses
    /// mean-filled rows).
    pub fn from_dataset(train: &Dataset) -> Result<Self> {
        if train.num_rows() < 2 {
            return Err(Error::Data("masking statistics need at least two training rows".into()));
        }
        let m = train.num_columns();
        let means: Vec<f64> = (0..m)
            .map(|j| {
                let (s, c) = train
                    .rows()
                    .iter()
                    .filter(|r| !r[j].is_nan())
                    .fold((0.0, 0usize), |(s, c), r| (s + r[j], c + 1));
                if c == 0 {
                    0.0
                } else {
                    s / c as f64
                }
            })
            .collect();
        let n = train.num_rows();
        let centered = DMatrix::from_fn(n, m, |i, j| {
            let v = train.rows()[i][j];
            if v.is_nan() {
                0.0
            } else {
                v - means[j]
            }
        });
        let covariance = centered.transpose() * &centered / (n - 1) as f64;
        Ok(Self {
            means,
            covariance,
            rows: train.rows().to_vec(),
            resample_count: RESAMPLE_COUNT,
        })
    }

    /// Builds statistics from explicit means and covariance (rows are used
    /// by the resample masker).
    pub fn from_moments(means: Vec<f64>, covariance: Vec<Vec<f64>>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = means.len();
        if covariance.len() != m || covariance.iter().any(|r| r.len() != m) {
            return Err(Error::Dimension {
                expected: m,
                got: covariance.len(),
            });
        }
        Ok(Self {
            means,
            covariance: DMatrix::from_fn(m, m, |i, j| covariance[i][j]),
            rows,
            resample_count: RESAMPLE_COUNT,
        })
    }

    pub fn with_resample_count(mut self, n: usize) -> Self {
        self.resample_count = n.max(1);
        self
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    fn impute(&self, x: &[f64], hidden: &FeatureSubset) -> Vec<f64> {
        let h: Vec<usize> = hidden.indices().collect();
        let o: Vec<usize> = (0..x.len()).filter(|&i| !hidden.contains(i)).collect();
        let mut out = x.to_vec();
        if h.is_empty() {
            return out;
        }
        for &i in &h {
            out[i] = self.means[i];
        }
        if o.is_empty() {
            return out;
        }
        let s_oo = DMatrix::from_fn(o.len(), o.len(), |a, b| self.covariance[(o[a], o[b])]);
        let dev = DVector::from_iterator(
            o.len(),
            o.iter().map(|&i| if x[i].is_nan() { 0.0 } else { x[i] - self.means[i] }),
        );
        let solved = match s_oo.clone().cholesky() {
            Some(ch) => ch.solve(&dev),
            None => {
                log::warn!("observed-feature covariance is singular; adding ridge {IMPUTE_RIDGE:e}");
                let reg = s_oo + DMatrix::identity(o.len(), o.len()) * IMPUTE_RIDGE;
                match reg.clone().cholesky() {
                    Some(ch) => ch.solve(&dev),
                    None => reg.lu().solve(&dev).unwrap_or_else(|| DVector::zeros(o.len())),
                }
            }
        };
        for &i in &h {
            let shift: f64 = o.iter().enumerate().map(|(a, &j)| self.covariance[(i, j)] * solved[a]).sum();
            out[i] += shift;
        }
        out
    }
}

/// Composite rows for `x` with the `hidden` features replaced. The mean and
/// impute maskers return one row; the resample masker returns
/// `resample_count` rows whose model outputs should be averaged.
pub fn mask_row<R: Rng>(x: &[f64], hidden: &FeatureSubset, masker: Masker, stats: &MaskStats, rng: &mut R) -> Vec<Vec<f64>> {
    match masker {
        Masker::Mean => {
            let mut out = x.to_vec();
            for i in hidden.indices() {
                out[i] = stats.means[i];
            }
            vec![out]
        }
        Masker::Impute => vec![stats.impute(x, hidden)],
        Masker::Resample => {
            if hidden.is_empty() {
                return vec![x.to_vec()];
            }
            (0..stats.resample_count)
                .map(|_| {
                    let donor = &stats.rows[rng.random_range(0..stats.rows.len())];
                    let mut out = x.to_vec();
                    for i in hidden.indices() {
                        out[i] = donor[i];
                    }
                    out
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn train() -> Dataset {
        Dataset::from_rows(vec![vec![0.0, 1.0, 2.0], vec![2.0, 3.0, 2.0], vec![4.0, 2.0, 5.0], vec![2.0, 2.0, 3.0]]).unwrap()
    }

    #[test]
    fn nothing_hidden_is_identity() {
        let s = MaskStats::from_dataset(&train()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = [9.0, 8.0, 7.0];
        for m in [Masker::Mean, Masker::Resample, Masker::Impute] {
            assert_eq!(mask_row(&x, &FeatureSubset::empty(3), m, &s, &mut rng), [x.to_vec()]);
        }
    }

    #[test]
    fn all_hidden_mean_is_column_means() {
        let s = MaskStats::from_dataset(&train()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = mask_row(&[9.0; 3], &FeatureSubset::full(3), Masker::Mean, &s, &mut rng);
        assert_eq!(out, [vec![2.0, 2.0, 3.0]]);
    }

    #[test]
    fn diagonal_covariance_impute_equals_mean() {
        let cov = vec![vec![2.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 3.0]];
        let s = MaskStats::from_moments(vec![1.0, 2.0, 3.0], cov, vec![]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let hidden = FeatureSubset::from_indices(3, &[0, 2]).unwrap();
        let a = mask_row(&[5.0, 6.0, 7.0], &hidden, Masker::Impute, &s, &mut rng);
        let b = mask_row(&[5.0, 6.0, 7.0], &hidden, Masker::Mean, &s, &mut rng);
        for (u, v) in a[0].iter().zip(&b[0]) {
            assert!((u - v).abs() <= 1e-10);
        }
    }

    #[test]
    fn impute_follows_correlation() {
        let cov = vec![vec![1.0, 0.8], vec![0.8, 1.0]];
        let s = MaskStats::from_moments(vec![0.0, 0.0], cov, vec![]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let hidden = FeatureSubset::from_indices(2, &[1]).unwrap();
        let out = mask_row(&[2.0, -9.0], &hidden, Masker::Impute, &s, &mut rng);
        assert!((out[0][1] - 1.6).abs() < 1e-12);
    }

    #[test]
    fn singular_covariance_still_imputes() {
        let cov = vec![vec![1.0, 1.0, 0.5], vec![1.0, 1.0, 0.5], vec![0.5, 0.5, 1.0]];
        let s = MaskStats::from_moments(vec![0.0; 3], cov, vec![]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let hidden = FeatureSubset::from_indices(3, &[2]).unwrap();
        let out = mask_row(&[1.0, 1.0, 0.0], &hidden, Masker::Impute, &s, &mut rng);
        assert!(out[0][2].is_finite());
    }

    #[test]
    fn resample_draws_from_training_rows() {
        let s = MaskStats::from_dataset(&train()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let hidden = FeatureSubset::from_indices(3, &[1]).unwrap();
        let out = mask_row(&[9.0, 9.0, 9.0], &hidden, Masker::Resample, &s, &mut rng);
        assert_eq!(out.len(), RESAMPLE_COUNT);
        assert!(out.iter().all(|r| r[0] == 9.0 && r[2] == 9.0 && [1.0, 2.0, 3.0].contains(&r[1])));
    }
}
