use nalgebra::{DMatrix, SymmetricEigen};

use super::ExplanationMatrix;
use crate::error::{Error, Result};

/// Principal components of the centered attribution matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    /// `N x k` sample coordinates.
    pub coordinates: Vec<Vec<f64>>,
    /// `k x M` unit-length loadings; each has its largest-magnitude entry
    /// positive.
    pub loadings: Vec<Vec<f64>>,
    /// Variance along each component.
    pub variance: Vec<f64>,
    pub explained_ratio: Vec<f64>,
    pub mean: Vec<f64>,
}

impl Pca {
    /// Squared reconstruction error of `rows` from the first `k`
    /// components, summed over samples.
    pub fn reconstruction_error(&self, rows: &[Vec<f64>], k: usize) -> f64 {
        rows.iter()
            .zip(&self.coordinates)
            .map(|(row, coord)| {
                row.iter()
                    .enumerate()
                    .map(|(j, v)| {
                        let approx = self.mean[j] + (0..k).map(|c| coord[c] * self.loadings[c][j]).sum::<f64>();
                        (v - approx).powi(2)
                    })
                    .sum::<f64>()
            })
            .sum()
    }
}

/// The first `k` principal components of the attributions. Uses the
/// `M x M` covariance when `M <= N` and the `N x N` Gram matrix otherwise.
pub fn explanation_pca(e: &ExplanationMatrix, k: usize) -> Result<Pca> {
    let (n, m) = (e.num_samples(), e.num_features());
    if n < 2 || k == 0 || k > n.min(m) {
        return Err(Error::InvalidInput(format!(
            "cannot take {k} components of a {n} x {m} matrix"
        )));
    }
    let mean: Vec<f64> = (0..m)
        .map(|j| e.values().iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let x = DMatrix::from_fn(n, m, |i, j| e.values()[i][j] - mean[j]);
    let denom = (n - 1) as f64;

    let (eigvals, vectors): (Vec<f64>, Vec<Vec<f64>>) = if m <= n {
        let cov = x.transpose() * &x / denom;
        let eig = SymmetricEigen::new(cov);
        let order = descending(eig.eigenvalues.as_slice());
        order
            .into_iter()
            .map(|c| (eig.eigenvalues[c].max(0.0), eig.eigenvectors.column(c).iter().copied().collect()))
            .unzip()
    } else {
        let gram = &x * x.transpose() / denom;
        let eig = SymmetricEigen::new(gram);
        let order = descending(eig.eigenvalues.as_slice());
        order
            .into_iter()
            .map(|c| {
                let lambda = eig.eigenvalues[c].max(0.0);
                let u = eig.eigenvectors.column(c);
                let mut v: Vec<f64> = (x.transpose() * u).iter().copied().collect();
                let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                if norm > 0.0 {
                    v.iter_mut().for_each(|a| *a /= norm);
                }
                (lambda, v)
            })
            .unzip()
    };

    let total: f64 = eigvals.iter().sum();
    let mut loadings: Vec<Vec<f64>> = vectors.into_iter().take(k).collect();
    for v in &mut loadings {
        let lead = v.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
        if lead < 0.0 {
            v.iter_mut().for_each(|a| *a = -*a);
        }
    }
    let coordinates = (0..n)
        .map(|i| loadings.iter().map(|v| (0..m).map(|j| x[(i, j)] * v[j]).sum()).collect())
        .collect();
    let variance: Vec<f64> = eigvals.into_iter().take(k).collect();
    let explained_ratio = variance
        .iter()
        .map(|v| if total > 0.0 { v / total } else { 0.0 })
        .collect();
    Ok(Pca {
        coordinates,
        loadings,
        variance,
        explained_ratio,
        mean,
    })
}

fn descending(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(values: Vec<Vec<f64>>) -> ExplanationMatrix {
        let m = values[0].len();
        let n = values.len();
        ExplanationMatrix::new((0..m).map(|i| format!("f{i}")).collect(), values, vec![0.0; n], vec![vec![0.0; m]; n]).unwrap()
    }

    #[test]
    fn rank_one_is_one_component() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, -2.0 * i as f64, 0.5 * i as f64]).collect();
        let p = explanation_pca(&matrix(rows), 2).unwrap();
        assert!(p.explained_ratio[0] > 0.999);
        // Largest loading is the -2 column, flipped positive.
        assert!(p.loadings[0][1] > 0.0);
    }

    #[test]
    fn gram_path_matches_covariance_path() {
        let rows: Vec<Vec<f64>> = (0..4).map(|i| (0..6).map(|j| ((i * 7 + j * 3) % 5) as f64).collect()).collect();
        let wide = explanation_pca(&matrix(rows.clone()), 2).unwrap();
        let t: Vec<Vec<f64>> = rows.clone();
        let err1 = wide.reconstruction_error(&t, 1);
        let err2 = wide.reconstruction_error(&t, 2);
        assert!(err2 <= err1 + 1e-12);
        let total: f64 = wide.explained_ratio.iter().sum();
        assert!(total <= 1.0 + 1e-12);
        assert!(explanation_pca(&matrix(rows), 5).is_err());
    }
}
