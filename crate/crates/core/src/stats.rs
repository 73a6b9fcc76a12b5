//! Small statistics helpers shared by the benchmark and analysis code.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Unbiased sample variance.
pub fn variance(v: &[f64]) -> f64 {
    let mu = mean(v);
    v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
}

/// Area under a piecewise-linear curve through `(x, y)` points, in `x` order.
pub fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum()
}

/// Area under the ROC curve of `scores` against 0/1 `labels`, with tied
/// scores counted as half-correct.
pub fn roc_auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Mid-ranks over tie groups.
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let r = 0.5 * (i + j) as f64 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    let pos = labels.iter().filter(|&&y| y == 1.0).count();
    let neg = labels.iter().filter(|&&y| y == 0.0).count();
    if pos + neg != labels.len() {
        return Err(Error::Data("ROC AUC needs 0/1 labels".into()));
    }
    if pos == 0 || neg == 0 {
        return Err(Error::Data("ROC AUC needs both classes".into()));
    }
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &y)| y == 1.0).map(|(r, _)| r).sum();
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Coefficient of determination of `pred` against `truth`.
pub fn r2(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() || truth.len() < 2 {
        return Err(Error::Data("R² needs two or more paired values".into()));
    }
    let mu = mean(truth);
    let ss_tot: f64 = truth.iter().map(|y| (y - mu).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Data("R² is undefined for constant targets".into()));
    }
    let ss_res: f64 = pred.iter().zip(truth).map(|(p, y)| (p - y).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    /// Two-sided p-value.
    pub p_value: f64,
}

fn two_sided(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return 1.0;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    2.0 * dist.cdf(-t.abs())
}

/// Welch's unequal-variance t-test of `mean(a) - mean(b)`.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Data("t-test needs at least two values per group".into()));
    }
    let (va, vb) = (variance(a) / a.len() as f64, variance(b) / b.len() as f64);
    let se2 = va + vb;
    let diff = mean(a) - mean(b);
    if se2 == 0.0 {
        let t = if diff == 0.0 { f64::NAN } else { diff.signum() * f64::INFINITY };
        return Ok(TTest {
            t,
            df: (a.len() + b.len() - 2) as f64,
            p_value: two_sided(t, 1.0),
        });
    }
    let t = diff / se2.sqrt();
    let df = se2 * se2 / (va * va / (a.len() as f64 - 1.0) + vb * vb / (b.len() as f64 - 1.0));
    Ok(TTest {
        t,
        df,
        p_value: two_sided(t, df),
    })
}

/// Paired t-test of `mean(a - b)`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::Data("paired t-test needs two or more pairs".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let df = (d.len() - 1) as f64;
    let se = (variance(&d) / d.len() as f64).sqrt();
    let mu = mean(&d);
    let t = if se == 0.0 {
        if mu == 0.0 {
            f64::NAN
        } else {
            mu.signum() * f64::INFINITY
        }
    } else {
        mu / se
    };
    Ok(TTest {
        t,
        df,
        p_value: two_sided(t, df),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_counts_pairs() {
        assert_eq!(roc_auc(&[0.1, 0.4, 0.35, 0.8], &[0.0, 0.0, 1.0, 1.0]).unwrap(), 0.75);
        assert_eq!(roc_auc(&[1.0, 1.0], &[0.0, 1.0]).unwrap(), 0.5);
        assert!(roc_auc(&[1.0, 2.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn r2_of_perfect_and_mean() {
        let y = [1.0, 2.0, 3.0];
        assert_eq!(r2(&y, &y).unwrap(), 1.0);
        assert_eq!(r2(&[2.0; 3], &y).unwrap(), 0.0);
    }

    #[test]
    fn trapezoid_of_line() {
        assert!((trapezoid(&[(0.0, 0.0), (0.5, 0.5), (1.0, 1.0)]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn welch_matches_reference_value() {
        // Two groups whose t statistic and Welch df are easy to check by hand:
        // means 2 and 5, variances 1 and 1, n = 3 each -> t = -3/sqrt(2/3), df = 4.
        let r = welch_t_test(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert!((r.t + 3.0 / (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((r.df - 4.0).abs() < 1e-12);
        // Two-sided p for t = -3.674, df = 4 is about 0.0213.
        assert!((r.p_value - 0.0213).abs() < 5e-4);
    }

    #[test]
    fn paired_identical_is_not_significant() {
        let r = paired_t_test(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!(r.p_value, 1.0);
    }
}
