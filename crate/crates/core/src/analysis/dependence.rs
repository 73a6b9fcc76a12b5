use super::{global_importance, ExplanationMatrix};
use crate::error::{Error, Result};
use crate::explanation::InteractionExplanation;

const MAX_BINS: usize = 10;

/// One summary-plot row: a feature and its `(attribution, normalized
/// value)` dots.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDots {
    pub feature: usize,
    pub importance: f64,
    /// Feature values are mapped to their percentile in `[0, 1]`; missing
    /// values stay NaN.
    pub dots: Vec<(f64, f64)>,
}

/// Mid-rank percentiles of a column, ignoring NaN.
fn percentiles(col: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..col.len()).filter(|&i| !col[i].is_nan()).collect();
    idx.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
    let n = idx.len();
    let mut out = vec![f64::NAN; col.len()];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && col[idx[j + 1]] == col[idx[i]] {
            j += 1;
        }
        let p = if n == 1 { 0.5 } else { 0.5 * (i + j) as f64 / (n - 1) as f64 };
        for &k in &idx[i..=j] {
            out[k] = p;
        }
        i = j + 1;
    }
    out
}

/// Per-feature summary dots, most important feature first.
pub fn summary_data(e: &ExplanationMatrix) -> Result<Vec<FeatureDots>> {
    Ok(global_importance(e)?
        .into_iter()
        .map(|(f, importance)| {
            let col: Vec<f64> = e.features.iter().map(|r| r[f]).collect();
            let pct = percentiles(&col);
            FeatureDots {
                feature: f,
                importance,
                dots: e.values.iter().zip(pct).map(|(r, p)| (r[f], p)).collect(),
            }
        })
        .collect())
}

/// A dependence plot: `(x_i, phi_i, x_color)` per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Dependence {
    pub feature: usize,
    pub color: Option<usize>,
    pub points: Vec<(f64, f64, f64)>,
}

/// Bin ids for a column: one bin per distinct value when there are few,
/// otherwise rank-quantile bins; missing values get a bin of their own.
fn bin_ids(col: &[f64]) -> (Vec<usize>, usize) {
    let mut distinct: Vec<f64> = col.iter().copied().filter(|v| !v.is_nan()).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let nan_bin = MAX_BINS;
    if distinct.len() <= MAX_BINS {
        let ids = col
            .iter()
            .map(|v| if v.is_nan() { nan_bin } else { distinct.partition_point(|d| d < v) })
            .collect();
        return (ids, MAX_BINS + 1);
    }
    let pct = percentiles(col);
    let ids = pct
        .iter()
        .map(|p| if p.is_nan() { nan_bin } else { ((p * MAX_BINS as f64) as usize).min(MAX_BINS - 1) })
        .collect();
    (ids, MAX_BINS + 1)
}

/// Variance of `y` explained by the group means over `bins`.
fn between_group_variance(y: &[f64], bins: &[usize], nbins: usize) -> f64 {
    let mut sum = vec![0.0; nbins];
    let mut count = vec![0usize; nbins];
    for (&v, &b) in y.iter().zip(bins) {
        sum[b] += v;
        count[b] += 1;
    }
    let n = y.len() as f64;
    let mu = y.iter().sum::<f64>() / n;
    (0..nbins)
        .filter(|&b| count[b] > 0)
        .map(|b| count[b] as f64 * (sum[b] / count[b] as f64 - mu).powi(2))
        .sum::<f64>()
        / n
}

/// The feature whose bins best explain the spread of `phi_i` left after
/// removing its dependence on `x_i`.
fn auto_color(e: &ExplanationMatrix, i: usize) -> Option<usize> {
    let phi: Vec<f64> = e.values.iter().map(|r| r[i]).collect();
    let xi: Vec<f64> = e.features.iter().map(|r| r[i]).collect();
    let (bi, nb) = bin_ids(&xi);
    let mut sum = vec![0.0; nb];
    let mut count = vec![0usize; nb];
    for (&v, &b) in phi.iter().zip(&bi) {
        sum[b] += v;
        count[b] += 1;
    }
    let resid: Vec<f64> = phi.iter().zip(&bi).map(|(v, &b)| v - sum[b] / count[b] as f64).collect();
    (0..e.num_features())
        .filter(|&k| k != i)
        .map(|k| {
            let col: Vec<f64> = e.features.iter().map(|r| r[k]).collect();
            let (bk, nk) = bin_ids(&col);
            (k, between_group_variance(&resid, &bk, nk))
        })
        .fold(None, |best: Option<(usize, f64)>, (k, s)| match best {
            Some((_, bs)) if bs >= s => best,
            _ => Some((k, s)),
        })
        .map(|(k, _)| k)
}

/// Dependence data for feature `i`, colored by `color` or, when `None`, by
/// the automatically chosen interaction partner.
pub fn dependence_data(e: &ExplanationMatrix, i: usize, color: Option<usize>) -> Result<Dependence> {
    e.check_feature(i)?;
    if let Some(k) = color {
        e.check_feature(k)?;
    }
    let color = color.or_else(|| auto_color(e, i));
    let points = e
        .values
        .iter()
        .zip(&e.features)
        .map(|(v, x)| (x[i], v[i], color.map_or(f64::NAN, |k| x[k])))
        .collect();
    Ok(Dependence { feature: i, color, points })
}

/// Feature `i`'s SHAP value split into its interaction with `k` and
/// everything else (its main effect plus all other interactions).
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionSplit {
    pub main_plus_rest: Vec<f64>,
    pub interaction: Vec<f64>,
}

pub fn interaction_dependence_split(matrices: &[InteractionExplanation], i: usize, k: usize) -> Result<InteractionSplit> {
    if i == k {
        return Err(Error::InvalidInput("interaction split needs two different features".into()));
    }
    let mut out = InteractionSplit {
        main_plus_rest: Vec::with_capacity(matrices.len()),
        interaction: Vec::with_capacity(matrices.len()),
    };
    for m in matrices {
        let n = m.num_features();
        if i >= n || k >= n {
            return Err(Error::InvalidInput(format!("feature out of range for {n} features")));
        }
        let rest: f64 = (0..n).filter(|&j| j != k).map(|j| m.get(i, j)).sum();
        out.main_plus_rest.push(rest);
        out.interaction.push(m.get(i, k));
    }
    Ok(out)
}
