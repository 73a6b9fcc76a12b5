use std::ops::Range;

use crate::error::{Error, Result};
use crate::indep::{explain_loss_batch, BackgroundSet, LossKind};
use crate::model::{Dataset, TreeEnsemble};
use crate::stats::welch_t_test;

/// Per-record loss attributions over a time-ordered stream, with centered
/// rolling means.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitoringSeries {
    pub feature_names: Vec<String>,
    pub timestamps: Vec<f64>,
    /// Loss attributions per record.
    pub attributions: Vec<Vec<f64>>,
    /// Base (mean reference loss) per record.
    pub base: Vec<f64>,
    /// Loss per record; equals base plus the attributions.
    pub loss: Vec<f64>,
    pub window: usize,
    /// `rolling[f][t]`: mean attribution of feature `f` over the window
    /// around record `t`.
    pub rolling: Vec<Vec<f64>>,
    pub rolling_base: Vec<f64>,
    pub rolling_loss: Vec<f64>,
}

/// The `window` records nearest to `t` (fewer when the stream is shorter).
fn window_around(t: usize, n: usize, window: usize) -> Range<usize> {
    let w = window.min(n);
    let start = t.saturating_sub(w / 2).min(n - w);
    start..start + w
}

fn rolling_mean(v: &[f64], window: usize) -> Vec<f64> {
    let mut prefix = Vec::with_capacity(v.len() + 1);
    prefix.push(0.0);
    for x in v {
        prefix.push(prefix.last().unwrap() + x);
    }
    (0..v.len())
        .map(|t| {
            let r = window_around(t, v.len(), window);
            (prefix[r.end] - prefix[r.start]) / r.len() as f64
        })
        .collect()
}

/// Explains the loss of every labelled record in `stream` and smooths the
/// attributions with a centered window of `window` records.
pub fn monitoring_series(
    stream: &Dataset,
    timestamps: &[f64],
    model: &TreeEnsemble,
    loss: LossKind,
    bg: &BackgroundSet,
    window: usize,
) -> Result<MonitoringSeries> {
    let labels = stream
        .labels()
        .ok_or_else(|| Error::Data("monitoring needs labelled records".into()))?;
    if window == 0 {
        return Err(Error::InvalidInput("window must be at least 1".into()));
    }
    if stream.is_empty() {
        return Err(Error::Data("empty stream".into()));
    }
    if timestamps.len() != stream.num_rows() {
        return Err(Error::Dimension {
            expected: stream.num_rows(),
            got: timestamps.len(),
        });
    }
    if timestamps.windows(2).any(|w| w[0].partial_cmp(&w[1]).is_none_or(|o| o.is_gt())) {
        return Err(Error::InvalidInput("timestamps must be nondecreasing".into()));
    }
    let explanations = explain_loss_batch(model, stream.rows(), labels, loss, bg)?;
    let m = model.num_features();
    let attributions: Vec<Vec<f64>> = explanations.iter().map(|e| e.values.clone()).collect();
    let base: Vec<f64> = explanations.iter().map(|e| e.base).collect();
    let loss_values: Vec<f64> = explanations.iter().map(|e| e.total()).collect();
    let rolling = (0..m)
        .map(|f| {
            let col: Vec<f64> = attributions.iter().map(|a| a[f]).collect();
            rolling_mean(&col, window)
        })
        .collect();
    Ok(MonitoringSeries {
        feature_names: (0..m).map(|i| model.feature_name(i)).collect(),
        timestamps: timestamps.to_vec(),
        rolling_base: rolling_mean(&base, window),
        rolling_loss: rolling_mean(&loss_values, window),
        attributions,
        base,
        loss: loss_values,
        window,
        rolling,
    })
}

/// Welch t-test p-value comparing a feature's loss attributions in two
/// record windows. Returns 1 when the windows hold identical values.
pub fn drift_test(series: &MonitoringSeries, feature: usize, early: Range<usize>, late: Range<usize>) -> Result<f64> {
    let n = series.attributions.len();
    if feature >= series.feature_names.len() {
        return Err(Error::InvalidInput(format!("feature {feature} out of range")));
    }
    for r in [&early, &late] {
        if r.is_empty() || r.end > n {
            return Err(Error::InvalidInput(format!("window {r:?} is empty or outside 0..{n}")));
        }
    }
    let a: Vec<f64> = series.attributions[early].iter().map(|r| r[feature]).collect();
    let b: Vec<f64> = series.attributions[late].iter().map(|r| r[feature]).collect();
    if a == b {
        return Ok(1.0);
    }
    Ok(welch_t_test(&a, &b)?.p_value)
}
