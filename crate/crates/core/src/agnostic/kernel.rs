use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{background_mean, check_inputs, same_value, EstimatorConfig};
use crate::error::{Error, Result};
use crate::explanation::{Explanation, Method};
use crate::indep::BackgroundSet;
use crate::model::Model;

/// Largest player count for which every coalition may be enumerated.
const MAX_ENUMERATED_PLAYERS: usize = 30;

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Shapley kernel weight of a coalition of size `s` out of `m` players.
fn kernel_weight(m: usize, s: usize) -> f64 {
    (m - 1) as f64 / (binomial(m, s) * s as f64 * (m - s) as f64)
}

/// Kernel SHAP: a weighted linear regression over coalitions whose
/// coefficients are the Shapley values when every coalition is present.
///
/// The coalition value is the background-weighted mean output on the
/// composite input. The empty and full coalitions are imposed exactly: the
/// intercept is the background mean and the coefficients are constrained
/// to sum to `f(x) - base`. When the budget covers every coalition they are
/// enumerated with kernel weights; otherwise coalition sizes are sampled by
/// kernel mass, each draw is paired with its complement and repeated draws
/// are merged into frequency weights. Features where `x` matches every
/// reference get zero and are not players.
///
/// Each coalition costs one evaluation per reference; `f(x)` and the base
/// cost `1 + R` more.
pub fn kernel_shap(model: &dyn Model, x: &[f64], bg: &BackgroundSet, cfg: &EstimatorConfig) -> Result<Explanation> {
    check_inputs(model, x, bg)?;
    if let Some(l1) = cfg.l1_penalty {
        if !(l1.is_finite() && l1 >= 0.0) {
            return Err(Error::InvalidInput("l1 penalty must be finite and nonnegative".into()));
        }
    }
    let m = model.num_features();
    let r = bg.len();
    let fixed = r + 1;
    let needed = fixed + r * m;
    if cfg.n_evaluations < needed {
        return Err(Error::InsufficientBudget {
            needed,
            given: cfg.n_evaluations,
        });
    }
    let budget = (cfg.n_evaluations - fixed) / r;

    let base = background_mean(model, bg);
    let fx = model.evaluate(x);
    let players: Vec<usize> = (0..m)
        .filter(|&i| bg.rows().iter().any(|row| !same_value(row[i], x[i])))
        .collect();
    let p = players.len();
    let mut values = vec![0.0; m];
    match p {
        0 => return Ok(Explanation::new(base, values, Method::Kernel)),
        1 => {
            values[players[0]] = fx - base;
            return Ok(Explanation::new(base, values, Method::Kernel));
        }
        _ => {}
    }

    let (coalitions, weights) = if p <= MAX_ENUMERATED_PLAYERS && budget as f64 >= 2f64.powi(p as i32) - 2.0 {
        enumerate(p)
    } else {
        sample(p, budget, cfg.seed)
    };

    let mut z = x.to_vec();
    let v: Vec<f64> = coalitions
        .iter()
        .map(|s| {
            bg.rows()
                .iter()
                .enumerate()
                .map(|(k, row)| {
                    for (j, &f) in players.iter().enumerate() {
                        z[f] = if s[j] { x[f] } else { row[f] };
                    }
                    bg.weight(k) * model.evaluate(&z)
                })
                .sum()
        })
        .collect();

    let delta = fx - base;
    let mut active: Vec<usize> = (0..p).collect();
    if let Some(l1) = cfg.l1_penalty.filter(|&l| l > 0.0) {
        let beta = lasso(&coalitions, &weights, &v, base, delta, &active, l1);
        let last = p - 1;
        active = (0..last).filter(|&j| beta[j] != 0.0).chain([last]).collect();
    }
    let phi = constrained_fit(&coalitions, &weights, &v, base, delta, &active);
    for (&j, &val) in active.iter().zip(&phi) {
        values[players[j]] = val;
    }
    Ok(Explanation::new(base, values, Method::Kernel))
}

fn enumerate(p: usize) -> (Vec<Vec<bool>>, Vec<f64>) {
    let mut coalitions = Vec::new();
    let mut weights = Vec::new();
    for mask in 1u64..(1u64 << p) - 1 {
        let s: Vec<bool> = (0..p).map(|j| mask >> j & 1 == 1).collect();
        weights.push(kernel_weight(p, mask.count_ones() as usize));
        coalitions.push(s);
    }
    (coalitions, weights)
}

fn sample(p: usize, budget: usize, seed: u64) -> (Vec<Vec<bool>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sizes = WeightedIndex::new((1..p).map(|s| 1.0 / (s as f64 * (p - s) as f64))).expect("p >= 2");
    let mut index: HashMap<Vec<bool>, usize> = HashMap::new();
    let mut coalitions = Vec::new();
    let mut counts: Vec<f64> = Vec::new();
    let max_draws = 100 * budget + 1000;
    let mut add = |s: Vec<bool>, coalitions: &mut Vec<Vec<bool>>, counts: &mut Vec<f64>| -> bool {
        if let Some(&i) = index.get(&s) {
            counts[i] += 1.0;
            true
        } else if coalitions.len() < budget {
            index.insert(s.clone(), coalitions.len());
            coalitions.push(s);
            counts.push(1.0);
            true
        } else {
            false
        }
    };
    for _ in 0..max_draws {
        if coalitions.len() >= budget {
            break;
        }
        let size = sizes.sample(&mut rng) + 1;
        let mut s = vec![false; p];
        for j in sample_indices(&mut rng, p, size) {
            s[j] = true;
        }
        let complement: Vec<bool> = s.iter().map(|b| !b).collect();
        if add(s, &mut coalitions, &mut counts) {
            add(complement, &mut coalitions, &mut counts);
        }
    }
    (coalitions, counts)
}

/// Design rows with the last active player eliminated through the sum
/// constraint: columns `z_j - z_last`, targets `v - base - z_last * delta`.
fn eliminated_system(
    coalitions: &[Vec<bool>],
    v: &[f64],
    base: f64,
    delta: f64,
    active: &[usize],
) -> (DMatrix<f64>, DVector<f64>) {
    let last = *active.last().expect("at least one active player");
    let k = active.len() - 1;
    let n = coalitions.len();
    let mut x = DMatrix::zeros(n, k);
    let mut y = DVector::zeros(n);
    for (row, s) in coalitions.iter().enumerate() {
        let zl = s[last] as u8 as f64;
        for (c, &j) in active[..k].iter().enumerate() {
            x[(row, c)] = s[j] as u8 as f64 - zl;
        }
        y[row] = v[row] - base - zl * delta;
    }
    (x, y)
}

fn constrained_fit(
    coalitions: &[Vec<bool>],
    weights: &[f64],
    v: &[f64],
    base: f64,
    delta: f64,
    active: &[usize],
) -> Vec<f64> {
    let k = active.len() - 1;
    if k == 0 {
        return vec![delta];
    }
    let (x, y) = eliminated_system(coalitions, v, base, delta, active);
    let w = DVector::from_column_slice(weights);
    let xtw = {
        let mut t = x.transpose();
        for (c, wc) in w.iter().enumerate() {
            t.column_mut(c).scale_mut(*wc);
        }
        t
    };
    let a = &xtw * &x;
    let b = &xtw * &y;
    let beta = match a.clone().cholesky() {
        Some(ch) => ch.solve(&b),
        None => {
            let scale = (a.trace() / k as f64).abs().max(1e-12);
            let ridge = 1e-8 * scale;
            log::warn!("kernel regression design is singular; adding ridge {ridge:e}");
            let reg = &a + DMatrix::identity(k, k) * ridge;
            match reg.clone().cholesky() {
                Some(ch) => ch.solve(&b),
                None => reg.svd(true, true).solve(&b, 1e-12).expect("svd solve"),
            }
        }
    };
    let mut phi: Vec<f64> = beta.iter().copied().collect();
    phi.push(delta - phi.iter().sum::<f64>());
    phi
}

/// Weighted lasso on the eliminated system by cyclic coordinate descent.
fn lasso(
    coalitions: &[Vec<bool>],
    weights: &[f64],
    v: &[f64],
    base: f64,
    delta: f64,
    active: &[usize],
    penalty: f64,
) -> Vec<f64> {
    let (x, y) = eliminated_system(coalitions, v, base, delta, active);
    let k = x.ncols();
    let total: f64 = weights.iter().sum();
    let w: Vec<f64> = weights.iter().map(|wi| wi / total).collect();
    let col_norm: Vec<f64> = (0..k)
        .map(|c| (0..x.nrows()).map(|r| w[r] * x[(r, c)] * x[(r, c)]).sum())
        .collect();
    let mut beta = vec![0.0; k];
    let mut resid: Vec<f64> = y.iter().copied().collect();
    for _ in 0..1000 {
        let mut max_step = 0.0f64;
        for c in 0..k {
            if col_norm[c] == 0.0 {
                continue;
            }
            let rho: f64 = (0..x.nrows()).map(|r| w[r] * x[(r, c)] * (resid[r] + x[(r, c)] * beta[c])).sum();
            let next = rho.signum() * (rho.abs() - penalty).max(0.0) / col_norm[c];
            let step = next - beta[c];
            if step != 0.0 {
                for (r, res) in resid.iter_mut().enumerate() {
                    *res -= x[(r, c)] * step;
                }
                beta[c] = next;
                max_step = max_step.max(step.abs());
            }
        }
        if max_step < 1e-10 {
            break;
        }
    }
    beta
}
