use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{background_mean, check_inputs, EstimatorConfig, ReferenceSampler};
use crate::error::{Error, Result};
use crate::explanation::{Explanation, Method};
use crate::indep::BackgroundSet;
use crate::model::Model;

#[derive(Clone, Copy, Default)]
struct Running {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Running {
    fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }

    fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// Drop in the variance of the mean from one more sample.
    fn gain(&self) -> f64 {
        self.variance() / (self.n as f64 * (self.n + 1) as f64)
    }
}

/// Permutation-sampling Shapley estimate.
///
/// Each sample draws a random feature ordering and a background reference;
/// feature `i`'s sample is `f(z+) - f(z-)` where both composites take `x`
/// on the features preceding `i` and the reference after it, and differ
/// only in feature `i`. Every feature first receives
/// `min_samples_per_feature` samples; the remaining budget goes, one
/// sample at a time, to the feature whose estimate's variance would drop
/// the most. `n_evaluations` counts the two evaluations per sample; the
/// base value (background mean) costs one evaluation per reference on top.
pub fn sampling_shap(model: &dyn Model, x: &[f64], bg: &BackgroundSet, cfg: &EstimatorConfig) -> Result<Explanation> {
    check_inputs(model, x, bg)?;
    let m = model.num_features();
    if cfg.min_samples_per_feature == 0 {
        return Err(Error::InvalidInput("min_samples_per_feature must be positive".into()));
    }
    let needed = 2 * m * cfg.min_samples_per_feature;
    if cfg.n_evaluations < needed {
        return Err(Error::InsufficientBudget {
            needed,
            given: cfg.n_evaluations,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let refs = ReferenceSampler::new(bg);
    let mut order: Vec<usize> = (0..m).collect();
    let mut z_plus = vec![0.0; m];
    let mut z_minus = vec![0.0; m];
    let mut stats = vec![Running::default(); m];

    let mut draw = |i: usize, rng: &mut ChaCha8Rng| {
        order.shuffle(rng);
        let r = &bg.rows()[refs.draw(rng)];
        let mut seen = true;
        for &j in &order {
            if j == i {
                seen = false;
                z_plus[j] = x[j];
                z_minus[j] = r[j];
            } else {
                let v = if seen { x[j] } else { r[j] };
                z_plus[j] = v;
                z_minus[j] = v;
            }
        }
        model.evaluate(&z_plus) - model.evaluate(&z_minus)
    };

    for _ in 0..cfg.min_samples_per_feature {
        for (i, s) in stats.iter_mut().enumerate() {
            s.push(draw(i, &mut rng));
        }
    }
    for _ in (needed / 2)..(cfg.n_evaluations / 2) {
        let i = (0..m)
            .max_by(|&a, &b| {
                stats[a]
                    .gain()
                    .total_cmp(&stats[b].gain())
                    .then(stats[b].n.cmp(&stats[a].n))
                    .then(b.cmp(&a))
            })
            .expect("at least one feature");
        let v = draw(i, &mut rng);
        stats[i].push(v);
    }

    let values = stats.iter().map(|s| s.mean).collect();
    Ok(Explanation::new(background_mean(model, bg), values, Method::Sampling))
}
