use rayon::prelude::*;

use crate::error::Result;
use crate::explanation::InteractionExplanation;
use crate::model::TreeEnsemble;
use crate::treeshap::{ensemble_shap_into, scratch_for, Condition};

/// SHAP interaction values of `x`.
///
/// For each feature `j` used by the ensemble, Tree SHAP runs twice with `j`
/// removed from the players: once with its splits following `x` and once
/// with them cover-averaged. Half the difference gives row `j`. Pairs are
/// computed once and mirrored; the diagonal is the SHAP value minus the
/// row's off-diagonal sum.
pub fn shap_interaction_values(ensemble: &TreeEnsemble, x: &[f64]) -> Result<InteractionExplanation> {
    ensemble.check_row(x)?;
    let m = ensemble.num_features();
    let depth = ensemble.max_depth();
    let mut used = vec![false; m];
    for tree in ensemble.trees() {
        for f in tree.used_features() {
            used[f] = true;
        }
    }

    let mut phi = vec![0.0; m];
    ensemble_shap_into(ensemble, x, Condition::None, &mut phi, &mut scratch_for(depth));

    let rows: Vec<(usize, Vec<f64>)> = (0..m)
        .into_par_iter()
        .filter(|&j| used[j])
        .map_init(
            || scratch_for(depth),
            |scratch, j| {
                let mut on = vec![0.0; m];
                let mut off = vec![0.0; m];
                ensemble_shap_into(ensemble, x, Condition::Present(j), &mut on, scratch);
                ensemble_shap_into(ensemble, x, Condition::Absent(j), &mut off, scratch);
                let row = on.iter().zip(&off).map(|(a, b)| 0.5 * (a - b)).collect();
                (j, row)
            },
        )
        .collect();

    let mut out = InteractionExplanation::zeros(m, ensemble.expected_value());
    for (j, row) in &rows {
        for k in (j + 1)..m {
            if used[k] {
                out.set_pair(*j, k, row[k]);
            }
        }
    }
    for i in 0..m {
        let off: f64 = (0..m).filter(|&k| k != i).map(|k| out.get(i, k)).sum();
        out.set(i, i, phi[i] - off);
    }
    Ok(out)
}

/// [`shap_interaction_values`] over many rows.
pub fn shap_interaction_batch(ensemble: &TreeEnsemble, rows: &[Vec<f64>]) -> Result<Vec<InteractionExplanation>> {
    rows.iter().map(|x| shap_interaction_values(ensemble, x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::and_model;
    use crate::model::TreeBuilder;

    #[test]
    fn and_fixture() {
        let e = shap_interaction_values(&and_model(), &[1.0, 1.0]).unwrap();
        assert_eq!(e.bias(), 20.0);
        assert!((e.get(0, 1) - 10.0).abs() < 1e-12);
        assert_eq!(e.get(0, 1), e.get(1, 0));
        assert!((e.get(0, 0) - 20.0).abs() < 1e-12);
        assert!((e.get(1, 1) - 20.0).abs() < 1e-12);
        assert!((e.total() - 80.0).abs() < 1e-12);
    }

    #[test]
    fn additive_stumps_have_no_interactions() {
        let stump = |f: usize, lo: f64, hi: f64| {
            let mut b = TreeBuilder::new();
            let l = b.leaf(lo, 3.0);
            let r = b.leaf(hi, 1.0);
            let root = b.split(f, 0.0, l, r);
            b.build(root, 3).unwrap()
        };
        let m = TreeEnsemble::new(vec![stump(0, 1.0, 2.0), stump(2, -1.0, 4.0), stump(0, 0.5, 0.0)], 3).unwrap();
        let e = shap_interaction_values(&m, &[1.0, 0.0, -1.0]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!(e.get(i, j).abs() < 1e-12);
                }
            }
        }
        assert!((e.total() - m.predict(&[1.0, 0.0, -1.0]).unwrap()).abs() < 1e-12);
    }
}
