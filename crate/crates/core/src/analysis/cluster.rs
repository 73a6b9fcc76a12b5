use super::ExplanationMatrix;
use crate::error::{Error, Result};

/// One agglomeration step. Leaves are clusters `0..N`; the cluster formed
/// at step `s` gets id `N + s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub merges: Vec<Merge>,
    /// Samples in dendrogram order.
    pub leaf_order: Vec<usize>,
}

/// Complete-linkage agglomerative clustering of the attribution rows under
/// Euclidean distance. Ties merge the pair with the lowest cluster slots;
/// each merge lists the lower id first.
pub fn supervised_cluster(e: &ExplanationMatrix) -> Result<Clustering> {
    let n = e.num_samples();
    if n < 2 {
        return Err(Error::InvalidInput("clustering needs at least two samples".into()));
    }
    let rows = e.values();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = rows[i]
                .iter()
                .zip(&rows[j])
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }

    // Slot `i` holds the cluster with id `ids[i]` while `active[i]`.
    let mut ids: Vec<usize> = (0..n).collect();
    let mut sizes = vec![1usize; n];
    let mut active = vec![true; n];
    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        let mut best = (f64::INFINITY, 0, 0);
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in (i + 1)..n {
                if active[j] && dist[i * n + j] < best.0 {
                    best = (dist[i * n + j], i, j);
                }
            }
        }
        let (d, i, j) = best;
        let (left, right) = (ids[i].min(ids[j]), ids[i].max(ids[j]));
        sizes[i] += sizes[j];
        merges.push(Merge {
            left,
            right,
            distance: d,
            size: sizes[i],
        });
        active[j] = false;
        ids[i] = n + step;
        for k in 0..n {
            if active[k] && k != i {
                let v = dist[i * n + k].max(dist[j * n + k]);
                dist[i * n + k] = v;
                dist[k * n + i] = v;
            }
        }
    }

    let mut leaf_order = Vec::with_capacity(n);
    let mut stack = vec![2 * n - 2];
    while let Some(c) = stack.pop() {
        if c < n {
            leaf_order.push(c);
        } else {
            let m = merges[c - n];
            stack.push(m.right);
            stack.push(m.left);
        }
    }
    Ok(Clustering { merges, leaf_order })
}
