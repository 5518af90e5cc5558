use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterMode {
    /// Each cluster becomes the mean of its columns.
    Pooled,
    /// Each cluster keeps the member column nearest its centroid.
    Exemplar,
}

/// Columns with a norm below this are treated as direction-less under the
/// cosine metric.
const ZERO_NORM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterMap {
    /// Cluster id of every original feature. Ids run 0..k and are ordered by
    /// each cluster's smallest member index.
    pub assignments: Vec<usize>,
    pub n_clusters: usize,
    pub mode: ClusterMode,
    pub metric: Metric,
    /// Representative feature per cluster, present only in exemplar mode.
    pub exemplars: Option<Vec<usize>>,
}

impl ClusterMap {
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&j| self.assignments[j] == cluster).collect()
    }

    /// Applies the reduction to any matrix with the original feature layout.
    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.assignments.len() {
            return Err(Error::ShapeMismatch(format!(
                "cluster map covers {} features, matrix has {}",
                self.assignments.len(),
                x.ncols()
            )));
        }
        match (&self.mode, &self.exemplars) {
            (ClusterMode::Exemplar, Some(ex)) => Ok(x.select(Axis(1), ex)),
            _ => {
                let mut out = Array2::zeros((x.nrows(), self.n_clusters));
                for c in 0..self.n_clusters {
                    let m = self.members(c);
                    let mean = x.select(Axis(1), &m).mean_axis(Axis(1)).expect("non-empty cluster");
                    out.column_mut(c).assign(&mean);
                }
                Ok(out)
            }
        }
    }
}

fn distance(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>, metric: Metric) -> f64 {
    match metric {
        Metric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
        Metric::Cosine => {
            let na = a.dot(&a).sqrt();
            let nb = b.dot(&b).sqrt();
            if na < ZERO_NORM || nb < ZERO_NORM {
                return f64::INFINITY;
            }
            (1.0 - a.dot(&b) / (na * nb)).max(0.0)
        }
    }
}

/// Average-linkage agglomerative clustering of the columns of `x` down to
/// `k` clusters, followed by the pooled or exemplar reduction.
///
/// Under the cosine metric a near-zero column is infinitely far from every
/// other column, so it stays a singleton until only infinite merges remain.
pub fn agglomerate(x: ArrayView2<'_, f64>, k: usize, metric: Metric, mode: ClusterMode) -> Result<(ClusterMap, Array2<f64>)> {
    let n = x.ncols();
    if k == 0 || k > n {
        return Err(invalid(format!("cluster count must lie in 1..={n}, got {k}")));
    }
    let mut d = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let v = distance(x.column(i), x.column(j), metric);
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    // Each active slot holds one cluster, represented by its lowest member.
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut owner: Vec<usize> = (0..n).collect();
    for _ in 0..n - k {
        let mut best = (f64::NAN, 0, 0);
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in i + 1..n {
                if active[j] && (best.0.is_nan() || d[[i, j]] < best.0) {
                    best = (d[[i, j]], i, j);
                }
            }
        }
        let (_, a, b) = best;
        // Lance-Williams update for average linkage.
        let (sa, sb) = (size[a] as f64, size[b] as f64);
        for m in 0..n {
            if active[m] && m != a && m != b {
                let v = if d[[a, m]].is_infinite() || d[[b, m]].is_infinite() {
                    f64::INFINITY
                } else {
                    (sa * d[[a, m]] + sb * d[[b, m]]) / (sa + sb)
                };
                d[[a, m]] = v;
                d[[m, a]] = v;
            }
        }
        size[a] += size[b];
        active[b] = false;
        owner.iter_mut().filter(|o| **o == b).for_each(|o| *o = a);
    }
    // Relabel slots 0..k in order of their smallest member.
    let mut slot_id = vec![usize::MAX; n];
    let mut next = 0;
    let assignments: Vec<usize> = owner
        .iter()
        .map(|&o| {
            if slot_id[o] == usize::MAX {
                slot_id[o] = next;
                next += 1;
            }
            slot_id[o]
        })
        .collect();

    let exemplars = (mode == ClusterMode::Exemplar).then(|| {
        (0..k)
            .map(|c| {
                let members: Vec<usize> = (0..n).filter(|&j| assignments[j] == c).collect();
                let centroid = x.select(Axis(1), &members).mean_axis(Axis(1)).expect("non-empty cluster");
                let mut best = (f64::INFINITY, members[0]);
                for &j in &members {
                    let dist = distance(x.column(j), centroid.view(), metric);
                    if dist < best.0 {
                        best = (dist, j);
                    }
                }
                best.1
            })
            .collect()
    });
    let map = ClusterMap { assignments, n_clusters: k, mode, metric, exemplars };
    let transformed = map.transform(x)?;
    Ok((map, transformed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn k_equal_n_is_identity() {
        let x = array![[1.0, 2.0, 3.0], [4.0, 5.0, 7.0]];
        for metric in [Metric::Euclidean, Metric::Cosine] {
            for mode in [ClusterMode::Pooled, ClusterMode::Exemplar] {
                let (map, t) = agglomerate(x.view(), 3, metric, mode).unwrap();
                assert_eq!(t, x);
                assert_eq!(map.assignments, vec![0, 1, 2]);
            }
        }
    }

    #[test]
    fn single_pooled_cluster_is_row_mean() {
        let x = array![[1.0, 2.0, 6.0], [4.0, 5.0, 9.0]];
        let (_, t) = agglomerate(x.view(), 1, Metric::Euclidean, ClusterMode::Pooled).unwrap();
        assert_eq!(t, array![[3.0], [6.0]]);
    }

    #[test]
    fn duplicated_columns_merge_first() {
        let x = array![[1.0, 5.0, 2.0, 5.0], [0.0, -1.0, 3.0, -1.0], [2.0, 2.0, 1.0, 2.0]];
        for metric in [Metric::Euclidean, Metric::Cosine] {
            let (map, _) = agglomerate(x.view(), 3, metric, ClusterMode::Pooled).unwrap();
            assert_eq!(map.assignments[1], map.assignments[3]);
            assert_eq!(map.assignments, vec![0, 1, 2, 1]);
        }
    }

    #[test]
    fn exemplars_belong_to_their_clusters() {
        let x = array![[1.0, 1.1, 9.0, 9.2, 9.1], [0.0, 0.1, 5.0, 5.1, 5.0]];
        let (map, t) = agglomerate(x.view(), 2, Metric::Euclidean, ClusterMode::Exemplar).unwrap();
        let ex = map.exemplars.clone().unwrap();
        for (c, &e) in ex.iter().enumerate() {
            assert_eq!(map.assignments[e], c);
        }
        assert_eq!(ex[1], 4);
        assert_eq!(t.ncols(), 2);
    }

    #[test]
    fn zero_columns_stay_apart_under_cosine() {
        let x = array![[0.0, 1.0, 2.0, 0.0], [0.0, 1.0, 2.1, 0.0]];
        let (map, _) = agglomerate(x.view(), 3, Metric::Cosine, ClusterMode::Pooled).unwrap();
        assert_eq!(map.assignments, vec![0, 1, 1, 2]);
    }

    #[test]
    fn out_of_range_k() {
        let x = array![[1.0, 2.0]];
        assert!(agglomerate(x.view(), 0, Metric::Euclidean, ClusterMode::Pooled).is_err());
        assert!(agglomerate(x.view(), 3, Metric::Euclidean, ClusterMode::Pooled).is_err());
    }
}
