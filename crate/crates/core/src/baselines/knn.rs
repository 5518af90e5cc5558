use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::{Classifier, Dataset};
use crate::error::{invalid, Result};

/// Distance-weighted k-nearest-neighbour vote over a stored training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub train: Dataset,
    pub k: usize,
    n_classes: usize,
}

impl KnnModel {
    pub fn fit(train: &Dataset, k: usize) -> Result<Self> {
        train.validate()?;
        if train.n_rows() == 0 {
            return Err(invalid("k-NN needs a non-empty training set"));
        }
        if k == 0 || k > train.n_rows() {
            return Err(invalid(format!("k must lie in 1..={}, got {k}", train.n_rows())));
        }
        Ok(Self { train: train.clone(), k, n_classes: train.n_classes() })
    }
}

impl Classifier for KnnModel {
    fn n_features(&self) -> usize {
        self.train.n_features()
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_proba_row(&self, row: &[f64]) -> Vec<f64> {
        let mut dist: Vec<(f64, usize)> = self
            .train
            .x
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, r)| (r.iter().zip(row).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(), i))
            .collect();
        let k = self.k;
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            dist.truncate(k);
        }
        let mut votes = vec![0.0; self.n_classes];
        // An exact match outvotes every neighbour at positive distance.
        let exact: Vec<usize> = dist.iter().filter(|d| d.0 == 0.0).map(|d| d.1).collect();
        if exact.is_empty() {
            for (d, i) in &dist {
                votes[self.train.y[*i]] += 1.0 / d;
            }
        } else {
            for i in exact {
                votes[self.train.y[i]] += 1.0;
            }
        }
        let total: f64 = votes.iter().sum();
        votes.iter_mut().for_each(|v| *v /= total);
        votes
    }
}

/// Fits and predicts in one call.
pub fn knn_predict(train: &Dataset, query: ArrayView2<'_, f64>, k: usize) -> Result<Vec<usize>> {
    if query.ncols() != train.n_features() {
        return Err(crate::Error::ShapeMismatch(format!(
            "query has {} features, training set {}",
            query.ncols(),
            train.n_features()
        )));
    }
    Ok(KnnModel::fit(train, k)?.predict(query))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn memorizes_training_rows() {
        let train = Dataset::new(array![[0.0, 0.0], [1.0, 1.0], [2.0, 0.5]], vec![0, 1, 0], None).unwrap();
        assert_eq!(knn_predict(&train, train.x.view(), 1).unwrap(), vec![0, 1, 0]);
        // Exact matches win even when outnumbered.
        assert_eq!(knn_predict(&train, array![[1.0, 1.0]].view(), 3).unwrap(), vec![1]);
    }

    #[test]
    fn single_row_labels_everything() {
        let train = Dataset::new(array![[3.0, -1.0]], vec![1], None).unwrap();
        let q = array![[0.0, 0.0], [100.0, 5.0]];
        assert_eq!(knn_predict(&train, q.view(), 1).unwrap(), vec![1, 1]);
    }

    #[test]
    fn xor_corner_matches_hand_enumeration() {
        // XOR layout; query near corner (0,0) but not on it.
        let train = Dataset::new(array![[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]], vec![0, 0, 1, 1], None).unwrap();
        let q = [0.1, 0.2];
        // Oracle: distances to every row, keep the 3 nearest, sum 1/d per label.
        let d: Vec<f64> = train.x.rows().into_iter().map(|r| ((r[0] - q[0]).powi(2) + (r[1] - q[1]).powi(2)).sqrt()).collect();
        let mut order: Vec<usize> = (0..4).collect();
        order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
        let mut w = [0.0; 2];
        for &i in &order[..3] {
            w[train.y[i]] += 1.0 / d[i];
        }
        let expected = if w[1] > w[0] { 1 } else { 0 };
        assert_eq!(knn_predict(&train, array![[0.1, 0.2]].view(), 3).unwrap(), vec![expected]);
        assert_eq!(expected, 0);
    }

    #[test]
    fn invalid_k_and_empty_set() {
        let train = Dataset::new(array![[0.0]], vec![0], None).unwrap();
        assert!(KnnModel::fit(&train, 0).is_err());
        assert!(KnnModel::fit(&train, 2).is_err());
        let empty = Dataset::new(ndarray::Array2::zeros((0, 1)), vec![], None).unwrap();
        assert!(KnnModel::fit(&empty, 1).is_err());
    }
}
