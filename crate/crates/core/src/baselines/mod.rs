//! Classical per-trace classifiers: distance-weighted k-nearest neighbours,
//! CART decision trees and random forests.

mod forest;
mod knn;
mod tree;

pub use forest::{forest_fit, ForestConfig, ForestModel};
pub use knn::{knn_predict, KnnModel};
pub use tree::{gini, tree_fit, tree_fit_with, DecisionTree, Node, TreeConfig};

pub use crate::dataset::Dataset;

use ndarray::ArrayView2;
use rayon::prelude::*;

/// Anything that maps a feature row to class probabilities.
pub trait Classifier: Sync {
    fn n_features(&self) -> usize;

    fn n_classes(&self) -> usize;

    fn predict_proba_row(&self, row: &[f64]) -> Vec<f64>;

    /// Most probable class; ties go to the lowest label.
    fn predict_row(&self, row: &[f64]) -> usize {
        argmax(&self.predict_proba_row(row))
    }

    fn predict(&self, x: ArrayView2<'_, f64>) -> Vec<usize> {
        (0..x.nrows())
            .into_par_iter()
            .map(|i| self.predict_row(&x.row(i).to_vec()))
            .collect()
    }

    fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Vec<Vec<f64>> {
        (0..x.nrows())
            .into_par_iter()
            .map(|i| self.predict_proba_row(&x.row(i).to_vec()))
            .collect()
    }

    /// Features the model can read, when that is known from its structure.
    /// `None` means every feature may matter.
    fn used_features(&self) -> Option<Vec<bool>> {
        None
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
