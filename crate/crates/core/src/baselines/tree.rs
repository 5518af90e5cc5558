use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Classifier, Dataset};
use crate::error::{invalid, Result};

/// Gini impurity `1 − Σ p_c²` of a class-count vector.
pub fn gini(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TreeConfig {
    /// `None` grows until leaves are pure or no split exists.
    pub max_depth: Option<usize>,
    /// Features inspected per split; `None` inspects all of them.
    pub max_features: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        /// Class fractions among training rows reaching this leaf.
        value: Vec<f64>,
        n: usize,
    },
    Split {
        feature: usize,
        /// Rows with `x[feature] <= threshold` go left.
        threshold: f64,
        left: usize,
        right: usize,
        n: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
    n_features: usize,
    n_classes: usize,
    /// Weighted impurity decrease summed per feature, before normalization.
    raw_importance: Vec<f64>,
}

struct Builder<'a> {
    data: &'a Dataset,
    cfg: TreeConfig,
    n_classes: usize,
    n_total: f64,
    nodes: Vec<Node>,
    raw_importance: Vec<f64>,
    rng: ChaCha8Rng,
    features: Vec<usize>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    child_impurity: f64,
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &i in idx {
            c[self.data.y[i]] += 1;
        }
        c
    }

    fn leaf(&mut self, counts: &[usize]) -> usize {
        let n: usize = counts.iter().sum();
        let value = counts.iter().map(|&c| c as f64 / n.max(1) as f64).collect();
        self.nodes.push(Node::Leaf { value, n });
        self.nodes.len() - 1
    }

    fn best_split(&mut self, idx: &[usize]) -> Option<BestSplit> {
        let n_features = self.data.n_features();
        let wanted = self.cfg.max_features.unwrap_or(n_features).clamp(1, n_features);
        if wanted < n_features {
            self.features.shuffle(&mut self.rng);
        }
        let n = idx.len() as f64;
        let mut best: Option<BestSplit> = None;
        let mut inspected = 0;
        let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(idx.len());
        for fi in 0..n_features {
            // Constant features do not count toward the quota, so keep
            // drawing until `wanted` usable ones were inspected.
            if inspected == wanted {
                break;
            }
            let f = self.features[fi];
            pairs.clear();
            pairs.extend(idx.iter().map(|&i| (self.data.x[[i, f]], self.data.y[i])));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            if pairs[0].0 == pairs[pairs.len() - 1].0 {
                continue;
            }
            inspected += 1;
            let mut right = vec![0usize; self.n_classes];
            for p in &pairs {
                right[p.1] += 1;
            }
            let mut left = vec![0usize; self.n_classes];
            for pos in 0..pairs.len() - 1 {
                left[pairs[pos].1] += 1;
                right[pairs[pos].1] -= 1;
                if pairs[pos].0 == pairs[pos + 1].0 {
                    continue;
                }
                let nl = (pos + 1) as f64;
                let child = (nl * gini(&left) + (n - nl) * gini(&right)) / n;
                if best.as_ref().is_none_or(|b| child < b.child_impurity) {
                    let (lo, hi) = (pairs[pos].0, pairs[pos + 1].0);
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(BestSplit { feature: f, threshold, child_impurity: child });
                }
            }
        }
        best
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let counts = self.counts(&idx);
        let impurity = gini(&counts);
        let capped = self.cfg.max_depth.is_some_and(|d| depth >= d);
        if impurity == 0.0 || capped || idx.len() < 2 {
            return self.leaf(&counts);
        }
        let Some(split) = self.best_split(&idx) else {
            return self.leaf(&counts);
        };
        let n = idx.len();
        self.raw_importance[split.feature] += n as f64 / self.n_total * (impurity - split.child_impurity);
        let (l, r): (Vec<usize>, Vec<usize>) =
            idx.into_iter().partition(|&i| self.data.x[[i, split.feature]] <= split.threshold);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: vec![], n: 0 });
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id] = Node::Split { feature: split.feature, threshold: split.threshold, left, right, n };
        id
    }
}

/// Fits an unrestricted tree on every row.
pub fn tree_fit(train: &Dataset, max_depth: Option<usize>) -> Result<DecisionTree> {
    let rows: Vec<usize> = (0..train.n_rows()).collect();
    tree_fit_with(train, &rows, TreeConfig { max_depth, max_features: None }, 0)
}

/// Fits on `rows` (repeats allowed, as in a bootstrap sample). `seed` drives
/// feature subsampling when `cfg.max_features` is set.
pub fn tree_fit_with(train: &Dataset, rows: &[usize], cfg: TreeConfig, seed: u64) -> Result<DecisionTree> {
    train.validate()?;
    if rows.is_empty() {
        return Err(invalid("a tree needs at least one training row"));
    }
    if train.n_features() == 0 {
        return Err(invalid("a tree needs at least one feature"));
    }
    let mut b = Builder {
        data: train,
        cfg,
        n_classes: train.n_classes(),
        n_total: rows.len() as f64,
        nodes: Vec::new(),
        raw_importance: vec![0.0; train.n_features()],
        rng: ChaCha8Rng::seed_from_u64(seed),
        features: (0..train.n_features()).collect(),
    };
    b.build(rows.to_vec(), 0);
    Ok(DecisionTree {
        nodes: b.nodes,
        n_features: train.n_features(),
        n_classes: b.n_classes,
        raw_importance: b.raw_importance,
    })
}

impl DecisionTree {
    pub(crate) fn raw_importance(&self) -> &[f64] {
        &self.raw_importance
    }

    /// Impurity decrease per feature normalized to sum 1, or all zeros when
    /// the tree never split.
    pub fn feature_importances(&self) -> Vec<f64> {
        normalize(self.raw_importance.clone())
    }

    pub fn n_splits(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Split { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    fn leaf_value(&self, row: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value, .. } => return value,
                Node::Split { feature, threshold, left, right, .. } => {
                    i = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

pub(crate) fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter_mut().for_each(|x| *x /= total);
    }
    v
}

impl Classifier for DecisionTree {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_proba_row(&self, row: &[f64]) -> Vec<f64> {
        self.leaf_value(row).to_vec()
    }

    fn used_features(&self) -> Option<Vec<bool>> {
        let mut used = vec![false; self.n_features];
        for n in &self.nodes {
            if let Node::Split { feature, .. } = n {
                used[*feature] = true;
            }
        }
        Some(used)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn gini_values() {
        assert_eq!(gini(&[5, 5]), 0.5);
        assert_eq!(gini(&[4, 0]), 0.0);
    }

    #[test]
    fn separable_single_feature_splits_at_midpoint() {
        let x = array![[0.5], [1.0], [2.0], [4.0], [7.0]];
        let d = Dataset::new(x, vec![0, 0, 0, 1, 1], None).unwrap();
        let t = tree_fit(&d, None).unwrap();
        assert_eq!(t.n_splits(), 1);
        // Oracle: the only pure split sits between the class-boundary neighbours 2 and 4.
        match &t.nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 3.0);
            }
            _ => panic!("expected a split"),
        }
        assert_eq!(t.predict(d.x.view()), d.y);
    }

    #[test]
    fn pure_data_is_a_single_leaf() {
        let d = Dataset::new(array![[1.0, 2.0], [3.0, 4.0]], vec![1, 1], None).unwrap();
        let t = tree_fit(&d, None).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.feature_importances(), vec![0.0, 0.0]);
    }

    #[test]
    fn single_split_concentrates_importance() {
        let x = Array2::from_shape_fn((6, 5), |(i, j)| if j == 3 { i as f64 } else { 1.0 });
        let d = Dataset::new(x, vec![0, 0, 0, 1, 1, 1], None).unwrap();
        let imp = tree_fit(&d, None).unwrap().feature_importances();
        assert_eq!(imp, vec![0.0, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn contradictory_duplicates_take_majority() {
        let d = Dataset::new(array![[1.0], [1.0], [1.0], [2.0]], vec![1, 0, 1, 0], None).unwrap();
        let t = tree_fit(&d, None).unwrap();
        assert_eq!(t.predict(array![[1.0], [2.0]].view()), vec![1, 0]);
    }

    #[test]
    fn uncapped_tree_fits_consistent_data() {
        let x = Array2::from_shape_fn((40, 3), |(i, j)| ((i * 7 + j * 13) % 11) as f64 + 0.1 * i as f64);
        let y: Vec<usize> = (0..40).map(|i| (i * 5 % 3 == 0) as usize).collect();
        let d = Dataset::new(x, y, None).unwrap();
        let t = tree_fit(&d, None).unwrap();
        assert_eq!(t.predict(d.x.view()), d.y);
        let capped = tree_fit(&d, Some(1)).unwrap();
        assert!(capped.depth() <= 1);
    }
}
