use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::normalize;
use super::{Classifier, Dataset, DecisionTree, TreeConfig};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    /// Features per split; `None` uses `floor(sqrt(n_features))`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self { n_trees: 100, max_depth: None, max_features: None, bootstrap: true, seed: 0 }
    }
}

impl ForestConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub config: ForestConfig,
    pub trees: Vec<DecisionTree>,
    /// Mean impurity decrease per feature, normalized to sum 1.
    pub feature_importances: Vec<f64>,
    n_features: usize,
    n_classes: usize,
}

/// Each tree draws its bootstrap sample and feature subsets from its own
/// stream, so the model does not depend on thread scheduling.
pub fn forest_fit(train: &Dataset, cfg: ForestConfig) -> Result<ForestModel> {
    train.validate()?;
    if cfg.n_trees == 0 {
        return Err(invalid("a forest needs at least one tree"));
    }
    if train.n_rows() == 0 {
        return Err(invalid("a forest needs at least one training row"));
    }
    let n = train.n_rows();
    let max_features = cfg.max_features.unwrap_or(((train.n_features() as f64).sqrt() as usize).max(1));
    let tree_cfg = TreeConfig { max_depth: cfg.max_depth, max_features: Some(max_features) };
    let trees: Vec<DecisionTree> = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(t as u64);
            let rows: Vec<usize> =
                if cfg.bootstrap { (0..n).map(|_| rng.random_range(0..n)).collect() } else { (0..n).collect() };
            super::tree_fit_with(train, &rows, tree_cfg, rng.random())
        })
        .collect::<Result<_>>()?;
    let mut raw = vec![0.0; train.n_features()];
    for t in &trees {
        for (r, v) in raw.iter_mut().zip(t.raw_importance()) {
            *r += v / cfg.n_trees as f64;
        }
    }
    Ok(ForestModel {
        config: cfg,
        feature_importances: normalize(raw),
        n_features: train.n_features(),
        n_classes: train.n_classes(),
        trees,
    })
}

impl ForestModel {
    pub fn gini_importance(&self) -> &[f64] {
        &self.feature_importances
    }
}

impl Classifier for ForestModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Fraction of trees voting for each class.
    fn predict_proba_row(&self, row: &[f64]) -> Vec<f64> {
        let mut votes = vec![0.0; self.n_classes];
        for t in &self.trees {
            votes[t.predict_row(row)] += 1.0;
        }
        votes.iter_mut().for_each(|v| *v /= self.trees.len() as f64);
        votes
    }

    fn used_features(&self) -> Option<Vec<bool>> {
        let mut used = vec![false; self.n_features];
        for t in &self.trees {
            for (u, tu) in used.iter_mut().zip(t.used_features()?) {
                *u |= tu;
            }
        }
        Some(used)
    }
}
