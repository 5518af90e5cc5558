use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::{forest_fit, tree_fit, Classifier, DecisionTree, ForestConfig, ForestModel, KnnModel};
use crate::dataset::{Dataset, Task};
use crate::error::{invalid, Result};
use crate::sparsenn::{self, EpochRecord, GatedNetwork, InputScaling, TrainConfig};

fn default_k() -> usize {
    5
}

fn default_trees() -> usize {
    100
}

fn default_arch() -> Vec<usize> {
    vec![8]
}

fn default_epochs() -> usize {
    TrainConfig::default().epochs
}

fn default_lr() -> f64 {
    TrainConfig::default().learning_rate
}

fn default_batch() -> usize {
    TrainConfig::default().batch_size
}

/// Which learner to fit, with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Knn {
        #[serde(default = "default_k")]
        k: usize,
    },
    Tree {
        #[serde(default)]
        max_depth: Option<usize>,
    },
    Forest {
        #[serde(default = "default_trees")]
        n_trees: usize,
        #[serde(default)]
        max_depth: Option<usize>,
    },
    Sparsenn {
        #[serde(default = "default_arch")]
        arch: Vec<usize>,
        /// `None` takes the task default.
        #[serde(default)]
        lambda: Option<f64>,
        /// Append the stud label of each trace as an extra input (wall task).
        #[serde(default)]
        stud_indicator: bool,
        #[serde(default = "default_epochs")]
        epochs: usize,
        #[serde(default = "default_lr")]
        learning_rate: f64,
        #[serde(default = "default_batch")]
        batch_size: usize,
        #[serde(default)]
        scaling: InputScaling,
    },
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Forest { n_trees: default_trees(), max_depth: None }
    }
}

impl ModelSpec {
    /// SparseNN with every default for `task`.
    pub fn sparsenn(task: Task) -> Self {
        ModelSpec::Sparsenn {
            arch: if task == Task::WallClassification { vec![8, 8, 8] } else { default_arch() },
            lambda: None,
            stud_indicator: task == Task::WallClassification,
            epochs: default_epochs(),
            learning_rate: default_lr(),
            batch_size: default_batch(),
            scaling: InputScaling::default(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Knn { .. } => "knn",
            ModelSpec::Tree { .. } => "tree",
            ModelSpec::Forest { .. } => "forest",
            ModelSpec::Sparsenn { .. } => "sparsenn",
        }
    }

    pub fn uses_stud_indicator(&self) -> bool {
        matches!(self, ModelSpec::Sparsenn { stud_indicator: true, .. })
    }

    pub fn validate(&self, task: Task) -> Result<()> {
        match self {
            ModelSpec::Knn { k } if *k == 0 => Err(invalid("k must be at least 1")),
            ModelSpec::Forest { n_trees, .. } if *n_trees == 0 => Err(invalid("a forest needs at least one tree")),
            ModelSpec::Sparsenn { arch, stud_indicator, .. } => {
                if arch.is_empty() || arch.contains(&0) {
                    return Err(invalid("architecture needs at least one non-empty hidden layer"));
                }
                if *stud_indicator && task == Task::StudDetection {
                    return Err(invalid("the stud indicator input only applies to wall classification"));
                }
                self.train_config(task, 0).validate()
            }
            _ => Ok(()),
        }
    }

    /// Training settings for a SparseNN model; defaults otherwise.
    pub fn train_config(&self, task: Task, seed: u64) -> TrainConfig {
        match self {
            ModelSpec::Sparsenn { lambda, epochs, learning_rate, batch_size, scaling, .. } => TrainConfig {
                lambda_reg: lambda.unwrap_or(match task {
                    Task::StudDetection => sparsenn::DEFAULT_LAMBDA_STUD,
                    Task::WallClassification => sparsenn::DEFAULT_LAMBDA_WALL,
                }),
                epochs: *epochs,
                learning_rate: *learning_rate,
                batch_size: *batch_size,
                scaling: *scaling,
                seed,
                ..TrainConfig::default()
            },
            _ => TrainConfig { seed, ..TrainConfig::default() },
        }
    }

    /// Fits on `data`, whose last column is the stud indicator when the model
    /// asks for one. SparseNN also returns its training history.
    pub fn fit(&self, task: Task, data: &Dataset, seed: u64) -> Result<(TrainedModel, Option<Vec<EpochRecord>>)> {
        self.validate(task)?;
        Ok(match self {
            ModelSpec::Knn { k } => (TrainedModel::Knn(KnnModel::fit(data, *k)?), None),
            ModelSpec::Tree { max_depth } => (TrainedModel::Tree(tree_fit(data, *max_depth)?), None),
            ModelSpec::Forest { n_trees, max_depth } => {
                let cfg = ForestConfig { n_trees: *n_trees, max_depth: *max_depth, seed, ..ForestConfig::default() };
                (TrainedModel::Forest(forest_fit(data, cfg)?), None)
            }
            ModelSpec::Sparsenn { arch, stud_indicator, .. } => {
                let out = sparsenn::train(data, arch, *stud_indicator, &self.train_config(task, seed))?;
                (TrainedModel::Sparsenn(out.model), Some(out.history))
            }
        })
    }
}

/// A fitted model of any supported kind, serializable to JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum TrainedModel {
    Knn(KnnModel),
    Tree(DecisionTree),
    Forest(ForestModel),
    Sparsenn(GatedNetwork),
}

impl TrainedModel {
    pub fn as_classifier(&self) -> &dyn Classifier {
        match self {
            TrainedModel::Knn(m) => m,
            TrainedModel::Tree(m) => m,
            TrainedModel::Forest(m) => m,
            TrainedModel::Sparsenn(m) => m,
        }
    }

    /// Impurity-based importances for tree models.
    pub fn gini_importance(&self) -> Option<Vec<f64>> {
        match self {
            TrainedModel::Tree(t) => Some(t.feature_importances()),
            TrainedModel::Forest(f) => Some(f.gini_importance().to_vec()),
            _ => None,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut w, self)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }
}

impl Classifier for TrainedModel {
    fn n_features(&self) -> usize {
        self.as_classifier().n_features()
    }

    fn n_classes(&self) -> usize {
        self.as_classifier().n_classes()
    }

    fn predict_proba_row(&self, row: &[f64]) -> Vec<f64> {
        self.as_classifier().predict_proba_row(row)
    }

    fn predict(&self, x: ndarray::ArrayView2<'_, f64>) -> Vec<usize> {
        self.as_classifier().predict(x)
    }

    fn predict_proba(&self, x: ndarray::ArrayView2<'_, f64>) -> Vec<Vec<f64>> {
        self.as_classifier().predict_proba(x)
    }

    fn used_features(&self) -> Option<Vec<bool>> {
        self.as_classifier().used_features()
    }
}
