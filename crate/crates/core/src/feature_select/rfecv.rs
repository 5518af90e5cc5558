use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::CvScheme;
use crate::baselines::{forest_fit, Classifier, Dataset, ForestConfig};
use crate::dataset::{accuracy, MeanStd};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfecvConfig {
    /// Features removed per round.
    pub step: usize,
    pub forest: ForestConfig,
    /// Seeds used when scoring the selected subset on held-out data.
    pub n_test_repeats: usize,
}

impl Default for RfecvConfig {
    fn default() -> Self {
        Self { step: 5, forest: ForestConfig::default(), n_test_repeats: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n_features: usize,
    pub mean_accuracy: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfecvResult {
    pub curve: Vec<CurvePoint>,
    /// Sorted original feature indices kept at the curve maximum.
    pub selected: Vec<usize>,
    pub test_accuracy: Option<MeanStd>,
    pub test_seeds: Vec<u64>,
}

/// Feature counts visited: `n, n − step, …` while positive, then 1.
pub fn feature_counts(n: usize, step: usize) -> Vec<usize> {
    let mut counts = vec![n];
    let mut c = n;
    while c > 1 {
        c = if c > step { c - step } else { 1 };
        counts.push(c);
    }
    counts
}

/// Runs elimination on `train`, calling `visit` with the fitted forest and
/// the surviving original feature indices at every count.
fn eliminate(
    train: &Dataset,
    counts: &[usize],
    forest: ForestConfig,
    mut visit: impl FnMut(&crate::baselines::ForestModel, &[usize]) -> Result<()>,
) -> Result<()> {
    let mut current: Vec<usize> = (0..train.n_features()).collect();
    for (i, &count) in counts.iter().enumerate() {
        debug_assert_eq!(current.len(), count);
        let model = forest_fit(&train.select_features(&current), forest)?;
        visit(&model, &current)?;
        if let Some(&next) = counts.get(i + 1) {
            let imp = model.gini_importance();
            let mut order: Vec<usize> = (0..current.len()).collect();
            // Least important first; among ties the later feature goes first.
            order.sort_by(|&a, &b| imp[a].total_cmp(&imp[b]).then(current[b].cmp(&current[a])));
            let mut keep: Vec<usize> = order[count - next..].iter().map(|&p| current[p]).collect();
            keep.sort_unstable();
            current = keep;
        }
    }
    Ok(())
}

/// The surviving feature set at every count when eliminating on all of `data`.
pub fn rfe_order(data: &Dataset, step: usize, forest: ForestConfig) -> Result<Vec<Vec<usize>>> {
    if step == 0 {
        return Err(invalid("elimination step must be at least 1"));
    }
    let mut sets = Vec::new();
    eliminate(data, &feature_counts(data.n_features(), step), forest, |_, f| {
        sets.push(f.to_vec());
        Ok(())
    })?;
    Ok(sets)
}

/// Recursive feature elimination with cross-validated selection of the
/// feature count. Ties at the maximum go to the smaller count.
pub fn rfecv(data: &Dataset, scheme: &CvScheme, cfg: RfecvConfig, test: Option<&Dataset>) -> Result<RfecvResult> {
    data.validate()?;
    if cfg.step == 0 {
        return Err(invalid("elimination step must be at least 1"));
    }
    if data.n_features() == 0 {
        return Err(invalid("RFECV needs at least one feature"));
    }
    let counts = feature_counts(data.n_features(), cfg.step);
    let per_fold: Vec<Vec<f64>> = scheme
        .folds
        .par_iter()
        .map(|fold| {
            let train = data.select_rows(&fold.train);
            let val = data.select_rows(&fold.validate);
            let mut scores = Vec::with_capacity(counts.len());
            eliminate(&train, &counts, cfg.forest, |model, feats| {
                let pred = model.predict(val.x.select(ndarray::Axis(1), feats).view());
                scores.push(accuracy(&pred, &val.y));
                Ok(())
            })?;
            Ok(scores)
        })
        .collect::<Result<_>>()?;
    let curve: Vec<CurvePoint> = counts
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let s = MeanStd::of(&per_fold.iter().map(|f| f[i]).collect::<Vec<_>>());
            CurvePoint { n_features: n, mean_accuracy: s.mean, std: s.std }
        })
        .collect();
    // Counts decrease along the curve, so the last maximum has the fewest features.
    let best = curve
        .iter()
        .enumerate()
        .fold(0, |b, (i, p)| if p.mean_accuracy >= curve[b].mean_accuracy { i } else { b });
    let selected = rfe_order(data, cfg.step, cfg.forest)?.swap_remove(best);

    let (test_accuracy, test_seeds) = match test {
        Some(t) => {
            if t.n_features() != data.n_features() {
                return Err(Error::ShapeMismatch("test set feature count differs from training".into()));
            }
            let seeds: Vec<u64> = (0..cfg.n_test_repeats as u64).map(|s| cfg.forest.seed + s).collect();
            let train = data.select_features(&selected);
            let test_x = t.x.select(ndarray::Axis(1), &selected);
            let accs = seeds
                .iter()
                .map(|&seed| {
                    let m = forest_fit(&train, ForestConfig { seed, ..cfg.forest })?;
                    Ok(accuracy(&m.predict(test_x.view()), &t.y))
                })
                .collect::<Result<Vec<_>>>()?;
            (Some(MeanStd::of(&accs)), seeds)
        }
        None => (None, Vec::new()),
    };
    Ok(RfecvResult { curve, selected, test_accuracy, test_seeds })
}
