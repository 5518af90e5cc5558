use ndarray::{ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::Classifier;
use crate::dataset::accuracy;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PfiResult {
    pub baseline_accuracy: f64,
    /// Baseline accuracy minus mean permuted accuracy, per feature.
    pub importances: Vec<f64>,
    pub std: Vec<f64>,
    pub n_repeats: usize,
    pub seed: u64,
}

/// Permutation feature importance. Feature `j` shuffles its column with its
/// own seeded stream, so results do not depend on evaluation order. Features
/// the model structurally never reads are reported as exactly 0 without
/// being evaluated.
pub fn pfi<M: Classifier + ?Sized>(
    model: &M,
    x: ArrayView2<'_, f64>,
    y: &[usize],
    n_repeats: usize,
    seed: u64,
) -> Result<PfiResult> {
    if x.nrows() != y.len() {
        return Err(Error::ShapeMismatch(format!("{} rows but {} labels", x.nrows(), y.len())));
    }
    if x.ncols() != model.n_features() {
        return Err(Error::ShapeMismatch(format!("model expects {} features, got {}", model.n_features(), x.ncols())));
    }
    if n_repeats == 0 {
        return Err(invalid("PFI needs at least one repeat"));
    }
    let baseline = accuracy(&model.predict(x), y);
    let used = model.used_features();
    let rows: Vec<Vec<f64>> = x.axis_iter(Axis(0)).map(|r| r.to_vec()).collect();
    let per_feature: Vec<(f64, f64)> = (0..x.ncols())
        .into_par_iter()
        .map(|j| {
            if used.as_ref().is_some_and(|u| !u[j]) {
                return (0.0, 0.0);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            let column: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let mut order: Vec<usize> = (0..rows.len()).collect();
            let mut row = vec![0.0; x.ncols()];
            let drops: Vec<f64> = (0..n_repeats)
                .map(|_| {
                    order.shuffle(&mut rng);
                    let correct = rows
                        .iter()
                        .zip(&order)
                        .zip(y)
                        .filter(|((r, &src), &label)| {
                            row.copy_from_slice(r);
                            row[j] = column[src];
                            model.predict_row(&row) == label
                        })
                        .count();
                    baseline - correct as f64 / y.len() as f64
                })
                .collect();
            let m = crate::dataset::MeanStd::of(&drops);
            (m.mean, m.std)
        })
        .collect();
    Ok(PfiResult {
        baseline_accuracy: baseline,
        importances: per_feature.iter().map(|p| p.0).collect(),
        std: per_feature.iter().map(|p| p.1).collect(),
        n_repeats,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    /// Predicts 1 when feature `f` exceeds `t`.
    struct Threshold {
        f: usize,
        t: f64,
        n: usize,
    }

    impl Classifier for Threshold {
        fn n_features(&self) -> usize {
            self.n
        }
        fn n_classes(&self) -> usize {
            2
        }
        fn predict_proba_row(&self, row: &[f64]) -> Vec<f64> {
            if row[self.f] > self.t {
                vec![0.0, 1.0]
            } else {
                vec![1.0, 0.0]
            }
        }
    }

    #[test]
    fn constant_and_unread_columns_score_zero() {
        let x = array![[1.0, 5.0, 0.3], [2.0, 5.0, 0.9], [3.0, 5.0, 0.1], [4.0, 5.0, 0.7]];
        let y = [0, 0, 1, 1];
        let m = Threshold { f: 0, t: 2.5, n: 3 };
        for seed in 0..5 {
            let r = pfi(&m, x.view(), &y, 10, seed).unwrap();
            assert_eq!(r.importances[1], 0.0);
            assert_eq!(r.importances[2], 0.0);
            assert_eq!(r.baseline_accuracy, 1.0);
        }
    }

    #[test]
    fn matches_exact_permutation_expectation() {
        // Separable six-row set; the exact expectation of the permuted
        // accuracy is the average over all 720 orderings of the column.
        let col = [0.1, 0.4, 0.2, 0.9, 0.7, 0.8];
        let y = [0, 0, 0, 1, 1, 1];
        let x = Array2::from_shape_fn((6, 1), |(i, _)| col[i]);
        let m = Threshold { f: 0, t: 0.5, n: 1 };
        fn perms(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
            if k == items.len() {
                out.push(items.clone());
                return;
            }
            for i in k..items.len() {
                items.swap(k, i);
                perms(items, k + 1, out);
                items.swap(k, i);
            }
        }
        let mut all = Vec::new();
        perms(&mut (0..6).collect(), 0, &mut all);
        let expected_acc = all
            .iter()
            .map(|p| (0..6).filter(|&i| ((col[p[i]] > 0.5) as usize) == y[i]).count() as f64 / 6.0)
            .sum::<f64>()
            / all.len() as f64;
        let r = pfi(&m, x.view(), &y, 4000, 3).unwrap();
        let oracle = 1.0 - expected_acc;
        assert!((oracle - 0.5).abs() < 1e-12, "baseline − chance");
        assert!((r.importances[0] - oracle).abs() < 0.02, "{} vs {oracle}", r.importances[0]);
    }

    #[test]
    fn shape_checks() {
        let m = Threshold { f: 0, t: 0.0, n: 2 };
        assert!(pfi(&m, array![[1.0, 2.0]].view(), &[0, 1], 1, 0).is_err());
        assert!(pfi(&m, array![[1.0]].view(), &[0], 1, 0).is_err());
        assert!(pfi(&m, array![[1.0, 2.0]].view(), &[0], 0, 0).is_err());
    }
}
