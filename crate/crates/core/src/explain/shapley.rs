use ndarray::{Array2, ArrayView2};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::Classifier;
use crate::error::{invalid, Error, Result};

/// Largest feature count `exact_shapley` will enumerate (2^20 coalitions).
pub const MAX_EXACT_FEATURES: usize = 20;

/// A scalar model output over the explained features.
pub trait ValueModel: Sync {
    fn output(&self, row: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64 + Sync> ValueModel for F {
    fn output(&self, row: &[f64]) -> f64 {
        self(row)
    }
}

/// Probability of `class` from a classifier, seen through a subset of its
/// inputs. Inputs outside `active` keep the values of `template`.
pub struct ClassProbability<'a, C: Classifier> {
    model: &'a C,
    class: usize,
    active: Vec<usize>,
    template: Vec<f64>,
}

impl<'a, C: Classifier> ClassProbability<'a, C> {
    pub fn new(model: &'a C, class: usize, active: Vec<usize>, template: Vec<f64>) -> Result<Self> {
        if template.len() != model.n_features() {
            return Err(Error::ShapeMismatch(format!(
                "template has {} values, model reads {}",
                template.len(),
                model.n_features()
            )));
        }
        if class >= model.n_classes() {
            return Err(invalid(format!("class {class} out of range")));
        }
        if let Some(&j) = active.iter().find(|&&j| j >= template.len()) {
            return Err(Error::IndexOutOfRange { index: j, len: template.len() });
        }
        Ok(Self { model, class, active, template })
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    /// Restricts full-width rows to the active columns.
    pub fn project(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        x.select(ndarray::Axis(1), &self.active)
    }
}

impl<C: Classifier> ValueModel for ClassProbability<'_, C> {
    fn output(&self, row: &[f64]) -> f64 {
        let mut full = self.template.clone();
        for (&j, &v) in self.active.iter().zip(row) {
            full[j] = v;
        }
        self.model.predict_proba_row(&full)[self.class]
    }
}

/// Reference rows that stand in for features outside a coalition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Background {
    pub rows: Array2<f64>,
}

impl Background {
    pub fn new(rows: Array2<f64>) -> Result<Self> {
        if rows.nrows() == 0 {
            return Err(invalid("background needs at least one row"));
        }
        Ok(Self { rows })
    }

    /// Up to `n` distinct rows of `x`, drawn uniformly without replacement.
    pub fn sample(x: ArrayView2<'_, f64>, n: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let idx: Vec<usize> = (0..x.nrows()).collect();
        let mut picked: Vec<usize> = idx.choose_multiple(&mut rng, n.min(x.nrows())).copied().collect();
        picked.sort_unstable();
        Self::new(x.select(ndarray::Axis(0), &picked))
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn n_features(&self) -> usize {
        self.rows.ncols()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyValues {
    pub phi: Vec<f64>,
    /// Value of the empty coalition: the mean output over the background.
    pub base_value: f64,
}

impl ShapleyValues {
    /// `base_value + Σ φ`, which equals the model output at the instance.
    pub fn total(&self) -> f64 {
        self.base_value + self.phi.iter().sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledShapley {
    pub phi: Vec<f64>,
    /// Standard error of each estimate; zero with a single permutation.
    pub std_err: Vec<f64>,
    pub base_value: f64,
    pub n_permutations: usize,
    pub seed: u64,
}

fn check_instance(x: &[f64], bg: &Background) -> Result<()> {
    if x.len() != bg.n_features() {
        return Err(Error::ShapeMismatch(format!(
            "instance has {} features, background {}",
            x.len(),
            bg.n_features()
        )));
    }
    if bg.is_empty() {
        return Err(invalid("background needs at least one row"));
    }
    Ok(())
}

/// Mean output over background rows with coalition members taken from `x`.
fn coalition_value<M: ValueModel + ?Sized>(model: &M, x: &[f64], bg: &Background, member: impl Fn(usize) -> bool) -> f64 {
    let mut row = vec![0.0; x.len()];
    let mut total = 0.0;
    for b in bg.rows.rows() {
        for (j, r) in row.iter_mut().enumerate() {
            *r = if member(j) { x[j] } else { b[j] };
        }
        total += model.output(&row);
    }
    total / bg.len() as f64
}

/// Shapley values of `x` under the marginal value function, by enumerating
/// every coalition.
pub fn exact_shapley<M: ValueModel + ?Sized>(model: &M, x: &[f64], bg: &Background) -> Result<ShapleyValues> {
    check_instance(x, bg)?;
    let n = x.len();
    if n > MAX_EXACT_FEATURES {
        return Err(Error::TooManyFeatures { n, max: MAX_EXACT_FEATURES });
    }
    let values: Vec<f64> =
        (0..1usize << n).map(|mask| coalition_value(model, x, bg, |j| mask >> j & 1 == 1)).collect();
    // Weight of a coalition of size s not containing j: s!(n-s-1)!/n! = 1/(n·C(n-1, s)).
    let mut weight = vec![0.0; n.max(1)];
    let mut binom = 1.0;
    for (s, w) in weight.iter_mut().enumerate().take(n) {
        *w = 1.0 / (n as f64 * binom);
        binom = binom * (n - 1 - s) as f64 / (s + 1) as f64;
    }
    let mut phi = vec![0.0; n];
    for (j, p) in phi.iter_mut().enumerate() {
        let bit = 1usize << j;
        for mask in (0..1usize << n).filter(|m| m & bit == 0) {
            *p += weight[mask.count_ones() as usize] * (values[mask | bit] - values[mask]);
        }
    }
    Ok(ShapleyValues { phi, base_value: values[0] })
}

/// Permutation-sampling estimate of the same values. Each permutation adds
/// features one at a time and credits each with its marginal change.
pub fn sampled_shapley<M: ValueModel + ?Sized>(
    model: &M,
    x: &[f64],
    bg: &Background,
    n_permutations: usize,
    seed: u64,
) -> Result<SampledShapley> {
    check_instance(x, bg)?;
    if n_permutations == 0 {
        return Err(invalid("n_permutations must be at least 1"));
    }
    let n = x.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base_value = coalition_value(model, x, bg, |_| false);
    let mut sum = vec![0.0; n];
    let mut sum_sq = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    let mut member = vec![false; n];
    for _ in 0..n_permutations {
        order.shuffle(&mut rng);
        member.fill(false);
        let mut prev = base_value;
        for &j in &order {
            member[j] = true;
            let v = coalition_value(model, x, bg, |k| member[k]);
            let delta = v - prev;
            sum[j] += delta;
            sum_sq[j] += delta * delta;
            prev = v;
        }
    }
    let m = n_permutations as f64;
    let phi: Vec<f64> = sum.iter().map(|s| s / m).collect();
    let std_err = if n_permutations < 2 {
        vec![0.0; n]
    } else {
        sum_sq
            .iter()
            .zip(&phi)
            .map(|(sq, mean)| ((sq - m * mean * mean).max(0.0) / (m - 1.0) / m).sqrt())
            .collect()
    };
    Ok(SampledShapley { phi, std_err, base_value, n_permutations, seed })
}

/// How to attribute one instance: exactly when the feature count allows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapleyMethod {
    Exact,
    Sampled { n_permutations: usize, seed: u64 },
}

/// Attributions for each row of `x`, computed in parallel across rows.
pub fn shapley_rows<M: ValueModel + ?Sized>(
    model: &M,
    x: ArrayView2<'_, f64>,
    bg: &Background,
    method: ShapleyMethod,
) -> Result<Vec<ShapleyValues>> {
    (0..x.nrows())
        .into_par_iter()
        .map(|i| {
            let row = x.row(i).to_vec();
            match method {
                ShapleyMethod::Exact => exact_shapley(model, &row, bg),
                ShapleyMethod::Sampled { n_permutations, seed } => {
                    // Per-row seeds keep rows independent of scheduling.
                    let s = sampled_shapley(model, &row, bg, n_permutations, seed.wrapping_add(i as u64))?;
                    Ok(ShapleyValues { phi: s.phi, base_value: s.base_value })
                }
            }
        })
        .collect()
}

/// Per-feature `(feature value, φ)` pairs over a sample of evaluation rows,
/// the raw material of a beeswarm plot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapSummary {
    /// Original column index of each explained feature.
    pub features: Vec<usize>,
    /// Rows of the evaluation matrix that were explained.
    pub rows: Vec<usize>,
    /// `values[f][r]` is the feature value, `phi[f][r]` its attribution.
    pub values: Vec<Vec<f64>>,
    pub phi: Vec<Vec<f64>>,
    pub base_value: f64,
}

impl ShapSummary {
    /// Mean |φ| per feature.
    pub fn mean_abs_phi(&self) -> Vec<f64> {
        self.phi.iter().map(|p| p.iter().map(|v| v.abs()).sum::<f64>() / p.len().max(1) as f64).collect()
    }
}

/// Explains up to `max_rows` rows of `x` (chosen uniformly with `seed`).
/// `features` names the columns of `x` for reporting.
pub fn shap_summary<M: ValueModel + ?Sized>(
    model: &M,
    x: ArrayView2<'_, f64>,
    features: &[usize],
    bg: &Background,
    max_rows: usize,
    method: ShapleyMethod,
    seed: u64,
) -> Result<ShapSummary> {
    if features.len() != x.ncols() {
        return Err(Error::ShapeMismatch(format!("{} feature names for {} columns", features.len(), x.ncols())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all: Vec<usize> = (0..x.nrows()).collect();
    let mut rows: Vec<usize> = all.choose_multiple(&mut rng, max_rows.min(x.nrows())).copied().collect();
    rows.sort_unstable();
    let sub = x.select(ndarray::Axis(0), &rows);
    let attributions = shapley_rows(model, sub.view(), bg, method)?;
    let nf = features.len();
    let values = (0..nf).map(|f| sub.column(f).to_vec()).collect();
    let phi = (0..nf).map(|f| attributions.iter().map(|a| a.phi[f]).collect()).collect();
    let base_value = attributions.first().map_or_else(|| coalition_value(model, &vec![0.0; nf], bg, |_| false), |a| a.base_value);
    Ok(ShapSummary { features: features.to_vec(), rows, values, phi, base_value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn brute_force(f: &dyn Fn(&[f64]) -> f64, x: &[f64], b: &[f64]) -> Vec<f64> {
        // Oracle: average marginal contribution over all n! orderings.
        fn perms(items: Vec<usize>) -> Vec<Vec<usize>> {
            if items.len() <= 1 {
                return vec![items];
            }
            let mut out = Vec::new();
            for i in 0..items.len() {
                let mut rest = items.clone();
                let head = rest.remove(i);
                for mut p in perms(rest) {
                    p.insert(0, head);
                    out.push(p);
                }
            }
            out
        }
        let n = x.len();
        let all = perms((0..n).collect());
        let mut phi = vec![0.0; n];
        for p in &all {
            let mut row = b.to_vec();
            let mut prev = f(&row);
            for &j in p {
                row[j] = x[j];
                let v = f(&row);
                phi[j] += v - prev;
                prev = v;
            }
        }
        phi.iter().map(|v| v / all.len() as f64).collect()
    }

    #[test]
    fn linear_model_single_background_row() {
        let w = [0.5, -2.0, 3.0];
        let model = |r: &[f64]| r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        let x = [1.0, 2.0, -1.0];
        let b = [0.2, 0.0, 1.0];
        let bg = Background::new(array![[0.2, 0.0, 1.0]]).unwrap();
        let s = exact_shapley(&model, &x, &bg).unwrap();
        let oracle = brute_force(&model, &x, &b);
        for j in 0..3 {
            assert!((s.phi[j] - w[j] * (x[j] - b[j])).abs() < 1e-12);
            assert!((s.phi[j] - oracle[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn interaction_model_matches_permutation_oracle() {
        let model = |r: &[f64]| r[0] * r[1] + r[2].max(r[3]);
        let x = [1.0, 2.0, 0.5, -1.0];
        let b = [0.5, -1.0, 0.0, 1.0];
        let bg = Background::new(ndarray::Array2::from_shape_vec((1, 4), b.to_vec()).unwrap()).unwrap();
        let s = exact_shapley(&model, &x, &bg).unwrap();
        for (a, o) in s.phi.iter().zip(brute_force(&model, &x, &b)) {
            assert!((a - o).abs() < 1e-12);
        }
    }

    #[test]
    fn axioms_on_multi_row_background() {
        let model = |r: &[f64]| (r[0] + r[1]).tanh() + 0.0 * r[2];
        let bg = Background::new(array![[0.0, 0.0, 5.0], [1.0, 1.0, -3.0], [-0.5, -0.5, 2.0]]).unwrap();
        let x = [0.7, 0.7, 9.0];
        let s = exact_shapley(&model, &x, &bg).unwrap();
        assert!((s.total() - model(&x)).abs() < 1e-12);
        assert_eq!(s.phi[2], 0.0);
        assert!((s.phi[0] - s.phi[1]).abs() < 1e-15);
    }

    #[test]
    fn enumeration_bound() {
        let x = vec![0.0; 21];
        let bg = Background::new(Array2::zeros((1, 21))).unwrap();
        let model = |r: &[f64]| r[0];
        assert!(matches!(exact_shapley(&model, &x, &bg), Err(Error::TooManyFeatures { n: 21, max: 20 })));
    }

    #[test]
    fn single_feature_single_permutation_is_exact() {
        let model = |r: &[f64]| 3.0 * r[0] + 1.0;
        let bg = Background::new(array![[1.0], [2.0]]).unwrap();
        let s = sampled_shapley(&model, &[4.0], &bg, 1, 0).unwrap();
        let e = exact_shapley(&model, &[4.0], &bg).unwrap();
        assert_eq!(s.phi, e.phi);
        assert_eq!(s.std_err, vec![0.0]);
    }

    #[test]
    fn bad_inputs() {
        let bg = Background::new(array![[1.0, 2.0]]).unwrap();
        let model = |r: &[f64]| r[0];
        assert!(exact_shapley(&model, &[1.0], &bg).is_err());
        assert!(sampled_shapley(&model, &[1.0, 2.0], &bg, 0, 0).is_err());
        assert!(Background::new(Array2::zeros((0, 2))).is_err());
    }

    #[test]
    fn background_sample_is_seeded_subset() {
        let x = Array2::from_shape_fn((50, 2), |(i, j)| (i * 2 + j) as f64);
        let a = Background::sample(x.view(), 10, 3).unwrap();
        assert_eq!(a, Background::sample(x.view(), 10, 3).unwrap());
        assert_eq!(a.len(), 10);
        assert_eq!(Background::sample(x.view(), 100, 3).unwrap().len(), 50);
    }
}
