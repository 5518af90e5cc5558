use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvKind {
    Stratified,
    StratifiedGroup,
    /// Scan-level folds listed by hand.
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validate: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvScheme {
    pub kind: CvKind,
    pub n_folds: usize,
    pub folds: Vec<Fold>,
}

/// One hand-written fold: which groups train and which validate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub train: Vec<String>,
    pub validate: Vec<String>,
}

fn n_classes(y: &[usize]) -> usize {
    y.iter().max().map_or(0, |m| m + 1)
}

fn folds_from_assignment(fold_of: &[usize], n_folds: usize) -> Vec<Fold> {
    (0..n_folds)
        .map(|f| Fold {
            train: (0..fold_of.len()).filter(|&i| fold_of[i] != f).collect(),
            validate: (0..fold_of.len()).filter(|&i| fold_of[i] == f).collect(),
        })
        .collect()
}

/// Builds `n_folds` train/validation splits.
///
/// `Stratified` deals each class's rows round-robin after a seeded shuffle,
/// so every fold's class counts differ by at most one. `StratifiedGroup`
/// keeps every group (scan) inside a single fold and assigns groups greedily
/// to track each fold's share of every class.
pub fn make_folds(y: &[usize], groups: Option<&[String]>, kind: CvKind, n_folds: usize, seed: u64) -> Result<CvScheme> {
    if n_folds < 2 {
        return Err(invalid(format!("cross-validation needs at least 2 folds, got {n_folds}")));
    }
    if y.len() < n_folds {
        return Err(invalid(format!("{} rows cannot fill {n_folds} folds", y.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = n_classes(y);
    let folds = match kind {
        CvKind::Stratified => {
            let mut fold_of = vec![0; y.len()];
            let mut next = 0;
            for c in 0..k {
                let mut rows: Vec<usize> = (0..y.len()).filter(|&i| y[i] == c).collect();
                rows.shuffle(&mut rng);
                for r in rows {
                    fold_of[r] = next % n_folds;
                    next += 1;
                }
            }
            folds_from_assignment(&fold_of, n_folds)
        }
        CvKind::StratifiedGroup => {
            let groups = groups.ok_or_else(|| invalid("stratified-group folds need group ids"))?;
            if groups.len() != y.len() {
                return Err(Error::ShapeMismatch(format!("{} labels but {} group ids", y.len(), groups.len())));
            }
            let mut per_group: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, g) in groups.iter().enumerate() {
                per_group.entry(g.as_str()).or_insert_with(|| vec![0; k])[y[i]] += 1;
            }
            if per_group.len() < n_folds {
                return Err(invalid(format!("{} groups cannot fill {n_folds} folds", per_group.len())));
            }
            let mut order: Vec<(&str, Vec<usize>)> = per_group.into_iter().collect();
            order.shuffle(&mut rng);
            // Largest groups first; the stable sort keeps the shuffled order among equals.
            order.sort_by_key(|(_, c)| std::cmp::Reverse(c.iter().sum::<usize>()));
            let totals: Vec<f64> = (0..k).map(|c| y.iter().filter(|&&v| v == c).count() as f64).collect();
            let target: Vec<f64> = totals.iter().map(|t| t / n_folds as f64).collect();
            let mut fold_counts = vec![vec![0usize; k]; n_folds];
            let mut fold_of_group: BTreeMap<&str, usize> = BTreeMap::new();
            for (g, counts) in &order {
                let cost = |f: usize| -> f64 {
                    (0..k).map(|c| ((fold_counts[f][c] + counts[c]) as f64 - target[c]).powi(2)).sum()
                };
                let mut best = 0;
                for f in 1..n_folds {
                    let (cb, cf) = (cost(best), cost(f));
                    let size = |f: usize| fold_counts[f].iter().sum::<usize>();
                    if cf < cb || (cf == cb && size(f) < size(best)) {
                        best = f;
                    }
                }
                for c in 0..k {
                    fold_counts[best][c] += counts[c];
                }
                fold_of_group.insert(g, best);
            }
            if let Some(f) = fold_counts.iter().position(|c| c.iter().sum::<usize>() == 0) {
                return Err(Error::InfeasibleSplit(format!("fold {f} received no groups")));
            }
            let fold_of: Vec<usize> = groups.iter().map(|g| fold_of_group[g.as_str()]).collect();
            folds_from_assignment(&fold_of, n_folds)
        }
        CvKind::Explicit => return Err(invalid("explicit folds are built with CvScheme::explicit")),
    };
    let scheme = CvScheme { kind, n_folds, folds };
    scheme.check_training_classes(y)?;
    Ok(scheme)
}

impl CvScheme {
    /// Folds listed as group names, e.g. train `{G3, B2, D3}` / validate `{I1}`.
    pub fn explicit(groups: &[String], specs: &[FoldSpec], y: &[usize]) -> Result<Self> {
        if specs.is_empty() {
            return Err(invalid("at least one explicit fold is required"));
        }
        let rows_of = |names: &[String]| -> Result<Vec<usize>> {
            let mut rows = Vec::new();
            for name in names {
                let before = rows.len();
                rows.extend((0..groups.len()).filter(|&i| &groups[i] == name));
                if rows.len() == before {
                    return Err(invalid(format!("fold references unknown group {name}")));
                }
            }
            rows.sort_unstable();
            Ok(rows)
        };
        let mut folds = Vec::with_capacity(specs.len());
        for s in specs {
            if let Some(g) = s.train.iter().find(|g| s.validate.contains(g)) {
                return Err(invalid(format!("group {g} appears in both train and validation")));
            }
            folds.push(Fold { train: rows_of(&s.train)?, validate: rows_of(&s.validate)? });
        }
        let scheme = Self { kind: CvKind::Explicit, n_folds: specs.len(), folds };
        scheme.check_training_classes(y)?;
        Ok(scheme)
    }

    fn check_training_classes(&self, y: &[usize]) -> Result<()> {
        let k = n_classes(y);
        for (f, fold) in self.folds.iter().enumerate() {
            for c in 0..k {
                if !fold.train.iter().any(|&i| y[i] == c) {
                    return Err(Error::InfeasibleSplit(format!("training part of fold {f} has no rows of class {c}")));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn stratified_two_by_two() {
        let scheme = make_folds(&[0, 0, 1, 1], None, CvKind::Stratified, 2, 9).unwrap();
        for f in &scheme.folds {
            let mut labels: Vec<usize> = f.validate.iter().map(|&i| [0, 0, 1, 1][i]).collect();
            labels.sort();
            assert_eq!(labels, vec![0, 1]);
        }
    }

    #[test]
    fn groups_map_to_folds() {
        let g = s(&["A", "A", "B", "B"]);
        let scheme = make_folds(&[0, 1, 0, 1], Some(&g), CvKind::StratifiedGroup, 2, 1).unwrap();
        let mut vals: Vec<Vec<usize>> = scheme.folds.iter().map(|f| f.validate.clone()).collect();
        vals.sort();
        assert_eq!(vals, vec![vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn explicit_scan_level_fold() {
        let groups = s(&["G3", "G3", "B2", "B2", "D3", "I1", "I1"]);
        let y = [0, 1, 0, 1, 0, 1, 0];
        let spec = FoldSpec { train: s(&["G3", "B2", "D3"]), validate: s(&["I1"]) };
        let scheme = CvScheme::explicit(&groups, &[spec], &y).unwrap();
        assert_eq!(scheme.folds[0].train, vec![0, 1, 2, 3, 4]);
        assert_eq!(scheme.folds[0].validate, vec![5, 6]);
        let bad = FoldSpec { train: s(&["D3"]), validate: s(&["I1"]) };
        assert!(matches!(CvScheme::explicit(&groups, &[bad], &y), Err(Error::InfeasibleSplit(_))));
    }

    #[test]
    fn single_class_groups_can_be_infeasible() {
        // Two groups, each pure: whichever fold validates one group trains on
        // a single class.
        let g = s(&["A", "A", "B", "B"]);
        let err = make_folds(&[0, 0, 1, 1], Some(&g), CvKind::StratifiedGroup, 2, 0).unwrap_err();
        assert!(err.to_string().contains("infeasible"));
    }
}
