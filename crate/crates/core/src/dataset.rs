//! Per-trace learning tables: one row per A-scan, one column per time sample.

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::radargram::LabeledScan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    StudDetection,
    WallClassification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Vec<usize>,
    /// Scan id of every row, used by group-aware cross-validation.
    pub groups: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Vec<usize>, groups: Option<Vec<String>>) -> Result<Self> {
        let d = Self { x, y, groups };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.nrows() != self.y.len() {
            return Err(Error::ShapeMismatch(format!("{} rows but {} labels", self.x.nrows(), self.y.len())));
        }
        if let Some(g) = &self.groups {
            if g.len() != self.y.len() {
                return Err(Error::ShapeMismatch(format!("{} rows but {} group ids", self.y.len(), g.len())));
            }
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    /// `max(y) + 1`, at least 2 so binary models always see both classes.
    pub fn n_classes(&self) -> usize {
        self.y.iter().max().map_or(2, |m| (m + 1).max(2))
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.x.row(i)
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            x: self.x.select(Axis(0), rows),
            y: rows.iter().map(|&r| self.y[r]).collect(),
            groups: self.groups.as_ref().map(|g| rows.iter().map(|&r| g[r].clone()).collect()),
        }
    }

    pub fn select_features(&self, cols: &[usize]) -> Self {
        Self { x: self.x.select(Axis(1), cols), y: self.y.clone(), groups: self.groups.clone() }
    }

    /// Appends rows of `other`, which must have the same feature count.
    pub fn concat(&self, other: &Dataset) -> Result<Self> {
        if self.n_features() != other.n_features() {
            return Err(Error::ShapeMismatch(format!(
                "cannot stack {} features onto {}",
                other.n_features(),
                self.n_features()
            )));
        }
        let x = ndarray::concatenate(Axis(0), &[self.x.view(), other.x.view()])
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        let y = self.y.iter().chain(&other.y).copied().collect();
        let groups = match (&self.groups, &other.groups) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).cloned().collect()),
            _ => None,
        };
        Ok(Self { x, y, groups })
    }

    /// Builds a table from scans, labeling rows for `task` and grouping by scan id.
    pub fn from_scans(scans: &[LabeledScan], task: Task) -> Result<Self> {
        if scans.is_empty() {
            return Err(invalid("no scans to build a dataset from"));
        }
        let n_samples = scans[0].scan.n_samples();
        let mut parts = Vec::with_capacity(scans.len());
        let mut y = Vec::new();
        let mut groups = Vec::new();
        for s in scans {
            s.validate()?;
            if s.scan.n_samples() != n_samples {
                return Err(Error::ShapeMismatch(format!(
                    "scan {} has {} samples, expected {n_samples}",
                    s.scan.scan_id(),
                    s.scan.n_samples()
                )));
            }
            let labels = match task {
                Task::StudDetection => s.stud_labels.as_ref().map(|l| l.indices()),
                Task::WallClassification => s.wall_labels.as_ref().map(|l| l.indices()),
            };
            let labels = labels.ok_or_else(|| invalid(format!("scan {} has no labels for {task:?}", s.scan.scan_id())))?;
            y.extend(labels);
            groups.extend(std::iter::repeat_n(s.scan.scan_id().to_string(), s.scan.n_traces()));
            parts.push(s.scan.amplitudes().t());
        }
        let x = ndarray::concatenate(Axis(0), &parts).map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        Self::new(x, y, Some(groups))
    }
}

/// Fraction of positions where `a` and `b` agree.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    if truth.is_empty() {
        return f64::NAN;
    }
    pred.iter().zip(truth).filter(|(p, t)| p == t).count() as f64 / truth.len() as f64
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radargram::{BScan, LabelSource, StudLabels, TimeAxis};
    use ndarray::array;

    #[test]
    fn from_scans_puts_traces_in_rows() {
        let scan = BScan::new(TimeAxis::new(3, 1.0).unwrap(), array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]], 0.01, "S")
            .unwrap();
        let rec = LabeledScan {
            stud_labels: Some(StudLabels::from_flags(&[false, true], LabelSource::SyntheticTruth)),
            ..LabeledScan::unlabeled(scan)
        };
        let d = Dataset::from_scans(&[rec.clone(), rec], Task::StudDetection).unwrap();
        assert_eq!(d.x.row(1).to_vec(), vec![2.0, 4.0, 6.0]);
        assert_eq!(d.y, vec![0, 1, 0, 1]);
        assert_eq!(d.n_rows(), 4);
        assert!(Dataset::from_scans(&[LabeledScan::unlabeled(BScan::new(TimeAxis::new(2, 1.0).unwrap(), Array2::zeros((2, 2)), 0.01, "U").unwrap())], Task::WallClassification).is_err());
    }

    #[test]
    fn mismatched_lengths_rejected() {
        assert!(Dataset::new(Array2::zeros((3, 2)), vec![0, 1], None).is_err());
        assert!(Dataset::new(Array2::zeros((2, 2)), vec![0, 1], Some(vec!["a".into()])).is_err());
    }

    #[test]
    fn mean_std() {
        let m = MeanStd::of(&[1.0, 2.0, 3.0]);
        assert_eq!(m.mean, 2.0);
        assert!((m.std - 1.0).abs() < 1e-12);
        assert_eq!(accuracy(&[1, 0, 1], &[1, 1, 1]), 2.0 / 3.0);
    }
}
