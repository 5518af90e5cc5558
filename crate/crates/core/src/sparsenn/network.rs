use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use super::gate::{deterministic_gate_grad, expected_l0, sample_gate_grad, sigmoid, HardConcreteParams};
use super::TrainConfig;
use crate::baselines::Classifier;
use crate::error::{Error, Result};
use crate::radargram::TimeAxis;

/// Per-feature affine standardization fitted on the training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Constant features get a scale of 1 so they map to 0.
    pub std: Vec<f64>,
}

/// How inputs are shifted and scaled before the first layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputScaling {
    /// Subtract the training mean and divide by the training std.
    Standardize,
    /// Subtract the training mean only, keeping relative amplitudes.
    #[default]
    Center,
    None,
}

impl Standardizer {
    pub fn fit_with(x: ArrayView2<'_, f64>, scaling: InputScaling) -> Self {
        let mut s = Self::fit(x);
        match scaling {
            InputScaling::Standardize => {}
            InputScaling::Center => s.std.fill(1.0),
            InputScaling::None => {
                s.mean.fill(0.0);
                s.std.fill(1.0);
            }
        }
        s
    }

    pub fn fit(x: ArrayView2<'_, f64>) -> Self {
        let n = x.nrows().max(1) as f64;
        let mean: Vec<f64> = x.columns().into_iter().map(|c| c.sum() / n).collect();
        let std = x
            .columns()
            .into_iter()
            .zip(&mean)
            .map(|(c, m)| {
                let s = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
                if s > 1e-12 { s } else { 1.0 }
            })
            .collect();
        Self { mean, std }
    }

    pub fn apply(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = x.to_owned();
        for (j, mut c) in out.columns_mut().into_iter().enumerate() {
            let (m, s) = (self.mean[j], self.std[j]);
            c.mapv_inplace(|v| (v - m) / s);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// `outputs × inputs`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// Multilayer perceptron whose first-layer weights are each multiplied by a
/// hard-concrete gate. Hidden units use ReLU; the single output is a logit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatedNetwork {
    pub arch: Vec<usize>,
    /// Time-sample inputs, not counting the stud indicator.
    pub n_time_features: usize,
    /// When set, the last input is a 0/1 stud indicator.
    pub stud_indicator: bool,
    /// Hidden layers followed by the output layer.
    pub layers: Vec<DenseLayer>,
    /// One location parameter per first-layer weight.
    pub log_alpha: Array2<f64>,
    pub gate: HardConcreteParams,
    pub standardizer: Standardizer,
    pub config: TrainConfig,
}

/// Gradients of the training loss, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
    pub log_alpha: Array2<f64>,
}

/// Input features that survive gating, as original column indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveFeatures {
    /// Active time-sample indices, ascending.
    pub indices: Vec<usize>,
    /// Whether the stud-indicator input survives; `None` without one.
    pub stud_indicator: Option<bool>,
}

impl ActiveFeatures {
    pub fn times_ns(&self, axis: &TimeAxis) -> Result<Vec<f64>> {
        self.indices.iter().map(|&k| axis.time_of_index(k)).collect()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

impl GatedNetwork {
    pub fn n_inputs(&self) -> usize {
        self.n_time_features + usize::from(self.stud_indicator)
    }

    /// Gate matrix and its derivative: sampled from `noise` when given,
    /// deterministic otherwise.
    fn gates(&self, noise: Option<&Array2<f64>>) -> (Array2<f64>, Array2<f64>) {
        let mut z = Array2::zeros(self.log_alpha.raw_dim());
        let mut dz = Array2::zeros(self.log_alpha.raw_dim());
        match noise {
            Some(u) => Zip::from(&mut z).and(&mut dz).and(&self.log_alpha).and(u).for_each(|z, dz, &la, &u| {
                (*z, *dz) = sample_gate_grad(&self.gate, la, u);
            }),
            None => Zip::from(&mut z).and(&mut dz).and(&self.log_alpha).for_each(|z, dz, &la| {
                (*z, *dz) = deterministic_gate_grad(&self.gate, la);
            }),
        }
        (z, dz)
    }

    pub fn deterministic_gates(&self) -> Array2<f64> {
        self.gates(None).0
    }

    /// Logits for already standardized rows.
    fn forward(&self, x: ArrayView2<'_, f64>, z: &Array2<f64>) -> (Vec<Array2<f64>>, Vec<Array2<f64>>) {
        let mut acts = vec![x.to_owned()];
        let mut pres = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let pre = if k == 0 {
                acts[0].dot(&(&layer.w * z).t()) + &layer.b
            } else {
                acts[k].dot(&layer.w.t()) + &layer.b
            };
            if k < last {
                acts.push(pre.mapv(|v| v.max(0.0)));
            }
            pres.push(pre);
        }
        (acts, pres)
    }

    /// Mean binary cross-entropy plus `lambda · Σ expected_l0` on standardized
    /// rows, with its gradient. `noise` freezes the gate draws; `None` uses
    /// the deterministic gates.
    pub fn loss_and_gradients(
        &self,
        x: ArrayView2<'_, f64>,
        y: &[f64],
        noise: Option<&Array2<f64>>,
        lambda: f64,
    ) -> (f64, Gradients) {
        let (z, dz) = self.gates(noise);
        let (acts, pres) = self.forward(x, &z);
        let logits = pres.last().expect("output layer").column(0).to_owned();
        let b = y.len() as f64;
        let mut bce = 0.0;
        let mut delta = Array2::zeros((y.len(), 1));
        for (i, (&l, &t)) in logits.iter().zip(y).enumerate() {
            bce += l.max(0.0) - l * t + (-l.abs()).exp().ln_1p();
            delta[[i, 0]] = (sigmoid(l) - t) / b;
        }
        let pi = self.log_alpha.mapv(|la| expected_l0(&self.gate, la));
        let loss = bce / b + lambda * pi.sum();

        let mut layer_grads = vec![(Array2::zeros((0, 0)), Array1::zeros(0)); self.layers.len()];
        for k in (0..self.layers.len()).rev() {
            let dw = delta.t().dot(&acts[k]);
            let db = delta.sum_axis(Axis(0));
            if k > 0 {
                let mut next = delta.dot(&self.layers[k].w);
                Zip::from(&mut next).and(&pres[k - 1]).for_each(|d, &p| {
                    if p <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = next;
            }
            layer_grads[k] = (dw, db);
        }
        let dw_eff = std::mem::replace(&mut layer_grads[0].0, Array2::zeros((0, 0)));
        layer_grads[0].0 = &dw_eff * &z;
        let mut dla = &dw_eff * &self.layers[0].w * &dz;
        Zip::from(&mut dla).and(&pi).for_each(|g, &p| *g += lambda * p * (1.0 - p));
        (loss, Gradients { layers: layer_grads, log_alpha: dla })
    }

    /// Probability of class 1 for raw (unstandardized) rows.
    pub fn predict_positive(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        let xs = self.standardizer.apply(x);
        let (z, _) = self.gates(None);
        let (_, pres) = self.forward(xs.view(), &z);
        pres.last().expect("output layer").column(0).iter().map(|&l| sigmoid(l)).collect()
    }

    /// An input is active when at least one of its outgoing first-layer
    /// gates is open at evaluation time.
    pub fn active_features(&self) -> ActiveFeatures {
        let z = self.deterministic_gates();
        let open: Vec<bool> = z.columns().into_iter().map(|c| c.iter().any(|&v| v > 0.0)).collect();
        let indices = (0..self.n_time_features).filter(|&j| open[j]).collect();
        ActiveFeatures { indices, stud_indicator: self.stud_indicator.then(|| open[self.n_time_features]) }
    }

    pub fn check_input_width(&self, n: usize) -> Result<()> {
        if n != self.n_inputs() {
            return Err(Error::ShapeMismatch(format!("network expects {} inputs, got {n}", self.n_inputs())));
        }
        Ok(())
    }
}

impl Classifier for GatedNetwork {
    fn n_features(&self) -> usize {
        self.n_inputs()
    }

    fn n_classes(&self) -> usize {
        2
    }

    fn predict_proba_row(&self, row: &[f64]) -> Vec<f64> {
        let x = ArrayView2::from_shape((1, row.len()), row).expect("row shape");
        let p = self.predict_positive(x)[0];
        vec![1.0 - p, p]
    }

    fn predict(&self, x: ArrayView2<'_, f64>) -> Vec<usize> {
        // Ties at exactly 0.5 go to class 0, like `argmax`.
        self.predict_positive(x).into_iter().map(|p| usize::from(p > 0.5)).collect()
    }

    fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Vec<Vec<f64>> {
        self.predict_positive(x).into_iter().map(|p| vec![1.0 - p, p]).collect()
    }

    fn used_features(&self) -> Option<Vec<bool>> {
        let z = self.deterministic_gates();
        Some(z.columns().into_iter().map(|c| c.iter().any(|&v| v > 0.0)).collect())
    }
}
