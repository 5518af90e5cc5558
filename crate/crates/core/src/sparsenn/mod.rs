//! L0-sparse multilayer perceptron.
//!
//! Every first-layer weight carries a hard-concrete gate. Training minimizes
//! binary cross-entropy plus `lambda_reg` times the expected number of open
//! gates; at evaluation the gates become deterministic and many are exactly
//! zero. An input whose gates are all closed is not used by the model, which
//! turns the trained network into a feature selector.

mod gate;
mod network;

pub use gate::{deterministic_gate, expected_l0, sample_gate, sigmoid, HardConcreteParams};
pub use network::{ActiveFeatures, DenseLayer, GatedNetwork, Gradients, InputScaling, Standardizer};

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::dataset::{accuracy, Dataset};
use crate::error::{invalid, Error, Result};

/// Default penalty for stud detection.
pub const DEFAULT_LAMBDA_STUD: f64 = 1e-5;
/// Default penalty for wall classification.
pub const DEFAULT_LAMBDA_WALL: f64 = 1e-4;

/// Gate noise is kept this far from 0 and 1.
const NOISE_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lambda_reg: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub gate: HardConcreteParams,
    /// Standard deviation of the initial `log_alpha` around 0.
    pub init_log_alpha_std: f64,
    #[serde(default)]
    pub scaling: InputScaling,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda_reg: DEFAULT_LAMBDA_STUD,
            epochs: 2000,
            learning_rate: 1e-2,
            batch_size: 64,
            seed: 0,
            gate: HardConcreteParams::default(),
            init_log_alpha_std: 0.01,
            scaling: InputScaling::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.gate.validate()?;
        if !(self.lambda_reg >= 0.0 && self.lambda_reg.is_finite()) {
            return Err(invalid(format!("lambda_reg must be >= 0, got {}", self.lambda_reg)));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(invalid("epochs and batch_size must be at least 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(invalid("learning rate must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean mini-batch loss including the penalty.
    pub loss: f64,
    /// Training accuracy with deterministic gates.
    pub accuracy: f64,
    pub n_active: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub model: GatedNetwork,
    pub history: Vec<EpochRecord>,
}

/// Appends a 0/1 stud indicator as the last column.
pub fn append_stud_indicator(x: &Array2<f64>, stud: &[usize]) -> Result<Array2<f64>> {
    if stud.len() != x.nrows() {
        return Err(Error::LabelLength { expected: x.nrows(), got: stud.len() });
    }
    let col = Array2::from_shape_fn((x.nrows(), 1), |(i, _)| if stud[i] > 0 { 1.0 } else { 0.0 });
    ndarray::concatenate(Axis(1), &[x.view(), col.view()]).map_err(|e| Error::ShapeMismatch(e.to_string()))
}

struct Adam {
    lr: f64,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(lr: f64, sizes: &[usize]) -> Self {
        Self { lr, t: 0, m: sizes.iter().map(|&n| vec![0.0; n]).collect(), v: sizes.iter().map(|&n| vec![0.0; n]).collect() }
    }

    fn update(&mut self, slot: usize, param: &mut [f64], grad: &[f64]) {
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        let (m, v) = (&mut self.m[slot], &mut self.v[slot]);
        for i in 0..param.len() {
            m[i] = Self::B1 * m[i] + (1.0 - Self::B1) * grad[i];
            v[i] = Self::B2 * v[i] + (1.0 - Self::B2) * grad[i] * grad[i];
            param[i] -= self.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

fn slice_mut<D: ndarray::Dimension>(a: &mut ndarray::Array<f64, D>) -> &mut [f64] {
    a.as_slice_mut().expect("standard layout")
}

/// Untrained network with He-normal weights, zero biases and `log_alpha`
/// drawn near 0.
pub fn init_network(
    n_time_features: usize,
    stud_indicator: bool,
    arch: &[usize],
    standardizer: Standardizer,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<GatedNetwork> {
    if arch.is_empty() || arch.contains(&0) {
        return Err(invalid(format!("hidden widths must be non-empty and positive, got {arch:?}")));
    }
    let n_inputs = n_time_features + usize::from(stud_indicator);
    if n_inputs == 0 {
        return Err(invalid("network needs at least one input"));
    }
    let mut widths = vec![n_inputs];
    widths.extend_from_slice(arch);
    widths.push(1);
    let layers = widths
        .windows(2)
        .map(|w| {
            let normal = Normal::new(0.0, (2.0 / w[0] as f64).sqrt()).expect("finite std");
            DenseLayer { w: Array2::from_shape_fn((w[1], w[0]), |_| normal.sample(rng)), b: Array1::zeros(w[1]) }
        })
        .collect();
    let la = Normal::new(0.0, cfg.init_log_alpha_std).map_err(|e| invalid(e.to_string()))?;
    let log_alpha = Array2::from_shape_fn((arch[0], n_inputs), |_| la.sample(rng));
    Ok(GatedNetwork {
        arch: arch.to_vec(),
        n_time_features,
        stud_indicator,
        layers,
        log_alpha,
        gate: cfg.gate,
        standardizer,
        config: *cfg,
    })
}

/// Trains on binary labels. With `stud_indicator` set, the last column of
/// `data.x` must be the appended indicator.
pub fn train(data: &Dataset, arch: &[usize], stud_indicator: bool, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    data.validate()?;
    if data.n_rows() == 0 {
        return Err(invalid("no training rows"));
    }
    if let Some(bad) = data.y.iter().find(|&&v| v > 1) {
        return Err(invalid(format!("labels must be binary, found {bad}")));
    }
    let n_time = data.n_features().checked_sub(usize::from(stud_indicator)).ok_or_else(|| invalid("no input columns"))?;
    let standardizer = Standardizer::fit_with(data.x.view(), cfg.scaling);
    let xs = standardizer.apply(data.x.view());
    let yf: Vec<f64> = data.y.iter().map(|&v| v as f64).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = init_network(n_time, stud_indicator, arch, standardizer, cfg, &mut rng)?;
    let mut sizes: Vec<usize> = net.layers.iter().flat_map(|l| [l.w.len(), l.b.len()]).collect();
    sizes.push(net.log_alpha.len());
    let mut adam = Adam::new(cfg.learning_rate, &sizes);
    let noise = Uniform::new(NOISE_EPS, 1.0 - NOISE_EPS).expect("valid range");

    let mut order: Vec<usize> = (0..data.n_rows()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for batch in order.chunks(cfg.batch_size) {
            let xb = xs.select(Axis(0), batch);
            let yb: Vec<f64> = batch.iter().map(|&i| yf[i]).collect();
            let u = Array2::from_shape_fn(net.log_alpha.raw_dim(), |_| rng.sample(noise));
            let (loss, mut g) = net.loss_and_gradients(xb.view(), &yb, Some(&u), cfg.lambda_reg);
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, reason: format!("loss became {loss}") });
            }
            total += loss;
            batches += 1;
            adam.t += 1;
            for (k, (layer, (gw, gb))) in net.layers.iter_mut().zip(g.layers.iter_mut()).enumerate() {
                adam.update(2 * k, slice_mut(&mut layer.w), slice_mut(gw));
                adam.update(2 * k + 1, slice_mut(&mut layer.b), slice_mut(gb));
            }
            let slot = sizes.len() - 1;
            adam.update(slot, slice_mut(&mut net.log_alpha), slice_mut(&mut g.log_alpha));
        }
        if net.log_alpha.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { epoch, reason: "non-finite gate parameters".into() });
        }
        let pred: Vec<usize> = {
            use crate::baselines::Classifier;
            net.predict(data.x.view())
        };
        history.push(EpochRecord {
            epoch,
            loss: total / batches as f64,
            accuracy: accuracy(&pred, &data.y),
            n_active: net.active_features().len(),
        });
    }
    Ok(TrainOutcome { model: net, history })
}
