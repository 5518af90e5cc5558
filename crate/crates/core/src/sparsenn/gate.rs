//! Hard-concrete gates: a stretched and clipped binary-concrete variable that
//! can take exact zeros while staying differentiable in its location
//! parameter `log_alpha`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardConcreteParams {
    /// Temperature.
    pub beta: f64,
    /// Lower end of the stretch interval, below 0.
    pub gamma_hc: f64,
    /// Upper end of the stretch interval, above 1.
    pub zeta: f64,
}

impl Default for HardConcreteParams {
    fn default() -> Self {
        Self { beta: 2.0 / 3.0, gamma_hc: -0.1, zeta: 1.1 }
    }
}

impl HardConcreteParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_hc < 0.0 && self.zeta > 1.0 && self.beta > 0.0) {
            return Err(invalid(format!(
                "hard-concrete parameters need gamma < 0 < 1 < zeta and beta > 0, got {self:?}"
            )));
        }
        Ok(())
    }

    fn stretch(&self, s: f64) -> f64 {
        s * (self.zeta - self.gamma_hc) + self.gamma_hc
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Gate value for one uniform draw `u ∈ (0, 1)`.
pub fn sample_gate(p: &HardConcreteParams, log_alpha: f64, u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(invalid(format!("gate noise must lie strictly inside (0, 1), got {u}")));
    }
    Ok(sample_gate_grad(p, log_alpha, u).0)
}

/// Sampled gate and its derivative with respect to `log_alpha`; the
/// derivative is 0 wherever the clamp is active.
pub(crate) fn sample_gate_grad(p: &HardConcreteParams, log_alpha: f64, u: f64) -> (f64, f64) {
    let s = sigmoid(((u.ln() - (-u).ln_1p()) + log_alpha) / p.beta);
    let z = p.stretch(s);
    if z <= 0.0 {
        (0.0, 0.0)
    } else if z >= 1.0 {
        (1.0, 0.0)
    } else {
        (z, (p.zeta - p.gamma_hc) * s * (1.0 - s) / p.beta)
    }
}

/// Noise-free gate used at evaluation time.
pub fn deterministic_gate(p: &HardConcreteParams, log_alpha: f64) -> f64 {
    deterministic_gate_grad(p, log_alpha).0
}

pub(crate) fn deterministic_gate_grad(p: &HardConcreteParams, log_alpha: f64) -> (f64, f64) {
    let s = sigmoid(log_alpha);
    let z = p.stretch(s);
    if z <= 0.0 {
        (0.0, 0.0)
    } else if z >= 1.0 {
        (1.0, 0.0)
    } else {
        (z, (p.zeta - p.gamma_hc) * s * (1.0 - s))
    }
}

/// Probability that a sampled gate is nonzero.
pub fn expected_l0(p: &HardConcreteParams, log_alpha: f64) -> f64 {
    sigmoid(log_alpha - p.beta * (-p.gamma_hc / p.zeta).ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saturation() {
        let p = HardConcreteParams::default();
        for u in [0.01, 0.3, 0.5, 0.99] {
            assert_eq!(sample_gate(&p, 30.0, u).unwrap(), 1.0);
            assert_eq!(sample_gate(&p, -30.0, u).unwrap(), 0.0);
        }
        assert_eq!(deterministic_gate(&p, 10.0), 1.0);
        assert_eq!(deterministic_gate(&p, -10.0), 0.0);
    }

    #[test]
    fn midpoint_values() {
        let p = HardConcreteParams::default();
        assert!((sample_gate(&p, 0.0, 0.5).unwrap() - 0.5).abs() < 1e-15);
        assert!((deterministic_gate(&p, 0.0) - 0.5).abs() < 1e-15);
        let oracle = 1.0 / (1.0 + (-(2.0 / 3.0) * 11f64.ln()).exp());
        assert!((expected_l0(&p, 0.0) - oracle).abs() < 1e-15);
        assert!((expected_l0(&p, 0.0) - 0.8318).abs() < 1e-4);
        assert!(expected_l0(&p, -100.0) < 1e-30);
        assert!(1.0 - expected_l0(&p, 100.0) < 1e-15);
    }

    #[test]
    fn noise_must_be_interior() {
        let p = HardConcreteParams::default();
        assert!(sample_gate(&p, 0.0, 0.0).is_err());
        assert!(sample_gate(&p, 0.0, 1.0).is_err());
        assert!(HardConcreteParams { gamma_hc: 0.1, ..p }.validate().is_err());
    }
}
