//! Minimal signal conditioning: per-trace normalization and a fixed
//! power-law gain.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::radargram::BScan;

pub const DEFAULT_GAMMA: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainConfig {
    pub gamma: f64,
}

impl GainConfig {
    pub fn new(gamma: f64) -> Result<Self> {
        let cfg = Self { gamma };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(invalid(format!("gain exponent must lie in (0, 1), got {}", self.gamma)));
        }
        Ok(())
    }
}

impl Default for GainConfig {
    fn default() -> Self {
        Self { gamma: DEFAULT_GAMMA }
    }
}

/// Sign-preserving power gain applied to a single amplitude:
/// `sign(a) · |a|^gamma`.
#[inline]
pub fn gain_sample(a: f64, gamma: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a.signum() * a.abs().powf(gamma)
    }
}

/// Applies [`gain_sample`] elementwise. Expects traces already normalized to
/// a peak magnitude of 1, so every magnitude is lifted toward 1.
pub fn exponential_gain(scan: &BScan, cfg: &GainConfig) -> Result<BScan> {
    cfg.validate()?;
    let gamma = cfg.gamma;
    scan.with_amplitudes(scan.amplitudes().mapv(|a| gain_sample(a, gamma)))
}

/// Divides every trace by its peak absolute value.
pub fn per_trace_normalize(scan: &BScan) -> Result<BScan> {
    let mut m = scan.amplitudes().clone();
    for (c, mut col) in m.columns_mut().into_iter().enumerate() {
        let peak = col.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if peak == 0.0 {
            return Err(Error::DegenerateTrace(c));
        }
        col.mapv_inplace(|v| v / peak);
    }
    scan.with_amplitudes(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radargram::TimeAxis;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    fn column(values: &[f64]) -> BScan {
        let n = values.len().max(2);
        let mut m = Array2::zeros((n, 1));
        for (i, v) in values.iter().enumerate() {
            m[[i, 0]] = *v;
        }
        BScan::new(TimeAxis::new(n, 1.0).unwrap(), m, 0.01, "c").unwrap()
    }

    #[test]
    fn gain_examples() {
        assert_eq!(gain_sample(1.0, 0.8), 1.0);
        assert_eq!(gain_sample(0.0, 0.8), 0.0);
        let oracle = (0.8 * 0.25f64.ln()).exp();
        assert!((gain_sample(0.25, 0.8) - oracle).abs() < 1e-12);
        assert!((gain_sample(0.25, 0.8) - 0.32988).abs() < 1e-5);
        assert!((gain_sample(-0.25, 0.8) + oracle).abs() < 1e-12);
    }

    #[test]
    fn gamma_must_be_inside_unit_interval() {
        assert!(GainConfig::new(0.0).is_err());
        assert!(GainConfig::new(1.0).is_err());
        assert!(GainConfig::new(0.5).is_ok());
        let scan = column(&[0.5, -0.5]);
        assert!(exponential_gain(&scan, &GainConfig { gamma: 1.5 }).is_err());
    }

    #[test]
    fn normalize_examples() {
        let out = per_trace_normalize(&column(&[0.0, 2.0, -4.0])).unwrap();
        assert_eq!(out.trace(0).to_vec(), vec![0.0, 0.5, -1.0]);
        let again = per_trace_normalize(&out).unwrap();
        assert_eq!(again, out);
    }

    #[test]
    fn single_sample_trace_normalizes_to_unit() {
        // The axis needs two samples, so a one-sample trace is modeled as a
        // matrix row view: a 2-sample trace with a single nonzero entry.
        let out = per_trace_normalize(&column(&[-3.0, 0.0])).unwrap();
        assert_eq!(out.trace(0)[0], -1.0);
    }

    #[test]
    fn all_zero_trace_is_degenerate() {
        let scan = BScan::new(TimeAxis::new(2, 1.0).unwrap(), array![[1.0, 0.0], [0.5, 0.0]], 0.01, "z").unwrap();
        let err = per_trace_normalize(&scan).unwrap_err();
        assert!(err.to_string().contains("degenerate trace"));
    }

    #[test]
    fn gamma_near_one_is_near_identity() {
        for i in 1..=100 {
            let a = i as f64 / 100.0;
            assert!((gain_sample(a, 0.999) - a).abs() < 0.01);
            assert!((gain_sample(-a, 0.999) + a).abs() < 0.01);
        }
    }

    proptest! {
        #[test]
        fn gain_preserves_sign_and_lifts_magnitude(a in -1.0f64..1.0, g in 0.01f64..0.99) {
            let out = gain_sample(a, g);
            prop_assert_eq!(out == 0.0, a == 0.0);
            if a != 0.0 {
                prop_assert_eq!(out.signum(), a.signum());
            }
            prop_assert!(out.abs() >= a.abs());
        }

        #[test]
        fn gain_is_monotone(a in 0.0f64..1.0, b in 0.0f64..1.0, g in 0.01f64..0.99) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(gain_sample(lo, g) <= gain_sample(hi, g));
        }

        #[test]
        fn normalize_is_idempotent(v in proptest::collection::vec(-10.0f64..10.0, 2..40)) {
            prop_assume!(v.iter().any(|x| *x != 0.0));
            let once = per_trace_normalize(&column(&v)).unwrap();
            let twice = per_trace_normalize(&once).unwrap();
            let peak = once.trace(0).iter().fold(0.0f64, |a, x| a.max(x.abs()));
            prop_assert!((peak - 1.0).abs() < 1e-15);
            for (x, y) in once.trace(0).iter().zip(twice.trace(0).iter()) {
                prop_assert!((x - y).abs() < 1e-15);
            }
        }
    }
}
