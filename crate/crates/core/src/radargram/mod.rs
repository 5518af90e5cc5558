//! Scan data model: time axis, B-scans, wall layer stacks and per-trace labels.
//!
//! A [`BScan`] stores amplitudes as a `time samples × traces` matrix. Each
//! column is one A-scan recorded at lateral position `trace · trace_spacing`.

mod io;

pub use io::{load_bscan, save_bscan, sidecar_path};

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Default number of samples per trace.
pub const DEFAULT_SAMPLES: usize = 655;
/// Default trace duration in nanoseconds.
pub const DEFAULT_DURATION_NS: f64 = 12.0;

/// Uniform, endpoint-inclusive time axis: sample `k` sits at
/// `k · duration / (n_samples − 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeAxis {
    n_samples: usize,
    duration_ns: f64,
}

impl TimeAxis {
    pub fn new(n_samples: usize, duration_ns: f64) -> Result<Self> {
        if n_samples < 2 {
            return Err(invalid(format!("time axis needs at least 2 samples, got {n_samples}")));
        }
        if !(duration_ns.is_finite() && duration_ns > 0.0) {
            return Err(invalid(format!("time axis duration must be positive, got {duration_ns}")));
        }
        Ok(Self { n_samples, duration_ns })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn duration_ns(&self) -> f64 {
        self.duration_ns
    }

    /// Spacing between consecutive samples in nanoseconds.
    pub fn step_ns(&self) -> f64 {
        self.duration_ns / (self.n_samples - 1) as f64
    }

    pub fn time_of_index(&self, k: usize) -> Result<f64> {
        if k >= self.n_samples {
            return Err(Error::IndexOutOfRange { index: k, len: self.n_samples });
        }
        Ok(self.time_unchecked(k))
    }

    pub(crate) fn time_unchecked(&self, k: usize) -> f64 {
        k as f64 * self.duration_ns / (self.n_samples - 1) as f64
    }

    /// Closest sample index to `t_ns`, clamped to the axis.
    pub fn nearest_index(&self, t_ns: f64) -> usize {
        let k = (t_ns / self.step_ns()).round();
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.n_samples - 1)
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_samples).map(|k| self.time_unchecked(k)).collect()
    }
}

impl Default for TimeAxis {
    fn default() -> Self {
        Self { n_samples: DEFAULT_SAMPLES, duration_ns: DEFAULT_DURATION_NS }
    }
}

/// Time of sample `k` on `axis`.
pub fn time_of_index(axis: &TimeAxis, k: usize) -> Result<f64> {
    axis.time_of_index(k)
}

/// A radargram: one column per A-scan, one row per time sample.
#[derive(Debug, Clone, PartialEq)]
pub struct BScan {
    axis: TimeAxis,
    amplitudes: Array2<f64>,
    trace_spacing_m: f64,
    scan_id: String,
}

impl BScan {
    pub fn new(
        axis: TimeAxis,
        amplitudes: Array2<f64>,
        trace_spacing_m: f64,
        scan_id: impl Into<String>,
    ) -> Result<Self> {
        let (rows, cols) = amplitudes.dim();
        if rows != axis.n_samples() {
            return Err(Error::ShapeMismatch(format!(
                "axis has {} samples but amplitude matrix has {rows} rows",
                axis.n_samples()
            )));
        }
        if cols == 0 {
            return Err(invalid("a scan needs at least one trace"));
        }
        if !(trace_spacing_m.is_finite() && trace_spacing_m > 0.0) {
            return Err(invalid(format!("trace spacing must be positive, got {trace_spacing_m}")));
        }
        check_finite(&amplitudes)?;
        Ok(Self { axis, amplitudes, trace_spacing_m, scan_id: scan_id.into() })
    }

    pub fn axis(&self) -> &TimeAxis {
        &self.axis
    }

    pub fn amplitudes(&self) -> &Array2<f64> {
        &self.amplitudes
    }

    pub fn trace_spacing_m(&self) -> f64 {
        self.trace_spacing_m
    }

    pub fn scan_id(&self) -> &str {
        &self.scan_id
    }

    pub fn n_traces(&self) -> usize {
        self.amplitudes.ncols()
    }

    pub fn n_samples(&self) -> usize {
        self.amplitudes.nrows()
    }

    pub fn trace(&self, c: usize) -> ArrayView1<'_, f64> {
        self.amplitudes.column(c)
    }

    /// Same metadata, new amplitudes. The shape must not change.
    pub fn with_amplitudes(&self, amplitudes: Array2<f64>) -> Result<Self> {
        if amplitudes.dim() != self.amplitudes.dim() {
            return Err(Error::ShapeMismatch(format!(
                "expected {:?}, got {:?}",
                self.amplitudes.dim(),
                amplitudes.dim()
            )));
        }
        Self::new(self.axis, amplitudes, self.trace_spacing_m, self.scan_id.clone())
    }

    /// Traces as rows: `n_traces × n_samples`, the layout learners consume.
    pub fn traces_as_rows(&self) -> Array2<f64> {
        self.amplitudes.t().to_owned()
    }
}

pub(crate) fn check_finite(m: &Array2<f64>) -> Result<()> {
    if let Some(((sample, trace), _)) = m.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFiniteAmplitude { sample, trace });
    }
    Ok(())
}

/// Which permittivity bound to use when a single value is needed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsBound {
    UseEpsMin,
    UseEpsMax,
}

/// One homogeneous slab of the wall cross-section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialLayer {
    pub name: String,
    pub thickness_m: f64,
    pub eps_min: f64,
    pub eps_max: f64,
}

impl MaterialLayer {
    pub fn new(name: impl Into<String>, thickness_m: f64, eps_min: f64, eps_max: f64) -> Result<Self> {
        let layer = Self { name: name.into(), thickness_m, eps_min, eps_max };
        layer.validate()?;
        Ok(layer)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.thickness_m.is_finite() && self.thickness_m > 0.0) {
            return Err(invalid(format!("layer '{}' thickness must be positive", self.name)));
        }
        if !(self.eps_min >= 1.0 && self.eps_min <= self.eps_max && self.eps_max.is_finite()) {
            return Err(invalid(format!(
                "layer '{}' needs 1 <= eps_min <= eps_max, got [{}, {}]",
                self.name, self.eps_min, self.eps_max
            )));
        }
        Ok(())
    }

    pub fn eps_mid(&self) -> f64 {
        0.5 * (self.eps_min + self.eps_max)
    }

    pub fn eps(&self, bound: EpsBound) -> f64 {
        match bound {
            EpsBound::UseEpsMin => self.eps_min,
            EpsBound::UseEpsMax => self.eps_max,
        }
    }
}

/// Library default permittivity ranges for common envelope materials.
pub mod materials {
    pub const DRYWALL: (f64, f64) = (2.0, 2.5);
    pub const FIBERGLASS: (f64, f64) = (1.1, 1.3);
    pub const SPF_WOOD: (f64, f64) = (1.8, 3.0);
    pub const CONCRETE: (f64, f64) = (4.0, 9.0);
    pub const SOIL: (f64, f64) = (4.0, 15.0);

    /// 1/2 in gypsum board.
    pub const DRYWALL_THICKNESS_M: f64 = 0.0127;
    /// 4 in cavity of an interior partition.
    pub const INTERIOR_CAVITY_M: f64 = 0.1016;
    /// 6 in cavity of an exterior framed wall.
    pub const EXTERIOR_CAVITY_M: f64 = 0.1524;
    /// 10 in poured foundation wall.
    pub const FOUNDATION_M: f64 = 0.254;
    /// Backfill thickness modeled behind the foundation.
    pub const BACKFILL_M: f64 = 0.5;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WallClass {
    Interior,
    Exterior,
}

impl WallClass {
    /// Class index used by the learners: interior 0, exterior 1.
    pub fn index(self) -> usize {
        match self {
            WallClass::Interior => 0,
            WallClass::Exterior => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            WallClass::Interior
        } else {
            WallClass::Exterior
        }
    }
}

/// Ordered layer stack, shallowest first, with an optional stud cavity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallSpec {
    pub layers: Vec<MaterialLayer>,
    pub wall_class: WallClass,
    /// Index of the cavity layer that studs replace, if the wall is framed.
    #[serde(default)]
    pub stud_layer: Option<usize>,
}

impl WallSpec {
    pub fn new(layers: Vec<MaterialLayer>, wall_class: WallClass, stud_layer: Option<usize>) -> Result<Self> {
        let spec = Self { layers, wall_class, stud_layer };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(invalid("wall spec needs at least one layer"));
        }
        for layer in &self.layers {
            layer.validate()?;
        }
        if let Some(i) = self.stud_layer {
            if i >= self.layers.len() {
                return Err(invalid(format!("stud layer {i} does not exist")));
            }
        }
        Ok(())
    }

    pub fn total_thickness_m(&self) -> f64 {
        self.layers.iter().map(|l| l.thickness_m).sum()
    }

    /// Depths of every layer bottom, measured from the scanned surface.
    pub fn interface_depths_m(&self) -> Vec<f64> {
        self.layers
            .iter()
            .scan(0.0, |depth, l| {
                *depth += l.thickness_m;
                Some(*depth)
            })
            .collect()
    }

    /// Copy with every layer pinned to a single permittivity (its midpoint).
    pub fn pinned_to_mid(&self) -> Self {
        let mut out = self.clone();
        for l in &mut out.layers {
            let mid = l.eps_mid();
            l.eps_min = mid;
            l.eps_max = mid;
        }
        out
    }

    /// Copy with the stud cavity filled by `stud_eps` bounds. Identity when the
    /// wall has no cavity.
    pub fn with_stud(&self, stud_eps: (f64, f64)) -> Self {
        let mut out = self.clone();
        if let Some(i) = out.stud_layer {
            out.layers[i].name = "stud".into();
            out.layers[i].eps_min = stud_eps.0;
            out.layers[i].eps_max = stud_eps.1;
        }
        out
    }

    /// Drywall, insulated 4 in cavity, drywall.
    pub fn interior() -> Self {
        use materials::*;
        let layers = vec![
            layer("drywall", DRYWALL_THICKNESS_M, DRYWALL),
            layer("insulation", INTERIOR_CAVITY_M, FIBERGLASS),
            layer("drywall", DRYWALL_THICKNESS_M, DRYWALL),
        ];
        Self { layers, wall_class: WallClass::Interior, stud_layer: Some(1) }
    }

    /// Drywall, insulated 6 in cavity, poured foundation, backfill.
    pub fn exterior() -> Self {
        use materials::*;
        let layers = vec![
            layer("drywall", DRYWALL_THICKNESS_M, DRYWALL),
            layer("insulation", EXTERIOR_CAVITY_M, FIBERGLASS),
            layer("concrete", FOUNDATION_M, CONCRETE),
            layer("soil", BACKFILL_M, SOIL),
        ];
        Self { layers, wall_class: WallClass::Exterior, stud_layer: Some(1) }
    }

    pub fn for_class(class: WallClass) -> Self {
        match class {
            WallClass::Interior => Self::interior(),
            WallClass::Exterior => Self::exterior(),
        }
    }
}

fn layer(name: &str, thickness_m: f64, eps: (f64, f64)) -> MaterialLayer {
    MaterialLayer { name: name.into(), thickness_m, eps_min: eps.0, eps_max: eps.1 }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudClass {
    NonStud,
    Stud,
}

impl StudClass {
    pub fn index(self) -> usize {
        match self {
            StudClass::NonStud => 0,
            StudClass::Stud => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            StudClass::NonStud
        } else {
            StudClass::Stud
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    SvdDerived,
    SyntheticTruth,
    Predicted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudLabels {
    pub per_trace: Vec<StudClass>,
    pub source: LabelSource,
}

impl StudLabels {
    pub fn from_flags(flags: &[bool], source: LabelSource) -> Self {
        let per_trace = flags
            .iter()
            .map(|&s| if s { StudClass::Stud } else { StudClass::NonStud })
            .collect();
        Self { per_trace, source }
    }

    pub fn len(&self) -> usize {
        self.per_trace.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_trace.is_empty()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.per_trace.iter().map(|c| c.index()).collect()
    }

    pub fn n_stud(&self) -> usize {
        self.per_trace.iter().filter(|&&c| c == StudClass::Stud).count()
    }

    /// Maximal runs of stud traces as half-open `[start, end)` index ranges.
    pub fn intervals(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut start = None;
        for (i, c) in self.per_trace.iter().enumerate() {
            match (c, start) {
                (StudClass::Stud, None) => start = Some(i),
                (StudClass::NonStud, Some(s)) => {
                    out.push((s, i));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            out.push((s, self.per_trace.len()));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallLabels {
    pub per_trace: Vec<WallClass>,
    pub source: LabelSource,
}

impl WallLabels {
    pub fn uniform(class: WallClass, n: usize, source: LabelSource) -> Self {
        Self { per_trace: vec![class; n], source }
    }

    pub fn len(&self) -> usize {
        self.per_trace.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_trace.is_empty()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.per_trace.iter().map(|c| c.index()).collect()
    }
}

/// A scan together with whatever labels and geometry travel with it.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledScan {
    pub scan: BScan,
    pub stud_labels: Option<StudLabels>,
    pub wall_labels: Option<WallLabels>,
    pub wall_spec: Option<WallSpec>,
}

impl LabeledScan {
    pub fn unlabeled(scan: BScan) -> Self {
        Self { scan, stud_labels: None, wall_labels: None, wall_spec: None }
    }

    /// Checks label lengths against the trace count.
    pub fn validate(&self) -> Result<()> {
        let n = self.scan.n_traces();
        if let Some(s) = &self.stud_labels {
            if s.len() != n {
                return Err(Error::LabelLength { expected: n, got: s.len() });
            }
        }
        if let Some(w) = &self.wall_labels {
            if w.len() != n {
                return Err(Error::LabelLength { expected: n, got: w.len() });
            }
        }
        if let Some(spec) = &self.wall_spec {
            spec.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_axis_endpoints() {
        let axis = TimeAxis::default();
        assert_eq!(axis.time_of_index(0).unwrap(), 0.0);
        assert!((axis.time_of_index(654).unwrap() - 12.0).abs() < 1e-12);
        assert!(axis.time_of_index(655).is_err());
    }

    #[test]
    fn sample_46_is_near_stud_feature_time() {
        let t = TimeAxis::default().time_of_index(46).unwrap();
        assert!((t - 46.0 * 12.0 / 654.0).abs() < 1e-15);
        assert!((t - 0.8440).abs() < 1e-4);
    }

    #[test]
    fn axis_rejects_single_sample() {
        assert!(TimeAxis::new(1, 12.0).is_err());
        assert!(TimeAxis::new(2, 0.0).is_err());
    }

    #[test]
    fn bscan_rejects_nan_and_bad_shape() {
        let axis = TimeAxis::new(2, 1.0).unwrap();
        let mut m = Array2::zeros((2, 2));
        m[[1, 0]] = f64::NAN;
        let err = BScan::new(axis, m, 0.01, "x").unwrap_err();
        assert!(err.to_string().contains("non-finite amplitude"));
        let err = BScan::new(axis, Array2::zeros((3, 2)), 0.01, "x").unwrap_err();
        assert!(err.to_string().contains("shape mismatch"));
        assert!(BScan::new(axis, Array2::zeros((2, 0)), 0.01, "x").is_err());
        assert!(BScan::new(axis, Array2::zeros((2, 1)), 0.0, "x").is_err());
    }

    #[test]
    fn layer_validation() {
        assert!(MaterialLayer::new("a", 0.0, 1.0, 2.0).is_err());
        assert!(MaterialLayer::new("a", 0.1, 0.9, 2.0).is_err());
        assert!(MaterialLayer::new("a", 0.1, 3.0, 2.0).is_err());
        assert!(MaterialLayer::new("a", 0.1, 1.0, 1.0).is_ok());
        assert!(WallSpec::new(vec![], WallClass::Interior, None).is_err());
    }

    #[test]
    fn presets_are_valid() {
        WallSpec::interior().validate().unwrap();
        WallSpec::exterior().validate().unwrap();
        let depths = WallSpec::interior().interface_depths_m();
        assert!((depths[1] - 0.1143).abs() < 1e-12);
    }

    #[test]
    fn stud_intervals_are_maximal_runs() {
        let l = StudLabels::from_flags(
            &[true, false, true, true, false, false, true],
            LabelSource::Predicted,
        );
        assert_eq!(l.intervals(), vec![(0, 1), (2, 4), (6, 7)]);
        assert_eq!(l.n_stud(), 4);
    }

    proptest! {
        #[test]
        fn index_time_index_round_trips(n in 2usize..2000, dur in 0.1f64..100.0, frac in 0.0f64..1.0) {
            let axis = TimeAxis::new(n, dur).unwrap();
            let k = ((n - 1) as f64 * frac) as usize;
            let t = axis.time_of_index(k).unwrap();
            prop_assert_eq!(axis.nearest_index(t), k);
        }
    }
}
