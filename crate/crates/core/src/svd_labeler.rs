//! Unsupervised stud labels from the dominant singular vector of a scan.
//!
//! Stud columns perturb every reflection below the cavity, so the trace
//! weights of the first right-singular vector jump at studs. The three most
//! prominent extrema of those weights are taken as stud centres; each is grown
//! outward while its deviation from the component mean stays above a fraction
//! of that mean. The fraction is calibrated so detected studs have the known
//! dressed lumber width.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::radargram::{BScan, LabelSource, StudClass, StudLabels};
use crate::synth::STUD_WIDTH_M;

/// Trace weights of one singular component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvdComponent {
    /// Unit-norm right-singular vector, sign chosen so the mean is >= 0.
    pub values: Vec<f64>,
    pub mean: f64,
    pub singular_value: f64,
}

impl SvdComponent {
    pub fn from_values(values: Vec<f64>) -> Self {
        let mean = mean(&values);
        Self { values, mean, singular_value: f64::NAN }
    }

    pub fn negated(&self) -> Self {
        Self { values: self.values.iter().map(|v| -v).collect(), mean: -self.mean, singular_value: self.singular_value }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { values: self.values.iter().map(|v| v * s).collect(), mean: self.mean * s, singular_value: self.singular_value }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Threshold expressed as a fraction of the component mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdFraction(f64);

impl ThresholdFraction {
    pub fn new(fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction.is_finite()) {
            return Err(invalid(format!("threshold fraction must be positive, got {fraction}")));
        }
        Ok(Self(fraction))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// First and second components. The second is exported for diagnostics only.
pub fn leading_components(scan: &BScan) -> Result<(SvdComponent, Option<SvdComponent>)> {
    if scan.n_traces() < 2 {
        return Err(invalid("SVD labeling needs at least 2 traces"));
    }
    let a = scan.amplitudes();
    if a.iter().all(|&v| v == 0.0) {
        return Err(Error::Uncalibratable("all-zero scan".into()));
    }
    let m = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]]);
    let svd = m.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]).then(x.cmp(&y)));

    let component = |row: usize| {
        let mut values: Vec<f64> = v_t.row(row).iter().copied().collect();
        let mut mu = mean(&values);
        let flip = if mu == 0.0 {
            // Fall back to the sign of the largest-magnitude weight.
            let big = values.iter().copied().fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
            big < 0.0
        } else {
            mu < 0.0
        };
        if flip {
            values.iter_mut().for_each(|v| *v = -*v);
            mu = -mu;
        }
        SvdComponent { values, mean: mu, singular_value: svd.singular_values[row] }
    };
    let first = component(order[0]);
    let second = order.get(1).map(|&r| component(r));
    Ok((first, second))
}

pub fn first_component(scan: &BScan) -> Result<SvdComponent> {
    leading_components(scan).map(|(first, _)| first)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakOptions {
    /// How many stud peaks to look for per scan.
    pub n_peaks: usize,
    /// Extrema closer than this many traces to an accepted peak are merged into it.
    pub min_separation: usize,
}

impl Default for PeakOptions {
    fn default() -> Self {
        Self { n_peaks: 3, min_separation: 3 }
    }
}

impl PeakOptions {
    /// Merge distance of half a stud width at the given trace spacing.
    pub fn for_spacing(spacing_m: f64) -> Self {
        let half = (0.5 * STUD_WIDTH_M / spacing_m).round() as usize;
        Self { min_separation: half.max(1), ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Extremum {
    index: usize,
    dev: f64,
    is_max: bool,
}

/// Local extrema of `dev`; a run of equal values counts once, at its centre.
fn local_extrema(dev: &[f64]) -> Vec<Extremum> {
    let n = dev.len();
    let mut out = Vec::new();
    let mut a = 0;
    while a < n {
        let v = dev[a];
        let mut b = a + 1;
        while b < n && dev[b] == v {
            b += 1;
        }
        let left = (a > 0).then(|| dev[a - 1]);
        let right = (b < n).then(|| dev[b]);
        let is_max = left.is_none_or(|l| l < v) && right.is_none_or(|r| r < v);
        let is_min = left.is_none_or(|l| l > v) && right.is_none_or(|r| r > v);
        if is_max || is_min {
            out.push(Extremum { index: (a + b - 1) / 2, dev: v, is_max });
        }
        a = b;
    }
    out
}

/// Detected stud extents as half-open trace ranges, in detection order.
pub fn stud_extents(component: &SvdComponent, thr: ThresholdFraction, opts: PeakOptions) -> Result<Vec<(usize, usize)>> {
    let values = &component.values;
    if values.is_empty() {
        return Err(invalid("empty component"));
    }
    let mu = mean(values);
    if mu == 0.0 {
        return Err(Error::Uncalibratable("zero mean makes a fraction-of-mean threshold undefined".into()));
    }
    let dev: Vec<f64> = values.iter().map(|v| v - mu).collect();
    if dev.iter().all(|&d| d == 0.0) {
        return Err(Error::Uncalibratable("component has no deviation from its mean".into()));
    }
    let mut extrema = local_extrema(&dev);
    extrema.sort_by(|x, y| y.dev.abs().total_cmp(&x.dev.abs()).then(x.index.cmp(&y.index)));

    // Polarity from the most prominent, well-separated outliers.
    let mut probe: Vec<&Extremum> = Vec::new();
    for e in &extrema {
        if probe.iter().all(|p| p.index.abs_diff(e.index) >= opts.min_separation) {
            probe.push(e);
            if probe.len() == opts.n_peaks {
                break;
            }
        }
    }
    let positive = probe.iter().map(|e| e.dev).sum::<f64>() >= 0.0;

    let cut = thr.value() * mu.abs();
    let mut extents: Vec<(usize, usize)> = Vec::new();
    let mut centres: Vec<usize> = Vec::new();
    for e in extrema.iter().filter(|e| e.is_max == positive && (e.dev > 0.0) == positive) {
        if extents.len() == opts.n_peaks || e.dev.abs() < cut {
            break;
        }
        let inside = extents.iter().any(|&(s, t)| e.index >= s && e.index < t);
        let near = centres.iter().any(|&c| c.abs_diff(e.index) < opts.min_separation);
        if inside || near {
            continue;
        }
        let mut s = e.index;
        while s > 0 && dev[s - 1].abs() >= cut {
            s -= 1;
        }
        let mut t = e.index + 1;
        while t < dev.len() && dev[t].abs() >= cut {
            t += 1;
        }
        extents.push((s, t));
        centres.push(e.index);
    }
    Ok(extents)
}

pub fn detect_studs(component: &SvdComponent, thr: ThresholdFraction) -> Result<StudLabels> {
    detect_studs_with(component, thr, PeakOptions::default())
}

pub fn detect_studs_with(component: &SvdComponent, thr: ThresholdFraction, opts: PeakOptions) -> Result<StudLabels> {
    let extents = stud_extents(component, thr, opts)?;
    let mut per_trace = vec![StudClass::NonStud; component.values.len()];
    for (s, t) in extents {
        per_trace[s..t].iter_mut().for_each(|c| *c = StudClass::Stud);
    }
    Ok(StudLabels { per_trace, source: LabelSource::SvdDerived })
}

/// Threshold fractions `start, start + step, ...` up to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractionGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for FractionGrid {
    fn default() -> Self {
        Self { start: 0.05, stop: 3.0, step: 0.05 }
    }
}

impl FractionGrid {
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

/// Width statistics at one grid fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthSummary {
    pub fraction: f64,
    pub n_studs: usize,
    pub modal_width_m: Option<f64>,
    pub mean_width_m: Option<f64>,
    /// `(width in traces, count)` sorted by width.
    pub histogram: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub fraction: ThresholdFraction,
    pub chosen: WidthSummary,
    pub sweep: Vec<WidthSummary>,
}

fn summarize(fraction: f64, widths: &[usize], spacing: f64, target: f64) -> WidthSummary {
    let mut hist: Vec<(usize, usize)> = Vec::new();
    let mut sorted = widths.to_vec();
    sorted.sort_unstable();
    for w in sorted {
        match hist.last_mut() {
            Some((v, c)) if *v == w => *c += 1,
            _ => hist.push((w, 1)),
        }
    }
    let top = hist.iter().map(|h| h.1).max();
    // Among equally frequent widths, the mode closest to the target wins.
    let modal = top.and_then(|top| {
        hist.iter()
            .filter(|h| h.1 == top)
            .map(|h| h.0 as f64 * spacing)
            .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
    });
    let mean_width = (!widths.is_empty())
        .then(|| widths.iter().sum::<usize>() as f64 / widths.len() as f64 * spacing);
    WidthSummary { fraction, n_studs: widths.len(), modal_width_m: modal, mean_width_m: mean_width, histogram: hist }
}

/// Picks the grid fraction whose detected-width mode lies closest to
/// `target_width_m`, breaking ties by mean width and then by the smaller
/// fraction.
pub fn calibrate_threshold(
    scans: &[BScan],
    spacing_m: f64,
    target_width_m: f64,
    grid: FractionGrid,
) -> Result<Calibration> {
    if scans.is_empty() {
        return Err(invalid("calibration needs at least one scan"));
    }
    if !(spacing_m > 0.0) {
        return Err(invalid("trace spacing must be positive"));
    }
    let opts = PeakOptions::for_spacing(spacing_m);
    let components: Vec<Option<SvdComponent>> = scans
        .iter()
        .map(|s| match first_component(s) {
            Ok(c) => Ok(Some(c)),
            Err(Error::Uncalibratable(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    calibrate_components(&components.into_iter().flatten().collect::<Vec<_>>(), spacing_m, target_width_m, grid, opts)
}

/// Calibration over precomputed components.
pub fn calibrate_components(
    components: &[SvdComponent],
    spacing_m: f64,
    target_width_m: f64,
    grid: FractionGrid,
    opts: PeakOptions,
) -> Result<Calibration> {
    let mut sweep = Vec::new();
    let mut best: Option<(f64, f64, usize)> = None;
    for fraction in grid.values() {
        let thr = ThresholdFraction::new(fraction)?;
        let mut widths = Vec::new();
        for c in components {
            match stud_extents(c, thr, opts) {
                Ok(ext) => widths.extend(ext.iter().map(|(s, t)| t - s)),
                Err(Error::Uncalibratable(_)) => {}
                Err(e) => return Err(e),
            }
        }
        let summary = summarize(fraction, &widths, spacing_m, target_width_m);
        if let (Some(mode), Some(mean_w)) = (summary.modal_width_m, summary.mean_width_m) {
            let key = ((mode - target_width_m).abs(), (mean_w - target_width_m).abs());
            let better = best.is_none_or(|(bm, bw, _)| key.0 < bm || (key.0 == bm && key.1 < bw));
            if better {
                best = Some((key.0, key.1, sweep.len()));
            }
        }
        sweep.push(summary);
    }
    let (_, _, idx) = best.ok_or(Error::NoStudsDetected)?;
    Ok(Calibration { fraction: ThresholdFraction::new(sweep[idx].fraction)?, chosen: sweep[idx].clone(), sweep })
}
