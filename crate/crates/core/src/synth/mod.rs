//! Forward model: layered-wall impulse responses rendered into labeled B-scans.
//!
//! Every interface below the scanned surface contributes a Ricker wavelet at
//! its quasi-vertical two-way travel time. Amplitudes follow normal-incidence
//! Fresnel coefficients with two-way transmission losses through shallower
//! interfaces. Within-layer reverberations add delayed, attenuated copies.

pub mod benchmark;

use std::f64::consts::PI;

use log::debug;
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::radargram::{materials, BScan, LabelSource, StudLabels, TimeAxis, WallLabels, WallSpec};

/// Speed of light in vacuum, metres per nanosecond.
pub const C_M_PER_NS: f64 = 0.299_792_458;

/// Nominal dressed width of a 2x stud (1.5 in).
pub const STUD_WIDTH_M: f64 = 0.0381;

/// Geometric mid-band of a 0.4-6 GHz sweep.
pub const DEFAULT_CENTER_FREQ_GHZ: f64 = 2.7;

/// Normal-incidence amplitude reflection coefficient for a wave travelling in
/// medium `a` and meeting medium `b`.
pub fn reflection_coefficient(eps_a: f64, eps_b: f64) -> Result<f64> {
    if !(eps_a >= 1.0 && eps_b >= 1.0) || !eps_a.is_finite() || !eps_b.is_finite() {
        return Err(invalid(format!("permittivities must be >= 1, got {eps_a} and {eps_b}")));
    }
    let (na, nb) = (eps_a.sqrt(), eps_b.sqrt());
    Ok((na - nb) / (na + nb))
}

/// One-way-doubled travel time through a slab: `2 d sqrt(eps) / c`.
#[inline]
pub fn two_way_time_ns(thickness_m: f64, eps: f64) -> f64 {
    2.0 * thickness_m * eps.sqrt() / C_M_PER_NS
}

/// Time-domain Ricker wavelet with centre frequency `f_ghz`, evaluated at
/// `tau` ns from its peak.
#[inline]
pub fn ricker(tau_ns: f64, f_ghz: f64) -> f64 {
    let x = (PI * f_ghz * tau_ns).powi(2);
    (1.0 - 2.0 * x) * (-x).exp()
}

/// Distance between the two side-lobe minima of a Ricker wavelet.
pub fn ricker_breadth_ns(f_ghz: f64) -> f64 {
    6f64.sqrt() / (PI * f_ghz)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub axis: TimeAxis,
    pub pulse_center_freq_ghz: f64,
    /// Wavelet breadth; the wavelet is truncated to zero beyond two breadths
    /// from its peak.
    pub pulse_width_ns: f64,
    pub noise_sigma: f64,
    /// Left edges of studs, metres from the first trace.
    pub stud_positions_m: Vec<f64>,
    pub stud_width_m: f64,
    pub stud_eps: (f64, f64),
    pub trace_spacing_m: f64,
    pub n_traces: usize,
    pub seed: u64,
    /// 1 renders primaries only; each extra bounce adds one more in-layer reverberation.
    pub max_bounces: u32,
    /// Standard deviation of a per-trace shift of the whole trace in time,
    /// modelling antenna standoff and time-zero drift between positions.
    pub time_jitter_ns: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            axis: TimeAxis::default(),
            pulse_center_freq_ghz: DEFAULT_CENTER_FREQ_GHZ,
            pulse_width_ns: ricker_breadth_ns(DEFAULT_CENTER_FREQ_GHZ),
            noise_sigma: 0.0,
            stud_positions_m: Vec::new(),
            stud_width_m: STUD_WIDTH_M,
            stud_eps: materials::SPF_WOOD,
            trace_spacing_m: 0.00635,
            n_traces: 200,
            seed: 0,
            max_bounces: 2,
            time_jitter_ns: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_traces == 0 {
            return Err(invalid("n_traces must be at least 1"));
        }
        if !(self.trace_spacing_m > 0.0) {
            return Err(invalid("trace spacing must be positive"));
        }
        if !(self.pulse_center_freq_ghz > 0.0 && self.pulse_width_ns > 0.0) {
            return Err(invalid("pulse frequency and width must be positive"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(invalid("noise_sigma must be >= 0"));
        }
        if !(self.time_jitter_ns >= 0.0 && self.time_jitter_ns.is_finite()) {
            return Err(invalid("time_jitter_ns must be >= 0"));
        }
        if self.max_bounces < 1 {
            return Err(invalid("max_bounces must be >= 1"));
        }
        if !(self.stud_eps.0 >= 1.0 && self.stud_eps.0 <= self.stud_eps.1) {
            return Err(invalid("stud permittivity bounds must satisfy 1 <= min <= max"));
        }
        if !(self.stud_width_m > 0.0) {
            return Err(invalid("stud width must be positive"));
        }
        let extent = (self.n_traces - 1) as f64 * self.trace_spacing_m;
        let mut studs = self.stud_positions_m.clone();
        studs.sort_by(f64::total_cmp);
        for (i, &s) in studs.iter().enumerate() {
            if s < -EDGE_TOL || s + self.stud_width_m > extent + self.trace_spacing_m + EDGE_TOL {
                return Err(invalid(format!("stud at {s} m lies outside the scan extent")));
            }
            if i > 0 && studs[i - 1] + self.stud_width_m > s + EDGE_TOL {
                return Err(invalid(format!("studs at {} m and {s} m overlap", studs[i - 1])));
            }
        }
        Ok(())
    }

    /// Whether trace `c` (at `c · spacing`) falls inside a stud interval
    /// `[left, left + width)`.
    pub fn is_stud_trace(&self, c: usize) -> bool {
        let x = c as f64 * self.trace_spacing_m;
        let tol = 1e-9 * self.trace_spacing_m;
        self.stud_positions_m
            .iter()
            .any(|&left| x >= left - tol && x < left + self.stud_width_m - tol)
    }
}

const EDGE_TOL: f64 = 1e-9;

/// Where a reflection comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventProvenance {
    /// Interface at the bottom of layer `interface`; the deepest one borders
    /// the air half-space behind the wall.
    pub interface: usize,
    /// 1 for a primary reflection, `n` for `n − 1` extra in-layer round trips.
    pub bounce_order: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterfaceEvent {
    pub two_way_time_ns: f64,
    pub amplitude: f64,
    pub provenance: EventProvenance,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventSet {
    pub events: Vec<InterfaceEvent>,
    /// Events later than the axis duration that were discarded.
    pub dropped: usize,
}

/// Stud substitution for a single column: fill the cavity with this permittivity range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudOverride {
    pub stud_eps: (f64, f64),
}

/// Permittivity of the medium behind the deepest layer.
pub const BACKING_EPS: f64 = 1.0;

/// Reflection events for one column of `spec`, sorted by arrival time.
pub fn interface_events(
    spec: &WallSpec,
    column_override: Option<StudOverride>,
    config: &SynthConfig,
) -> Result<EventSet> {
    spec.validate()?;
    if config.max_bounces < 1 {
        return Err(invalid("max_bounces must be >= 1"));
    }
    let effective = match column_override {
        Some(o) => {
            if spec.stud_layer.is_none() {
                return Err(invalid("stud override requested for a wall without a stud cavity"));
            }
            spec.with_stud(o.stud_eps)
        }
        None => spec.clone(),
    };
    let eps: Vec<f64> = effective.layers.iter().map(|l| l.eps_mid()).collect();
    let layer_time: Vec<f64> =
        effective.layers.iter().zip(&eps).map(|(l, &e)| two_way_time_ns(l.thickness_m, e)).collect();
    let n = eps.len();
    let below = |k: usize| if k + 1 < n { eps[k + 1] } else { BACKING_EPS };
    let refl: Vec<f64> = (0..n).map(|k| reflection_coefficient(eps[k], below(k))).collect::<Result<_>>()?;

    let duration = config.axis.duration_ns();
    let mut set = EventSet::default();
    let mut arrival = 0.0;
    let mut transmission = 1.0;
    for k in 0..n {
        arrival += layer_time[k];
        let primary = transmission * refl[k];
        for order in 1..=config.max_bounces {
            // Extra round trips need a reflecting interface above the layer.
            if order > 1 && k == 0 {
                break;
            }
            let extra = (order - 1) as i32;
            let t = arrival + extra as f64 * layer_time[k];
            // Seen from below, the upper interface reflects with the opposite sign.
            let amplitude = primary * (refl[k] * -refl[k.saturating_sub(1)]).powi(extra);
            if t > duration {
                set.dropped += 1;
                continue;
            }
            set.events.push(InterfaceEvent {
                two_way_time_ns: t,
                amplitude,
                provenance: EventProvenance { interface: k, bounce_order: order },
            });
        }
        transmission *= 1.0 - refl[k] * refl[k];
    }
    if set.dropped > 0 {
        debug!("dropped {} events beyond {duration} ns", set.dropped);
    }
    set.events.sort_by(|a, b| a.two_way_time_ns.total_cmp(&b.two_way_time_ns));
    Ok(set)
}

/// Superposes truncated Ricker wavelets for `events` on `axis` without noise
/// or normalization.
pub fn render_events(events: &[InterfaceEvent], axis: &TimeAxis, f_ghz: f64, pulse_width_ns: f64) -> Vec<f64> {
    let support = 2.0 * pulse_width_ns;
    let mut trace = vec![0.0; axis.n_samples()];
    for (k, v) in trace.iter_mut().enumerate() {
        let t = axis.time_unchecked(k);
        *v = events
            .iter()
            .filter(|e| (t - e.two_way_time_ns).abs() <= support)
            .map(|e| e.amplitude * ricker(t - e.two_way_time_ns, f_ghz))
            .sum();
    }
    trace
}

/// A rendered scan with its ground-truth labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthScan {
    pub scan: BScan,
    pub stud_labels: StudLabels,
    pub wall_labels: WallLabels,
}

/// Renders `config.n_traces` columns of `spec`. Columns inside stud intervals
/// use the stud substitution. Noise is drawn from a per-column stream of a
/// ChaCha generator seeded with `config.seed`, so columns are independent of
/// rendering order.
pub fn render_bscan(spec: &WallSpec, config: &SynthConfig, scan_id: &str) -> Result<SynthScan> {
    config.validate()?;
    spec.validate()?;
    let f = config.pulse_center_freq_ghz;
    let clean = interface_events(spec, None, config)?.events;
    let studded = match spec.stud_layer {
        Some(_) => interface_events(spec, Some(StudOverride { stud_eps: config.stud_eps }), config)?.events,
        None => clean.clone(),
    };
    let clean_trace = render_events(&clean, &config.axis, f, config.pulse_width_ns);
    let stud_trace = render_events(&studded, &config.axis, f, config.pulse_width_ns);
    let jitter = if config.time_jitter_ns > 0.0 {
        Some(Normal::new(0.0, config.time_jitter_ns).map_err(|e| invalid(e.to_string()))?)
    } else {
        None
    };

    let n_samples = config.axis.n_samples();
    let flags: Vec<bool> = (0..config.n_traces).map(|c| config.is_stud_trace(c)).collect();
    let noise = if config.noise_sigma > 0.0 {
        Some(Normal::new(0.0, config.noise_sigma).map_err(|e| invalid(e.to_string()))?)
    } else {
        None
    };
    let mut amplitudes = Array2::zeros((n_samples, config.n_traces));
    for (c, mut col) in amplitudes.columns_mut().into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(c as u64);
        let shifted;
        let base = match &jitter {
            Some(j) => {
                let dt = j.sample(&mut rng);
                let events = if flags[c] { &studded } else { &clean };
                let moved: Vec<InterfaceEvent> =
                    events.iter().map(|e| InterfaceEvent { two_way_time_ns: e.two_way_time_ns + dt, ..*e }).collect();
                shifted = render_events(&moved, &config.axis, f, config.pulse_width_ns);
                &shifted
            }
            None if flags[c] => &stud_trace,
            None => &clean_trace,
        };
        col.iter_mut().zip(base).for_each(|(v, b)| *v = *b);
        if let Some(noise) = &noise {
            col.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
        }
        let peak = col.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if peak > 0.0 {
            col.mapv_inplace(|v| v / peak);
        }
    }

    let scan = BScan::new(config.axis, amplitudes, config.trace_spacing_m, scan_id)?;
    Ok(SynthScan {
        stud_labels: StudLabels::from_flags(&flags, LabelSource::SyntheticTruth),
        wall_labels: WallLabels::uniform(spec.wall_class, config.n_traces, LabelSource::SyntheticTruth),
        scan,
    })
}
