use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::radargram::{EpsBound, WallSpec};
use crate::synth::two_way_time_ns;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthQuery {
    pub t_ns: f64,
    pub spec: WallSpec,
    pub bound: EpsBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Depth {
    /// Metres below the scanned surface.
    pub depth_m: f64,
    /// Index of the layer hosting that depth.
    pub layer: usize,
}

/// Two-way time to traverse the whole stack under `bound`.
pub fn stack_time_ns(spec: &WallSpec, bound: EpsBound) -> f64 {
    spec.layers.iter().map(|l| two_way_time_ns(l.thickness_m, l.eps(bound))).sum()
}

/// Two-way time down to `depth_m` under `bound`, the forward direction of
/// [`depth_of_time`].
pub fn time_of_depth(spec: &WallSpec, depth_m: f64, bound: EpsBound) -> Result<f64> {
    spec.validate()?;
    let total = spec.total_thickness_m();
    if !(depth_m >= 0.0) {
        return Err(invalid(format!("depth must be >= 0, got {depth_m}")));
    }
    if depth_m > total {
        return Err(invalid(format!("depth {depth_m} m is below the {total} m stack")));
    }
    let mut t = 0.0;
    let mut top = 0.0;
    for l in &spec.layers {
        let inside = (depth_m - top).min(l.thickness_m);
        t += two_way_time_ns(inside, l.eps(bound));
        top += l.thickness_m;
        if depth_m <= top {
            break;
        }
    }
    Ok(t)
}

/// Inverts cumulative two-way time through the stack: the first layer whose
/// bottom is reached at or after `t` hosts the reflector.
pub fn depth_of_time(q: &DepthQuery) -> Result<Depth> {
    q.spec.validate()?;
    if !(q.t_ns >= 0.0) {
        return Err(invalid(format!("time must be >= 0, got {}", q.t_ns)));
    }
    let max_ns = stack_time_ns(&q.spec, q.bound);
    if q.t_ns > max_ns {
        return Err(Error::BeyondStack { t_ns: q.t_ns, max_ns });
    }
    let mut elapsed = 0.0;
    let mut top = 0.0;
    let last = q.spec.layers.len() - 1;
    for (i, l) in q.spec.layers.iter().enumerate() {
        let eps = l.eps(q.bound);
        let lt = two_way_time_ns(l.thickness_m, eps);
        if q.t_ns <= elapsed + lt || i == last {
            let within = (q.t_ns - elapsed) * crate::synth::C_M_PER_NS / (2.0 * eps.sqrt());
            return Ok(Depth { depth_m: top + within.min(l.thickness_m), layer: i });
        }
        elapsed += lt;
        top += l.thickness_m;
    }
    unreachable!("stack has at least one layer")
}

/// Depth bracket for one feature time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthInterval {
    pub t_ns: f64,
    /// From the largest permittivities.
    pub shallow: Depth,
    /// From the smallest permittivities.
    pub deep: Depth,
}

impl DepthInterval {
    pub fn width_m(&self) -> f64 {
        self.deep.depth_m - self.shallow.depth_m
    }

    pub fn contains(&self, depth_m: f64) -> bool {
        depth_m >= self.shallow.depth_m && depth_m <= self.deep.depth_m
    }
}

/// Maps each feature time to the depths implied by the two permittivity
/// bounds of every layer.
pub fn feature_depth_report(times_ns: &[f64], spec: &WallSpec) -> Result<Vec<DepthInterval>> {
    times_ns
        .iter()
        .map(|&t| {
            let at = |bound| depth_of_time(&DepthQuery { t_ns: t, spec: spec.clone(), bound });
            Ok(DepthInterval { t_ns: t, shallow: at(EpsBound::UseEpsMax)?, deep: at(EpsBound::UseEpsMin)? })
        })
        .collect()
}
