//! Seeded suite of interior and exterior wall scans with known stud layouts.
//!
//! Scan ids follow the wall-letter + segment-number convention. Interior walls
//! are D, E, F, G and exterior walls A, B, C, H, I; the minimal training pair
//! is one scan of each type, `I1` and `G3`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{render_bscan, SynthConfig, SynthScan};
use crate::error::{invalid, Result};
use crate::radargram::{WallClass, WallSpec};

pub const INTERIOR_IDS: [&str; 10] = ["D1", "D2", "D3", "E1", "E2", "E3", "F1", "G1", "G2", "G3"];
pub const EXTERIOR_IDS: [&str; 11] = ["A1", "B1", "B2", "B3", "C1", "C2", "C3", "H1", "H2", "H3", "I1"];
pub const MINIMAL_TRAIN: [&str; 2] = ["I1", "G3"];

/// 16 in on-centre framing.
pub const STUD_PITCH_M: f64 = 0.4064;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkPreset {
    pub seed: u64,
    /// Noise levels assigned to scans in rotation.
    pub noise_levels: Vec<f64>,
    pub n_traces: usize,
    pub trace_spacing_m: f64,
    pub studs_per_scan: usize,
    pub max_bounces: u32,
    /// Per-trace time-shift standard deviation passed to every scan.
    pub time_jitter_ns: f64,
}

impl Default for BenchmarkPreset {
    fn default() -> Self {
        Self {
            seed: 7,
            noise_levels: vec![0.005, 0.01, 0.02],
            n_traces: 200,
            trace_spacing_m: 0.00635,
            studs_per_scan: 3,
            max_bounces: 2,
            time_jitter_ns: 0.0,
        }
    }
}

impl BenchmarkPreset {
    pub fn noise_free(seed: u64) -> Self {
        Self { seed, noise_levels: vec![0.0], ..Self::default() }
    }

    pub fn with_noise(seed: u64, sigma: f64) -> Self {
        Self { seed, noise_levels: vec![sigma], ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkScan {
    pub scan_id: String,
    pub spec: WallSpec,
    pub config: SynthConfig,
}

/// Specs and configs for every scan in the suite, interior walls first.
pub fn benchmark_suite(preset: &BenchmarkPreset) -> Result<Vec<BenchmarkScan>> {
    if preset.noise_levels.is_empty() {
        return Err(invalid("benchmark needs at least one noise level"));
    }
    let pitch_traces = (STUD_PITCH_M / preset.trace_spacing_m).round() as usize;
    let stud_traces = (super::STUD_WIDTH_M / preset.trace_spacing_m).round() as usize;
    let span = pitch_traces * preset.studs_per_scan.saturating_sub(1) + stud_traces;
    if span + 2 > preset.n_traces {
        return Err(invalid(format!(
            "{} studs need {span} traces but the preset renders {}",
            preset.studs_per_scan, preset.n_traces
        )));
    }
    let slack = preset.n_traces - span;

    let ids = INTERIOR_IDS
        .iter()
        .map(|id| (id, WallClass::Interior))
        .chain(EXTERIOR_IDS.iter().map(|id| (id, WallClass::Exterior)));
    let mut rng = ChaCha8Rng::seed_from_u64(preset.seed);
    Ok(ids
        .enumerate()
        .map(|(i, (id, class))| {
            let offset = rng.random_range(1..slack);
            let stud_positions_m = (0..preset.studs_per_scan)
                .map(|k| (offset + k * pitch_traces) as f64 * preset.trace_spacing_m)
                .collect();
            let config = SynthConfig {
                noise_sigma: preset.noise_levels[i % preset.noise_levels.len()],
                stud_positions_m,
                trace_spacing_m: preset.trace_spacing_m,
                n_traces: preset.n_traces,
                seed: rng.random(),
                max_bounces: preset.max_bounces,
                time_jitter_ns: preset.time_jitter_ns,
                ..SynthConfig::default()
            };
            BenchmarkScan { scan_id: id.to_string(), spec: WallSpec::for_class(class), config }
        })
        .collect())
}

/// Renders the whole suite.
pub fn render_suite(preset: &BenchmarkPreset) -> Result<Vec<(BenchmarkScan, SynthScan)>> {
    benchmark_suite(preset)?
        .into_iter()
        .map(|b| {
            let scan = render_bscan(&b.spec, &b.config, &b.scan_id)?;
            Ok((b, scan))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_has_both_wall_types_and_the_minimal_pair() {
        let suite = benchmark_suite(&BenchmarkPreset::default()).unwrap();
        let interior = suite.iter().filter(|b| b.spec.wall_class == WallClass::Interior).count();
        let exterior = suite.len() - interior;
        assert!(interior >= 10 && exterior >= 10);
        for id in MINIMAL_TRAIN {
            assert!(suite.iter().any(|b| b.scan_id == id));
        }
    }

    #[test]
    fn studs_are_six_traces_wide() {
        let rendered = render_suite(&BenchmarkPreset::noise_free(3)).unwrap();
        for (b, s) in &rendered {
            let intervals = s.stud_labels.intervals();
            assert_eq!(intervals.len(), 3, "{}", b.scan_id);
            assert!(intervals.iter().all(|(a, e)| e - a == 6), "{}: {intervals:?}", b.scan_id);
        }
    }

    #[test]
    fn suite_is_deterministic() {
        assert_eq!(
            benchmark_suite(&BenchmarkPreset::default()).unwrap(),
            benchmark_suite(&BenchmarkPreset::default()).unwrap()
        );
    }
}
