//! End-to-end experiments: load or synthesize scans, condition them, label,
//! train over a list of seeds, evaluate, and optionally select features and
//! explain the model. Everything in a [`RunReport`] is reproducible from its
//! config.

mod model;
mod output;

pub use model::{ModelSpec, TrainedModel};
pub use output::{write_outputs, Manifest, ManifestEntry};

use std::path::PathBuf;

use log::info;
use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::baselines::{forest_fit, Classifier, ForestConfig};
use crate::dataset::{accuracy, Dataset, MeanStd, Task};
use crate::error::{invalid, Error, Result};
use crate::explain::{self, Background, ClassProbability, DepthInterval, ShapSummary, ShapleyMethod};
use crate::feature_select::{self, ClusterMap, ClusterMode, CurvePoint, CvKind, Metric, PfiResult, RfecvConfig, RfecvResult};
use crate::preprocess::{exponential_gain, per_trace_normalize, GainConfig, DEFAULT_GAMMA};
use crate::radargram::{load_bscan, LabeledScan, TimeAxis, WallClass, WallSpec};
use crate::sparsenn::{append_stud_indicator, EpochRecord};
use crate::svd_labeler::{calibrate_threshold, detect_studs_with, first_component, FractionGrid, PeakOptions};
use crate::synth::benchmark::{render_suite, BenchmarkPreset, MINIMAL_TRAIN};
use crate::synth::STUD_WIDTH_M;

/// Where scans come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScanSource {
    /// Render the synthetic suite in memory.
    Benchmark { preset: BenchmarkPreset },
    /// Every `*.csv` scan (with its JSON sidecar) in a directory, by file name.
    Directory { path: PathBuf },
}

/// Where stud labels come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudLabelChoice {
    /// Labels stored with the scans.
    #[default]
    Stored,
    /// Derived from the leading singular vector, calibrated on the training scans.
    Svd,
}

fn default_agg_max() -> usize {
    50
}

fn default_repeats() -> usize {
    10
}

fn default_step() -> usize {
    5
}

fn default_folds() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum SelectionSpec {
    /// Sweep `k = 1..=max_clusters`, scoring a forest on the reduced
    /// features `n_repeats` times per `k`.
    Agglomerate {
        #[serde(default = "default_agg_max")]
        max_clusters: usize,
        metric: Metric,
        mode: ClusterMode,
        #[serde(default = "default_repeats")]
        n_repeats: usize,
    },
    /// Permutation importance of the first seed's model on the test rows.
    Pfi {
        #[serde(default = "default_repeats")]
        n_repeats: usize,
    },
    Rfecv {
        #[serde(default = "default_step")]
        step: usize,
        #[serde(default = "default_folds")]
        n_folds: usize,
        cv: CvKind,
    },
}

fn default_background() -> usize {
    100
}

fn default_rows() -> usize {
    200
}

fn default_exact_limit() -> usize {
    10
}

fn default_perms() -> usize {
    200
}

fn default_top() -> usize {
    8
}

fn default_max_features() -> usize {
    32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainSpec {
    /// Held-out rows drawn as the background distribution.
    #[serde(default = "default_background")]
    pub background_size: usize,
    /// Test rows explained for the summary.
    #[serde(default = "default_rows")]
    pub max_rows: usize,
    /// Largest feature count explained exactly; larger sets are sampled.
    #[serde(default = "default_exact_limit")]
    pub exact_limit: usize,
    #[serde(default = "default_perms")]
    pub n_permutations: usize,
    /// Features explained for tree models, by impurity importance.
    #[serde(default = "default_top")]
    pub top_features: usize,
    /// Refuse to explain larger sets; a weakly regularized network can keep
    /// hundreds of inputs and the sampled estimator scales with their count.
    #[serde(default = "default_max_features")]
    pub max_features: usize,
}

impl Default for ExplainSpec {
    fn default() -> Self {
        Self {
            background_size: default_background(),
            max_rows: default_rows(),
            exact_limit: default_exact_limit(),
            n_permutations: default_perms(),
            top_features: default_top(),
            max_features: default_max_features(),
        }
    }
}

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}

fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

fn default_train_ids() -> Vec<String> {
    MINIMAL_TRAIN.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: Task,
    pub scans: ScanSource,
    #[serde(default = "default_train_ids")]
    pub train_scan_ids: Vec<String>,
    /// Empty means every scan not used for training.
    #[serde(default)]
    pub test_scan_ids: Vec<String>,
    #[serde(default)]
    pub stud_labels: StudLabelChoice,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub selection: Option<SelectionSpec>,
    #[serde(default)]
    pub explain: Option<ExplainSpec>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

impl ExperimentConfig {
    /// Minimal-train-set experiment on the default benchmark.
    pub fn benchmark(task: Task, model: ModelSpec) -> Self {
        Self {
            task,
            scans: ScanSource::Benchmark { preset: BenchmarkPreset::default() },
            train_scan_ids: default_train_ids(),
            test_scan_ids: Vec::new(),
            stud_labels: StudLabelChoice::Stored,
            gamma: DEFAULT_GAMMA,
            model,
            selection: None,
            explain: None,
            seeds: default_seeds(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        GainConfig::new(self.gamma)?;
        self.model.validate(self.task)?;
        if self.train_scan_ids.is_empty() {
            return Err(invalid("at least one training scan is required"));
        }
        if let Some(dup) = self.test_scan_ids.iter().find(|t| self.train_scan_ids.contains(t)) {
            return Err(invalid(format!("scan {dup} is listed for both training and testing")));
        }
        if self.seeds.is_empty() {
            return Err(invalid("at least one seed is required"));
        }
        if let Some(SelectionSpec::Agglomerate { max_clusters: 0, .. } | SelectionSpec::Pfi { n_repeats: 0 }) =
            &self.selection
        {
            return Err(invalid("selection needs a positive cluster count and repeat count"));
        }
        Ok(())
    }
}

/// Scans after conditioning and labeling, split into train and test.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train_scans: Vec<LabeledScan>,
    pub test_scans: Vec<LabeledScan>,
    pub train: Dataset,
    pub test: Dataset,
    pub axis: TimeAxis,
    /// Calibrated fraction when stud labels came from the SVD labeler.
    pub svd_fraction: Option<f64>,
}

/// Loads the configured scans without conditioning them.
pub fn load_scans(source: &ScanSource) -> Result<Vec<LabeledScan>> {
    match source {
        ScanSource::Benchmark { preset } => Ok(render_suite(preset)?
            .into_iter()
            .map(|(b, s)| LabeledScan {
                scan: s.scan,
                stud_labels: Some(s.stud_labels),
                wall_labels: Some(s.wall_labels),
                wall_spec: Some(b.spec),
            })
            .collect()),
        ScanSource::Directory { path } => {
            let mut files: Vec<PathBuf> = std::fs::read_dir(path)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                .collect();
            files.sort();
            if files.is_empty() {
                return Err(invalid(format!("no scan CSVs in {}", path.display())));
            }
            files.iter().map(|f| load_bscan(f)).collect()
        }
    }
}

/// Per-trace normalization followed by the power-law gain.
pub fn condition(scan: &LabeledScan, gamma: f64) -> Result<LabeledScan> {
    let s = exponential_gain(&per_trace_normalize(&scan.scan)?, &GainConfig::new(gamma)?)?;
    Ok(LabeledScan { scan: s, ..scan.clone() })
}

/// Replaces stud labels with SVD-derived ones. The threshold is calibrated on
/// `calibration` scans against the nominal stud width; returns the fraction.
pub fn relabel_with_svd(scans: &mut [LabeledScan], calibration: &[LabeledScan]) -> Result<f64> {
    let spacing = calibration.first().ok_or_else(|| invalid("no calibration scans"))?.scan.trace_spacing_m();
    let raw: Vec<_> = calibration.iter().map(|s| s.scan.clone()).collect();
    let cal = calibrate_threshold(&raw, spacing, STUD_WIDTH_M, FractionGrid::default())?;
    for s in scans.iter_mut() {
        let opts = PeakOptions::for_spacing(s.scan.trace_spacing_m());
        s.stud_labels = Some(detect_studs_with(&first_component(&s.scan)?, cal.fraction, opts)?);
    }
    Ok(cal.fraction.value())
}

fn stud_column(scans: &[LabeledScan]) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for s in scans {
        let l = s.stud_labels.as_ref().ok_or_else(|| invalid(format!("scan {} has no stud labels", s.scan.scan_id())))?;
        out.extend(l.indices());
    }
    Ok(out)
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<PreparedData> {
    cfg.validate()?;
    let all = load_scans(&cfg.scans)?;
    let mut conditioned: Vec<LabeledScan> = all.iter().map(|s| condition(s, cfg.gamma)).collect::<Result<_>>()?;
    for id in cfg.train_scan_ids.iter().chain(&cfg.test_scan_ids) {
        if !conditioned.iter().any(|s| s.scan.scan_id() == id) {
            return Err(invalid(format!("scan {id} not found")));
        }
    }
    let is_train = |s: &LabeledScan| cfg.train_scan_ids.iter().any(|t| t == s.scan.scan_id());
    let is_test = |s: &LabeledScan| {
        !is_train(s) && (cfg.test_scan_ids.is_empty() || cfg.test_scan_ids.iter().any(|t| t == s.scan.scan_id()))
    };
    let svd_fraction = match cfg.stud_labels {
        StudLabelChoice::Stored => None,
        StudLabelChoice::Svd => {
            let cal: Vec<LabeledScan> = conditioned.iter().filter(|s| is_train(s)).cloned().collect();
            Some(relabel_with_svd(&mut conditioned, &cal)?)
        }
    };
    let train_scans: Vec<LabeledScan> = conditioned.iter().filter(|s| is_train(s)).cloned().collect();
    let test_scans: Vec<LabeledScan> = conditioned.into_iter().filter(|s| is_test(s)).collect();
    if test_scans.is_empty() {
        return Err(invalid("no test scans remain"));
    }
    let mut train = Dataset::from_scans(&train_scans, cfg.task)?;
    let mut test = Dataset::from_scans(&test_scans, cfg.task)?;
    if cfg.model.uses_stud_indicator() {
        train.x = append_stud_indicator(&train.x, &stud_column(&train_scans)?)?;
        test.x = append_stud_indicator(&test.x, &stud_column(&test_scans)?)?;
    }
    let axis = *train_scans[0].scan.axis();
    Ok(PreparedData { train_scans, test_scans, train, test, axis, svd_fraction })
}

/// Accuracy summary that carries the seeds it was computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeededAccuracy {
    pub mean: f64,
    pub std: f64,
    pub seeds: Vec<u64>,
}

impl SeededAccuracy {
    pub fn new(values: &[f64], seeds: &[u64]) -> Self {
        let m = MeanStd::of(values);
        Self { mean: m.mean, std: m.std, seeds: seeds.to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    /// SparseNN only: active time-sample indices.
    pub active_features: Option<Vec<usize>>,
}

/// Depth bracket of a feature under one wall type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallDepth {
    pub wall_class: WallClass,
    /// `None` when the time lies beyond that wall's stack.
    pub interval: Option<DepthInterval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEntry {
    pub index: usize,
    pub time_ns: f64,
    pub depths: Vec<WallDepth>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePrediction {
    pub scan_id: String,
    pub trace: usize,
    pub truth: usize,
    pub predicted: usize,
    /// Probability of class 1 (stud, or exterior wall).
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum SelectionReport {
    Agglomerate { curve: Vec<CurvePoint>, best: ClusterMap, seeds: Vec<u64> },
    Pfi { result: PfiResult, model_seed: u64 },
    Rfecv { result: RfecvResult },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub n_train_rows: usize,
    pub n_test_rows: usize,
    pub n_inputs: usize,
    pub svd_fraction: Option<f64>,
    pub runs: Vec<SeedRun>,
    pub train_accuracy: SeededAccuracy,
    pub test_accuracy: SeededAccuracy,
    /// Features of the first seed's model: SparseNN's active set, or the
    /// explained subset for other models.
    pub features: Vec<FeatureEntry>,
    pub stud_indicator_active: Option<bool>,
    /// First seed's model on the test rows.
    pub predictions: Vec<TracePrediction>,
    pub selection: Option<SelectionReport>,
    pub shap: Option<ShapSummary>,
}

impl RunReport {
    /// Schema checks run before the report is written.
    pub fn validate(&self) -> Result<()> {
        let seeds: Vec<u64> = self.runs.iter().map(|r| r.seed).collect();
        if seeds.is_empty() || seeds != self.test_accuracy.seeds || seeds != self.train_accuracy.seeds {
            return Err(invalid("report accuracies must list the seeds of their runs"));
        }
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !self.runs.iter().all(|r| in_unit(r.train_accuracy) && in_unit(r.test_accuracy)) {
            return Err(invalid("accuracy outside [0, 1]"));
        }
        if !self.predictions.iter().all(|p| in_unit(p.probability)) {
            return Err(invalid("probability outside [0, 1]"));
        }
        if self.predictions.len() != self.n_test_rows {
            return Err(invalid("one prediction per test trace is required"));
        }
        Ok(())
    }
}

/// Everything produced by a run, including artifacts that go to separate files.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub report: RunReport,
    /// First seed's model.
    pub model: TrainedModel,
    pub history: Option<Vec<EpochRecord>>,
    /// First test scan, for the heatmap.
    pub example_scan: LabeledScan,
}

fn feature_entries(indices: &[usize], axis: &TimeAxis, specs: &[WallSpec]) -> Result<Vec<FeatureEntry>> {
    indices
        .iter()
        .map(|&k| {
            let time_ns = axis.time_of_index(k)?;
            let depths = specs
                .iter()
                .map(|spec| {
                    let interval = match explain::feature_depth_report(&[time_ns], spec) {
                        Ok(mut v) => Some(v.remove(0)),
                        Err(Error::BeyondStack { .. }) => None,
                        Err(e) => return Err(e),
                    };
                    Ok(WallDepth { wall_class: spec.wall_class, interval })
                })
                .collect::<Result<_>>()?;
            Ok(FeatureEntry { index: k, time_ns, depths })
        })
        .collect()
}

/// One spec per wall class present among `scans`, in class order.
fn distinct_specs(scans: &[LabeledScan]) -> Vec<WallSpec> {
    let mut specs: Vec<WallSpec> = Vec::new();
    for s in scans {
        if let Some(spec) = &s.wall_spec {
            if !specs.iter().any(|x| x.wall_class == spec.wall_class) {
                specs.push(spec.clone());
            }
        }
    }
    specs.sort_by_key(|s| s.wall_class.index());
    specs
}

/// Time-sample features to explain: the SparseNN active set, or the most
/// important ones of a tree model.
fn explained_features(model: &TrainedModel, n_time: usize, top: usize) -> Result<Vec<usize>> {
    match model {
        TrainedModel::Sparsenn(m) => Ok(m.active_features().indices),
        TrainedModel::Knn(_) => Err(invalid("explaining k-NN needs an explicit feature subset; use sparsenn or a tree model")),
        _ => {
            let imp = model.gini_importance().unwrap_or_default();
            let mut order: Vec<usize> = (0..n_time.min(imp.len())).filter(|&j| imp[j] > 0.0).collect();
            order.sort_by(|&a, &b| imp[b].total_cmp(&imp[a]).then(a.cmp(&b)));
            order.truncate(top);
            order.sort_unstable();
            Ok(order)
        }
    }
}

fn run_selection(
    spec: &SelectionSpec,
    data: &PreparedData,
    model: &TrainedModel,
    seeds: &[u64],
) -> Result<SelectionReport> {
    match spec {
        SelectionSpec::Agglomerate { max_clusters, metric, mode, n_repeats } => {
            let kmax = (*max_clusters).min(data.train.n_features());
            let repeat_seeds: Vec<u64> = (0..*n_repeats as u64).collect();
            let mut curve = Vec::with_capacity(kmax);
            let mut best: Option<(f64, ClusterMap)> = None;
            for k in 1..=kmax {
                let (map, reduced) = feature_select::agglomerate(data.train.x.view(), k, *metric, *mode)?;
                let test_x = map.transform(data.test.x.view())?;
                let train = Dataset { x: reduced, ..data.train.clone() };
                let accs: Vec<f64> = repeat_seeds
                    .iter()
                    .map(|&s| {
                        let f = forest_fit(&train, ForestConfig::with_seed(s))?;
                        Ok(accuracy(&f.predict(test_x.view()), &data.test.y))
                    })
                    .collect::<Result<_>>()?;
                let m = MeanStd::of(&accs);
                if best.as_ref().is_none_or(|(b, _)| m.mean > *b) {
                    best = Some((m.mean, map));
                }
                curve.push(CurvePoint { n_features: k, mean_accuracy: m.mean, std: m.std });
            }
            let best = best.ok_or_else(|| invalid("no features to agglomerate"))?.1;
            Ok(SelectionReport::Agglomerate { curve, best, seeds: repeat_seeds })
        }
        SelectionSpec::Pfi { n_repeats } => {
            let result = feature_select::pfi(model, data.test.x.view(), &data.test.y, *n_repeats, seeds[0])?;
            Ok(SelectionReport::Pfi { result, model_seed: seeds[0] })
        }
        SelectionSpec::Rfecv { step, n_folds, cv } => {
            let scheme =
                feature_select::make_folds(&data.train.y, data.train.groups.as_deref(), *cv, *n_folds, seeds[0])?;
            let cfg = RfecvConfig { step: *step, forest: ForestConfig::with_seed(seeds[0]), ..RfecvConfig::default() };
            Ok(SelectionReport::Rfecv { result: feature_select::rfecv(&data.train, &scheme, cfg, Some(&data.test))? })
        }
    }
}

fn run_explain(
    spec: &ExplainSpec,
    data: &PreparedData,
    model: &TrainedModel,
    features: &[usize],
    seed: u64,
) -> Result<Option<ShapSummary>> {
    if features.is_empty() {
        return Ok(None);
    }
    let mut cols = features.to_vec();
    // The stud indicator is explained alongside the time samples it accompanies.
    if let TrainedModel::Sparsenn(m) = model {
        if m.stud_indicator && m.active_features().stud_indicator == Some(true) {
            cols.push(m.n_time_features);
        }
    }
    if cols.len() > spec.max_features {
        return Err(invalid(format!(
            "{} features to explain exceeds max_features = {}; raise lambda or max_features",
            cols.len(),
            spec.max_features
        )));
    }
    let template = data.train.x.mean_axis(Axis(0)).ok_or_else(|| invalid("empty training set"))?.to_vec();
    let value = ClassProbability::new(model, 1, cols.clone(), template)?;
    let test_sub: Array2<f64> = value.project(data.test.x.view());
    let bg = Background::sample(test_sub.view(), spec.background_size, seed)?;
    let method = if cols.len() <= spec.exact_limit.min(explain::MAX_EXACT_FEATURES) {
        ShapleyMethod::Exact
    } else {
        ShapleyMethod::Sampled { n_permutations: spec.n_permutations, seed }
    };
    Ok(Some(explain::shap_summary(&value, test_sub.view(), &cols, &bg, spec.max_rows, method, seed.wrapping_add(1))?))
}

/// Runs the configured experiment in memory.
pub fn run(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let data = prepare(cfg)?;
    run_prepared(cfg, &data)
}

pub fn run_prepared(cfg: &ExperimentConfig, data: &PreparedData) -> Result<RunArtifacts> {
    cfg.validate()?;
    let mut runs = Vec::with_capacity(cfg.seeds.len());
    let mut first: Option<(TrainedModel, Option<Vec<EpochRecord>>)> = None;
    for &seed in &cfg.seeds {
        let (model, history) = cfg.model.fit(cfg.task, &data.train, seed)?;
        let train_accuracy = accuracy(&model.predict(data.train.x.view()), &data.train.y);
        let test_accuracy = accuracy(&model.predict(data.test.x.view()), &data.test.y);
        let active_features = match &model {
            TrainedModel::Sparsenn(m) => Some(m.active_features().indices),
            _ => None,
        };
        info!("seed {seed}: train {train_accuracy:.4}, test {test_accuracy:.4}");
        runs.push(SeedRun { seed, train_accuracy, test_accuracy, active_features });
        if first.is_none() {
            first = Some((model, history));
        }
    }
    let (model, history) = first.expect("at least one seed");
    let seeds = cfg.seeds.clone();
    let train_acc: Vec<f64> = runs.iter().map(|r| r.train_accuracy).collect();
    let test_acc: Vec<f64> = runs.iter().map(|r| r.test_accuracy).collect();

    let proba = model.predict_proba(data.test.x.view());
    let mut predictions = Vec::with_capacity(data.test.n_rows());
    let mut row = 0;
    for s in &data.test_scans {
        for trace in 0..s.scan.n_traces() {
            let p = &proba[row];
            predictions.push(TracePrediction {
                scan_id: s.scan.scan_id().to_string(),
                trace,
                truth: data.test.y[row],
                predicted: crate::baselines::argmax(p),
                probability: p[1].clamp(0.0, 1.0),
            });
            row += 1;
        }
    }

    let n_time = data.axis.n_samples();
    let (feature_idx, stud_indicator_active) = match &model {
        TrainedModel::Sparsenn(m) => {
            let a = m.active_features();
            (a.indices, a.stud_indicator)
        }
        _ => match &cfg.explain {
            Some(e) => (explained_features(&model, n_time, e.top_features)?, None),
            None => (Vec::new(), None),
        },
    };
    let specs = distinct_specs(&data.train_scans);
    let features = feature_entries(&feature_idx, &data.axis, &specs)?;
    let selection = cfg.selection.as_ref().map(|s| run_selection(s, data, &model, &seeds)).transpose()?;
    let shap = match &cfg.explain {
        Some(e) => run_explain(e, data, &model, &feature_idx, seeds[0])?,
        None => None,
    };

    let report = RunReport {
        config: cfg.clone(),
        n_train_rows: data.train.n_rows(),
        n_test_rows: data.test.n_rows(),
        n_inputs: data.train.n_features(),
        svd_fraction: data.svd_fraction,
        runs,
        train_accuracy: SeededAccuracy::new(&train_acc, &seeds),
        test_accuracy: SeededAccuracy::new(&test_acc, &seeds),
        features,
        stud_indicator_active,
        predictions,
        selection,
        shap,
    };
    report.validate()?;
    Ok(RunArtifacts { report, model, history, example_scan: data.test_scans[0].clone() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(task: Task, model: ModelSpec) -> ExperimentConfig {
        let preset = BenchmarkPreset { n_traces: 100, studs_per_scan: 1, ..BenchmarkPreset::noise_free(3) };
        ExperimentConfig {
            scans: ScanSource::Benchmark { preset },
            seeds: vec![0, 1],
            ..ExperimentConfig::benchmark(task, model)
        }
    }

    #[test]
    fn forest_run_reports_every_trace() {
        let cfg = small(Task::WallClassification, ModelSpec::Forest { n_trees: 10, max_depth: None });
        let out = run(&cfg).unwrap();
        let r = &out.report;
        assert_eq!(r.predictions.len(), r.n_test_rows);
        assert_eq!(r.test_accuracy.seeds, vec![0, 1]);
        assert!(r.predictions.iter().all(|p| (0.0..=1.0).contains(&p.probability)));
    }

    #[test]
    fn overlapping_train_and_test_rejected() {
        let mut cfg = small(Task::StudDetection, ModelSpec::Knn { k: 1 });
        cfg.test_scan_ids = vec!["I1".into()];
        assert!(cfg.validate().is_err());
        cfg.test_scan_ids = vec!["ZZ".into()];
        assert!(prepare(&cfg).is_err());
    }

    #[test]
    fn svd_labels_on_noise_free_suite_match_truth() {
        let mut cfg = small(Task::StudDetection, ModelSpec::Knn { k: 1 });
        cfg.stud_labels = StudLabelChoice::Svd;
        let svd = prepare(&cfg).unwrap();
        cfg.stud_labels = StudLabelChoice::Stored;
        let truth = prepare(&cfg).unwrap();
        assert!(svd.svd_fraction.is_some());
        assert!(accuracy(&svd.test.y, &truth.test.y) > 0.97);
    }
}
