//! `wallscan` command-line driver.
//!
//! Exit codes: 0 on success, 1 for invalid input or configuration, 2 for
//! failures while computing or writing.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::{Deserialize, Serialize};

use wallscan::dataset::Task;
use wallscan::experiment::{
    self, write_outputs, ExperimentConfig, ExplainSpec, Manifest, ModelSpec, ScanSource, SelectionSpec,
    StudLabelChoice,
};
use wallscan::feature_select::{ClusterMode, CvKind, Metric};
use wallscan::plot;
use wallscan::radargram::{load_bscan, save_bscan, LabeledScan, WallSpec};
use wallscan::sparsenn::InputScaling;
use wallscan::synth::benchmark::{render_suite, BenchmarkPreset};
use wallscan::synth::{render_bscan, SynthConfig};

#[derive(Parser)]
#[command(name = "wallscan", version, about = "GPR wall-scan synthesis, labeling, sparse learning and explanation")]
struct Cli {
    /// Seed for the benchmark generator and, unless `--seeds` is given, for training.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render scans from a JSON config, or the benchmark suite by default.
    Synth(SynthArgs),
    /// Replace stud labels with SVD-derived ones.
    Label(LabelArgs),
    /// Fit a model and report train/test accuracy per seed.
    Train(TrainArgs),
    /// Feature selection: agglomeration sweep, permutation importance or RFECV.
    Select(SelectArgs),
    /// Shapley attributions and depth intervals for a model's features.
    Explain(ExplainArgs),
    /// Full experiment from a JSON config.
    Run(RunArgs),
    /// Redraw SVG figures from CSV tables.
    Plot(PlotArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// `{"kind": "benchmark", "preset": {...}}` or
    /// `{"kind": "single", "scan_id": "...", "spec": {...}, "config": {...}}`.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum SynthFile {
    Benchmark { preset: BenchmarkPreset },
    Single { scan_id: String, spec: WallSpec, config: SynthConfig },
}

#[derive(Args)]
struct LabelArgs {
    /// Directory of scan CSVs with sidecars.
    #[arg(long)]
    scans: PathBuf,
    /// Scans used to calibrate the threshold; all scans by default.
    #[arg(long, value_delimiter = ',')]
    calibrate_on: Option<Vec<String>>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Stud,
    Wall,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Knn,
    Tree,
    Forest,
    Sparsenn,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScalingArg {
    Standardize,
    Center,
    None,
}

#[derive(Args)]
struct DataArgs {
    /// Experiment config JSON; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    task: Option<TaskArg>,
    /// Directory of scans; the benchmark suite is rendered when absent.
    #[arg(long)]
    scans: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    train: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    test: Option<Vec<String>>,
    /// Gain exponent.
    #[arg(long)]
    gamma: Option<f64>,
    /// Derive stud labels with the SVD labeler instead of stored labels.
    #[arg(long)]
    svd_labels: bool,
    /// Training seeds; one run per seed.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    /// L0 penalty for sparsenn.
    #[arg(long)]
    lambda: Option<f64>,
    /// Hidden widths for sparsenn, e.g. `8,8,8`.
    #[arg(long, value_delimiter = ',')]
    arch: Option<Vec<usize>>,
    /// Append the stud label as an input (wall task, sparsenn).
    #[arg(long)]
    stud_indicator: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long, value_enum)]
    scaling: Option<ScalingArg>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    n_trees: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Agglomerate,
    Pfi,
    Rfecv,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Euclidean,
    Cosine,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Pooled,
    Exemplar,
}

#[derive(Clone, Copy, ValueEnum)]
enum CvArg {
    Stratified,
    StratifiedGroup,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long, value_enum)]
    method: MethodArg,
    #[arg(long, value_enum, default_value = "euclidean")]
    metric: MetricArg,
    #[arg(long, value_enum, default_value = "pooled")]
    mode: ModeArg,
    /// Largest cluster count in the agglomeration sweep.
    #[arg(long, default_value_t = 50)]
    max_clusters: usize,
    /// Repeats per agglomeration count or PFI feature.
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long, default_value_t = 5)]
    step: usize,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, value_enum, default_value = "stratified")]
    cv: CvArg,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct ExplainArgs {
    #[arg(long, default_value_t = 100)]
    background: usize,
    #[arg(long, default_value_t = 200)]
    rows: usize,
    #[arg(long, default_value_t = 200)]
    permutations: usize,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct PlotArgs {
    /// Directory holding `curve.csv`, `importance.csv`, `shap.csv` or `predictions.csv`.
    #[arg(long)]
    input: PathBuf,
    /// Scan CSV to draw as a heatmap, with lines from `features.csv`.
    #[arg(long)]
    scan: Option<PathBuf>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn experiment_config(cli: &Cli, data: &DataArgs, model: &ModelArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &data.config {
        Some(p) => read_json(p)?,
        None => {
            let task = match data.task.unwrap_or(TaskArg::Stud) {
                TaskArg::Stud => Task::StudDetection,
                TaskArg::Wall => Task::WallClassification,
            };
            let mut c = ExperimentConfig::benchmark(task, ModelSpec::default());
            c.scans = ScanSource::Benchmark { preset: BenchmarkPreset { seed: cli.seed, ..BenchmarkPreset::default() } };
            c.seeds = vec![cli.seed];
            c
        }
    };
    if let Some(t) = data.task {
        cfg.task = match t {
            TaskArg::Stud => Task::StudDetection,
            TaskArg::Wall => Task::WallClassification,
        };
    }
    if let Some(dir) = &data.scans {
        cfg.scans = ScanSource::Directory { path: dir.clone() };
    }
    if let Some(ids) = &data.train {
        cfg.train_scan_ids = ids.clone();
    }
    if let Some(ids) = &data.test {
        cfg.test_scan_ids = ids.clone();
    }
    if let Some(g) = data.gamma {
        cfg.gamma = g;
    }
    if data.svd_labels {
        cfg.stud_labels = StudLabelChoice::Svd;
    }
    if let Some(s) = &data.seeds {
        cfg.seeds = s.clone();
    }
    cfg.model = model_spec(cfg.task, cfg.model, model)?;
    Ok(cfg)
}

fn model_spec(task: Task, current: ModelSpec, a: &ModelArgs) -> Result<ModelSpec> {
    let mut spec = match a.model {
        None => current,
        Some(ModelArg::Knn) => ModelSpec::Knn { k: 5 },
        Some(ModelArg::Tree) => ModelSpec::Tree { max_depth: None },
        Some(ModelArg::Forest) => ModelSpec::default(),
        Some(ModelArg::Sparsenn) => ModelSpec::sparsenn(task),
    };
    let nn_flags = a.lambda.is_some()
        || a.arch.is_some()
        || a.stud_indicator
        || a.epochs.is_some()
        || a.learning_rate.is_some()
        || a.scaling.is_some();
    match &mut spec {
        ModelSpec::Sparsenn { arch, lambda, stud_indicator, epochs, learning_rate, scaling, .. } => {
            if let Some(v) = &a.arch {
                *arch = v.clone();
            }
            if a.lambda.is_some() {
                *lambda = a.lambda;
            }
            *stud_indicator |= a.stud_indicator;
            if let Some(v) = a.epochs {
                *epochs = v;
            }
            if let Some(v) = a.learning_rate {
                *learning_rate = v;
            }
            if let Some(s) = a.scaling {
                *scaling = match s {
                    ScalingArg::Standardize => InputScaling::Standardize,
                    ScalingArg::Center => InputScaling::Center,
                    ScalingArg::None => InputScaling::None,
                };
            }
        }
        _ if nn_flags => bail!(wallscan::Error::InvalidConfig(
            "--lambda, --arch, --stud-indicator, --epochs, --learning-rate and --scaling need --model sparsenn".into()
        )),
        ModelSpec::Knn { k } => *k = a.k.unwrap_or(*k),
        ModelSpec::Tree { max_depth } => *max_depth = a.max_depth.or(*max_depth),
        ModelSpec::Forest { n_trees, max_depth } => {
            *n_trees = a.n_trees.unwrap_or(*n_trees);
            *max_depth = a.max_depth.or(*max_depth);
        }
    }
    Ok(spec)
}

fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Manifest> {
    let data = experiment::prepare(cfg).context("stage prepare")?;
    info!("{} training rows, {} test rows", data.train.n_rows(), data.test.n_rows());
    let art = experiment::run_prepared(cfg, &data).context("stage train/evaluate")?;
    let r = &art.report;
    println!(
        "test accuracy {:.4} ± {:.4} over seeds {:?}",
        r.test_accuracy.mean, r.test_accuracy.std, r.test_accuracy.seeds
    );
    if !r.features.is_empty() {
        let times: Vec<String> = r.features.iter().map(|f| format!("{:.3}", f.time_ns)).collect();
        println!("{} features at [{}] ns", r.features.len(), times.join(", "));
    }
    write_outputs(&art, out_dir).context("stage write")
}

fn cmd_synth(cli: &Cli, args: &SynthArgs) -> Result<()> {
    let file = match &args.config {
        Some(p) => read_json(p)?,
        None => SynthFile::Benchmark { preset: BenchmarkPreset { seed: cli.seed, ..BenchmarkPreset::default() } },
    };
    let records: Vec<LabeledScan> = match file {
        SynthFile::Benchmark { preset } => render_suite(&preset)?
            .into_iter()
            .map(|(b, s)| LabeledScan {
                scan: s.scan,
                stud_labels: Some(s.stud_labels),
                wall_labels: Some(s.wall_labels),
                wall_spec: Some(b.spec),
            })
            .collect(),
        SynthFile::Single { scan_id, spec, config } => {
            let s = render_bscan(&spec, &config, &scan_id)?;
            vec![LabeledScan {
                scan: s.scan,
                stud_labels: Some(s.stud_labels),
                wall_labels: Some(s.wall_labels),
                wall_spec: Some(spec),
            }]
        }
    };
    write_scans(&records, &cli.out_dir)?;
    println!("wrote {} scans to {}", records.len(), cli.out_dir.display());
    Ok(())
}

fn write_scans(records: &[LabeledScan], dir: &Path) -> Result<Manifest> {
    std::fs::create_dir_all(dir)?;
    let mut names = Vec::new();
    for r in records {
        let id = r.scan.scan_id();
        save_bscan(r, &dir.join(format!("{id}.csv")))?;
        names.push(format!("{id}.csv"));
        names.push(format!("{id}.json"));
    }
    let m = Manifest::of_files(dir, &names)?;
    m.write(&dir.join("manifest.json"))?;
    Ok(m)
}

fn cmd_label(cli: &Cli, args: &LabelArgs) -> Result<()> {
    let mut scans = experiment::load_scans(&ScanSource::Directory { path: args.scans.clone() })?;
    let calibration: Vec<LabeledScan> = match &args.calibrate_on {
        Some(ids) => {
            let picked: Vec<LabeledScan> =
                scans.iter().filter(|s| ids.iter().any(|i| i == s.scan.scan_id())).cloned().collect();
            if picked.len() != ids.len() {
                bail!(wallscan::Error::InvalidConfig(format!("calibration scans {ids:?} not all found")));
            }
            picked
        }
        None => scans.clone(),
    };
    let fraction = experiment::relabel_with_svd(&mut scans, &calibration)?;
    write_scans(&scans, &cli.out_dir)?;
    println!("threshold fraction {fraction}; relabeled {} scans", scans.len());
    Ok(())
}

fn cmd_select(cli: &Cli, args: &SelectArgs) -> Result<()> {
    let mut cfg = experiment_config(cli, &args.data, &args.model)?;
    cfg.selection = Some(match args.method {
        MethodArg::Agglomerate => SelectionSpec::Agglomerate {
            max_clusters: args.max_clusters,
            metric: match args.metric {
                MetricArg::Euclidean => Metric::Euclidean,
                MetricArg::Cosine => Metric::Cosine,
            },
            mode: match args.mode {
                ModeArg::Pooled => ClusterMode::Pooled,
                ModeArg::Exemplar => ClusterMode::Exemplar,
            },
            n_repeats: args.repeats,
        },
        MethodArg::Pfi => SelectionSpec::Pfi { n_repeats: args.repeats },
        MethodArg::Rfecv => SelectionSpec::Rfecv {
            step: args.step,
            n_folds: args.folds,
            cv: match args.cv {
                CvArg::Stratified => CvKind::Stratified,
                CvArg::StratifiedGroup => CvKind::StratifiedGroup,
            },
        },
    });
    run_experiment(&cfg, &cli.out_dir)?;
    Ok(())
}

fn cmd_explain(cli: &Cli, args: &ExplainArgs) -> Result<()> {
    let mut cfg = experiment_config(cli, &args.data, &args.model)?;
    cfg.explain = Some(ExplainSpec {
        background_size: args.background,
        max_rows: args.rows,
        n_permutations: args.permutations,
        ..cfg.explain.unwrap_or_default()
    });
    run_experiment(&cfg, &cli.out_dir)?;
    Ok(())
}

fn cmd_plot(args: &PlotArgs, out_dir: &Path) -> Result<()> {
    let scan = args.scan.as_deref().map(load_bscan).transpose()?;
    let axis = scan.as_ref().map(|s| *s.scan.axis());
    let written = plot::plot_directory(&args.input, scan.as_ref().map(|s| &s.scan), axis.as_ref())?;
    // Figures are drawn next to their tables; copy them when a different
    // output directory was asked for.
    if out_dir != args.input {
        std::fs::create_dir_all(out_dir)?;
        for p in &written {
            std::fs::copy(p, out_dir.join(p.file_name().expect("file name")))?;
        }
    }
    println!("wrote {} figures", written.len());
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(a) => cmd_synth(cli, a),
        Command::Label(a) => cmd_label(cli, a),
        Command::Train(a) => run_experiment(&experiment_config(cli, &a.data, &a.model)?, &cli.out_dir).map(drop),
        Command::Select(a) => cmd_select(cli, a),
        Command::Explain(a) => cmd_explain(cli, a),
        Command::Run(a) => {
            if a.data.config.is_none() {
                bail!(wallscan::Error::InvalidConfig("run needs --config".into()));
            }
            run_experiment(&experiment_config(cli, &a.data, &a.model)?, &cli.out_dir).map(drop)
        }
        Command::Plot(a) => cmd_plot(a, &cli.out_dir),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<wallscan::Error>() {
        return if e.is_validation() { 1 } else { 2 };
    }
    if err.downcast_ref::<serde_json::Error>().is_some() {
        return 1;
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(j) = cli.jobs {
        if j == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
