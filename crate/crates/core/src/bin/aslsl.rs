//! Command-line front end. Every verb writes into an output directory
//! (`--out`, else `$ASLSL_OUT_DIR`, else `./aslsl-out`). Fatal errors are
//! printed to stderr as a JSON object `{"error": kind, "message": ...}` and
//! the process exits with status 1.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use aslsl::dataset::{load_dataset_with, save_dataset, LoadOptions};
use aslsl::experiment::{
    classify, default_panels, emit_reports, run_experiment, sweep_sensitivity, write_sensitivity_csv, write_trace_csv,
    Ablation, DataSource, ExperimentConfig,
};
use aslsl::graph::build_label_graph;
use aslsl::optimizer::{fit_independent_views, fit_with_options, AslslModel, FitOptions, Hyperparams};
use aslsl::ranking::{rank_features, SelectionMode};
use aslsl::simulation::{generate_synthetic, inject_missingness, split_subjects, MissingnessSpec, SyntheticSpec};
use aslsl::AslslError;

#[derive(Parser)]
#[command(
    name = "aslsl",
    version,
    about = "Feature selection for incomplete multi-view multi-label data"
)]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "ASLSL_OUT_DIR", default_value = "aslsl-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Write a synthetic dataset with planted informative features.
    Generate(GenerateArgs),
    /// Remove a fraction of instances from every view of a dataset.
    Inject(InjectArgs),
    /// Fit the model on a dataset and export model, trace, weights and ranking.
    Fit(FitArgs),
    /// Rank features of a fitted model and list the selected subset.
    Rank(RankArgs),
    /// Split, select features from a fitted model and score ML-KNN.
    Evaluate(EvaluateArgs),
    /// Run repeated trials over missing ratios and hyperparameter grids.
    Run(ExperimentArgs),
    /// Average-precision surfaces over pairs of hyperparameters.
    Sweep(ExperimentArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 300)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    views: usize,
    #[arg(long, default_value_t = 50)]
    dim: usize,
    /// Label dimensions.
    #[arg(long, default_value_t = 3)]
    labels: usize,
    #[arg(long, default_value_t = 5)]
    informative: usize,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Clone, Copy)]
struct LoadArgs {
    /// Shift rows with negative entries up to a zero minimum.
    #[arg(long)]
    shift_nonneg: bool,
    /// Min-max scale each feature row to [0, 1].
    #[arg(long)]
    standardize: bool,
}

impl LoadArgs {
    fn options(self) -> LoadOptions {
        LoadOptions {
            shift_nonneg: self.shift_nonneg,
            standardize: self.standardize,
        }
    }
}

#[derive(Args)]
struct InjectArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    ratio: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    load: LoadArgs,
}

#[derive(Args)]
struct HyperArgs {
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    #[arg(long, default_value_t = 2.0)]
    gamma: f64,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    rel_tol: f64,
    #[arg(long, default_value_t = aslsl::graph::DEFAULT_NEIGHBORS)]
    graph_q: usize,
    #[arg(long, default_value_t = aslsl::graph::DEFAULT_SIGMA)]
    graph_sigma: f64,
}

impl HyperArgs {
    fn hyper(&self) -> Hyperparams {
        Hyperparams {
            max_iters: self.max_iters,
            rel_tol: self.rel_tol,
            ..Hyperparams::with_weights(self.lambda, self.eta, self.delta, self.gamma)
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    hyper: HyperArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    disable_shared_latent: bool,
    #[arg(long)]
    disable_adaptive_weights: bool,
    #[command(flatten)]
    load: LoadArgs,
}

#[derive(Args)]
struct RankArgs {
    /// `model.json` written by `fit`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    fraction: f64,
    #[arg(long, value_enum, default_value = "pooled")]
    mode: ModeArg,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// `model.json` written by `fit`; all features are used when omitted.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    fraction: f64,
    #[arg(long, value_enum, default_value = "pooled")]
    mode: ModeArg,
    #[arg(long, default_value_t = 0.7)]
    train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = aslsl::mlknn::DEFAULT_NEIGHBORS)]
    mlknn_k: usize,
    #[arg(long, default_value_t = aslsl::mlknn::DEFAULT_SMOOTHING)]
    mlknn_s: f64,
    #[command(flatten)]
    load: LoadArgs,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ModeArg {
    Pooled,
    PerView,
}

impl From<ModeArg> for SelectionMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Pooled => SelectionMode::Pooled,
            ModeArg::PerView => SelectionMode::PerView,
        }
    }
}

/// Overrides on top of the JSON config (which itself overrides defaults).
#[derive(Args)]
struct ExperimentArgs {
    /// JSON file with any subset of the experiment settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use this dataset instead of the configured source.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    ratios: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    lambda: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    eta: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    delta: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    gamma: Option<Vec<f64>>,
    #[arg(long)]
    fraction: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    graph_q: Option<usize>,
    #[arg(long)]
    graph_sigma: Option<f64>,
    #[arg(long)]
    mlknn_k: Option<usize>,
    #[arg(long)]
    mlknn_s: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    disable_shared_latent: bool,
    #[arg(long)]
    disable_graph: bool,
    #[arg(long)]
    disable_adaptive_weights: bool,
    /// Also score ML-KNN on all features.
    #[arg(long)]
    baseline: bool,
    /// Skip convergence and ranking exports.
    #[arg(long)]
    no_traces: bool,
    #[arg(long)]
    threads: Option<usize>,
    #[command(flatten)]
    load: LoadArgs,
}

impl ExperimentArgs {
    fn config(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| AslslError::io(path, e))?;
                serde_json::from_str(&text).map_err(AslslError::from)?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(path) = &self.manifest {
            cfg.source = DataSource::Manifest {
                path: path.clone(),
                options: LoadOptions::default(),
            };
        }
        if let DataSource::Manifest { options, .. } = &mut cfg.source {
            options.shift_nonneg |= self.load.shift_nonneg;
            options.standardize |= self.load.standardize;
        }
        macro_rules! set {
            ($($field:ident = $value:expr),* $(,)?) => {
                $(if let Some(v) = $value.clone() { cfg.$field = v.into(); })*
            };
        }
        set!(
            missing_ratios = self.ratios,
            lambda = self.lambda,
            eta = self.eta,
            delta = self.delta,
            gamma = self.gamma,
            selection_fraction = self.fraction,
            selection_mode = self.mode,
            trials = self.trials,
            base_seed = self.seed,
            train_fraction = self.train_fraction,
            graph_q = self.graph_q,
            graph_sigma = self.graph_sigma,
            mlknn_neighbors = self.mlknn_k,
            mlknn_smoothing = self.mlknn_s,
            max_iters = self.max_iters,
            rel_tol = self.rel_tol,
            threads = self.threads,
        );
        cfg.ablation = Ablation {
            disable_shared_latent: cfg.ablation.disable_shared_latent || self.disable_shared_latent,
            disable_graph: cfg.ablation.disable_graph || self.disable_graph,
            disable_adaptive_weights: cfg.ablation.disable_adaptive_weights || self.disable_adaptive_weights,
        };
        cfg.include_baseline |= self.baseline;
        if self.no_traces {
            cfg.export_traces = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).map_err(|e| AslslError::io(dir, e))?;
    Ok(())
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(AslslError::from)?;
    fs::write(path, text).map_err(|e| AslslError::io(path, e))?;
    Ok(())
}

fn read_model(path: &Path) -> anyhow::Result<AslslModel> {
    let text = fs::read_to_string(path).map_err(|e| AslslError::io(path, e))?;
    Ok(serde_json::from_str(&text).map_err(AslslError::from)?)
}

fn generate(out: &Path, a: &GenerateArgs) -> anyhow::Result<()> {
    let data = generate_synthetic(&SyntheticSpec::uniform(
        a.n,
        a.views,
        a.dim,
        a.labels,
        a.informative,
        a.noise,
        a.seed,
    ))?;
    let manifest = save_dataset(&data.dataset, out)?;
    write_json(&out.join("informative.json"), &data.informative)?;
    println!("{}", manifest.display());
    Ok(())
}

fn inject(out: &Path, a: &InjectArgs) -> anyhow::Result<()> {
    let ds = load_dataset_with(&a.manifest, a.load.options())?;
    let masked = inject_missingness(
        &ds,
        MissingnessSpec {
            ratio: a.ratio,
            seed: a.seed,
        },
    )?;
    println!("{}", save_dataset(&masked, out)?.display());
    Ok(())
}

fn fit(out: &Path, a: &FitArgs) -> anyhow::Result<()> {
    let ds = load_dataset_with(&a.manifest, a.load.options())?;
    let graph = build_label_graph(ds.labels(), a.hyper.graph_q, a.hyper.graph_sigma)?;
    let hyper = a.hyper.hyper();
    let (model, traces) = if a.disable_shared_latent {
        fit_independent_views(&ds, &graph, hyper, a.seed)?
    } else {
        let options = FitOptions {
            adaptive_weights: !a.disable_adaptive_weights,
        };
        let (model, trace) = fit_with_options(&ds, &graph, hyper, a.seed, options)?;
        (model, vec![trace])
    };
    create_dir(out)?;
    write_json(&out.join("model.json"), &model)?;
    for (v, trace) in traces.iter().enumerate() {
        let name = if traces.len() == 1 {
            "convergence.csv".to_string()
        } else {
            format!("convergence_view{v}.csv")
        };
        write_trace_csv(trace, &out.join(name))?;
    }
    let alpha: String = std::iter::once("view,alpha".to_string())
        .chain(model.alpha.iter().enumerate().map(|(v, a)| format!("{v},{a:?}")))
        .map(|l| l + "\n")
        .collect();
    fs::write(out.join("alpha.csv"), alpha).map_err(|e| AslslError::io(out.join("alpha.csv"), e))?;
    rank_features(&model).write_csv(&out.join("ranking.csv"))?;
    let summary = serde_json::json!({
        "iterations": traces.iter().map(|t| t.iterations_run).max(),
        "converged": traces.iter().all(|t| t.converged),
        "objective": traces.iter().map(|t| t.objective_values.last().copied()).collect::<Vec<_>>(),
        "alpha": model.alpha.to_vec(),
    });
    println!("{summary}");
    Ok(())
}

fn rank(out: &Path, a: &RankArgs) -> anyhow::Result<()> {
    let model = read_model(&a.model)?;
    let ranking = rank_features(&model);
    create_dir(out)?;
    ranking.write_csv(&out.join("ranking.csv"))?;
    let selected = ranking.selected(a.fraction, a.mode.into())?;
    write_json(&out.join("selected.json"), &selected)?;
    println!("{}", serde_json::to_string(&selected).map_err(AslslError::from)?);
    Ok(())
}

fn evaluate(out: &Path, a: &EvaluateArgs) -> anyhow::Result<()> {
    let ds = load_dataset_with(&a.manifest, a.load.options())?;
    let (train, test) = split_subjects(&ds, a.train_fraction, a.seed)?;
    let (train, test) = match &a.model {
        Some(path) => {
            let model = read_model(path)?;
            let ranking = rank_features(&model);
            if ranking.dims() != ds.dims().as_slice() {
                anyhow::bail!(AslslError::Shape(format!(
                    "model covers view sizes {:?}, dataset has {:?}",
                    ranking.dims(),
                    ds.dims()
                )));
            }
            let selected = ranking.selected(a.fraction, a.mode.into())?;
            (train.select_features(&selected), test.select_features(&selected))
        }
        None => (train, test),
    };
    let report = classify(&train, &test, a.mlknn_k, a.mlknn_s)?;
    create_dir(out)?;
    write_json(&out.join("metrics.json"), &report)?;
    println!("{}", serde_json::to_string(&report).map_err(AslslError::from)?);
    Ok(())
}

fn run(out: &Path, a: &ExperimentArgs) -> anyhow::Result<()> {
    let cfg = a.config()?;
    let report = run_experiment(&cfg)?;
    emit_reports(&report, out)?;
    write_json(&out.join("config.json"), &cfg)?;
    log::info!(
        "{} trials, {} failures, {:.1} s",
        report.trials.len(),
        report.failures.len(),
        report.wall_clock_seconds
    );
    println!("{}", out.display());
    Ok(())
}

fn sweep(out: &Path, a: &ExperimentArgs) -> anyhow::Result<()> {
    let cfg = a.config()?;
    let rows = sweep_sensitivity(&cfg, &default_panels())?;
    create_dir(out)?;
    write_sensitivity_csv(&rows, &out.join("sensitivity.csv"))?;
    write_json(&out.join("config.json"), &cfg)?;
    println!("{}", out.display());
    Ok(())
}

/// `(kind, message)`; the message stops at the library error, whose text
/// already includes its own cause.
fn describe(err: &anyhow::Error) -> (&'static str, String) {
    match err.chain().find_map(|e| e.downcast_ref::<AslslError>()) {
        Some(inner) => (inner.kind(), format!("{err}: {inner}")),
        None => ("internal", format!("{err:#}")),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let out = cli.out.as_path();
    let result = match &cli.command {
        Verb::Generate(a) => generate(out, a),
        Verb::Inject(a) => inject(out, a),
        Verb::Fit(a) => fit(out, a),
        Verb::Rank(a) => rank(out, a),
        Verb::Evaluate(a) => evaluate(out, a),
        Verb::Run(a) => run(out, a),
        Verb::Sweep(a) => sweep(out, a),
    }
    .with_context(|| format!("aslsl {}", verb_name(&cli.command)));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (kind, message) = describe(&err);
            let body = serde_json::json!({ "error": kind, "message": message });
            eprintln!("{body}");
            ExitCode::FAILURE
        }
    }
}

fn verb_name(v: &Verb) -> &'static str {
    match v {
        Verb::Generate(_) => "generate",
        Verb::Inject(_) => "inject",
        Verb::Fit(_) => "fit",
        Verb::Rank(_) => "rank",
        Verb::Evaluate(_) => "evaluate",
        Verb::Run(_) => "run",
        Verb::Sweep(_) => "sweep",
    }
}
