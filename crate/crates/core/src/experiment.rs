//! Repeated-trial experiment runner.
//!
//! A run expands the configured missing ratios and hyperparameter grids into
//! cells and executes `trials` independent trials per cell:
//! inject missingness → split → label graph → fit → rank → select →
//! ML-KNN → metrics. Trial `t` uses seed `base_seed + t`; the injection,
//! split and initialization draw from separate streams derived from it.
//! Trials run in parallel and results are merged in (cell, trial) order, so
//! the report does not depend on scheduling.
//!
//! A failing trial is recorded in the report's failure list and the sweep
//! carries on.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{load_dataset_with, LoadOptions, MultiViewDataset};
use crate::error::{AslslError, Result};
use crate::graph::{build_label_graph, DEFAULT_NEIGHBORS, DEFAULT_SIGMA};
use crate::metrics::{evaluate, MetricReport};
use crate::mlknn::{predict_mlknn, train_mlknn, DEFAULT_SMOOTHING};
use crate::optimizer::{fit_independent_views, fit_with_options, ConvergenceTrace, FitOptions, Hyperparams};
use crate::ranking::{rank_features, FeatureRanking, SelectionMode};
use crate::simulation::{generate_synthetic, inject_missingness, split_subjects, MissingnessSpec, SyntheticSpec};

/// `10⁻³, 10⁻², …, 10³`.
pub fn weight_grid() -> Vec<f64> {
    vec![1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3]
}

/// `{2, 3, …, 9}`.
pub fn gamma_grid() -> Vec<f64> {
    (2..=9).map(f64::from).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DataSource {
    Manifest {
        path: PathBuf,
        #[serde(default)]
        options: LoadOptions,
    },
    Synthetic(SyntheticSpec),
}

impl DataSource {
    pub fn load(&self) -> Result<MultiViewDataset> {
        match self {
            DataSource::Manifest { path, options } => load_dataset_with(path, *options),
            DataSource::Synthetic(spec) => Ok(generate_synthetic(spec)?.dataset),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Ablation {
    /// Fit each view with its own latent structure.
    pub disable_shared_latent: bool,
    /// Force η = 0.
    pub disable_graph: bool,
    /// Keep α at its uniform start.
    pub disable_adaptive_weights: bool,
}

impl Ablation {
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.disable_shared_latent {
            parts.push("no_shared_latent");
        }
        if self.disable_graph {
            parts.push("no_graph");
        }
        if self.disable_adaptive_weights {
            parts.push("no_adaptive_weights");
        }
        if parts.is_empty() {
            "full".to_string()
        } else {
            parts.join("+")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub missing_ratios: Vec<f64>,
    pub lambda: Vec<f64>,
    pub eta: Vec<f64>,
    pub delta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub selection_fraction: f64,
    pub selection_mode: SelectionMode,
    pub trials: usize,
    pub base_seed: u64,
    pub train_fraction: f64,
    pub graph_q: usize,
    pub graph_sigma: f64,
    pub mlknn_neighbors: usize,
    pub mlknn_smoothing: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub ablation: Ablation,
    /// Also score ML-KNN on all features without selection.
    pub include_baseline: bool,
    /// Keep convergence traces and rankings in the report.
    pub export_traces: bool,
    /// Worker threads; 0 uses rayon's default.
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            source: DataSource::Synthetic(SyntheticSpec::uniform(300, 3, 50, 3, 5, 0.1, 0)),
            missing_ratios: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            lambda: weight_grid(),
            eta: weight_grid(),
            delta: weight_grid(),
            gamma: gamma_grid(),
            selection_fraction: 0.1,
            selection_mode: SelectionMode::Pooled,
            trials: 50,
            base_seed: 0,
            train_fraction: 0.7,
            graph_q: DEFAULT_NEIGHBORS,
            graph_sigma: DEFAULT_SIGMA,
            mlknn_neighbors: crate::mlknn::DEFAULT_NEIGHBORS,
            mlknn_smoothing: DEFAULT_SMOOTHING,
            max_iters: 500,
            rel_tol: 1e-6,
            ablation: Ablation::default(),
            include_baseline: false,
            export_traces: true,
            threads: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(AslslError::InvalidParameter(m.to_string()));
        if self.missing_ratios.is_empty()
            || self.lambda.is_empty()
            || self.eta.is_empty()
            || self.delta.is_empty()
            || self.gamma.is_empty()
        {
            return bad("missing ratio and hyperparameter grids must be non-empty");
        }
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if !(self.selection_fraction > 0.0 && self.selection_fraction <= 1.0) {
            return bad("selection fraction must lie in (0, 1]");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad("train fraction must lie in (0, 1)");
        }
        for combo in self.cells_for_ratio(0.0) {
            self.hyperparams(&combo).validate()?;
        }
        Ok(())
    }

    fn cells_for_ratio(&self, ratio: f64) -> Vec<Cell> {
        let mut out = Vec::new();
        for &lambda in &self.lambda {
            for &eta in &self.eta {
                for &delta in &self.delta {
                    for &gamma in &self.gamma {
                        out.push(Cell {
                            ratio,
                            lambda,
                            eta,
                            delta,
                            gamma,
                        });
                    }
                }
            }
        }
        out
    }

    /// Every (ratio × λ × η × δ × γ) combination, ratio outermost.
    pub fn cells(&self) -> Vec<Cell> {
        self.missing_ratios
            .iter()
            .flat_map(|&r| self.cells_for_ratio(r))
            .collect()
    }

    fn hyperparams(&self, cell: &Cell) -> Hyperparams {
        Hyperparams {
            lambda: cell.lambda,
            eta: if self.ablation.disable_graph { 0.0 } else { cell.eta },
            delta: cell.delta,
            gamma: cell.gamma,
            max_iters: self.max_iters,
            rel_tol: self.rel_tol,
            ..Hyperparams::default()
        }
    }
}

/// One point of the experiment grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub ratio: f64,
    pub lambda: f64,
    pub eta: f64,
    pub delta: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub prepare: f64,
    pub graph: f64,
    pub fit: f64,
    pub rank: f64,
    pub classify: f64,
}

impl StageTimings {
    fn add(&mut self, other: &StageTimings) {
        self.prepare += other.prepare;
        self.graph += other.graph;
        self.fit += other.fit;
        self.rank += other.rank;
        self.classify += other.classify;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub cell_index: usize,
    pub cell: Cell,
    pub trial: usize,
    pub seed: u64,
    pub metrics: MetricReport,
    pub baseline: Option<MetricReport>,
    pub alpha: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub zero_cost_iterations: usize,
    pub selected_features: usize,
    /// One trace for the shared fit, one per view when the shared latent
    /// structure is ablated.
    pub traces: Vec<ConvergenceTrace>,
    pub ranking: Option<FeatureRanking>,
    #[serde(skip)]
    pub timings: StageTimings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub cell_index: usize,
    pub cell: Cell,
    pub trial: usize,
    pub seed: u64,
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub cell_index: usize,
    pub ratio: f64,
    pub lambda: f64,
    pub eta: f64,
    pub delta: f64,
    pub gamma: f64,
    pub variant: String,
    pub metric: String,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single trial.
    pub std: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub cells: Vec<Cell>,
    pub n_labels: usize,
    pub ablation: Ablation,
    pub trials: Vec<TrialRecord>,
    pub failures: Vec<TrialFailure>,
    pub aggregates: Vec<AggregateRow>,
    #[serde(skip)]
    pub timings: StageTimings,
    #[serde(skip)]
    pub wall_clock_seconds: f64,
}

impl ExperimentReport {
    pub fn empty() -> Self {
        ExperimentReport {
            cells: Vec::new(),
            n_labels: 0,
            ablation: Ablation::default(),
            trials: Vec::new(),
            failures: Vec::new(),
            aggregates: Vec::new(),
            timings: StageTimings::default(),
            wall_clock_seconds: 0.0,
        }
    }

    /// Metric rows in long format: `(trial record, variant, metric, value)`.
    fn metric_rows(&self) -> Vec<(&TrialRecord, &'static str, &'static str, f64)> {
        let mut rows = Vec::new();
        for t in &self.trials {
            let variants = std::iter::once(("method", &t.metrics)).chain(t.baseline.as_ref().map(|b| ("baseline", b)));
            for (variant, report) in variants {
                for (name, value) in MetricReport::NAMES.iter().zip(report.values()) {
                    rows.push((t, variant, *name, value));
                }
                rows.push((
                    t,
                    variant,
                    "coverage_normalized",
                    report.coverage_normalized(self.n_labels),
                ));
            }
        }
        rows
    }

    fn compute_aggregates(&mut self) {
        let mut groups: BTreeMap<(usize, &'static str, &'static str), Vec<f64>> = BTreeMap::new();
        let mut order = Vec::new();
        for (t, variant, metric, value) in self.metric_rows() {
            let key = (t.cell_index, variant, metric);
            groups.entry(key).or_insert_with(|| {
                order.push(key);
                Vec::new()
            });
            groups.get_mut(&key).expect("inserted").push(value);
        }
        order.sort_by_key(|&(c, v, _)| (c, v != "method"));
        let mut rows = Vec::with_capacity(order.len());
        for key in order {
            let values = &groups[&key];
            let (mean, std) = mean_std(values);
            let cell = self.cells[key.0];
            rows.push(AggregateRow {
                cell_index: key.0,
                ratio: cell.ratio,
                lambda: cell.lambda,
                eta: cell.eta,
                delta: cell.delta,
                gamma: cell.gamma,
                variant: key.1.to_string(),
                metric: key.2.to_string(),
                mean,
                std,
                count: values.len(),
            });
        }
        self.aggregates = rows;
    }

    pub fn aggregate(&self, cell_index: usize, variant: &str, metric: &str) -> Option<&AggregateRow> {
        self.aggregates
            .iter()
            .find(|r| r.cell_index == cell_index && r.variant == variant && r.metric == metric)
    }
}

/// Arithmetic mean and sample standard deviation, summed in input order.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent seed for a named stream of a trial.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream))
}

const STREAM_MISSING: u64 = 1;
const STREAM_SPLIT: u64 = 2;
const STREAM_INIT: u64 = 3;

/// Scores ML-KNN trained on `train` and evaluated on `test`, with all
/// views concatenated.
pub fn classify(
    train: &MultiViewDataset,
    test: &MultiViewDataset,
    neighbors: usize,
    smoothing: f64,
) -> Result<MetricReport> {
    let model = train_mlknn(&train.concatenated_features(), train.labels(), neighbors, smoothing)?;
    let pred = predict_mlknn(&model, &test.concatenated_features())?;
    evaluate(&pred.labels, &pred.confidences, test.labels().as_array())
}

fn run_trial(
    dataset: &MultiViewDataset,
    config: &ExperimentConfig,
    cell_index: usize,
    cell: Cell,
    trial: usize,
) -> std::result::Result<TrialRecord, TrialFailure> {
    let seed = config.base_seed.wrapping_add(trial as u64);
    let fail = |e: AslslError| TrialFailure {
        cell_index,
        cell,
        trial,
        seed,
        kind: e.kind().to_string(),
        message: e.to_string(),
    };
    let mut timings = StageTimings::default();

    let clock = Instant::now();
    let masked = inject_missingness(
        dataset,
        MissingnessSpec {
            ratio: cell.ratio,
            seed: derive_seed(seed, STREAM_MISSING),
        },
    )
    .map_err(fail)?;
    let (train, test) =
        split_subjects(&masked, config.train_fraction, derive_seed(seed, STREAM_SPLIT)).map_err(fail)?;
    timings.prepare = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let graph = build_label_graph(train.labels(), config.graph_q, config.graph_sigma).map_err(fail)?;
    timings.graph = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let hyper = config.hyperparams(&cell);
    let init_seed = derive_seed(seed, STREAM_INIT);
    let (model, traces) = if config.ablation.disable_shared_latent {
        fit_independent_views(&train, &graph, hyper, init_seed).map_err(fail)?
    } else {
        let options = FitOptions {
            adaptive_weights: !config.ablation.disable_adaptive_weights,
        };
        let (model, trace) = fit_with_options(&train, &graph, hyper, init_seed, options).map_err(fail)?;
        (model, vec![trace])
    };
    timings.fit = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let ranking = rank_features(&model);
    let selected = ranking
        .selected(config.selection_fraction, config.selection_mode)
        .map_err(fail)?;
    timings.rank = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let metrics = classify(
        &train.select_features(&selected),
        &test.select_features(&selected),
        config.mlknn_neighbors,
        config.mlknn_smoothing,
    )
    .map_err(fail)?;
    let baseline = if config.include_baseline {
        Some(classify(&train, &test, config.mlknn_neighbors, config.mlknn_smoothing).map_err(fail)?)
    } else {
        None
    };
    timings.classify = clock.elapsed().as_secs_f64();

    Ok(TrialRecord {
        cell_index,
        cell,
        trial,
        seed,
        metrics,
        baseline,
        alpha: model.alpha.to_vec(),
        iterations: traces.iter().map(|t| t.iterations_run).max().unwrap_or(0),
        converged: traces.iter().all(|t| t.converged),
        zero_cost_iterations: traces.iter().map(|t| t.zero_cost_iterations.len()).sum(),
        selected_features: selected.iter().map(Vec::len).sum(),
        traces: if config.export_traces { traces } else { Vec::new() },
        ranking: config.export_traces.then_some(ranking),
        timings,
    })
}

/// Runs the given cells of an experiment.
pub fn run_cells(config: &ExperimentConfig, cells: Vec<Cell>) -> Result<ExperimentReport> {
    config.validate()?;
    let started = Instant::now();
    let dataset = config.source.load()?;
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..config.trials).map(move |t| (c, t)))
        .collect();
    let work = || {
        jobs.par_iter()
            .map(|&(c, t)| run_trial(&dataset, config, c, cells[c], t))
            .collect::<Vec<_>>()
    };
    let outcomes = if config.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| AslslError::InvalidParameter(e.to_string()))?
            .install(work)
    } else {
        work()
    };

    let mut report = ExperimentReport {
        cells,
        n_labels: dataset.n_labels(),
        ablation: config.ablation,
        ..ExperimentReport::empty()
    };
    for outcome in outcomes {
        match outcome {
            Ok(record) => {
                report.timings.add(&record.timings);
                report.trials.push(record);
            }
            Err(failure) => {
                log::warn!(
                    "cell {} trial {} failed: {}",
                    failure.cell_index,
                    failure.trial,
                    failure.message
                );
                report.failures.push(failure);
            }
        }
    }
    report.compute_aggregates();
    report.wall_clock_seconds = started.elapsed().as_secs_f64();
    Ok(report)
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    run_cells(config, config.cells())
}

fn csv_header(path: &Path, header: &str) -> Result<fs::File> {
    use std::io::Write;
    let mut f = fs::File::create(path).map_err(|e| AslslError::io(path, e))?;
    writeln!(f, "{header}").map_err(|e| AslslError::io(path, e))?;
    Ok(f)
}

fn write_all(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| AslslError::io(path, e))
}

/// Writes the report files into `out_dir`:
///
/// - `cells.csv`: `cell,ratio,lambda,eta,delta,gamma`
/// - `metrics.csv`: `cell,ratio,lambda,eta,delta,gamma,trial,seed,variant,metric,value`
/// - `aggregate.json`: list of [`AggregateRow`]
/// - `trials.csv`: `cell,trial,seed,iterations,converged,zero_cost_iterations,selected_features`
/// - `alpha.csv`: `cell,trial,view,alpha`
/// - `convergence/cell{c}_trial{t}.csv`: `iteration,objective,residual_0..,alpha_0..`
///   (suffixed `_view{v}` when views were fitted separately)
/// - `ranking/cell{c}_trial{t}.csv`: `rank,view,feature_index,score`
/// - `errors.json`: list of [`TrialFailure`]
/// - `metadata.json`: timestamps and wall-clock per stage; the only file
///   that differs between identical runs
pub fn emit_reports(report: &ExperimentReport, out_dir: impl AsRef<Path>) -> Result<()> {
    use std::io::Write;
    let out = out_dir.as_ref();
    let conv_dir = out.join("convergence");
    let rank_dir = out.join("ranking");
    for d in [out, conv_dir.as_path(), rank_dir.as_path()] {
        fs::create_dir_all(d).map_err(|e| AslslError::io(d, e))?;
    }

    let mut body = String::from("cell,ratio,lambda,eta,delta,gamma\n");
    for (i, c) in report.cells.iter().enumerate() {
        body.push_str(&format!(
            "{i},{:?},{:?},{:?},{:?},{:?}\n",
            c.ratio, c.lambda, c.eta, c.delta, c.gamma
        ));
    }
    write_all(&out.join("cells.csv"), &body)?;

    let mut body = String::from("cell,ratio,lambda,eta,delta,gamma,trial,seed,variant,metric,value\n");
    for (t, variant, metric, value) in report.metric_rows() {
        let c = t.cell;
        body.push_str(&format!(
            "{},{:?},{:?},{:?},{:?},{:?},{},{},{variant},{metric},{value:?}\n",
            t.cell_index, c.ratio, c.lambda, c.eta, c.delta, c.gamma, t.trial, t.seed
        ));
    }
    write_all(&out.join("metrics.csv"), &body)?;

    write_all(
        &out.join("aggregate.json"),
        &serde_json::to_string_pretty(&report.aggregates)?,
    )?;
    write_all(
        &out.join("errors.json"),
        &serde_json::to_string_pretty(&report.failures)?,
    )?;

    let mut body = String::from("cell,trial,seed,iterations,converged,zero_cost_iterations,selected_features\n");
    for t in &report.trials {
        body.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            t.cell_index, t.trial, t.seed, t.iterations, t.converged, t.zero_cost_iterations, t.selected_features
        ));
    }
    write_all(&out.join("trials.csv"), &body)?;

    let mut body = String::from("cell,trial,view,alpha\n");
    for t in &report.trials {
        for (v, a) in t.alpha.iter().enumerate() {
            body.push_str(&format!("{},{},{v},{a:?}\n", t.cell_index, t.trial));
        }
    }
    write_all(&out.join("alpha.csv"), &body)?;

    for t in &report.trials {
        let stem = format!("cell{}_trial{}", t.cell_index, t.trial);
        for (v, trace) in t.traces.iter().enumerate() {
            let name = if t.traces.len() == 1 {
                format!("{stem}.csv")
            } else {
                format!("{stem}_view{v}.csv")
            };
            write_trace_csv(trace, &conv_dir.join(name))?;
        }
        if let Some(ranking) = &t.ranking {
            ranking.write_csv(&rank_dir.join(format!("{stem}.csv")))?;
        }
    }

    let now = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0);
    let metadata = serde_json::json!({
        "written_at_unix": now,
        "wall_clock_seconds": report.wall_clock_seconds,
        "stage_seconds_total": report.timings,
        "trials": report.trials.len(),
        "failures": report.failures.len(),
    });
    let path = out.join("metadata.json");
    let mut f = fs::File::create(&path).map_err(|e| AslslError::io(&path, e))?;
    f.write_all(serde_json::to_string_pretty(&metadata)?.as_bytes())
        .map_err(|e| AslslError::io(&path, e))?;
    Ok(())
}

/// `iteration,objective,residual_0..residual_{m-1},alpha_0..alpha_{m-1}`,
/// one row per sweep.
pub fn write_trace_csv(trace: &ConvergenceTrace, path: &Path) -> Result<()> {
    use std::io::Write;
    let views = trace.per_view_residuals.first().map(Vec::len).unwrap_or(0);
    let mut header = vec!["iteration".to_string(), "objective".to_string()];
    header.extend((0..views).map(|v| format!("residual_{v}")));
    header.extend((0..views).map(|v| format!("alpha_{v}")));
    let mut f = csv_header(path, &header.join(","))?;
    let mut body = String::new();
    for (i, obj) in trace.objective_values.iter().enumerate() {
        body.push_str(&format!("{},{obj:?}", i + 1));
        for r in &trace.per_view_residuals[i] {
            body.push_str(&format!(",{r:?}"));
        }
        for a in &trace.alpha_history[i] {
            body.push_str(&format!(",{a:?}"));
        }
        body.push('\n');
    }
    f.write_all(body.as_bytes()).map_err(|e| AslslError::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    Lambda,
    Eta,
    Delta,
    Gamma,
}

impl Param {
    pub fn name(self) -> &'static str {
        match self {
            Param::Lambda => "lambda",
            Param::Eta => "eta",
            Param::Delta => "delta",
            Param::Gamma => "gamma",
        }
    }
}

/// A two-parameter surface: `x` and `y` range over their configured grids,
/// every other parameter is held at its value in `fixed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityPanel {
    pub name: String,
    pub x: Param,
    pub y: Param,
    pub fixed: BTreeMap<Param, f64>,
}

/// Default panels: each of λ, η, δ held at 0.1 with γ = 2 while the other
/// two vary, plus a γ panel varying γ against λ with η = δ = 0.1.
pub fn default_panels() -> Vec<SensitivityPanel> {
    let fixed = |pairs: &[(Param, f64)]| pairs.iter().copied().collect::<BTreeMap<_, _>>();
    vec![
        SensitivityPanel {
            name: "gamma".into(),
            x: Param::Gamma,
            y: Param::Lambda,
            fixed: fixed(&[(Param::Eta, 0.1), (Param::Delta, 0.1)]),
        },
        SensitivityPanel {
            name: "eta".into(),
            x: Param::Lambda,
            y: Param::Delta,
            fixed: fixed(&[(Param::Eta, 0.1), (Param::Gamma, 2.0)]),
        },
        SensitivityPanel {
            name: "lambda".into(),
            x: Param::Eta,
            y: Param::Delta,
            fixed: fixed(&[(Param::Lambda, 0.1), (Param::Gamma, 2.0)]),
        },
        SensitivityPanel {
            name: "delta".into(),
            x: Param::Lambda,
            y: Param::Eta,
            fixed: fixed(&[(Param::Delta, 0.1), (Param::Gamma, 2.0)]),
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub panel: String,
    pub x_param: Param,
    pub x_index: usize,
    pub y_param: Param,
    pub y_index: usize,
    pub ratio: f64,
    pub lambda: f64,
    pub eta: f64,
    pub delta: f64,
    pub gamma: f64,
    pub ap_mean: f64,
    pub ap_std: f64,
    pub trials: usize,
}

fn grid_for(config: &ExperimentConfig, p: Param) -> &[f64] {
    match p {
        Param::Lambda => &config.lambda,
        Param::Eta => &config.eta,
        Param::Delta => &config.delta,
        Param::Gamma => &config.gamma,
    }
}

/// Average-precision surfaces, one row per (panel, ratio, x, y) grid point.
pub fn sweep_sensitivity(config: &ExperimentConfig, panels: &[SensitivityPanel]) -> Result<Vec<SensitivityRow>> {
    let mut cells = Vec::new();
    let mut tags = Vec::new();
    for panel in panels {
        if panel.x == panel.y {
            return Err(AslslError::InvalidParameter(format!(
                "panel {} varies {} twice",
                panel.name,
                panel.x.name()
            )));
        }
        for p in [Param::Lambda, Param::Eta, Param::Delta, Param::Gamma] {
            if p != panel.x && p != panel.y && !panel.fixed.contains_key(&p) {
                return Err(AslslError::InvalidParameter(format!(
                    "panel {} leaves {} neither varied nor fixed",
                    panel.name,
                    p.name()
                )));
            }
        }
        for &ratio in &config.missing_ratios {
            for (xi, &xv) in grid_for(config, panel.x).iter().enumerate() {
                for (yi, &yv) in grid_for(config, panel.y).iter().enumerate() {
                    let value = |p: Param| {
                        if p == panel.x {
                            xv
                        } else if p == panel.y {
                            yv
                        } else {
                            panel.fixed[&p]
                        }
                    };
                    cells.push(Cell {
                        ratio,
                        lambda: value(Param::Lambda),
                        eta: value(Param::Eta),
                        delta: value(Param::Delta),
                        gamma: value(Param::Gamma),
                    });
                    tags.push((panel, xi, yi));
                }
            }
        }
    }
    let mut cfg = config.clone();
    cfg.export_traces = false;
    let report = run_cells(&cfg, cells)?;
    Ok(tags
        .into_iter()
        .enumerate()
        .map(|(i, (panel, xi, yi))| {
            let cell = report.cells[i];
            let (ap_mean, ap_std, trials) = report
                .aggregate(i, "method", "average_precision")
                .map(|r| (r.mean, r.std, r.count))
                .unwrap_or((f64::NAN, f64::NAN, 0));
            SensitivityRow {
                panel: panel.name.clone(),
                x_param: panel.x,
                x_index: xi,
                y_param: panel.y,
                y_index: yi,
                ratio: cell.ratio,
                lambda: cell.lambda,
                eta: cell.eta,
                delta: cell.delta,
                gamma: cell.gamma,
                ap_mean,
                ap_std,
                trials,
            }
        })
        .collect())
}

/// `sensitivity.csv` with one row per [`SensitivityRow`].
pub fn write_sensitivity_csv(rows: &[SensitivityRow], path: &Path) -> Result<()> {
    use std::io::Write;
    let mut f = csv_header(
        path,
        "panel,x_param,x_index,y_param,y_index,ratio,lambda,eta,delta,gamma,ap_mean,ap_std,trials",
    )?;
    let mut body = String::new();
    for r in rows {
        body.push_str(&format!(
            "{},{},{},{},{},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{}\n",
            r.panel,
            r.x_param.name(),
            r.x_index,
            r.y_param.name(),
            r.y_index,
            r.ratio,
            r.lambda,
            r.eta,
            r.delta,
            r.gamma,
            r.ap_mean,
            r.ap_std,
            r.trials
        ));
    }
    f.write_all(body.as_bytes()).map_err(|e| AslslError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            source: DataSource::Synthetic(SyntheticSpec::uniform(60, 2, 10, 2, 3, 0.1, 1)),
            missing_ratios: vec![0.2],
            lambda: vec![1.0],
            eta: vec![1.0],
            delta: vec![1.0],
            gamma: vec![2.0],
            trials: 1,
            max_iters: 50,
            mlknn_neighbors: 5,
            ..Default::default()
        }
    }

    #[test]
    fn single_cell_single_trial() {
        let report = run_experiment(&small_config()).unwrap();
        assert_eq!(report.trials.len(), 1);
        assert!(report.failures.is_empty());
        let ap = report.aggregate(0, "method", "average_precision").unwrap();
        assert_eq!(ap.count, 1);
        assert_eq!(ap.mean, report.trials[0].metrics.average_precision);
    }

    #[test]
    fn failing_cells_are_recorded_not_fatal() {
        let mut cfg = small_config();
        // A single view cannot lose 20% of instances and keep coverage.
        cfg.source = DataSource::Synthetic(SyntheticSpec::uniform(60, 1, 10, 2, 3, 0.1, 1));
        cfg.missing_ratios = vec![0.0, 0.2];
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.trials.len(), 1);
        assert_eq!(report.failures.len(), 1);
        assert_eq!(report.failures[0].kind, "infeasible");
    }

    #[test]
    fn config_validation() {
        let mut cfg = small_config();
        cfg.trials = 0;
        assert!(run_experiment(&cfg).is_err());
        let mut cfg = small_config();
        cfg.gamma = vec![1.0];
        assert!(cfg.validate().is_err());
        let mut cfg = small_config();
        cfg.lambda.clear();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn mean_std_basics() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn derived_seeds_differ_by_stream() {
        assert_ne!(derive_seed(5, STREAM_MISSING), derive_seed(5, STREAM_SPLIT));
        assert_eq!(derive_seed(5, STREAM_INIT), derive_seed(5, STREAM_INIT));
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = small_config();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let partial: ExperimentConfig = serde_json::from_str(r#"{"trials": 3}"#).unwrap();
        assert_eq!(partial.trials, 3);
        assert_eq!(partial.gamma, gamma_grid());
    }
}
