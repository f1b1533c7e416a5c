//! C ABI over the `aslsl` crate.
//!
//! Datasets and models are opaque heap handles released with their `_free`
//! function. Every fallible call returns an [`AslslStatus`]; on failure the
//! message is kept per thread and can be copied out with
//! [`aslsl_last_error_message`]. Matrices cross the boundary row-major.
//! Panics are caught at the boundary and reported as
//! [`AslslStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use aslsl::dataset::{load_dataset_with, LoadOptions, MultiViewDataset};
use aslsl::experiment::{emit_reports, run_experiment, ExperimentConfig};
use aslsl::graph::build_label_graph;
use aslsl::metrics::{evaluate, MetricReport};
use aslsl::optimizer::{fit, Hyperparams};
use aslsl::ranking::rank_features;
use aslsl::simulation::{generate_synthetic, inject_missingness, MissingnessSpec, SyntheticSpec};
use aslsl::AslslError;
use ndarray::Array2;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AslslStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Manifest = 4,
    Cell = 5,
    Dimension = 6,
    NonBinaryLabel = 7,
    InstanceAbsent = 8,
    InvalidParameter = 9,
    NonFiniteObjective = 10,
    Infeasible = 11,
    Json = 12,
    Csv = 13,
    BufferTooSmall = 14,
    Panic = 15,
}

impl From<&AslslError> for AslslStatus {
    fn from(e: &AslslError) -> Self {
        match e {
            AslslError::Io { .. } => AslslStatus::Io,
            AslslError::Manifest { .. } => AslslStatus::Manifest,
            AslslError::Cell { .. } => AslslStatus::Cell,
            AslslError::FileDimension { .. } | AslslError::Shape(_) => AslslStatus::Dimension,
            AslslError::NonBinaryLabel { .. } => AslslStatus::NonBinaryLabel,
            AslslError::InstanceAbsent { .. } => AslslStatus::InstanceAbsent,
            AslslError::InvalidParameter(_) => AslslStatus::InvalidParameter,
            AslslError::NonFiniteObjective { .. } => AslslStatus::NonFiniteObjective,
            AslslError::Infeasible(_) => AslslStatus::Infeasible,
            AslslError::Json(_) => AslslStatus::Json,
            AslslError::Csv(_) => AslslStatus::Csv,
        }
    }
}

/// Opaque dataset handle.
pub struct AslslDataset {
    inner: MultiViewDataset,
}

/// Opaque fitted-model handle.
pub struct AslslModel {
    inner: aslsl::AslslModel,
    iterations: usize,
    converged: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AslslHyperparams {
    pub lambda: f64,
    pub eta: f64,
    pub delta: f64,
    pub gamma: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub epsilon_div: f64,
    pub epsilon_norm: f64,
}

impl From<AslslHyperparams> for Hyperparams {
    fn from(h: AslslHyperparams) -> Self {
        Hyperparams {
            lambda: h.lambda,
            eta: h.eta,
            delta: h.delta,
            gamma: h.gamma,
            max_iters: h.max_iters,
            rel_tol: h.rel_tol,
            epsilon_div: h.epsilon_div,
            epsilon_norm: h.epsilon_norm,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct AslslMetrics {
    pub hamming_loss: f64,
    pub ranking_loss: f64,
    pub coverage: f64,
    pub average_precision: f64,
    pub macro_f1: f64,
    pub micro_f1: f64,
}

impl From<MetricReport> for AslslMetrics {
    fn from(m: MetricReport) -> Self {
        AslslMetrics {
            hamming_loss: m.hamming_loss,
            ranking_loss: m.ranking_loss,
            coverage: m.coverage,
            average_precision: m.average_precision,
            macro_f1: m.macro_f1,
            micro_f1: m.micro_f1,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(AslslStatus, String);

impl From<AslslError> for Failure {
    fn from(e: AslslError) -> Self {
        Failure((&e).into(), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(AslslStatus::NullPointer, format!("{what} is null"))
}

/// Runs `body`, translating errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> AslslStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => AslslStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            AslslStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(AslslStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Copies the calling thread's last error message, NUL-terminated, into
/// `buf` when `len` is large enough. Returns the length the message needs
/// including the terminator, or 0 when there is no error.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn aslsl_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes_with_nul();
            if !buf.is_null() && len >= bytes.len() {
                std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, bytes.len());
            }
            bytes.len()
        }
    })
}

/// Fills `out` with the default hyperparameters.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn aslsl_hyperparams_default(out: *mut AslslHyperparams) -> AslslStatus {
    guard(|| {
        let h = Hyperparams::default();
        *out_ptr(out, "out")? = AslslHyperparams {
            lambda: h.lambda,
            eta: h.eta,
            delta: h.delta,
            gamma: h.gamma,
            max_iters: h.max_iters,
            rel_tol: h.rel_tol,
            epsilon_div: h.epsilon_div,
            epsilon_norm: h.epsilon_norm,
        };
        Ok(())
    })
}

/// Loads a dataset from a manifest file.
///
/// # Safety
/// `manifest_path` must be a NUL-terminated string; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn aslsl_dataset_load(
    manifest_path: *const c_char,
    shift_nonneg: bool,
    standardize: bool,
    out: *mut *mut AslslDataset,
) -> AslslStatus {
    guard(|| {
        let path = PathBuf::from(str_arg(manifest_path, "manifest_path")?);
        let out = out_ptr(out, "out")?;
        let inner = load_dataset_with(
            path,
            LoadOptions {
                shift_nonneg,
                standardize,
            },
        )?;
        *out = Box::into_raw(Box::new(AslslDataset { inner }));
        Ok(())
    })
}

/// Generates a synthetic dataset of `views` views with `dim` features each,
/// `informative` of them driven by the latent structure.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn aslsl_dataset_generate(
    n: usize,
    views: usize,
    dim: usize,
    n_labels: usize,
    informative: usize,
    noise_level: f64,
    seed: u64,
    out: *mut *mut AslslDataset,
) -> AslslStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let spec = SyntheticSpec::uniform(n, views, dim, n_labels, informative, noise_level, seed);
        let inner = generate_synthetic(&spec)?.dataset;
        *out = Box::into_raw(Box::new(AslslDataset { inner }));
        Ok(())
    })
}

/// New dataset with `⌊ratio · n⌋` instances removed from every view.
///
/// # Safety
/// `dataset` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn aslsl_dataset_inject_missing(
    dataset: *const AslslDataset,
    ratio: f64,
    seed: u64,
    out: *mut *mut AslslDataset,
) -> AslslStatus {
    guard(|| {
        let ds = handle(dataset, "dataset")?;
        let out = out_ptr(out, "out")?;
        let inner = inject_missingness(&ds.inner, MissingnessSpec { ratio, seed })?;
        *out = Box::into_raw(Box::new(AslslDataset { inner }));
        Ok(())
    })
}

/// # Safety
/// `dataset` must be a live handle; each out pointer null or writable.
#[no_mangle]
pub unsafe extern "C" fn aslsl_dataset_shape(
    dataset: *const AslslDataset,
    n_instances: *mut usize,
    n_views: *mut usize,
    n_labels: *mut usize,
) -> AslslStatus {
    guard(|| {
        let ds = &handle(dataset, "dataset")?.inner;
        if let Some(p) = n_instances.as_mut() {
            *p = ds.n_instances();
        }
        if let Some(p) = n_views.as_mut() {
            *p = ds.n_views();
        }
        if let Some(p) = n_labels.as_mut() {
            *p = ds.n_labels();
        }
        Ok(())
    })
}

/// # Safety
/// `dataset` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn aslsl_dataset_free(dataset: *mut AslslDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Builds the label graph (`graph_q` neighbors, width `graph_sigma`) and
/// fits the model.
///
/// # Safety
/// `dataset` must be a live handle, `hyper` readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn aslsl_fit(
    dataset: *const AslslDataset,
    hyper: *const AslslHyperparams,
    graph_q: usize,
    graph_sigma: f64,
    seed: u64,
    out: *mut *mut AslslModel,
) -> AslslStatus {
    guard(|| {
        let ds = &handle(dataset, "dataset")?.inner;
        let hyper = *handle(hyper, "hyper")?;
        let out = out_ptr(out, "out")?;
        let graph = build_label_graph(ds.labels(), graph_q, graph_sigma)?;
        let (inner, trace) = fit(ds, &graph, hyper.into(), seed)?;
        *out = Box::into_raw(Box::new(AslslModel {
            inner,
            iterations: trace.iterations_run,
            converged: trace.converged,
        }));
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle; out pointers null or writable.
#[no_mangle]
pub unsafe extern "C" fn aslsl_model_info(
    model: *const AslslModel,
    n_views: *mut usize,
    total_features: *mut usize,
    iterations: *mut usize,
    converged: *mut bool,
) -> AslslStatus {
    guard(|| {
        let m = handle(model, "model")?;
        if let Some(p) = n_views.as_mut() {
            *p = m.inner.n_views();
        }
        if let Some(p) = total_features.as_mut() {
            *p = m.inner.q.iter().map(|q| q.nrows()).sum();
        }
        if let Some(p) = iterations.as_mut() {
            *p = m.iterations;
        }
        if let Some(p) = converged.as_mut() {
            *p = m.converged;
        }
        Ok(())
    })
}

/// Copies the view weights into `alpha` (length `len ≥ n_views`).
///
/// # Safety
/// `model` must be a live handle; `alpha` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn aslsl_model_alpha(model: *const AslslModel, alpha: *mut f64, len: usize) -> AslslStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let a = &m.inner.alpha;
        if len < a.len() {
            return Err(Failure(
                AslslStatus::BufferTooSmall,
                format!("need {} weights, buffer holds {len}", a.len()),
            ));
        }
        if alpha.is_null() {
            return Err(null("alpha"));
        }
        std::slice::from_raw_parts_mut(alpha, a.len()).copy_from_slice(a.as_slice().expect("contiguous"));
        Ok(())
    })
}

/// Writes the feature ranking best first: entry `i` is feature
/// `features[i]` of view `views[i]` with score `scores[i]`. All three
/// buffers must hold at least the model's total feature count.
///
/// # Safety
/// `model` must be a live handle; each buffer must point to `len` writable
/// elements.
#[no_mangle]
pub unsafe extern "C" fn aslsl_model_ranking(
    model: *const AslslModel,
    views: *mut usize,
    features: *mut usize,
    scores: *mut f64,
    len: usize,
) -> AslslStatus {
    guard(|| {
        let ranking = rank_features(&handle(model, "model")?.inner);
        let total = ranking.total_features();
        if len < total {
            return Err(Failure(
                AslslStatus::BufferTooSmall,
                format!("need {total} entries, buffers hold {len}"),
            ));
        }
        if views.is_null() || features.is_null() || scores.is_null() {
            return Err(null("ranking buffer"));
        }
        let (v, f, s) = (
            std::slice::from_raw_parts_mut(views, total),
            std::slice::from_raw_parts_mut(features, total),
            std::slice::from_raw_parts_mut(scores, total),
        );
        for (i, e) in ranking.ordered().enumerate() {
            v[i] = e.view;
            f[i] = e.feature;
            s[i] = e.score;
        }
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn aslsl_model_free(model: *mut AslslModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Six multi-label metrics. `predictions`, `confidences` and `truth` are
/// row-major `n_labels × n_instances`.
///
/// # Safety
/// Each matrix must point to `n_labels * n_instances` readable doubles;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aslsl_metrics(
    predictions: *const f64,
    confidences: *const f64,
    truth: *const f64,
    n_labels: usize,
    n_instances: usize,
    out: *mut AslslMetrics,
) -> AslslStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let len = n_labels
            .checked_mul(n_instances)
            .ok_or_else(|| Failure(AslslStatus::Dimension, "matrix size overflows".into()))?;
        let view = |p: *const f64, what: &str| -> Result<Array2<f64>, Failure> {
            if p.is_null() {
                return Err(null(what));
            }
            let data = std::slice::from_raw_parts(p, len).to_vec();
            Ok(Array2::from_shape_vec((n_labels, n_instances), data).expect("length checked"))
        };
        let report = evaluate(
            &view(predictions, "predictions")?,
            &view(confidences, "confidences")?,
            &view(truth, "truth")?,
        )?;
        *out = report.into();
        Ok(())
    })
}

/// Runs an experiment described by a JSON config (any subset of the
/// settings; the rest take their defaults). When `out_dir` is non-null the
/// report files are written there. `*out_json` receives the report as JSON,
/// to be released with [`aslsl_string_free`].
///
/// # Safety
/// `config_json` must be a NUL-terminated string, `out_dir` null or one,
/// `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn aslsl_run_experiment_json(
    config_json: *const c_char,
    out_dir: *const c_char,
    out_json: *mut *mut c_char,
) -> AslslStatus {
    guard(|| {
        let text = str_arg(config_json, "config_json")?;
        let dir = if out_dir.is_null() {
            None
        } else {
            Some(PathBuf::from(str_arg(out_dir, "out_dir")?))
        };
        let out = out_ptr(out_json, "out_json")?;
        let config: ExperimentConfig = serde_json::from_str(text).map_err(AslslError::from)?;
        let report = run_experiment(&config)?;
        if let Some(dir) = dir {
            emit_reports(&report, dir)?;
        }
        let json = serde_json::to_string(&report).map_err(AslslError::from)?;
        *out = CString::new(json).expect("JSON has no NUL").into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn aslsl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
