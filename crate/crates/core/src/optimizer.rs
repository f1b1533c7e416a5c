//! Alternating multiplicative-update solver for the shared latent structure
//! objective
//!
//! ```text
//! Σ_v (α_v)^γ [ ‖(X_v − Q_v Uᵀ) S_v‖²_F + λ ‖Y − M Uᵀ‖²_F + η Tr(Uᵀ L U) + δ ‖Q_v‖_{2,1} ]
//! ```
//!
//! subject to `Q_v, U, M ≥ 0` and `α` on the probability simplex. Each sweep
//! updates `Q`, then `U`, then `M`, then `α`.
//!
//! The Laplacian is split as `L = G − S` so that the `U` update keeps a
//! non-negative numerator and denominator. The λ and η terms sit inside the
//! weighted sum over views, so in the `U` update they carry `Σ_v (α_v)^γ`.

use ndarray::{Array1, Array2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::MultiViewDataset;
use crate::error::{AslslError, Result};
use crate::graph::LabelGraph;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Label reconstruction weight.
    pub lambda: f64,
    /// Graph manifold weight.
    pub eta: f64,
    /// Row-sparsity (l2,1) weight on each `Q_v`.
    pub delta: f64,
    /// Exponent on the view weights; must exceed 1.
    pub gamma: f64,
    pub max_iters: usize,
    /// Stop once the relative objective change drops below this.
    pub rel_tol: f64,
    /// Added to every multiplicative-update denominator.
    pub epsilon_div: f64,
    /// Smoothing inside the reweighting `1 / (2 sqrt(‖q_i‖² + ε))`.
    pub epsilon_norm: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            lambda: 1.0,
            eta: 1.0,
            delta: 1.0,
            gamma: 2.0,
            max_iters: 500,
            rel_tol: 1e-6,
            epsilon_div: 1e-12,
            epsilon_norm: 1e-12,
        }
    }
}

impl Hyperparams {
    pub fn with_weights(lambda: f64, eta: f64, delta: f64, gamma: f64) -> Self {
        Hyperparams {
            lambda,
            eta,
            delta,
            gamma,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(AslslError::InvalidParameter(format!(
                    "{name} must be finite and non-negative, got {v}"
                )))
            }
        };
        nonneg("lambda", self.lambda)?;
        nonneg("eta", self.eta)?;
        nonneg("delta", self.delta)?;
        if !self.gamma.is_finite() || self.gamma <= 1.0 {
            return Err(AslslError::InvalidParameter(format!(
                "gamma must be finite and strictly greater than 1, got {}",
                self.gamma
            )));
        }
        if self.max_iters == 0 {
            return Err(AslslError::InvalidParameter("max_iters must be at least 1".into()));
        }
        for (name, v) in [
            ("rel_tol", self.rel_tol),
            ("epsilon_div", self.epsilon_div),
            ("epsilon_norm", self.epsilon_norm),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(AslslError::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Solver switches used by ablation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitOptions {
    /// When false, `α` stays at its uniform initial value.
    pub adaptive_weights: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { adaptive_weights: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AslslModel {
    /// Per-view projections, `d_v × k`.
    pub q: Vec<Array2<f64>>,
    /// Shared latent structure, `n × k`.
    pub u: Array2<f64>,
    /// Label coefficients, `k × k`.
    pub m: Array2<f64>,
    /// View weights on the simplex.
    pub alpha: Array1<f64>,
    pub hyper: Hyperparams,
}

impl AslslModel {
    pub fn n_views(&self) -> usize {
        self.q.len()
    }

    pub fn latent_dim(&self) -> usize {
        self.u.ncols()
    }

    fn is_nonnegative(&self) -> bool {
        self.q.iter().all(|q| q.iter().all(|&v| v >= 0.0))
            && self.u.iter().all(|&v| v >= 0.0)
            && self.m.iter().all(|&v| v >= 0.0)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    /// Objective at the random starting point.
    pub initial_objective: f64,
    /// Objective after each full sweep.
    pub objective_values: Vec<f64>,
    /// `‖(X_v − Q_v Uᵀ) S_v‖²_F` per view after each sweep.
    pub per_view_residuals: Vec<Vec<f64>>,
    /// `α` after each sweep.
    pub alpha_history: Vec<Vec<f64>>,
    pub iterations_run: usize,
    pub converged: bool,
    /// Sweeps in which some view had zero cost and the weight update fell
    /// back to splitting all weight among the zero-cost views.
    pub zero_cost_iterations: Vec<usize>,
}

impl ConvergenceTrace {
    /// Largest relative increase between consecutive objective values,
    /// including the step from the initial objective. Zero or negative
    /// means monotone.
    pub fn max_relative_increase(&self) -> f64 {
        std::iter::once(self.initial_objective)
            .chain(self.objective_values.iter().copied())
            .collect::<Vec<_>>()
            .windows(2)
            .map(|w| (w[1] - w[0]) / w[0].abs().max(f64::MIN_POSITIVE))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Per-view terms of the objective at the current factors.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewCosts {
    /// `‖(X_v − Q_v Uᵀ) S_v‖²_F`.
    pub residual: Vec<f64>,
    /// `‖Y − M Uᵀ‖²_F`, shared by all views.
    pub label_fit: f64,
    /// `Tr(Uᵀ L U)`, shared by all views.
    pub graph: f64,
    /// `‖Q_v‖_{2,1}`.
    pub l21: Vec<f64>,
}

impl ViewCosts {
    /// The bracketed per-view cost `d_v` that the weight update balances.
    pub fn per_view(&self, hyper: &Hyperparams) -> Vec<f64> {
        self.residual
            .iter()
            .zip(&self.l21)
            .map(|(r, l)| r + hyper.lambda * self.label_fit + hyper.eta * self.graph + hyper.delta * l)
            .collect()
    }

    pub fn objective(&self, alpha: &Array1<f64>, hyper: &Hyperparams) -> f64 {
        self.per_view(hyper)
            .iter()
            .zip(alpha)
            .map(|(d, a)| a.powf(hyper.gamma) * d)
            .sum()
    }
}

/// Data views prepared once per fit: absent columns are forced to zero
/// regardless of what the dataset stores there.
struct Problem<'a> {
    x: Vec<Array2<f64>>,
    mask: Vec<Array1<f64>>,
    y: &'a Array2<f64>,
    graph: &'a LabelGraph,
}

impl<'a> Problem<'a> {
    fn new(dataset: &'a MultiViewDataset, graph: &'a LabelGraph) -> Result<Self> {
        let n = dataset.n_instances();
        if graph.n_instances() != n {
            return Err(AslslError::Shape(format!(
                "graph has {} nodes, dataset has {n} instances",
                graph.n_instances()
            )));
        }
        Ok(Problem {
            x: dataset.views().iter().map(|v| v.masked_features()).collect(),
            mask: dataset.views().iter().map(|v| v.mask_vector()).collect(),
            y: dataset.labels().as_array(),
            graph,
        })
    }

    fn check_model(&self, model: &AslslModel) -> Result<()> {
        let n = self.y.ncols();
        let k = model.u.ncols();
        if model.q.len() != self.x.len() || model.alpha.len() != self.x.len() {
            return Err(AslslError::Shape(format!(
                "model has {} views, dataset has {}",
                model.q.len(),
                self.x.len()
            )));
        }
        if model.u.nrows() != n || model.m.dim() != (self.y.nrows(), k) {
            return Err(AslslError::Shape(format!(
                "U is {:?} and M is {:?}; expected U with {n} rows and M {} × {k}",
                model.u.dim(),
                model.m.dim(),
                self.y.nrows()
            )));
        }
        for (v, (q, x)) in model.q.iter().zip(&self.x).enumerate() {
            if q.dim() != (x.nrows(), k) {
                return Err(AslslError::Shape(format!(
                    "Q for view {v} is {:?}, expected ({}, {k})",
                    q.dim(),
                    x.nrows()
                )));
            }
        }
        Ok(())
    }

    fn weights(&self, model: &AslslModel) -> Array1<f64> {
        model.alpha.mapv(|a| a.powf(model.hyper.gamma))
    }

    fn costs(&self, model: &AslslModel) -> ViewCosts {
        let residual = self
            .x
            .iter()
            .zip(&self.mask)
            .zip(&model.q)
            .map(|((x, s), q)| {
                let approx = q.dot(&model.u.t());
                let mut total = 0.0;
                for ((xc, ac), &sj) in x.columns().into_iter().zip(approx.columns()).zip(s) {
                    if sj != 0.0 {
                        total += xc.iter().zip(ac).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                    }
                }
                total
            })
            .collect();
        let label_fit = (self.y - &model.m.dot(&model.u.t())).mapv(|v| v * v).sum();
        let graph =
            crate::graph::laplacian_quadratic(&model.u, self.graph).expect("graph size checked at construction");
        let l21 = model.q.iter().map(l21_norm).collect();
        ViewCosts {
            residual,
            label_fit,
            graph,
            l21,
        }
    }

    fn update_q(&self, model: &mut AslslModel) {
        let hyper = model.hyper;
        let su = |s: &Array1<f64>| &model.u * &s.view().insert_axis(Axis(1));
        let new_q: Vec<Array2<f64>> = self
            .x
            .iter()
            .zip(&self.mask)
            .zip(&model.q)
            .map(|((x, s), q)| {
                let numer = x.dot(&model.u);
                let gram = su(s).t().dot(&model.u);
                let mut denom = q.dot(&gram);
                if hyper.delta != 0.0 {
                    for (mut drow, qrow) in denom.rows_mut().into_iter().zip(q.rows()) {
                        let sq: f64 = qrow.iter().map(|v| v * v).sum();
                        let reweight = hyper.delta / (2.0 * (sq + hyper.epsilon_norm).sqrt());
                        drow.zip_mut_with(&qrow, |d, &qv| *d += reweight * qv);
                    }
                }
                multiplicative_step(q, &numer, &denom, hyper.epsilon_div)
            })
            .collect();
        model.q = new_q;
    }

    fn update_u(&self, model: &mut AslslModel) {
        let hyper = model.hyper;
        let w = self.weights(model);
        let w_sum = w.sum();
        let u = &model.u;
        let (n, k) = u.dim();
        let mut numer = Array2::<f64>::zeros((n, k));
        let mut denom = Array2::<f64>::zeros((n, k));
        for (((x, s), q), &wv) in self.x.iter().zip(&self.mask).zip(&model.q).zip(&w) {
            if wv == 0.0 {
                continue;
            }
            // Xm already has absent columns zeroed, so Xmᵀ S = Xmᵀ.
            numer.scaled_add(wv, &x.t().dot(q));
            let su = u * &s.view().insert_axis(Axis(1));
            denom.scaled_add(wv, &su.dot(&q.t().dot(q)));
        }
        let w_lambda = hyper.lambda * w_sum;
        if w_lambda != 0.0 {
            numer.scaled_add(w_lambda, &self.y.t().dot(&model.m));
            denom.scaled_add(w_lambda, &u.dot(&model.m.t().dot(&model.m)));
        }
        let w_eta = hyper.eta * w_sum;
        if w_eta != 0.0 {
            numer.scaled_add(w_eta, &self.graph.affinity().dot(u));
            let gu = u * &self.graph.degree().view().insert_axis(Axis(1));
            denom.scaled_add(w_eta, &gu);
        }
        model.u = multiplicative_step(u, &numer, &denom, hyper.epsilon_div);
    }

    fn update_m(&self, model: &mut AslslModel) {
        let numer = self.y.dot(&model.u);
        let denom = model.m.dot(&model.u.t().dot(&model.u));
        model.m = multiplicative_step(&model.m, &numer, &denom, model.hyper.epsilon_div);
    }
}

fn multiplicative_step(base: &Array2<f64>, numer: &Array2<f64>, denom: &Array2<f64>, eps: f64) -> Array2<f64> {
    let mut out = base.clone();
    Zip::from(&mut out)
        .and(numer)
        .and(denom)
        .for_each(|o, &nu, &de| *o *= nu / (de + eps));
    out
}

/// Sum of row 2-norms.
pub fn l21_norm(q: &Array2<f64>) -> f64 {
    q.rows()
        .into_iter()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
        .sum()
}

/// Closed-form minimizer of `Σ_v (α_v)^γ d_v` over the simplex:
/// `α_v ∝ d_v^{1/(1−γ)}`.
///
/// When some costs are exactly zero, the weight is split equally among
/// them (the limit as those costs go to zero); the flag in the result is
/// set in that case. Computed in log space so tiny or huge costs do not
/// overflow.
pub fn alpha_from_costs(costs: &[f64], gamma: f64) -> Result<(Array1<f64>, bool)> {
    if costs.is_empty() {
        return Err(AslslError::InvalidParameter("no view costs".into()));
    }
    if gamma.is_nan() || gamma <= 1.0 {
        return Err(AslslError::InvalidParameter(format!(
            "gamma must exceed 1, got {gamma}"
        )));
    }
    if let Some(bad) = costs.iter().find(|d| !d.is_finite() || **d < 0.0) {
        return Err(AslslError::InvalidParameter(format!(
            "view cost {bad} is not a finite non-negative number"
        )));
    }
    let zeros = costs.iter().filter(|&&d| d == 0.0).count();
    if zeros > 0 {
        let share = 1.0 / zeros as f64;
        let alpha = costs.iter().map(|&d| if d == 0.0 { share } else { 0.0 }).collect();
        return Ok((alpha, true));
    }
    let exponent = 1.0 / (1.0 - gamma);
    let logs: Vec<f64> = costs.iter().map(|d| d.ln() * exponent).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Array1<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total = raw.sum();
    Ok((raw / total, false))
}

/// Random non-negative start: `Q`, `U`, `M` uniform on (0, 1], `α` uniform.
pub fn init_model(dataset: &MultiViewDataset, k_latent: usize, hyper: Hyperparams, seed: u64) -> Result<AslslModel> {
    if k_latent < 1 {
        return Err(AslslError::InvalidParameter("latent width must be at least 1".into()));
    }
    if k_latent != dataset.n_labels() {
        return Err(AslslError::InvalidParameter(format!(
            "latent width {k_latent} must equal the label count {}",
            dataset.n_labels()
        )));
    }
    hyper.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |shape: (usize, usize)| Array2::from_shape_simple_fn(shape, || 1.0 - rng.gen::<f64>());
    let q = dataset.dims().into_iter().map(|d| draw((d, k_latent))).collect();
    let u = draw((dataset.n_instances(), k_latent));
    let m = draw((k_latent, k_latent));
    let views = dataset.n_views();
    Ok(AslslModel {
        q,
        u,
        m,
        alpha: Array1::from_elem(views, 1.0 / views as f64),
        hyper,
    })
}

pub fn objective(model: &AslslModel, dataset: &MultiViewDataset, graph: &LabelGraph) -> Result<f64> {
    Ok(view_costs(model, dataset, graph)?.objective(&model.alpha, &model.hyper))
}

pub fn view_costs(model: &AslslModel, dataset: &MultiViewDataset, graph: &LabelGraph) -> Result<ViewCosts> {
    let problem = Problem::new(dataset, graph)?;
    problem.check_model(model)?;
    Ok(problem.costs(model))
}

/// One multiplicative step on every `Q_v`.
pub fn update_q(model: &mut AslslModel, dataset: &MultiViewDataset) -> Result<()> {
    let graph = LabelGraph::empty(dataset.n_instances());
    let problem = Problem::new(dataset, &graph)?;
    problem.check_model(model)?;
    problem.update_q(model);
    Ok(())
}

pub fn update_u(model: &mut AslslModel, dataset: &MultiViewDataset, graph: &LabelGraph) -> Result<()> {
    let problem = Problem::new(dataset, graph)?;
    problem.check_model(model)?;
    problem.update_u(model);
    Ok(())
}

pub fn update_m(model: &mut AslslModel, dataset: &MultiViewDataset) -> Result<()> {
    let graph = LabelGraph::empty(dataset.n_instances());
    let problem = Problem::new(dataset, &graph)?;
    problem.check_model(model)?;
    problem.update_m(model);
    Ok(())
}

/// Recomputes `α` from the current per-view costs. Returns whether the
/// zero-cost fallback was used.
pub fn update_alpha(model: &mut AslslModel, dataset: &MultiViewDataset, graph: &LabelGraph) -> Result<bool> {
    let costs = view_costs(model, dataset, graph)?;
    let (alpha, degenerate) = alpha_from_costs(&costs.per_view(&model.hyper), model.hyper.gamma)?;
    model.alpha = alpha;
    Ok(degenerate)
}

pub fn fit(
    dataset: &MultiViewDataset,
    graph: &LabelGraph,
    hyper: Hyperparams,
    seed: u64,
) -> Result<(AslslModel, ConvergenceTrace)> {
    fit_with_options(dataset, graph, hyper, seed, FitOptions::default())
}

pub fn fit_with_options(
    dataset: &MultiViewDataset,
    graph: &LabelGraph,
    hyper: Hyperparams,
    seed: u64,
    options: FitOptions,
) -> Result<(AslslModel, ConvergenceTrace)> {
    let model = init_model(dataset, dataset.n_labels(), hyper, seed)?;
    fit_from(model, dataset, graph, options)
}

/// Runs sweeps starting from a given model until the relative objective
/// change falls below `rel_tol` or `max_iters` sweeps have run.
pub fn fit_from(
    mut model: AslslModel,
    dataset: &MultiViewDataset,
    graph: &LabelGraph,
    options: FitOptions,
) -> Result<(AslslModel, ConvergenceTrace)> {
    let hyper = model.hyper;
    hyper.validate()?;
    let problem = Problem::new(dataset, graph)?;
    problem.check_model(&model)?;

    let mut trace = ConvergenceTrace {
        initial_objective: problem.costs(&model).objective(&model.alpha, &hyper),
        ..Default::default()
    };
    if !trace.initial_objective.is_finite() {
        return Err(AslslError::NonFiniteObjective {
            iteration: 0,
            value: trace.initial_objective,
        });
    }
    let mut previous = trace.initial_objective;

    for iteration in 1..=hyper.max_iters {
        problem.update_q(&mut model);
        problem.update_u(&mut model);
        problem.update_m(&mut model);
        debug_assert!(model.is_nonnegative(), "negative factor entry at iteration {iteration}");

        let costs = problem.costs(&model);
        if options.adaptive_weights {
            let (alpha, degenerate) =
                alpha_from_costs(&costs.per_view(&hyper), hyper.gamma).map_err(|_| AslslError::NonFiniteObjective {
                    iteration,
                    value: f64::NAN,
                })?;
            model.alpha = alpha;
            if degenerate {
                trace.zero_cost_iterations.push(iteration);
            }
        }
        let value = costs.objective(&model.alpha, &hyper);
        if !value.is_finite() {
            return Err(AslslError::NonFiniteObjective { iteration, value });
        }
        trace.objective_values.push(value);
        trace.per_view_residuals.push(costs.residual.clone());
        trace.alpha_history.push(model.alpha.to_vec());
        trace.iterations_run = iteration;

        let change = (previous - value).abs() / previous.abs().max(f64::MIN_POSITIVE);
        if value == 0.0 || change < hyper.rel_tol {
            trace.converged = true;
            break;
        }
        previous = value;
    }
    Ok((model, trace))
}

/// Fits every view on its own (separate `U` and `M` per view) and combines
/// the results: each view keeps its own `Q`, while `U` and `M` are averaged
/// and `α` is uniform. Used to ablate the shared latent structure.
pub fn fit_independent_views(
    dataset: &MultiViewDataset,
    graph: &LabelGraph,
    hyper: Hyperparams,
    seed: u64,
) -> Result<(AslslModel, Vec<ConvergenceTrace>)> {
    let views = dataset.n_views();
    let mut qs = Vec::with_capacity(views);
    let mut traces = Vec::with_capacity(views);
    let mut u_sum: Option<Array2<f64>> = None;
    let mut m_sum: Option<Array2<f64>> = None;
    for v in 0..views {
        let single = dataset.single_view(v);
        let (model, trace) = fit(&single, graph, hyper, seed.wrapping_add(v as u64))?;
        let AslslModel { mut q, u, m, .. } = model;
        qs.push(q.remove(0));
        u_sum = Some(u_sum.map_or_else(|| u.clone(), |acc| acc + &u));
        m_sum = Some(m_sum.map_or_else(|| m.clone(), |acc| acc + &m));
        traces.push(trace);
    }
    let scale = 1.0 / views as f64;
    Ok((
        AslslModel {
            q: qs,
            u: u_sum.expect("at least one view") * scale,
            m: m_sum.expect("at least one view") * scale,
            alpha: Array1::from_elem(views, scale),
            hyper,
        },
        traces,
    ))
}
