//! Adaptive shared latent structure learning (ASLSL) for feature selection
//! on incomplete multi-view, multi-label data, plus the evaluation pipeline
//! around it: missingness simulation, ML-KNN classification and multi-label
//! metrics.
//!
//! The usual flow is
//! [`load_dataset`](dataset::load_dataset) or
//! [`generate_synthetic`](simulation::generate_synthetic) →
//! [`build_label_graph`](graph::build_label_graph) →
//! [`fit`](optimizer::fit) → [`rank_features`](ranking::rank_features) →
//! [`select_subset`](ranking::select_subset), with
//! [`experiment`] tying the steps into repeatable trials.

pub mod dataset;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod metrics;
pub mod mlknn;
pub mod optimizer;
pub mod ranking;
pub mod simulation;

pub use dataset::{load_dataset, save_dataset, LabelMatrix, MultiViewDataset, ViewBlock};
pub use error::{AslslError, Result};
pub use graph::{build_label_graph, LabelGraph};
pub use metrics::MetricReport;
pub use optimizer::{fit, AslslModel, ConvergenceTrace, Hyperparams};
pub use ranking::{rank_features, select_subset, FeatureRanking};
