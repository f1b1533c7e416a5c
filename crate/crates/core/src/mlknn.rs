//! ML-KNN: Bayesian multi-label k-nearest-neighbor classifier.
//!
//! Training estimates, per label, a smoothed prior and the distribution of
//! how many of an instance's `K` nearest training neighbors carry the label,
//! conditioned on whether the instance itself carries it. Prediction picks
//! the label state with the larger posterior given the neighbor count.
//!
//! Features are feature-by-instance (`d × n`), as everywhere else in the
//! crate. Distances are Euclidean; distance ties go to the lower training
//! index.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::dataset::LabelMatrix;
use crate::error::{AslslError, Result};

pub const DEFAULT_NEIGHBORS: usize = 10;
pub const DEFAULT_SMOOTHING: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlknnModel {
    k_neighbors: usize,
    smoothing: f64,
    prior_true: Vec<f64>,
    prior_false: Vec<f64>,
    /// `labels × (K + 1)`: P(c neighbors carry the label | label present).
    cond_true: Array2<f64>,
    /// `labels × (K + 1)`: P(c neighbors carry the label | label absent).
    cond_false: Array2<f64>,
    train_features: Array2<f64>,
    train_labels: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlknnPrediction {
    /// Binary `labels × n_query`.
    pub labels: Array2<f64>,
    /// Posterior probability of each label, `labels × n_query`.
    pub confidences: Array2<f64>,
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices of the `k` training columns nearest to `query`, skipping
/// `exclude` when given.
fn nearest(train: &Array2<f64>, query: ArrayView1<f64>, k: usize, exclude: Option<usize>) -> Vec<usize> {
    let mut cand: Vec<(f64, usize)> = train
        .columns()
        .into_iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != exclude)
        .map(|(i, col)| (sq_dist(col, query), i))
        .collect();
    let by_key = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < cand.len() {
        cand.select_nth_unstable_by(k, by_key);
        cand.truncate(k);
    }
    cand.sort_by(by_key);
    cand.into_iter().map(|(_, i)| i).collect()
}

pub fn train_mlknn(
    features: &Array2<f64>,
    labels: &LabelMatrix,
    k_neighbors: usize,
    smoothing: f64,
) -> Result<MlknnModel> {
    let n = features.ncols();
    let y = labels.as_array();
    if y.ncols() != n {
        return Err(AslslError::Shape(format!(
            "{n} training instances but {} label columns",
            y.ncols()
        )));
    }
    if k_neighbors >= n {
        return Err(AslslError::InvalidParameter(format!(
            "k_neighbors = {k_neighbors} must be below the training size {n}"
        )));
    }
    if !smoothing.is_finite() || smoothing < 0.0 {
        return Err(AslslError::InvalidParameter(format!(
            "smoothing must be non-negative, got {smoothing}"
        )));
    }
    let n_labels = y.nrows();
    let s = smoothing;

    let mut prior_true = Vec::with_capacity(n_labels);
    let mut prior_false = Vec::with_capacity(n_labels);
    for row in y.rows() {
        let positives = row.sum();
        let denom = 2.0 * s + n as f64;
        prior_true.push((s + positives) / denom);
        prior_false.push((s + n as f64 - positives) / denom);
    }

    // hist_true[l][c]: training instances carrying l with c neighbors carrying l.
    let mut hist_true = Array2::<f64>::zeros((n_labels, k_neighbors + 1));
    let mut hist_false = Array2::<f64>::zeros((n_labels, k_neighbors + 1));
    for i in 0..n {
        let neigh = nearest(features, features.column(i), k_neighbors, Some(i));
        for l in 0..n_labels {
            let c = neigh.iter().filter(|&&j| y[[l, j]] == 1.0).count();
            if y[[l, i]] == 1.0 {
                hist_true[[l, c]] += 1.0;
            } else {
                hist_false[[l, c]] += 1.0;
            }
        }
    }
    let normalize = |hist: &Array2<f64>| {
        let mut out = hist.clone();
        for mut row in out.rows_mut() {
            let denom = s * (k_neighbors + 1) as f64 + row.sum();
            row.mapv_inplace(|c| {
                if denom > 0.0 {
                    (s + c) / denom
                } else {
                    1.0 / (k_neighbors + 1) as f64
                }
            });
        }
        out
    };

    Ok(MlknnModel {
        k_neighbors,
        smoothing,
        prior_true,
        prior_false,
        cond_true: normalize(&hist_true),
        cond_false: normalize(&hist_false),
        train_features: features.clone(),
        train_labels: y.clone(),
    })
}

impl MlknnModel {
    pub fn k_neighbors(&self) -> usize {
        self.k_neighbors
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    pub fn prior_true(&self) -> &[f64] {
        &self.prior_true
    }

    pub fn prior_false(&self) -> &[f64] {
        &self.prior_false
    }

    pub fn cond_true(&self) -> &Array2<f64> {
        &self.cond_true
    }

    pub fn cond_false(&self) -> &Array2<f64> {
        &self.cond_false
    }

    pub fn n_features(&self) -> usize {
        self.train_features.nrows()
    }
}

pub fn predict_mlknn(model: &MlknnModel, query: &Array2<f64>) -> Result<MlknnPrediction> {
    if query.nrows() != model.n_features() {
        return Err(AslslError::Shape(format!(
            "query has {} features, model was trained on {}",
            query.nrows(),
            model.n_features()
        )));
    }
    let n_labels = model.train_labels.nrows();
    let nq = query.ncols();
    let mut labels = Array2::<f64>::zeros((n_labels, nq));
    let mut confidences = Array2::<f64>::zeros((n_labels, nq));
    for (q, col) in query.columns().into_iter().enumerate() {
        let neigh = nearest(&model.train_features, col, model.k_neighbors, None);
        for l in 0..n_labels {
            let c = neigh.iter().filter(|&&j| model.train_labels[[l, j]] == 1.0).count();
            let yes = model.prior_true[l] * model.cond_true[[l, c]];
            let no = model.prior_false[l] * model.cond_false[[l, c]];
            labels[[l, q]] = if yes >= no { 1.0 } else { 0.0 };
            confidences[[l, q]] = if yes + no > 0.0 { yes / (yes + no) } else { 0.5 };
        }
    }
    Ok(MlknnPrediction { labels, confidences })
}
