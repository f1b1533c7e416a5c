//! Multi-label evaluation metrics.
//!
//! All matrices are `labels × instances`. Predictions and truth are 0/1.
//! Rankings order labels by descending confidence with ties broken by the
//! lower label index; ranking loss instead counts tied pairs as half an
//! error. Instances without both a relevant and an irrelevant label are
//! left out of ranking loss and average precision.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{AslslError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub hamming_loss: f64,
    pub ranking_loss: f64,
    /// Unnormalized: positions below the top, in `[0, k − 1]`.
    pub coverage: f64,
    pub average_precision: f64,
    pub macro_f1: f64,
    pub micro_f1: f64,
}

impl MetricReport {
    pub const NAMES: [&'static str; 6] = [
        "hamming_loss",
        "ranking_loss",
        "coverage",
        "average_precision",
        "macro_f1",
        "micro_f1",
    ];

    pub fn values(&self) -> [f64; 6] {
        [
            self.hamming_loss,
            self.ranking_loss,
            self.coverage,
            self.average_precision,
            self.macro_f1,
            self.micro_f1,
        ]
    }

    /// Coverage divided by the number of labels.
    pub fn coverage_normalized(&self, n_labels: usize) -> f64 {
        self.coverage / n_labels as f64
    }
}

pub fn evaluate(pred: &Array2<f64>, conf: &Array2<f64>, truth: &Array2<f64>) -> Result<MetricReport> {
    Ok(MetricReport {
        hamming_loss: hamming_loss(pred, truth)?,
        ranking_loss: ranking_loss(conf, truth)?,
        coverage: coverage(conf, truth)?,
        average_precision: average_precision(conf, truth)?,
        macro_f1: macro_f1(pred, truth)?,
        micro_f1: micro_f1(pred, truth)?,
    })
}

fn same_shape(a: &Array2<f64>, b: &Array2<f64>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(AslslError::Shape(format!("{:?} vs {:?}", a.dim(), b.dim())));
    }
    if a.is_empty() {
        return Err(AslslError::Shape("empty label matrix".into()));
    }
    Ok(())
}

pub fn hamming_loss(pred: &Array2<f64>, truth: &Array2<f64>) -> Result<f64> {
    same_shape(pred, truth)?;
    let wrong = pred.iter().zip(truth).filter(|(p, t)| p != t).count();
    Ok(wrong as f64 / pred.len() as f64)
}

/// Labels of one instance sorted best first.
fn ranked_labels(conf: ArrayView1<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..conf.len()).collect();
    order.sort_by(|&a, &b| conf[b].total_cmp(&conf[a]).then(a.cmp(&b)));
    order
}

pub fn ranking_loss(conf: &Array2<f64>, truth: &Array2<f64>) -> Result<f64> {
    same_shape(conf, truth)?;
    let mut total = 0.0;
    let mut counted = 0usize;
    for (c, t) in conf.columns().into_iter().zip(truth.columns()) {
        let mut irrelevant: Vec<f64> = c.iter().zip(t).filter(|(_, &y)| y != 1.0).map(|(&v, _)| v).collect();
        let relevant: Vec<f64> = c.iter().zip(t).filter(|(_, &y)| y == 1.0).map(|(&v, _)| v).collect();
        if relevant.is_empty() || irrelevant.is_empty() {
            continue;
        }
        irrelevant.sort_by(f64::total_cmp);
        let mut errors = 0.0;
        for r in &relevant {
            let below = irrelevant.partition_point(|v| v < r);
            let not_above = irrelevant.partition_point(|v| v <= r);
            let ties = not_above - below;
            let above = irrelevant.len() - not_above;
            errors += above as f64 + 0.5 * ties as f64;
        }
        total += errors / (relevant.len() * irrelevant.len()) as f64;
        counted += 1;
    }
    Ok(if counted == 0 { 0.0 } else { total / counted as f64 })
}

pub fn coverage(conf: &Array2<f64>, truth: &Array2<f64>) -> Result<f64> {
    same_shape(conf, truth)?;
    let mut total = 0.0;
    for (c, t) in conf.columns().into_iter().zip(truth.columns()) {
        let order = ranked_labels(c);
        if let Some(deepest) = order.iter().rposition(|&l| t[l] == 1.0) {
            total += deepest as f64;
        }
    }
    Ok(total / conf.ncols() as f64)
}

pub fn average_precision(conf: &Array2<f64>, truth: &Array2<f64>) -> Result<f64> {
    same_shape(conf, truth)?;
    let mut total = 0.0;
    let mut counted = 0usize;
    for (c, t) in conf.columns().into_iter().zip(truth.columns()) {
        let n_rel = t.iter().filter(|&&y| y == 1.0).count();
        if n_rel == 0 || n_rel == t.len() {
            continue;
        }
        let mut hits = 0usize;
        let mut sum = 0.0;
        for (pos, &l) in ranked_labels(c).iter().enumerate() {
            if t[l] == 1.0 {
                hits += 1;
                sum += hits as f64 / (pos + 1) as f64;
            }
        }
        total += sum / n_rel as f64;
        counted += 1;
    }
    Ok(if counted == 0 { 1.0 } else { total / counted as f64 })
}

fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

fn confusion(pred: ArrayView1<f64>, truth: ArrayView1<f64>) -> (usize, usize, usize) {
    let mut tp = 0;
    let mut fp = 0;
    let mut fn_ = 0;
    for (&p, &t) in pred.iter().zip(truth) {
        match (p == 1.0, t == 1.0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    (tp, fp, fn_)
}

pub fn macro_f1(pred: &Array2<f64>, truth: &Array2<f64>) -> Result<f64> {
    same_shape(pred, truth)?;
    let sum: f64 = pred
        .rows()
        .into_iter()
        .zip(truth.rows())
        .map(|(p, t)| {
            let (tp, fp, fn_) = confusion(p, t);
            f1(tp, fp, fn_)
        })
        .sum();
    Ok(sum / pred.nrows() as f64)
}

pub fn micro_f1(pred: &Array2<f64>, truth: &Array2<f64>) -> Result<f64> {
    same_shape(pred, truth)?;
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (p, t) in pred.rows().into_iter().zip(truth.rows()) {
        let c = confusion(p, t);
        tp += c.0;
        fp += c.1;
        fn_ += c.2;
    }
    Ok(f1(tp, fp, fn_))
}
