//! Accuracy and classification metrics.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::marginals::{MarginalSet, NodeMarginal};

/// Floor applied to the second argument of [`kl_divergence`].
pub const KL_CLAMP: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("truth values are constant; R² is undefined")]
    ConstantTruth,
    #[error("metrics need at least one value")]
    Empty,
}

/// `KL(p ‖ q) = Σ p ln(p/q)` with `q` floored at [`KL_CLAMP`] and zero
/// `p` terms dropped.
pub fn kl_divergence(p: &NodeMarginal, q: &NodeMarginal) -> f64 {
    p.as_array()
        .iter()
        .zip(q.as_array())
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, qi)| pi * (pi / qi.max(KL_CLAMP)).ln())
        .sum()
}

/// Mean over nodes of `KL(truth_i ‖ pred_i)`.
pub fn mean_node_kl(truth: &MarginalSet, pred: &MarginalSet) -> Result<f64, MetricsError> {
    if truth.len() != pred.len() {
        return Err(MetricsError::LengthMismatch {
            left: truth.len(),
            right: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(MetricsError::Empty);
    }
    let total: f64 = truth.iter().zip(pred.iter()).map(|(t, p)| kl_divergence(t, p)).sum();
    Ok(total / truth.len() as f64)
}

/// Nodes whose `p_plus` strictly exceeds `threshold`.
pub fn classify_nodes(marginals: &MarginalSet, threshold: f64) -> BTreeSet<usize> {
    marginals
        .iter()
        .enumerate()
        .filter(|(_, m)| m.p_plus > threshold)
        .map(|(i, _)| i)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassificationReport {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub fpr: f64,
    pub f1: f64,
    pub accuracy: f64,
}

/// Confusion counts of `predicted` against the true `damaged` set over
/// nodes `0..n`. FPR is taken over the intact nodes; F1 is zero when there
/// is nothing to score.
pub fn classification_report(predicted: &BTreeSet<usize>, damaged: &BTreeSet<usize>, n: usize) -> ClassificationReport {
    assert!(
        predicted.iter().chain(damaged).all(|&i| i < n),
        "node sets must lie in 0..{n}"
    );
    let tp = predicted.intersection(damaged).count();
    let fp = predicted.difference(damaged).count();
    let fn_ = damaged.difference(predicted).count();
    let tn = n - tp - fp - fn_;
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    ClassificationReport {
        tp,
        fp,
        tn,
        fn_,
        fpr: ratio(fp, fp + tn),
        f1: ratio(2 * tp, 2 * tp + fp + fn_),
        accuracy: ratio(tp + tn, n),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionMetrics {
    pub r2: f64,
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
}

pub fn regression_metrics(truth: &[f64], pred: &[f64]) -> Result<RegressionMetrics, MetricsError> {
    if truth.len() != pred.len() {
        return Err(MetricsError::LengthMismatch {
            left: truth.len(),
            right: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = truth.len() as f64;
    let mean = truth.iter().sum::<f64>() / n;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(MetricsError::ConstantTruth);
    }
    let ss_res: f64 = truth.iter().zip(pred).map(|(t, p)| (t - p).powi(2)).sum();
    let mae = truth.iter().zip(pred).map(|(t, p)| (t - p).abs()).sum::<f64>() / n;
    let mse = ss_res / n;
    Ok(RegressionMetrics {
        r2: 1.0 - ss_res / ss_tot,
        mae,
        mse,
        rmse: mse.sqrt(),
    })
}

/// One line of a comparison report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub algorithm: String,
    pub case: String,
    pub fpr: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub runtime_s: f64,
    pub mean_kl: f64,
}

impl ReportRow {
    pub const CSV_HEADER: &'static str = "algorithm,case,fpr,f1,accuracy,runtime_s,mean_kl";

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        write!(
            s,
            "{},{},{},{},{},{},{}",
            self.algorithm, self.case, self.fpr, self.f1, self.accuracy, self.runtime_s, self.mean_kl
        )
        .expect("writing to a String");
        s
    }
}
