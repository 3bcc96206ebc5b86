//! ROC analysis, confusion-matrix metrics, AUC-weighted ensembles and
//! run aggregation.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// Descending; first is `+inf`, last is `-inf`.
    pub thresholds: Vec<f64>,
    /// `(fpr, tpr)` at each threshold, predicting positive for `score >= threshold`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// ROC curve for scores of the positive class. `labels[i]` is true for a
/// positive sample.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(scores.len(), labels.len()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidParameters("NaN score".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClassOnly);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut thresholds = vec![f64::INFINITY];
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        thresholds.push(s);
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }
    thresholds.push(f64::NEG_INFINITY);
    points.push((1.0, 1.0));
    let auc = trapezoid(&points);
    Ok(RocCurve { thresholds, points, auc })
}

pub fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) * 0.5)
        .sum()
}

/// Tie-breaking rule for the ensemble argmax.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TieBreak {
    #[default]
    Failure,
    Success,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleOutput {
    /// `(p_success, p_failure)`.
    pub probs: [f64; 2],
    /// 0 = success, 1 = failure.
    pub class: usize,
}

/// `sum(auc_i p_i) / sum(auc_i)`, then argmax.
pub fn weighted_ensemble(probs: &[[f64; 2]], aucs: &[f64], tie: TieBreak) -> Result<EnsembleOutput> {
    if probs.len() != aucs.len() {
        return Err(Error::LengthMismatch(probs.len(), aucs.len()));
    }
    if probs.is_empty() {
        return Err(Error::Empty);
    }
    if aucs.iter().any(|&a| !(a >= 0.0) || !a.is_finite()) {
        return Err(Error::InvalidParameters("AUC weights must be finite and non-negative".into()));
    }
    for p in probs {
        if p.iter().any(|&v| !(0.0..=1.0).contains(&v)) || (p[0] + p[1] - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameters("probability pair must sum to 1".into()));
        }
    }
    let total: f64 = aucs.iter().sum();
    if total <= 0.0 {
        return Err(Error::AllZeroWeights);
    }
    let mut acc = [0.0; 2];
    for (p, &a) in probs.iter().zip(aucs) {
        acc[0] += a * p[0];
        acc[1] += a * p[1];
    }
    let out = [acc[0] / total, acc[1] / total];
    let class = if out[0] > out[1] {
        0
    } else if out[1] > out[0] {
        1
    } else {
        match tie {
            TieBreak::Failure => 1,
            TieBreak::Success => 0,
        }
    };
    Ok(EnsembleOutput { probs: out, class })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: f64,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub confusion: Confusion,
    pub recall_degenerate: bool,
    pub precision_degenerate: bool,
    pub f1_degenerate: bool,
}

fn ratio(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

/// Metrics with failure (`true`) as the positive class.
pub fn classification_metrics(predictions: &[bool], labels: &[bool]) -> Result<MetricSet> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch(predictions.len(), labels.len()));
    }
    if labels.is_empty() {
        return Err(Error::Empty);
    }
    let mut c = Confusion::default();
    for (&p, &l) in predictions.iter().zip(labels) {
        match (p, l) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    let accuracy = (c.tp + c.tn) as f64 / labels.len() as f64;
    let (recall, recall_degenerate) = ratio(c.tp, c.tp + c.fn_);
    let (precision, precision_degenerate) = ratio(c.tp, c.tp + c.fp);
    let (f1, f1_degenerate) = if precision + recall > 0.0 {
        (2.0 * precision * recall / (precision + recall), false)
    } else {
        (0.0, true)
    };
    Ok(MetricSet {
        accuracy,
        recall,
        precision,
        f1,
        confusion: c,
        recall_degenerate,
        precision_degenerate,
        f1_degenerate,
    })
}

/// True negative rate with failure as positive; 0 when there are no negatives.
pub fn true_negative_rate(predictions: &[bool], labels: &[bool]) -> Result<f64> {
    let m = classification_metrics(predictions, labels)?;
    Ok(ratio(m.confusion.tn, m.confusion.tn + m.confusion.fp).0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
    /// Set when `n == 1` and the std is reported as 0.
    pub single_run: bool,
}

/// Mean and sample standard deviation.
pub fn run_aggregate(values: &[f64]) -> Result<Aggregate> {
    if values.is_empty() {
        return Err(Error::Empty);
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Ok(Aggregate {
            mean,
            std: 0.0,
            n,
            single_run: true,
        });
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    Ok(Aggregate {
        mean,
        std: libm::sqrt(var),
        n,
        single_run: false,
    })
}
