//! Binary classification metrics.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dataset::ClassId;
use crate::error::{CoreError, Result};
use crate::numfmt::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn confusion_counts(truth: &[ClassId], predicted: &[ClassId]) -> Result<Confusion> {
    if truth.len() != predicted.len() {
        return Err(CoreError::DimensionMismatch(format!(
            "{} labels vs {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let mut c = Confusion::default();
    for (&y, &p) in truth.iter().zip(predicted) {
        if y > 1 || p > 1 {
            return Err(CoreError::InvalidArgument(format!("non-binary label pair ({y}, {p})")));
        }
        match (y, p) {
            (1, 1) => c.tp += 1,
            (0, 1) => c.fp += 1,
            (0, 0) => c.tn += 1,
            _ => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// `2tp / (2tp + fp + fn)`, or 0 when there are no positives at all.
pub fn f1(c: &Confusion) -> f64 {
    let denom = 2 * c.tp + c.fp + c.fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * c.tp as f64 / denom as f64
    }
}

/// Mean of the true-positive and true-negative rates. A rate whose class
/// is absent from the truth is left out, so the result is the other rate.
pub fn balanced_accuracy(c: &Confusion) -> f64 {
    let pos = c.tp + c.fn_;
    let neg = c.tn + c.fp;
    match (pos, neg) {
        (0, 0) => 0.0,
        (0, _) => c.tn as f64 / neg as f64,
        (_, 0) => c.tp as f64 / pos as f64,
        _ => 0.5 * (c.tp as f64 / pos as f64 + c.tn as f64 / neg as f64),
    }
}

pub fn accuracy(c: &Confusion) -> f64 {
    let n = c.total();
    if n == 0 {
        0.0
    } else {
        (c.tp + c.tn) as f64 / n as f64
    }
}

fn check_scores(truth: &[ClassId], scores: &[f64]) -> Result<(usize, usize)> {
    if truth.len() != scores.len() {
        return Err(CoreError::DimensionMismatch(format!(
            "{} labels vs {} scores",
            truth.len(),
            scores.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(CoreError::NonFinite("NaN score".into()));
    }
    if let Some(y) = truth.iter().find(|&&y| y > 1) {
        return Err(CoreError::InvalidArgument(format!("non-binary label {y}")));
    }
    let pos = truth.iter().filter(|&&y| y == 1).count();
    Ok((pos, truth.len() - pos))
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half (the Mann–Whitney statistic).
///
/// Ranks are kept doubled in integers so the tie bookkeeping is exact.
pub fn roc_auc(truth: &[ClassId], scores: &[f64]) -> Result<f64> {
    let (pos, neg) = check_scores(truth, scores)?;
    if pos == 0 || neg == 0 {
        return Err(CoreError::UndefinedMetric(
            "ROC AUC needs both classes in the truth labels".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Sum over positives of doubled mid-ranks (1-based).
    let mut doubled_rank_sum: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let doubled_mid = (start + 1 + end) as u128;
        let positives = order[start..end].iter().filter(|&&i| truth[i] == 1).count() as u128;
        doubled_rank_sum += doubled_mid * positives;
        start = end;
    }
    let (p, n) = (pos as u128, neg as u128);
    // 2U = 2R - P(P+1)
    let doubled_u = doubled_rank_sum - p * (p + 1);
    Ok(doubled_u as f64 / (2 * p * n) as f64)
}

/// `Σ_k (R_k - R_{k-1}) P_k` over the ranking by descending score; equal
/// scores keep their input order.
pub fn average_precision(truth: &[ClassId], scores: &[f64]) -> Result<f64> {
    let (pos, _) = check_scores(truth, scores)?;
    if pos == 0 {
        return Err(CoreError::UndefinedMetric(
            "average precision needs at least one positive".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut hits = 0usize;
    let mut ap = 0.0;
    for (k, &i) in order.iter().enumerate() {
        if truth[i] == 1 {
            hits += 1;
            ap += (hits as f64 / (k + 1) as f64) / pos as f64;
        }
    }
    Ok(ap)
}

/// Which metric drives selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    F1,
    BalancedAccuracy,
    Accuracy,
    RocAuc,
    AveragePrecision,
}

impl Metric {
    pub fn of(self, r: &MetricsReport) -> f64 {
        match self {
            Metric::F1 => r.f1,
            Metric::BalancedAccuracy => r.balanced_accuracy,
            Metric::Accuracy => r.accuracy,
            Metric::RocAuc => r.roc_auc,
            Metric::AveragePrecision => r.average_precision,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub f1: f64,
    pub balanced_accuracy: f64,
    pub accuracy: f64,
    pub roc_auc: f64,
    pub average_precision: f64,
    pub confusion: Confusion,
}

pub const REPORT_CSV_HEADER: &str =
    "run_id,split,config_hash,f1,balanced_accuracy,accuracy,roc_auc,average_precision,tp,fp,tn,fn";

impl MetricsReport {
    /// Label metrics from thresholded predictions, ranking metrics from
    /// the raw scores.
    pub fn compute(truth: &[ClassId], predicted: &[ClassId], scores: &[f64]) -> Result<Self> {
        if truth.is_empty() {
            return Err(CoreError::EmptyInput("no points to evaluate".into()));
        }
        let confusion = confusion_counts(truth, predicted)?;
        Ok(MetricsReport {
            f1: f1(&confusion),
            balanced_accuracy: balanced_accuracy(&confusion),
            accuracy: accuracy(&confusion),
            roc_auc: roc_auc(truth, scores)?,
            average_precision: average_precision(truth, scores)?,
            confusion,
        })
    }

    pub fn write_csv_row(&self, mut out: impl Write, run_id: &str, split: &str, config_hash: &str) -> Result<()> {
        let c = self.confusion;
        writeln!(
            out,
            "{run_id},{split},{config_hash},{},{},{},{},{},{},{},{},{}",
            fmt_f64(self.f1),
            fmt_f64(self.balanced_accuracy),
            fmt_f64(self.accuracy),
            fmt_f64(self.roc_auc),
            fmt_f64(self.average_precision),
            c.tp,
            c.fp,
            c.tn,
            c.fn_
        )?;
        Ok(())
    }
}
