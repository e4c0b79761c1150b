//! Weighted linear classifiers trained on coresets or full datasets.
//!
//! Both losses minimize `Σ ω_i ℓ(ỹ_i f(x_i)) + ‖β‖² / (2C)` with
//! `ỹ ∈ {-1, +1}` (class 1 is `+1`) and an unregularized intercept.
//! Logistic regression is solved by damped Newton; the hinge loss by
//! subgradient descent with a fixed `1/√t` schedule and suffix averaging.
//! Both are deterministic.

mod hinge;
mod logistic;

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

pub use logistic::LogisticObjective;

use crate::dataset::{ClassId, Dataset, Features};
use crate::error::{CoreError, Result};
use crate::metrics::MetricsReport;
use crate::numfmt::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    Logistic,
    Hinge,
}

impl Loss {
    pub fn as_str(self) -> &'static str {
        match self {
            Loss::Logistic => "logistic",
            Loss::Hinge => "hinge",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub loss: Loss,
    /// Inverse regularization strength; the penalty is `‖β‖² / (2C)`.
    #[serde(rename = "C")]
    pub c: f64,
    /// Stopping threshold on the gradient norm, relative to the total
    /// weight for logistic regression and to the normalized objective for
    /// the hinge loss.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub fit_intercept: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            loss: Loss::Logistic,
            c: 1.0,
            tolerance: 1e-8,
            max_iterations: 500,
            fit_intercept: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(CoreError::InvalidArgument(format!(
                "C must be positive, got {}",
                self.c
            )));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(CoreError::InvalidArgument(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(CoreError::InvalidArgument("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub loss: Loss,
    pub c: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl LinearModel {
    pub fn zeros(dim: usize, loss: Loss) -> Self {
        LinearModel {
            coefficients: vec![0.0; dim],
            intercept: 0.0,
            loss,
            c: 1.0,
            converged: false,
            iterations: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    /// Flat text: one `key value` line per scalar, then the coefficients one
    /// per line after a `coefficients <d>` header.
    pub fn write_text(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "loss {}", self.loss.as_str())?;
        writeln!(out, "C {}", fmt_f64(self.c))?;
        writeln!(out, "converged {}", self.converged)?;
        writeln!(out, "iterations {}", self.iterations)?;
        writeln!(out, "intercept {}", fmt_f64(self.intercept))?;
        writeln!(out, "coefficients {}", self.coefficients.len())?;
        for v in &self.coefficients {
            writeln!(out, "{}", fmt_f64(*v))?;
        }
        Ok(())
    }

    pub fn read_text(reader: impl BufRead) -> Result<Self> {
        let lines: Vec<String> = reader.lines().collect::<std::io::Result<_>>()?;
        let bad = |line: usize, what: &str| CoreError::Parse {
            line,
            message: format!("invalid {what}"),
        };
        let field = |idx: usize, key: &str| -> Result<&str> {
            let line = lines.get(idx).ok_or_else(|| CoreError::Parse {
                line: idx + 1,
                message: format!("missing `{key}` line"),
            })?;
            line.strip_prefix(key)
                .and_then(|rest| rest.strip_prefix(' '))
                .map(str::trim)
                .ok_or_else(|| CoreError::Parse {
                    line: idx + 1,
                    message: format!("expected `{key} <value>`, found `{line}`"),
                })
        };
        let loss = match field(0, "loss")? {
            "logistic" => Loss::Logistic,
            "hinge" => Loss::Hinge,
            _ => return Err(bad(1, "loss kind")),
        };
        let c = field(1, "C")?.parse().map_err(|_| bad(2, "C"))?;
        let converged = field(2, "converged")?.parse().map_err(|_| bad(3, "converged flag"))?;
        let iterations = field(3, "iterations")?.parse().map_err(|_| bad(4, "iteration count"))?;
        let intercept = field(4, "intercept")?.parse().map_err(|_| bad(5, "intercept"))?;
        let d: usize = field(5, "coefficients")?
            .parse()
            .map_err(|_| bad(6, "coefficient count"))?;
        let coefficients = (0..d)
            .map(|k| {
                lines
                    .get(6 + k)
                    .and_then(|l| l.trim().parse().ok())
                    .ok_or_else(|| bad(7 + k, "coefficient"))
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(LinearModel {
            coefficients,
            intercept,
            loss,
            c,
            converged,
            iterations,
        })
    }
}

/// `+1` for class 1, `-1` for class 0.
pub(crate) fn signed_labels(labels: &[ClassId]) -> Result<Vec<f64>> {
    labels
        .iter()
        .map(|&y| match y {
            0 => Ok(-1.0),
            1 => Ok(1.0),
            other => Err(CoreError::InvalidArgument(format!(
                "binary learners expect labels 0/1, found {other}"
            ))),
        })
        .collect()
}

fn check_inputs(features: &Features, labels: &[ClassId], weights: &[f64]) -> Result<Vec<f64>> {
    let n = features.n_rows();
    if labels.len() != n || weights.len() != n {
        return Err(CoreError::DimensionMismatch(format!(
            "{n} rows, {} labels, {} weights",
            labels.len(),
            weights.len()
        )));
    }
    if !features.is_finite() {
        return Err(CoreError::NonFinite("feature matrix".into()));
    }
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(CoreError::NonFinite(format!("weight {w}")));
    }
    let signs = signed_labels(labels)?;
    let has = |s: f64| signs.iter().zip(weights).any(|(&y, &w)| y == s && w > 0.0);
    match (has(-1.0), has(1.0)) {
        (true, true) => Ok(signs),
        (false, _) => Err(CoreError::SingleClass(1)),
        (_, false) => Err(CoreError::SingleClass(0)),
    }
}

pub fn train(features: &Features, labels: &[ClassId], weights: &[f64], config: &TrainConfig) -> Result<LinearModel> {
    config.validate()?;
    let signs = check_inputs(features, labels, weights)?;
    match config.loss {
        Loss::Logistic => logistic::fit(features, &signs, weights, config),
        Loss::Hinge => hinge::fit(features, &signs, weights, config),
    }
}

/// Trains on a dataset using its own point weights.
pub fn train_dataset(data: &Dataset, config: &TrainConfig) -> Result<LinearModel> {
    train(data.features(), data.labels(), data.weights(), config)
}

pub fn decision_scores(model: &LinearModel, features: &Features) -> Result<Vec<f64>> {
    if features.n_cols() != model.dim() {
        return Err(CoreError::DimensionMismatch(format!(
            "model has {} coefficients, features have {} columns",
            model.dim(),
            features.n_cols()
        )));
    }
    Ok((0..features.n_rows())
        .map(|i| features.row(i).dot(&model.coefficients) + model.intercept)
        .collect())
}

/// Class 1 iff the score is strictly positive.
pub fn predict_labels(model: &LinearModel, features: &Features) -> Result<Vec<ClassId>> {
    Ok(decision_scores(model, features)?
        .into_iter()
        .map(|s| usize::from(s > 0.0))
        .collect())
}

pub fn predict_probabilities(model: &LinearModel, features: &Features) -> Result<Vec<f64>> {
    if model.loss != Loss::Logistic {
        return Err(CoreError::Unsupported(
            "probabilities are only defined for logistic models; hinge models expose scores".into(),
        ));
    }
    Ok(decision_scores(model, features)?.into_iter().map(sigmoid).collect())
}

/// Data term `Σ ω_i ℓ_i` without the regularizer.
pub fn weighted_loss(model: &LinearModel, features: &Features, labels: &[ClassId], weights: &[f64]) -> Result<f64> {
    if labels.len() != features.n_rows() || weights.len() != features.n_rows() {
        return Err(CoreError::DimensionMismatch("labels/weights vs rows".into()));
    }
    let signs = signed_labels(labels)?;
    let scores = decision_scores(model, features)?;
    Ok(scores
        .iter()
        .zip(&signs)
        .zip(weights)
        .map(|((s, y), w)| {
            let margin = y * s;
            w * match model.loss {
                Loss::Logistic => log1p_exp(-margin),
                Loss::Hinge => (1.0 - margin).max(0.0),
            }
        })
        .sum())
}

/// Metrics of `model` on `data`, thresholding scores at 0.
pub fn evaluate(model: &LinearModel, data: &Dataset) -> Result<MetricsReport> {
    let scores = decision_scores(model, data.features())?;
    let predicted: Vec<ClassId> = scores.iter().map(|&s| usize::from(s > 0.0)).collect();
    MetricsReport::compute(data.labels(), &predicted, &scores)
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}
