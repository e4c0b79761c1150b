//! Per-point sensitivity upper bounds and the sampling distribution derived
//! from them.
//!
//! A provider maps a [`Dataset`] to strictly positive scores. The built-in
//! providers are uniform, statistical leverage and ℓ1 Lewis weights; bounds
//! computed elsewhere plug in through [`Precomputed`], keyed by point id.

mod leverage;
mod lewis;

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use leverage::{leverage_scores, leverage_sensitivities, LeverageScores};
pub use lewis::{lewis_weight_sensitivities, lewis_weights, LewisOutcome, LewisWeights};

use crate::dataset::{Dataset, PointId};
use crate::error::{CoreError, Result};
use crate::numfmt::fmt_f64;

/// Strictly positive, finite per-point scores and their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityScores {
    values: Vec<f64>,
    total: f64,
    provider: String,
}

impl SensitivityScores {
    pub fn new(values: Vec<f64>, provider: impl Into<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(CoreError::EmptyInput("no sensitivity values".into()));
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(CoreError::DegenerateScores(format!(
                "value {} at position {i} is not strictly positive and finite",
                values[i]
            )));
        }
        let total = values.iter().sum();
        Ok(SensitivityScores {
            values,
            total,
            provider: provider.into(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn provider(&self) -> &str {
        &self.provider
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Multiplies every score by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        SensitivityScores::new(self.values.iter().map(|v| v * c).collect(), self.provider.clone())
    }
}

/// Sampling probabilities `Pr(p) = s(p) / Σ_q s(q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector {
    probabilities: Vec<f64>,
}

impl ProbabilityVector {
    /// Wraps probabilities that must be in `(0, 1]` and sum to 1 within 1e-9.
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(CoreError::EmptyInput("empty probability vector".into()));
        }
        if let Some(p) = probabilities.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
            return Err(CoreError::InvalidArgument(format!("probability {p} outside (0, 1]")));
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CoreError::InvalidArgument(format!("probabilities sum to {sum}")));
        }
        Ok(ProbabilityVector { probabilities })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }
}

impl std::ops::Index<usize> for ProbabilityVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.probabilities[i]
    }
}

pub fn uniform_scores(n: usize) -> Result<SensitivityScores> {
    if n == 0 {
        return Err(CoreError::InvalidArgument("uniform scores need n >= 1".into()));
    }
    SensitivityScores::new(vec![1.0 / n as f64; n], "uniform")
}

pub fn to_probabilities(scores: &SensitivityScores) -> Result<ProbabilityVector> {
    let total = scores.total();
    if !(total.is_finite() && total > 0.0) {
        return Err(CoreError::DegenerateScores(format!("score total {total}")));
    }
    Ok(ProbabilityVector {
        probabilities: scores.values().iter().map(|v| v / total).collect(),
    })
}

/// `(1 - mix) * raw / Σ raw + mix / n`, the uniform-mixed normalization used
/// by the structured providers.
pub(crate) fn mix_with_uniform(raw: &[f64], mix: f64, provider: &str) -> Result<SensitivityScores> {
    if !(0.0..=1.0).contains(&mix) {
        return Err(CoreError::InvalidArgument(format!("mix {mix} outside [0, 1]")));
    }
    let n = raw.len() as f64;
    let sum: f64 = raw.iter().sum();
    if mix == 1.0 {
        return SensitivityScores::new(vec![1.0 / n; raw.len()], provider);
    }
    if !(sum.is_finite() && sum > 0.0) {
        return Err(CoreError::DegenerateScores(format!(
            "{provider} scores sum to {sum}; nothing to normalize"
        )));
    }
    let values = raw.iter().map(|r| (1.0 - mix) * r / sum + mix / n).collect();
    SensitivityScores::new(values, provider)
}

/// Anything that can bound per-point sensitivities for a dataset.
pub trait SensitivityProvider: Send + Sync {
    fn name(&self) -> &str;
    fn scores(&self, data: &Dataset) -> Result<SensitivityScores>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Uniform;

impl SensitivityProvider for Uniform {
    fn name(&self) -> &str {
        "uniform"
    }

    fn scores(&self, data: &Dataset) -> Result<SensitivityScores> {
        uniform_scores(data.len())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Leverage {
    pub mix: f64,
    pub intercept: bool,
}

impl Default for Leverage {
    fn default() -> Self {
        Leverage {
            mix: 0.5,
            intercept: true,
        }
    }
}

impl SensitivityProvider for Leverage {
    fn name(&self) -> &str {
        "leverage"
    }

    fn scores(&self, data: &Dataset) -> Result<SensitivityScores> {
        leverage_sensitivities(data.features(), self.mix, self.intercept)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Lewis {
    pub mix: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub intercept: bool,
}

impl Default for Lewis {
    fn default() -> Self {
        Lewis {
            mix: 0.5,
            max_iters: 100,
            tol: 1e-8,
            intercept: true,
        }
    }
}

impl SensitivityProvider for Lewis {
    fn name(&self) -> &str {
        "lewis"
    }

    fn scores(&self, data: &Dataset) -> Result<SensitivityScores> {
        let outcome = lewis_weight_sensitivities(data.features(), self.max_iters, self.tol, self.mix, self.intercept)?;
        if !outcome.weights.converged {
            log::warn!(
                "lewis weights stopped after {} iterations without converging",
                outcome.weights.iterations
            );
        }
        if outcome.weights.ridge_used {
            log::warn!("lewis weights needed a ridge fallback (singular Gram matrix)");
        }
        Ok(outcome.scores)
    }
}

/// Scores computed outside this crate, looked up by point id.
#[derive(Debug, Clone)]
pub struct Precomputed {
    name: String,
    by_id: HashMap<PointId, f64>,
}

impl Precomputed {
    pub fn new(name: impl Into<String>, by_id: HashMap<PointId, f64>) -> Self {
        Precomputed {
            name: name.into(),
            by_id,
        }
    }

    /// Reads a `point_id,sensitivity[,...]` CSV such as the one written by
    /// [`write_scores_csv`].
    pub fn from_csv(name: impl Into<String>, reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| CoreError::MissingColumn(name.to_owned()))
        };
        let id_col = col("point_id")?;
        let s_col = col("sensitivity")?;
        let mut by_id = HashMap::new();
        for (r, record) in rdr.records().enumerate() {
            let record = record?;
            let cell_err = |column: &str, cell: &str| CoreError::Csv {
                row: r + 2,
                column: column.to_owned(),
                message: format!("cannot parse `{cell}`"),
            };
            let id_cell = record.get(id_col).unwrap_or("");
            let s_cell = record.get(s_col).unwrap_or("");
            let id: PointId = id_cell.parse().map_err(|_| cell_err("point_id", id_cell))?;
            let s: f64 = s_cell.parse().map_err(|_| cell_err("sensitivity", s_cell))?;
            by_id.insert(id, s);
        }
        Ok(Precomputed::new(name, by_id))
    }
}

impl SensitivityProvider for Precomputed {
    fn name(&self) -> &str {
        &self.name
    }

    fn scores(&self, data: &Dataset) -> Result<SensitivityScores> {
        let values = data
            .point_ids()
            .iter()
            .map(|id| {
                self.by_id
                    .get(id)
                    .copied()
                    .ok_or_else(|| CoreError::InvalidArgument(format!("no precomputed sensitivity for point {id}")))
            })
            .collect::<Result<Vec<_>>>()?;
        SensitivityScores::new(values, self.name.clone())
    }
}

/// Serializable provider selection, as it appears in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "provider", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProviderSpec {
    Uniform,
    Leverage {
        #[serde(default = "default_mix")]
        mix: f64,
        #[serde(default = "default_true")]
        intercept: bool,
    },
    Lewis {
        #[serde(default = "default_mix")]
        mix: f64,
        #[serde(default = "default_lewis_iters")]
        max_iters: usize,
        #[serde(default = "default_lewis_tol")]
        tol: f64,
        #[serde(default = "default_true")]
        intercept: bool,
    },
    /// External bounds (e.g. unified, monotonic or SVM-specific
    /// constructions) supplied as a `point_id,sensitivity` CSV.
    Precomputed {
        name: String,
        path: PathBuf,
    },
}

fn default_mix() -> f64 {
    0.5
}
fn default_true() -> bool {
    true
}
fn default_lewis_iters() -> usize {
    100
}
fn default_lewis_tol() -> f64 {
    1e-8
}

impl Default for ProviderSpec {
    fn default() -> Self {
        ProviderSpec::Leverage {
            mix: default_mix(),
            intercept: true,
        }
    }
}

impl ProviderSpec {
    pub fn id(&self) -> String {
        match self {
            ProviderSpec::Uniform => "uniform".into(),
            ProviderSpec::Leverage { .. } => "leverage".into(),
            ProviderSpec::Lewis { .. } => "lewis".into(),
            ProviderSpec::Precomputed { name, .. } => name.clone(),
        }
    }

    /// Instantiates the provider; relative precomputed paths resolve
    /// against `base_dir`.
    pub fn build(&self, base_dir: &Path) -> Result<Box<dyn SensitivityProvider>> {
        Ok(match self {
            ProviderSpec::Uniform => Box::new(Uniform),
            ProviderSpec::Leverage { mix, intercept } => Box::new(Leverage {
                mix: *mix,
                intercept: *intercept,
            }),
            ProviderSpec::Lewis {
                mix,
                max_iters,
                tol,
                intercept,
            } => Box::new(Lewis {
                mix: *mix,
                max_iters: *max_iters,
                tol: *tol,
                intercept: *intercept,
            }),
            ProviderSpec::Precomputed { name, path } => {
                let file = std::fs::File::open(base_dir.join(path))?;
                Box::new(Precomputed::from_csv(name.clone(), file)?)
            }
        })
    }
}

/// Writes `point_id,sensitivity,probability` rows.
pub fn write_scores_csv(data: &Dataset, scores: &SensitivityScores, mut out: impl Write) -> Result<()> {
    if scores.len() != data.len() {
        return Err(CoreError::DimensionMismatch(format!(
            "{} scores for {} points",
            scores.len(),
            data.len()
        )));
    }
    let probs = to_probabilities(scores)?;
    writeln!(out, "point_id,sensitivity,probability")?;
    for ((id, s), p) in data.point_ids().iter().zip(scores.values()).zip(probs.as_slice()) {
        writeln!(out, "{id},{},{}", fmt_f64(*s), fmt_f64(*p))?;
    }
    Ok(())
}
