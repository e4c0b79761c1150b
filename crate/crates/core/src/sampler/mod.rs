//! Weighted coreset construction from sensitivity scores.
//!
//! Per class: take the class's budget, include the top
//! `⌊det_ratio · budget⌋` probability points once each, draw the rest with
//! replacement from the renormalized residual distribution, then weight
//! both parts under the chosen [`WeightStrategy`].

mod allocate;
mod draw;

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use allocate::allocate_class_budgets;
pub use draw::{assign_weights, deterministic_count, sample_residual, select_deterministic, WeightInputs};

use crate::dataset::{ClassId, Dataset, PointId};
use crate::error::{CoreError, Result};
use crate::numfmt::fmt_f64;
use crate::sensitivity::{to_probabilities, SensitivityScores};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightStrategy {
    Keep,
    Inv,
    Prop,
}

impl WeightStrategy {
    pub const ALL: [WeightStrategy; 3] = [WeightStrategy::Inv, WeightStrategy::Prop, WeightStrategy::Keep];

    pub fn as_str(self) -> &'static str {
        match self {
            WeightStrategy::Keep => "keep",
            WeightStrategy::Inv => "inv",
            WeightStrategy::Prop => "prop",
        }
    }
}

impl std::fmt::Display for WeightStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How the coreset size is divided across classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassAllocation {
    Proportional,
    /// Fraction of the budget per class; fractions are positive and sum to 1.
    Explicit(BTreeMap<ClassId, f64>),
}

impl ClassAllocation {
    pub fn explicit(pairs: &[(ClassId, f64)]) -> Self {
        ClassAllocation::Explicit(pairs.iter().copied().collect())
    }

    pub fn validate(&self) -> Result<()> {
        if let ClassAllocation::Explicit(map) = self {
            if map.is_empty() {
                return Err(CoreError::InvalidArgument("explicit allocation is empty".into()));
            }
            if let Some((c, f)) = map.iter().find(|(_, f)| !(f.is_finite() && **f > 0.0)) {
                return Err(CoreError::InvalidArgument(format!(
                    "class {c} fraction {f} is not positive"
                )));
            }
            let sum: f64 = map.values().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(CoreError::InvalidArgument(format!(
                    "class fractions sum to {sum}, expected 1"
                )));
            }
        }
        Ok(())
    }

    /// Compact label such as `proportional` or `0:0.65|1:0.35`.
    pub fn label(&self) -> String {
        match self {
            ClassAllocation::Proportional => "proportional".into(),
            ClassAllocation::Explicit(map) => map
                .iter()
                .map(|(c, f)| format!("{c}:{}", fmt_f64(*f)))
                .collect::<Vec<_>>()
                .join("|"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub coreset_size: usize,
    pub det_ratio: f64,
    pub weight_strategy: WeightStrategy,
    pub class_allocation: ClassAllocation,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.coreset_size == 0 {
            return Err(CoreError::InvalidArgument("coreset_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.det_ratio) {
            return Err(CoreError::InvalidArgument(format!(
                "det_ratio {} outside [0, 1)",
                self.det_ratio
            )));
        }
        self.class_allocation.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Deterministic,
    Sampled,
    /// Added by active-sampling refinement.
    Active,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Deterministic => "deterministic",
            Provenance::Sampled => "sampled",
            Provenance::Active => "active",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "deterministic" => Some(Provenance::Deterministic),
            "sampled" => Some(Provenance::Sampled),
            "active" => Some(Provenance::Active),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoresetEntry {
    pub point_id: PointId,
    pub label: ClassId,
    pub weight: f64,
    pub provenance: Provenance,
    /// Times the point was drawn; 1 for deterministic and active points.
    pub count: usize,
}

/// Weighted subset of a training set: unique point ids with positive
/// weights, ordered by class and then point id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Coreset {
    entries: Vec<CoresetEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoresetStats {
    pub unique_points: usize,
    pub total_weight: f64,
    pub class_counts: BTreeMap<ClassId, usize>,
    pub deterministic: usize,
}

impl Coreset {
    /// Validates uniqueness and weights; entries are re-sorted into the
    /// canonical (class, point id) order.
    pub fn from_entries(mut entries: Vec<CoresetEntry>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(entries.len());
        for e in &entries {
            if !seen.insert(e.point_id) {
                return Err(CoreError::InvalidArgument(format!(
                    "point {} appears twice in the coreset",
                    e.point_id
                )));
            }
            if !(e.weight.is_finite() && e.weight > 0.0) {
                return Err(CoreError::InvalidArgument(format!(
                    "point {} has weight {}",
                    e.point_id, e.weight
                )));
            }
        }
        entries.sort_by_key(|e| (e.label, e.point_id));
        Ok(Coreset { entries })
    }

    pub fn entries(&self) -> &[CoresetEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn point_ids(&self) -> Vec<PointId> {
        self.entries.iter().map(|e| e.point_id).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.weight).collect()
    }

    pub fn labels(&self) -> Vec<ClassId> {
        self.entries.iter().map(|e| e.label).collect()
    }

    pub fn total_weight(&self) -> f64 {
        self.entries.iter().map(|e| e.weight).sum()
    }

    pub fn contains(&self, id: PointId) -> bool {
        self.entries.iter().any(|e| e.point_id == id)
    }

    pub fn stats(&self) -> CoresetStats {
        let mut class_counts = BTreeMap::new();
        for e in &self.entries {
            *class_counts.entry(e.label).or_insert(0) += 1;
        }
        CoresetStats {
            unique_points: self.len(),
            total_weight: self.total_weight(),
            class_counts,
            deterministic: self
                .entries
                .iter()
                .filter(|e| e.provenance == Provenance::Deterministic)
                .count(),
        }
    }

    /// Coreset rows pulled from `train`, carrying the coreset weights.
    pub fn to_dataset(&self, train: &Dataset) -> Result<Dataset> {
        let positions = self
            .entries
            .iter()
            .map(|e| {
                train.position_of(e.point_id).ok_or_else(|| {
                    CoreError::InvalidArgument(format!("coreset point {} is not in the training set", e.point_id))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let rows = train.subset(&positions)?;
        rows.with_weights(self.weights())
    }

    /// Errors unless every label agrees with `train`.
    pub fn check_labels(&self, train: &Dataset) -> Result<()> {
        for e in &self.entries {
            let pos = train
                .position_of(e.point_id)
                .ok_or_else(|| CoreError::InvalidArgument(format!("point {} not in training set", e.point_id)))?;
            if train.labels()[pos] != e.label {
                return Err(CoreError::InvalidArgument(format!(
                    "point {} has coreset label {} but training label {}",
                    e.point_id,
                    e.label,
                    train.labels()[pos]
                )));
            }
        }
        Ok(())
    }

    /// Writes `point_id,class,weight,provenance,count` rows.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "point_id,class,weight,provenance,count")?;
        for e in &self.entries {
            writeln!(
                out,
                "{},{},{},{},{}",
                e.point_id,
                e.label,
                fmt_f64(e.weight),
                e.provenance.as_str(),
                e.count
            )?;
        }
        Ok(())
    }

    pub fn read_csv(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut entries = Vec::new();
        for (r, record) in rdr.records().enumerate() {
            let record = record?;
            let field = |j: usize, name: &str| -> Result<&str> {
                record.get(j).ok_or_else(|| CoreError::Csv {
                    row: r + 2,
                    column: name.into(),
                    message: "missing field".into(),
                })
            };
            let bad = |name: &str, cell: &str| CoreError::Csv {
                row: r + 2,
                column: name.into(),
                message: format!("cannot parse `{cell}`"),
            };
            let id = field(0, "point_id")?;
            let class = field(1, "class")?;
            let weight = field(2, "weight")?;
            let prov = field(3, "provenance")?;
            let count = field(4, "count")?;
            entries.push(CoresetEntry {
                point_id: id.parse().map_err(|_| bad("point_id", id))?,
                label: class.parse().map_err(|_| bad("class", class))?,
                weight: weight.parse().map_err(|_| bad("weight", weight))?,
                provenance: Provenance::parse(prov).ok_or_else(|| bad("provenance", prov))?,
                count: count.parse().map_err(|_| bad("count", count))?,
            });
        }
        Coreset::from_entries(entries)
    }
}

/// Seeded generator for one class; each class gets its own stream.
fn class_rng(seed: u64, class: ClassId) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(class as u64);
    rng
}

/// Builds a weighted coreset of `data` under `config`.
///
/// Pure in `(data, scores, config)`: the seed lives in the config and
/// classes draw from independent streams derived from it.
pub fn build_coreset(data: &Dataset, scores: &SensitivityScores, config: &SamplerConfig) -> Result<Coreset> {
    config.validate()?;
    if scores.len() != data.len() {
        return Err(CoreError::DimensionMismatch(format!(
            "{} scores for {} points",
            scores.len(),
            data.len()
        )));
    }
    let probs = to_probabilities(scores)?;
    let budgets = allocate_class_budgets(config.coreset_size, &data.class_counts(), &config.class_allocation)?;

    let mut entries = Vec::with_capacity(config.coreset_size);
    for (&class, &budget) in &budgets {
        let positions = data.class_positions(class);
        let class_probs: Vec<f64> = positions.iter().map(|&i| probs[i]).collect();
        let class_ids: Vec<PointId> = positions.iter().map(|&i| data.point_ids()[i]).collect();
        let class_weights: Vec<f64> = positions.iter().map(|&i| data.weights()[i]).collect();
        let prev_w: f64 = class_weights.iter().sum();

        let q = select_deterministic(&class_probs, &class_ids, budget, config.det_ratio)?;
        let draws = budget - q.len();
        let mut rng = class_rng(config.seed, class);
        let counts = sample_residual(&class_probs, &q, draws, &mut rng)?;
        let weights = assign_weights(
            config.weight_strategy,
            &q,
            &counts,
            WeightInputs {
                probs: &class_probs,
                source_weights: &class_weights,
                total_size: config.coreset_size,
                class_budget: budget,
                prev_w,
                class,
            },
        )?;

        let det: HashSet<usize> = q.iter().copied().collect();
        for (pos, weight) in weights {
            // Zero-weight source points carry nothing into a weighted loss.
            if weight <= 0.0 {
                continue;
            }
            let (provenance, count) = if det.contains(&pos) {
                (Provenance::Deterministic, 1)
            } else {
                (Provenance::Sampled, counts[&pos])
            };
            entries.push(CoresetEntry {
                point_id: class_ids[pos],
                label: class,
                weight,
                provenance,
                count,
            });
        }
    }
    Coreset::from_entries(entries)
}
