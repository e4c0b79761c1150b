//! Active-sampling refinement of a coreset.
//!
//! Each round trains on the maintained coreset, queries the points of the
//! remaining training pool the model is least certain about, adds them with
//! weight 1, and retrains. Rounds continue until `patience` consecutive
//! rounds fail to improve the validation metric. The refined coreset is
//! returned only if it strictly beats the original on validation.

use std::collections::HashSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, PointId};
use crate::error::{CoreError, Result};
use crate::learners::{decision_scores, evaluate, train_dataset, LinearModel, TrainConfig};
use crate::metrics::Metric;
use crate::numfmt::fmt_f64;
use crate::sampler::{Coreset, CoresetEntry, Provenance};

/// How pool points are ranked for querying. For a binary linear model all
/// three put the smallest `|score|` first, so they select the same points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryStrategy {
    #[default]
    Margin,
    LeastConfidence,
    Entropy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefineConfig {
    pub batch_size: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default)]
    pub metric: Metric,
    #[serde(default)]
    pub query_strategy: QueryStrategy,
    /// Defaults to `⌈|train| / batch_size⌉`.
    #[serde(default)]
    pub max_rounds: Option<usize>,
}

fn default_patience() -> usize {
    2
}

impl RefineConfig {
    pub fn new(batch_size: usize, patience: usize, metric: Metric) -> Self {
        RefineConfig {
            batch_size,
            patience,
            metric,
            query_strategy: QueryStrategy::Margin,
            max_rounds: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(CoreError::InvalidArgument(
                "refine batch_size must be at least 1".into(),
            ));
        }
        if self.patience == 0 {
            return Err(CoreError::InvalidArgument("refine patience must be at least 1".into()));
        }
        if self.max_rounds == Some(0) {
            return Err(CoreError::InvalidArgument(
                "refine max_rounds must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn round_cap(&self, train_len: usize) -> usize {
        self.max_rounds
            .unwrap_or_else(|| train_len.div_ceil(self.batch_size).max(1))
    }
}

/// Consecutive non-improving rounds, reset on improvement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatienceCounter {
    limit: usize,
    count: usize,
}

impl PatienceCounter {
    pub fn new(limit: usize) -> Self {
        PatienceCounter { limit, count: 0 }
    }

    pub fn record(&mut self, improved: bool) -> usize {
        self.count = if improved { 0 } else { self.count + 1 };
        self.count
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn exhausted(&self) -> bool {
        self.count >= self.limit
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    KeptOriginal,
    KeptRefined,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::KeptOriginal => "kept_original",
            Decision::KeptRefined => "kept_refined",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub pool_size: usize,
    pub phi_before: f64,
    pub phi_after: f64,
    pub patience: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineTrace {
    pub rounds: Vec<RoundRecord>,
    pub decision: Decision,
    pub phi_original: f64,
    pub phi_refined: f64,
    pub note: Option<String>,
}

impl RefineTrace {
    pub fn patience_trace(&self) -> Vec<usize> {
        self.rounds.iter().map(|r| r.patience).collect()
    }

    /// `round,pool_size,phi_before,phi_after,patience,decision`, one row per
    /// round with the final decision repeated on each.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "round,pool_size,phi_before,phi_after,patience,decision")?;
        for r in &self.rounds {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.round,
                r.pool_size,
                fmt_f64(r.phi_before),
                fmt_f64(r.phi_after),
                r.patience,
                self.decision.as_str()
            )?;
        }
        Ok(())
    }
}

/// The `k` pool points with the smallest `|score|`, ties by point id.
/// Returns the whole pool when `k` covers it.
pub fn uncertainty_query(
    model: &LinearModel,
    pool: &Dataset,
    k: usize,
    strategy: QueryStrategy,
) -> Result<Vec<PointId>> {
    let scores = decision_scores(model, pool.features())?;
    let ids = pool.point_ids();
    let mut order: Vec<usize> = (0..pool.len()).collect();
    match strategy {
        QueryStrategy::Margin | QueryStrategy::LeastConfidence | QueryStrategy::Entropy => {
            order.sort_by(|&a, &b| scores[a].abs().total_cmp(&scores[b].abs()).then(ids[a].cmp(&ids[b])));
        }
    }
    order.truncate(k);
    Ok(order.into_iter().map(|i| ids[i]).collect())
}

/// The pieces of the refinement loop that touch models and data. The loop
/// itself only sees coresets, point ids and metric values.
pub trait RefineOracle {
    type Model;

    fn fit(&mut self, coreset: &Coreset) -> Result<Self::Model>;

    /// Validation metric of a fitted model; larger is better.
    fn phi(&mut self, model: &Self::Model) -> Result<f64>;

    /// Up to `k` point ids drawn from `pool` (training positions).
    fn query(&mut self, model: &Self::Model, pool: &[usize], k: usize) -> Result<Vec<PointId>>;
}

/// Trains on the coreset with fixed settings, scores on a validation set,
/// queries by uncertainty.
pub struct ValidationOracle<'a> {
    pub train: &'a Dataset,
    pub validation: &'a Dataset,
    pub train_config: &'a TrainConfig,
    pub metric: Metric,
    pub strategy: QueryStrategy,
}

impl RefineOracle for ValidationOracle<'_> {
    type Model = LinearModel;

    fn fit(&mut self, coreset: &Coreset) -> Result<LinearModel> {
        train_dataset(&coreset.to_dataset(self.train)?, self.train_config)
    }

    fn phi(&mut self, model: &LinearModel) -> Result<f64> {
        Ok(self.metric.of(&evaluate(model, self.validation)?))
    }

    fn query(&mut self, model: &LinearModel, pool: &[usize], k: usize) -> Result<Vec<PointId>> {
        uncertainty_query(model, &self.train.subset(pool)?, k, self.strategy)
    }
}

fn checked(phi: f64) -> Result<f64> {
    if phi.is_finite() {
        Ok(phi)
    } else {
        Err(CoreError::NonFinite(format!("validation metric is {phi}")))
    }
}

/// Refines `coreset` against a validation set with the linear learners.
pub fn refine(
    train: &Dataset,
    validation: &Dataset,
    coreset: &Coreset,
    train_config: &TrainConfig,
    config: &RefineConfig,
) -> Result<(Coreset, RefineTrace)> {
    coreset.check_labels(train)?;
    let mut oracle = ValidationOracle {
        train,
        validation,
        train_config,
        metric: config.metric,
        strategy: config.query_strategy,
    };
    refine_with(train, coreset, config, &mut oracle)
}

/// The refinement loop over an arbitrary oracle.
///
/// The improvement test in each round compares the candidate against the
/// previous round's model. The final comparison reuses the first and last
/// fitted models, since retraining on the same coreset is deterministic.
pub fn refine_with<O: RefineOracle>(
    train: &Dataset,
    coreset: &Coreset,
    config: &RefineConfig,
    oracle: &mut O,
) -> Result<(Coreset, RefineTrace)> {
    config.validate()?;
    let cap = config.round_cap(train.len());
    let mut model = oracle.fit(coreset)?;
    let phi_original = checked(oracle.phi(&model)?)?;
    let mut phi_prev = phi_original;

    let mut entries = coreset.entries().to_vec();
    let mut members: HashSet<PointId> = coreset.point_ids().into_iter().collect();
    let mut patience = PatienceCounter::new(config.patience);
    let mut rounds = Vec::new();
    let mut note = None;

    while !patience.exhausted() && rounds.len() < cap {
        let pool: Vec<usize> = (0..train.len())
            .filter(|&i| !members.contains(&train.point_ids()[i]))
            .collect();
        if pool.is_empty() {
            note = Some(if rounds.is_empty() {
                "training pool empty before the first round".to_string()
            } else {
                format!("training pool exhausted after {} rounds", rounds.len())
            });
            break;
        }
        let queried = oracle.query(&model, &pool, config.batch_size)?;
        for id in queried.into_iter().take(config.batch_size) {
            let pos = train
                .position_of(id)
                .ok_or_else(|| CoreError::InvalidArgument(format!("queried point {id} is not in the training set")))?;
            if members.insert(id) {
                entries.push(CoresetEntry {
                    point_id: id,
                    label: train.labels()[pos],
                    weight: 1.0,
                    provenance: Provenance::Active,
                    count: 1,
                });
            }
        }
        let candidate = Coreset::from_entries(entries.clone())?;
        let next = oracle.fit(&candidate)?;
        let phi_after = checked(oracle.phi(&next)?)?;
        let count = patience.record(phi_after > phi_prev);
        rounds.push(RoundRecord {
            round: rounds.len() + 1,
            pool_size: pool.len(),
            phi_before: phi_prev,
            phi_after,
            patience: count,
        });
        model = next;
        phi_prev = phi_after;
    }

    let refined = Coreset::from_entries(entries)?;
    let phi_refined = phi_prev;
    let decision = if phi_refined > phi_original {
        Decision::KeptRefined
    } else {
        Decision::KeptOriginal
    };
    let trace = RefineTrace {
        rounds,
        decision,
        phi_original,
        phi_refined,
        note,
    };
    let out = match decision {
        Decision::KeptRefined => refined,
        Decision::KeptOriginal => coreset.clone(),
    };
    Ok((out, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Features;
    use crate::learners::Loss;

    /// Scripted metric values; models are just the fit count.
    struct Scripted {
        phis: Vec<f64>,
        fits: usize,
    }

    impl RefineOracle for Scripted {
        type Model = usize;

        fn fit(&mut self, _: &Coreset) -> Result<usize> {
            self.fits += 1;
            Ok(self.fits - 1)
        }

        fn phi(&mut self, model: &usize) -> Result<f64> {
            Ok(self.phis[*model])
        }

        fn query(&mut self, _: &usize, pool: &[usize], k: usize) -> Result<Vec<PointId>> {
            Ok(pool.iter().take(k).map(|&i| i as PointId).collect())
        }
    }

    fn toy_train(n: usize) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 - n as f64 / 2.0 + 0.25]).collect();
        let labels = (0..n).map(|i| usize::from(i >= n / 2)).collect();
        Dataset::unweighted(Features::from_rows(&rows).unwrap(), labels).unwrap()
    }

    fn seed_coreset(train: &Dataset, ids: &[PointId]) -> Coreset {
        Coreset::from_entries(
            ids.iter()
                .map(|&id| CoresetEntry {
                    point_id: id,
                    label: train.labels()[train.position_of(id).unwrap()],
                    weight: 2.5,
                    provenance: Provenance::Sampled,
                    count: 1,
                })
                .collect(),
        )
        .unwrap()
    }

    fn hand_counter(signs: &[bool]) -> Vec<usize> {
        let mut c = 0;
        signs
            .iter()
            .map(|&up| {
                c = if up { 0 } else { c + 1 };
                c
            })
            .collect()
    }

    #[test]
    fn patience_trace_for_up_up_down_down() {
        let train = toy_train(40);
        let core = seed_coreset(&train, &[0, 39]);
        // original 0.5, then +, +, -, -
        let mut oracle = Scripted {
            phis: vec![0.5, 0.6, 0.7, 0.65, 0.6],
            fits: 0,
        };
        let cfg = RefineConfig::new(2, 2, Metric::F1);
        let (out, trace) = refine_with(&train, &core, &cfg, &mut oracle).unwrap();
        assert_eq!(trace.rounds.len(), 4);
        assert_eq!(trace.patience_trace(), vec![0, 0, 1, 2]);
        assert_eq!(trace.patience_trace(), hand_counter(&[true, true, false, false]));
        assert_eq!(trace.decision, Decision::KeptRefined);
        assert_eq!(out.len(), 2 + 8);
    }

    #[test]
    fn patience_one_stops_after_a_flat_round() {
        let train = toy_train(20);
        let core = seed_coreset(&train, &[0, 19]);
        let mut oracle = Scripted {
            phis: vec![0.5, 0.5, 0.9],
            fits: 0,
        };
        let cfg = RefineConfig::new(3, 1, Metric::F1);
        let (out, trace) = refine_with(&train, &core, &cfg, &mut oracle).unwrap();
        assert_eq!(trace.rounds.len(), 1);
        assert_eq!(trace.decision, Decision::KeptOriginal);
        assert_eq!(out, core);
    }

    #[test]
    fn small_pool_is_absorbed_whole() {
        let train = toy_train(6);
        let core = seed_coreset(&train, &[0, 1, 4, 5]);
        let mut oracle = Scripted {
            phis: vec![0.4, 0.8],
            fits: 0,
        };
        let cfg = RefineConfig::new(10, 2, Metric::F1);
        let (out, trace) = refine_with(&train, &core, &cfg, &mut oracle).unwrap();
        assert_eq!(trace.decision, Decision::KeptRefined);
        assert_eq!(trace.rounds.len(), 1);
        assert_eq!(out.len(), 6);
        for e in out.entries().iter().filter(|e| e.point_id == 2 || e.point_id == 3) {
            assert_eq!((e.weight, e.provenance), (1.0, Provenance::Active));
        }
    }

    #[test]
    fn empty_pool_returns_original() {
        let train = toy_train(4);
        let core = seed_coreset(&train, &[0, 1, 2, 3]);
        let mut oracle = Scripted {
            phis: vec![0.4],
            fits: 0,
        };
        let (out, trace) = refine_with(&train, &core, &RefineConfig::new(1, 1, Metric::F1), &mut oracle).unwrap();
        assert!(trace.rounds.is_empty());
        assert_eq!(trace.decision, Decision::KeptOriginal);
        assert_eq!(out, core);
    }

    #[test]
    fn non_finite_metric_errors() {
        let train = toy_train(10);
        let core = seed_coreset(&train, &[0, 9]);
        let mut oracle = Scripted {
            phis: vec![0.4, f64::NAN],
            fits: 0,
        };
        let r = refine_with(&train, &core, &RefineConfig::new(1, 1, Metric::F1), &mut oracle);
        assert!(matches!(r, Err(CoreError::NonFinite(_))));
    }

    #[test]
    fn round_cap_bounds_ever_improving_runs() {
        let train = toy_train(30);
        let core = seed_coreset(&train, &[0, 29]);
        let phis: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let mut oracle = Scripted { phis, fits: 0 };
        let mut cfg = RefineConfig::new(1, 1, Metric::F1);
        cfg.max_rounds = Some(5);
        let (_, trace) = refine_with(&train, &core, &cfg, &mut oracle).unwrap();
        assert_eq!(trace.rounds.len(), 5);
    }

    #[test]
    fn query_picks_smallest_margins() {
        let pool = Dataset::unweighted(
            Features::from_rows(&[vec![-3.0], vec![0.1], vec![2.0], vec![-0.05]]).unwrap(),
            vec![0, 1, 1, 0],
        )
        .unwrap();
        let model = LinearModel {
            coefficients: vec![1.0],
            ..LinearModel::zeros(1, Loss::Logistic)
        };
        assert_eq!(
            uncertainty_query(&model, &pool, 2, QueryStrategy::Margin).unwrap(),
            vec![3, 1]
        );
        assert_eq!(
            uncertainty_query(&model, &pool, 9, QueryStrategy::Entropy)
                .unwrap()
                .len(),
            4
        );
        let tied = Dataset::unweighted(
            Features::from_rows(&[vec![0.5], vec![-0.5], vec![2.0]]).unwrap(),
            vec![1, 0, 1],
        )
        .unwrap();
        assert_eq!(
            uncertainty_query(&model, &tied, 1, QueryStrategy::LeastConfidence).unwrap(),
            vec![0]
        );
    }

    #[test]
    fn real_refine_never_worse() {
        let n = 60;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                vec![
                    ((i * 37) % 17) as f64 / 17.0 - 0.5 + if i % 3 == 0 { 0.4 } else { -0.2 },
                    ((i * 11) % 7) as f64 / 7.0,
                ]
            })
            .collect();
        let labels: Vec<usize> = (0..n).map(|i| usize::from(i % 3 == 0)).collect();
        let all = Dataset::unweighted(Features::from_rows(&rows).unwrap(), labels).unwrap();
        let train = all.subset(&(0..40).collect::<Vec<_>>()).unwrap();
        let val = all.subset(&(40..60).collect::<Vec<_>>()).unwrap();
        let core = seed_coreset(&train, &[0, 1, 2, 3, 4, 5]);
        let cfg = RefineConfig::new(4, 2, Metric::F1);
        let tc = TrainConfig::default();
        let (out, trace) = refine(&train, &val, &core, &tc, &cfg).unwrap();
        let phi = |c: &Coreset| {
            let m = train_dataset(&c.to_dataset(&train).unwrap(), &tc).unwrap();
            Metric::F1.of(&evaluate(&m, &val).unwrap())
        };
        assert!(phi(&out) >= phi(&core));
        assert_eq!(trace.phi_original, phi(&core));
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), trace.rounds.len() + 1);
    }
}
