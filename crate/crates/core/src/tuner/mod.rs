//! Grid search over the sampler's knobs, selected on a validation metric.
//!
//! Every cell of the grid is a coreset configuration evaluated over several
//! seeded repeats. Cells are ranked by the mean validation metric; test
//! metrics are recorded alongside but never consulted for ranking. The
//! vanilla configuration is always present at every coreset ratio so tuned
//! and vanilla coresets can be compared within one run.

mod report;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use report::{
    write_cells_csv, write_comparison_csv, write_curve_csv, write_trials_csv, ComparisonRow, CurveRow, Method,
};

use crate::dataset::{Dataset, SplitBundle};
use crate::error::{CoreError, Result};
use crate::learners::{evaluate, train_dataset, TrainConfig};
use crate::metrics::{Metric, MetricsReport};
use crate::refine::{refine, RefineConfig, RefineTrace};
use crate::sampler::{build_coreset, ClassAllocation, Coreset, CoresetStats, SamplerConfig, WeightStrategy};
use crate::sensitivity::{uniform_scores, SensitivityScores};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Coreset size as a fraction of the training set, in (0, 1].
    pub coreset_ratios: Vec<f64>,
    pub det_ratios: Vec<f64>,
    pub weight_strategies: Vec<WeightStrategy>,
    pub class_allocations: Vec<ClassAllocation>,
    /// Optional regularization axis; the training config's C otherwise.
    #[serde(default, rename = "C_values")]
    pub c_values: Option<Vec<f64>>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub metric: Metric,
}

fn default_repeats() -> usize {
    3
}

impl GridSpec {
    /// Grid used for the a9a experiments: 5 sizes, 6 deterministic ratios,
    /// 3 weight strategies and 7 class maps from 80/20 to 50/50.
    pub fn a9a() -> Self {
        GridSpec {
            coreset_ratios: vec![0.005, 0.05375, 0.1025, 0.15125, 0.2],
            det_ratios: vec![0.05, 0.1, 0.2, 0.3, 0.4, 0.5],
            weight_strategies: WeightStrategy::ALL.to_vec(),
            class_allocations: [80, 75, 70, 65, 60, 55, 50]
                .iter()
                .map(|&p| ClassAllocation::explicit(&[(0, p as f64 / 100.0), (1, (100 - p) as f64 / 100.0)]))
                .collect(),
            c_values: None,
            repeats: default_repeats(),
            base_seed: 0,
            metric: Metric::F1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonempty = [
            ("coreset_ratios", self.coreset_ratios.is_empty()),
            ("det_ratios", self.det_ratios.is_empty()),
            ("weight_strategies", self.weight_strategies.is_empty()),
            ("class_allocations", self.class_allocations.is_empty()),
            ("C_values", self.c_values.as_ref().is_some_and(|v| v.is_empty())),
        ];
        if let Some((name, _)) = nonempty.iter().find(|(_, empty)| *empty) {
            return Err(CoreError::InvalidArgument(format!("grid axis {name} is empty")));
        }
        for &r in &self.coreset_ratios {
            check_ratio(r)?;
        }
        if let Some(d) = self.det_ratios.iter().find(|d| !(0.0..1.0).contains(*d)) {
            return Err(CoreError::InvalidArgument(format!("det ratio {d} outside [0, 1)")));
        }
        for a in &self.class_allocations {
            a.validate()?;
        }
        if let Some(c) = self.c_values.iter().flatten().find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(CoreError::InvalidArgument(format!("C value {c} is not positive")));
        }
        if self.repeats == 0 {
            return Err(CoreError::InvalidArgument("repeats must be at least 1".into()));
        }
        Ok(())
    }

    /// Cells in Cartesian order (ratio, det ratio, strategy, allocation, C),
    /// followed by a vanilla cell for each (ratio, C) the product lacks.
    pub fn cells(&self, default_c: f64) -> Vec<CellConfig> {
        let cs = self.c_values.clone().unwrap_or_else(|| vec![default_c]);
        let mut cells = Vec::new();
        for &coreset_ratio in &self.coreset_ratios {
            for &det_ratio in &self.det_ratios {
                for &weight_strategy in &self.weight_strategies {
                    for class_allocation in &self.class_allocations {
                        for &c in &cs {
                            cells.push(CellConfig {
                                coreset_ratio,
                                det_ratio,
                                weight_strategy,
                                class_allocation: class_allocation.clone(),
                                c,
                            });
                        }
                    }
                }
            }
        }
        for &ratio in &self.coreset_ratios {
            for &c in &cs {
                let v = CellConfig::vanilla(ratio, c);
                if !cells.contains(&v) {
                    cells.push(v);
                }
            }
        }
        cells
    }

    pub fn seed(&self, cell: usize, repeat: usize) -> u64 {
        self.base_seed.wrapping_add((cell * self.repeats + repeat) as u64)
    }
}

fn check_ratio(r: f64) -> Result<()> {
    if r > 0.0 && r <= 1.0 {
        Ok(())
    } else {
        Err(CoreError::InvalidArgument(format!("coreset ratio {r} outside (0, 1]")))
    }
}

/// One grid cell: a sampler configuration with the size given as a ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellConfig {
    pub coreset_ratio: f64,
    pub det_ratio: f64,
    pub weight_strategy: WeightStrategy,
    pub class_allocation: ClassAllocation,
    #[serde(rename = "C")]
    pub c: f64,
}

impl CellConfig {
    pub fn vanilla(coreset_ratio: f64, c: f64) -> Self {
        CellConfig {
            coreset_ratio,
            det_ratio: 0.0,
            weight_strategy: WeightStrategy::Inv,
            class_allocation: ClassAllocation::Proportional,
            c,
        }
    }

    pub fn is_vanilla(&self) -> bool {
        self.det_ratio == 0.0
            && self.weight_strategy == WeightStrategy::Inv
            && self.class_allocation == ClassAllocation::Proportional
    }

    /// `round(ratio · n)`, at least 1.
    pub fn coreset_size(&self, n: usize) -> usize {
        ((self.coreset_ratio * n as f64).round() as usize).max(1)
    }

    pub fn sampler_config(&self, n: usize, seed: u64) -> SamplerConfig {
        SamplerConfig {
            coreset_size: self.coreset_size(n),
            det_ratio: self.det_ratio,
            weight_strategy: self.weight_strategy,
            class_allocation: self.class_allocation.clone(),
            seed,
        }
    }
}

/// The untuned baseline: no deterministic points, inverse-probability
/// weights, proportional class budgets.
pub fn vanilla_config(coreset_ratio: f64, c: f64) -> Result<CellConfig> {
    check_ratio(coreset_ratio)?;
    Ok(CellConfig::vanilla(coreset_ratio, c))
}

/// One seeded repeat of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub cell: usize,
    pub repeat: usize,
    pub seed: u64,
    pub config: CellConfig,
    pub provider: String,
    pub validation: MetricsReport,
    pub test: MetricsReport,
    pub stats: CoresetStats,
}

/// Per-metric means over a set of reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricMeans {
    pub f1: f64,
    pub balanced_accuracy: f64,
    pub accuracy: f64,
    pub roc_auc: f64,
    pub average_precision: f64,
}

impl MetricMeans {
    pub fn of<'a>(reports: impl IntoIterator<Item = &'a MetricsReport>) -> Self {
        let mut sum = [0.0; 5];
        let mut n = 0usize;
        for r in reports {
            n += 1;
            for (s, m) in sum.iter_mut().zip(ALL_METRICS) {
                *s += m.of(r);
            }
        }
        let k = n.max(1) as f64;
        MetricMeans {
            f1: sum[0] / k,
            balanced_accuracy: sum[1] / k,
            accuracy: sum[2] / k,
            roc_auc: sum[3] / k,
            average_precision: sum[4] / k,
        }
    }

    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::F1 => self.f1,
            Metric::BalancedAccuracy => self.balanced_accuracy,
            Metric::Accuracy => self.accuracy,
            Metric::RocAuc => self.roc_auc,
            Metric::AveragePrecision => self.average_precision,
        }
    }
}

const ALL_METRICS: [Metric; 5] = [
    Metric::F1,
    Metric::BalancedAccuracy,
    Metric::Accuracy,
    Metric::RocAuc,
    Metric::AveragePrecision,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub index: usize,
    pub config: CellConfig,
    pub trials: Vec<TrialResult>,
    /// Set when any repeat failed; the cell is then left out of the ranking.
    pub error: Option<String>,
    pub rank: Option<usize>,
}

impl CellResult {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    pub fn validation(&self) -> MetricMeans {
        MetricMeans::of(self.trials.iter().map(|t| &t.validation))
    }

    pub fn test(&self) -> MetricMeans {
        MetricMeans::of(self.trials.iter().map(|t| &t.test))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome {
    pub metric: Metric,
    pub provider: String,
    /// In cell order.
    pub cells: Vec<CellResult>,
    /// Indices of successful cells, best first.
    pub ranking: Vec<usize>,
}

impl GridOutcome {
    pub fn best(&self) -> Option<&CellResult> {
        self.ranking.first().map(|&i| &self.cells[i])
    }

    pub fn failed(&self) -> usize {
        self.cells.iter().filter(|c| !c.is_ok()).count()
    }

    pub fn vanilla_at(&self, coreset_ratio: f64, c: f64) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|cell| cell.config == CellConfig::vanilla(coreset_ratio, c))
    }

    /// Best successful cell at a given coreset ratio.
    pub fn best_at(&self, coreset_ratio: f64) -> Option<&CellResult> {
        self.ranking
            .iter()
            .map(|&i| &self.cells[i])
            .find(|cell| cell.config.coreset_ratio == coreset_ratio)
    }
}

fn run_trial(
    splits: &SplitBundle,
    scores: &SensitivityScores,
    config: &CellConfig,
    train_config: &TrainConfig,
    cell: usize,
    repeat: usize,
    seed: u64,
) -> Result<TrialResult> {
    let coreset = build_coreset(&splits.train, scores, &config.sampler_config(splits.train.len(), seed))?;
    let tc = TrainConfig {
        c: config.c,
        ..train_config.clone()
    };
    let model = train_dataset(&coreset.to_dataset(&splits.train)?, &tc)?;
    Ok(TrialResult {
        cell,
        repeat,
        seed,
        config: config.clone(),
        provider: scores.provider().to_string(),
        validation: evaluate(&model, &splits.validation)?,
        test: evaluate(&model, &splits.test)?,
        stats: coreset.stats(),
    })
}

fn check_inputs(splits: &SplitBundle, scores: &SensitivityScores) -> Result<()> {
    if scores.len() != splits.train.len() {
        return Err(CoreError::DimensionMismatch(format!(
            "{} sensitivity scores for {} training points",
            scores.len(),
            splits.train.len()
        )));
    }
    for (name, part) in splits.parts() {
        if part.is_empty() {
            return Err(CoreError::EmptyInput(format!("{name} split is empty")));
        }
    }
    Ok(())
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CoreError::InvalidArgument(format!("cannot start worker pool: {e}")))
}

/// Evaluates every cell and repeat on `workers` threads (0 picks the
/// number of CPUs). Results come back in cell order regardless of
/// scheduling. A failing repeat marks its cell failed without stopping
/// the run.
pub fn run_grid(
    splits: &SplitBundle,
    scores: &SensitivityScores,
    grid: &GridSpec,
    train_config: &TrainConfig,
    workers: usize,
) -> Result<GridOutcome> {
    grid.validate()?;
    train_config.validate()?;
    check_inputs(splits, scores)?;
    let cells = grid.cells(train_config.c);
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..grid.repeats).map(move |r| (c, r)))
        .collect();
    let results: Vec<Result<TrialResult>> = pool(workers)?.install(|| {
        jobs.par_iter()
            .map(|&(c, r)| run_trial(splits, scores, &cells[c], train_config, c, r, grid.seed(c, r)))
            .collect()
    });

    let mut out: Vec<CellResult> = cells
        .into_iter()
        .enumerate()
        .map(|(index, config)| CellResult {
            index,
            config,
            trials: Vec::with_capacity(grid.repeats),
            error: None,
            rank: None,
        })
        .collect();
    for ((c, r), res) in jobs.into_iter().zip(results) {
        let cell = &mut out[c];
        match res {
            Ok(t) => cell.trials.push(t),
            Err(e) => {
                if cell.error.is_none() {
                    log::warn!("cell {c} repeat {r} failed: {e}");
                    cell.error = Some(e.to_string());
                }
            }
        }
    }

    let mut ranking: Vec<usize> = out.iter().filter(|c| c.is_ok()).map(|c| c.index).collect();
    let score: Vec<f64> = out.iter().map(|c| c.validation().get(grid.metric)).collect();
    ranking.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
    for (rank, &i) in ranking.iter().enumerate() {
        out[i].rank = Some(rank + 1);
    }
    Ok(GridOutcome {
        metric: grid.metric,
        provider: scores.provider().to_string(),
        cells: out,
        ranking,
    })
}

/// Means over `seeds` for one cell configuration.
fn evaluate_config(
    splits: &SplitBundle,
    scores: &SensitivityScores,
    config: &CellConfig,
    train_config: &TrainConfig,
    seeds: &[u64],
) -> Result<(MetricMeans, MetricMeans)> {
    let trials = seeds
        .iter()
        .enumerate()
        .map(|(r, &s)| run_trial(splits, scores, config, train_config, 0, r, s))
        .collect::<Result<Vec<_>>>()?;
    Ok((
        MetricMeans::of(trials.iter().map(|t| &t.validation)),
        MetricMeans::of(trials.iter().map(|t| &t.test)),
    ))
}

fn full_data(splits: &SplitBundle, train_config: &TrainConfig, c: f64) -> Result<(MetricMeans, MetricMeans)> {
    let tc = TrainConfig {
        c,
        ..train_config.clone()
    };
    let model = train_dataset(&splits.train, &tc)?;
    Ok((
        MetricMeans::of([&evaluate(&model, &splits.validation)?]),
        MetricMeans::of([&evaluate(&model, &splits.test)?]),
    ))
}

fn rows(method: Method, ratio: f64, (val, test): (MetricMeans, MetricMeans)) -> [ComparisonRow; 2] {
    [
        ComparisonRow {
            method,
            split: "validation".into(),
            coreset_ratio: ratio,
            metrics: val,
        },
        ComparisonRow {
            method,
            split: "test".into(),
            coreset_ratio: ratio,
            metrics: test,
        },
    ]
}

/// Tuned, vanilla, uniform-sampling and full-data results at the best
/// cell's ratio and C. Random coresets reuse the vanilla cell's seeds.
pub fn compare_to_baselines(
    splits: &SplitBundle,
    outcome: &GridOutcome,
    train_config: &TrainConfig,
) -> Result<Vec<ComparisonRow>> {
    let best = outcome
        .best()
        .ok_or_else(|| CoreError::EmptyInput("every grid cell failed".into()))?;
    let (ratio, c) = (best.config.coreset_ratio, best.config.c);
    let vanilla = outcome
        .vanilla_at(ratio, c)
        .filter(|v| v.is_ok())
        .ok_or_else(|| CoreError::InvalidArgument(format!("vanilla cell at ratio {ratio} failed")))?;
    let seeds: Vec<u64> = vanilla.trials.iter().map(|t| t.seed).collect();
    let uniform = uniform_scores(splits.train.len())?;

    let mut out = Vec::with_capacity(8);
    out.extend(rows(Method::Tuned, ratio, (best.validation(), best.test())));
    out.extend(rows(Method::Vanilla, ratio, (vanilla.validation(), vanilla.test())));
    out.extend(rows(
        Method::Random,
        ratio,
        evaluate_config(splits, &uniform, &vanilla.config, train_config, &seeds)?,
    ));
    out.extend(rows(Method::Full, 1.0, full_data(splits, train_config, c)?));
    Ok(out)
}

/// F1 per coreset ratio for the tuned, vanilla, random and full methods.
pub fn f1_curve(splits: &SplitBundle, outcome: &GridOutcome, train_config: &TrainConfig) -> Result<Vec<CurveRow>> {
    let mut ratios: Vec<f64> = outcome.cells.iter().map(|c| c.config.coreset_ratio).collect();
    ratios.sort_by(f64::total_cmp);
    ratios.dedup();
    let uniform = uniform_scores(splits.train.len())?;
    let full_c = outcome.best().map_or(train_config.c, |b| b.config.c);
    let full = full_data(splits, train_config, full_c)?;

    let mut out = Vec::new();
    let mut push = |ratio: f64, method: Method, (val, test): (MetricMeans, MetricMeans)| {
        for (split, m) in [("validation", val), ("test", test)] {
            out.push(CurveRow {
                coreset_ratio: ratio,
                method,
                split: split.into(),
                f1: m.f1,
            });
        }
    };
    for ratio in ratios {
        let Some(tuned) = outcome.best_at(ratio) else {
            continue;
        };
        push(ratio, Method::Tuned, (tuned.validation(), tuned.test()));
        if let Some(v) = outcome.vanilla_at(ratio, tuned.config.c).filter(|v| v.is_ok()) {
            push(ratio, Method::Vanilla, (v.validation(), v.test()));
            let seeds: Vec<u64> = v.trials.iter().map(|t| t.seed).collect();
            push(
                ratio,
                Method::Random,
                evaluate_config(splits, &uniform, &v.config, train_config, &seeds)?,
            );
        }
        push(ratio, Method::Full, full);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinedBest {
    pub base: TrialResult,
    pub coreset: Coreset,
    pub trace: RefineTrace,
    pub validation: MetricsReport,
    pub test: MetricsReport,
}

/// Rebuilds the best cell's first repeat and refines it. When refinement is
/// rejected the returned metrics are those of the rebuilt coreset.
pub fn refine_best(
    splits: &SplitBundle,
    scores: &SensitivityScores,
    best: &CellResult,
    refine_config: &RefineConfig,
    train_config: &TrainConfig,
) -> Result<RefinedBest> {
    let base = best
        .trials
        .first()
        .ok_or_else(|| CoreError::InvalidArgument(format!("cell {} has no successful trials", best.index)))?
        .clone();
    let tc = TrainConfig {
        c: best.config.c,
        ..train_config.clone()
    };
    let original = build_coreset(
        &splits.train,
        scores,
        &best.config.sampler_config(splits.train.len(), base.seed),
    )?;
    let (coreset, trace) = refine(&splits.train, &splits.validation, &original, &tc, refine_config)?;
    let (validation, test) = if coreset == original {
        (base.validation, base.test)
    } else {
        let model = train_dataset(&coreset.to_dataset(&splits.train)?, &tc)?;
        (evaluate(&model, &splits.validation)?, evaluate(&model, &splits.test)?)
    };
    Ok(RefinedBest {
        base,
        coreset,
        trace,
        validation,
        test,
    })
}

/// Class budgets for a cell as they would be drawn on `train`; handy for
/// reporting which cells are infeasible before running them.
pub fn cell_budgets(train: &Dataset, config: &CellConfig) -> Result<BTreeMap<usize, usize>> {
    crate::sampler::allocate_class_budgets(
        config.coreset_size(train.len()),
        &train.class_counts(),
        &config.class_allocation,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{stratified_split, SplitFractions};
    use crate::sensitivity::{Leverage, SensitivityProvider};
    use crate::synthetic::GaussianMixture;

    fn splits() -> SplitBundle {
        let data = GaussianMixture::new(600, 4, 0.2, 2.0).generate(5).unwrap();
        stratified_split(&data, SplitFractions::default(), 0).unwrap()
    }

    fn small_grid() -> GridSpec {
        GridSpec {
            coreset_ratios: vec![0.1, 0.2],
            det_ratios: vec![0.1, 0.3],
            weight_strategies: vec![WeightStrategy::Inv, WeightStrategy::Keep],
            class_allocations: vec![ClassAllocation::explicit(&[(0, 0.6), (1, 0.4)])],
            c_values: None,
            repeats: 2,
            base_seed: 11,
            metric: Metric::F1,
        }
    }

    #[test]
    fn a9a_grid_has_630_cells_plus_vanilla() {
        let g = GridSpec::a9a();
        g.validate().unwrap();
        let cells = g.cells(1.0);
        assert_eq!(cells.len(), 630 + 5);
        assert_eq!(cells.iter().filter(|c| c.is_vanilla()).count(), 5);
    }

    #[test]
    fn vanilla_not_duplicated() {
        let mut g = small_grid();
        g.det_ratios = vec![0.0];
        g.class_allocations = vec![ClassAllocation::Proportional];
        g.weight_strategies = vec![WeightStrategy::Inv];
        assert_eq!(g.cells(1.0).len(), 2);
    }

    #[test]
    fn vanilla_config_examples() {
        let v = vanilla_config(0.1, 1.0).unwrap();
        assert_eq!((v.det_ratio, v.weight_strategy), (0.0, WeightStrategy::Inv));
        assert_eq!(v.class_allocation, ClassAllocation::Proportional);
        assert_eq!(v, vanilla_config(0.1, 1.0).unwrap());
        assert!(vanilla_config(0.0, 1.0).is_err());
    }

    #[test]
    fn grid_is_deterministic_and_ranked() {
        let s = splits();
        let scores = Leverage::default().scores(&s.train).unwrap();
        let tc = TrainConfig::default();
        let a = run_grid(&s, &scores, &small_grid(), &tc, 2).unwrap();
        let b = run_grid(&s, &scores, &small_grid(), &tc, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.cells.len(), 8 + 2);
        let vals: Vec<f64> = a.ranking.iter().map(|&i| a.cells[i].validation().f1).collect();
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        let rows = compare_to_baselines(&s, &a, &tc).unwrap();
        assert_eq!(rows.iter().filter(|r| r.method == Method::Full).count(), 2);
    }

    #[test]
    fn one_cell_grid() {
        let s = splits();
        let scores = uniform_scores(s.train.len()).unwrap();
        let mut g = small_grid();
        g.coreset_ratios = vec![0.2];
        g.det_ratios = vec![0.0];
        g.weight_strategies = vec![WeightStrategy::Inv];
        g.class_allocations = vec![ClassAllocation::Proportional];
        let out = run_grid(&s, &scores, &g, &TrainConfig::default(), 1).unwrap();
        assert_eq!(out.cells.len(), 1);
        assert_eq!(out.ranking, vec![0]);
        let rows = compare_to_baselines(&s, &out, &TrainConfig::default()).unwrap();
        let tuned: Vec<_> = rows.iter().filter(|r| r.method == Method::Tuned).collect();
        let vanilla: Vec<_> = rows.iter().filter(|r| r.method == Method::Vanilla).collect();
        assert_eq!(tuned[0].metrics, vanilla[0].metrics);
    }

    #[test]
    fn infeasible_cells_fail_without_stopping_the_run() {
        let s = splits();
        let scores = uniform_scores(s.train.len()).unwrap();
        let mut g = small_grid();
        g.class_allocations
            .push(ClassAllocation::explicit(&[(0, 0.5), (2, 0.5)]));
        let out = run_grid(&s, &scores, &g, &TrainConfig::default(), 2).unwrap();
        assert_eq!(out.failed(), 8);
        assert_eq!(out.ranking.len(), out.cells.len() - 8);
        assert!(out.ranking.iter().all(|&i| out.cells[i].is_ok()));
    }

    #[test]
    fn refine_best_keeps_or_improves() {
        let s = splits();
        let scores = Leverage::default().scores(&s.train).unwrap();
        let tc = TrainConfig::default();
        let out = run_grid(&s, &scores, &small_grid(), &tc, 2).unwrap();
        let best = out.best().unwrap();
        let cfg = RefineConfig::new(5, 2, Metric::F1);
        let r = refine_best(&s, &scores, best, &cfg, &tc).unwrap();
        match r.trace.decision {
            crate::refine::Decision::KeptOriginal => assert_eq!(r.validation, r.base.validation),
            crate::refine::Decision::KeptRefined => assert!(r.validation.f1 > r.base.validation.f1),
        }
        assert!(r.trace.rounds.len() <= cfg.round_cap(s.train.len()));
    }
}
