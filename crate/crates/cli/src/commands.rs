//! One function per subcommand. Each reads its upstream artifacts from the
//! output directory and writes its own, every file stamped with the config
//! hash.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use coretune::dataset::SplitBundle;
use coretune::learners::TrainConfig;
use coretune::metrics::{MetricsReport, REPORT_CSV_HEADER};
use coretune::numfmt::fmt_f64;
use coretune::refine::Decision;
use coretune::sampler::{build_coreset, CoresetStats};
use coretune::sensitivity::{write_scores_csv, Precomputed, SensitivityProvider, SensitivityScores};
use coretune::tuner::{
    compare_to_baselines, f1_curve, refine_best, run_grid, write_cells_csv, write_comparison_csv, write_curve_csv,
    write_trials_csv, CellConfig, GridOutcome, MetricMeans,
};
use coretune::write_atomic;
use serde::{Deserialize, Serialize};

use crate::config::Loaded;
use crate::UsageError;

/// What a command finished with, beyond success or an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Done,
    PartialGrid,
}

struct Layout {
    root: PathBuf,
}

impl Layout {
    fn new(loaded: &Loaded) -> Self {
        Layout {
            root: loaded.output_dir(),
        }
    }

    fn splits(&self) -> PathBuf {
        self.root.join("splits")
    }

    fn scores(&self) -> PathBuf {
        self.root.join("scores.csv")
    }

    fn coreset(&self) -> PathBuf {
        self.root.join("coreset.csv")
    }

    fn tune(&self) -> PathBuf {
        self.root.join("tune")
    }

    fn outcome(&self) -> PathBuf {
        self.tune().join("outcome.json")
    }

    fn refine(&self) -> PathBuf {
        self.root.join("refine")
    }

    fn report(&self) -> PathBuf {
        self.root.join("report")
    }
}

fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn missing(what: &str, path: &Path, producer: &str) -> anyhow::Error {
    UsageError::new(format!("{what} not found at {}; run {producer} first", path.display())).into()
}

/// Writes a CSV whose first line is `# config_hash=<hash>`.
fn write_csv_artifact(
    path: &Path,
    hash: &str,
    body: impl FnOnce(&mut dyn Write) -> coretune::Result<()>,
) -> anyhow::Result<()> {
    write_atomic(path, |w| {
        writeln!(w, "# config_hash={hash}")?;
        body(w)
    })
    .with_context(|| format!("writing {}", path.display()))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn write_json_artifact<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(std::io::Error::from)?;
        writeln!(w)?;
        Ok(())
    })
    .with_context(|| format!("writing {}", path.display()))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn load_splits(layout: &Layout) -> anyhow::Result<SplitBundle> {
    let dir = layout.splits();
    if !dir.join(coretune::dataset::MANIFEST_FILE).is_file() {
        return Err(missing("splits", &dir, "split"));
    }
    let (bundle, _) = SplitBundle::read_dir(&dir).with_context(|| format!("reading splits from {}", dir.display()))?;
    Ok(bundle)
}

fn load_scores(loaded: &Loaded, layout: &Layout, splits: &SplitBundle) -> anyhow::Result<SensitivityScores> {
    let path = layout.scores();
    if !path.is_file() {
        return Err(missing("sensitivity scores", &path, "score"));
    }
    let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    let provider = Precomputed::from_csv(loaded.config.sensitivity.id(), BufReader::new(file))
        .with_context(|| format!("reading {}", path.display()))?;
    let scores = provider
        .scores(&splits.train)
        .with_context(|| format!("{} does not cover the training split; rerun score", path.display()))?;
    Ok(scores)
}

#[derive(Debug, Serialize, Deserialize)]
struct OutcomeFile {
    config_hash: String,
    outcome: GridOutcome,
}

fn load_outcome(layout: &Layout) -> anyhow::Result<GridOutcome> {
    let path = layout.outcome();
    if !path.is_file() {
        return Err(missing("tuning results", &path, "tune"));
    }
    let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    let parsed: OutcomeFile =
        serde_json::from_reader(BufReader::new(file)).with_context(|| format!("parsing {}", path.display()))?;
    Ok(parsed.outcome)
}

pub fn split(loaded: &Loaded) -> anyhow::Result<Status> {
    let layout = Layout::new(loaded);
    let data = loaded.read_dataset()?;
    data.require_binary()?;
    let cfg = &loaded.config;
    let bundle = coretune::dataset::stratified_split(&data, cfg.split, cfg.seed)?;
    let dir = layout.splits();
    ensure_dir(&dir)?;
    bundle
        .write_dir(&dir, cfg.seed, cfg.split, Some(&loaded.hash()))
        .with_context(|| format!("writing splits to {}", dir.display()))?;
    log::info!(
        "split {} points into {}/{}/{} under {}",
        data.len(),
        bundle.train.len(),
        bundle.validation.len(),
        bundle.test.len(),
        dir.display()
    );
    Ok(Status::Done)
}

pub fn score(loaded: &Loaded) -> anyhow::Result<Status> {
    let layout = Layout::new(loaded);
    let splits = load_splits(&layout)?;
    let provider = loaded.config.sensitivity.build(&loaded.base_dir)?;
    let scores = provider.scores(&splits.train)?;
    ensure_dir(&layout.root)?;
    write_csv_artifact(&layout.scores(), &loaded.hash(), |w| {
        write_scores_csv(&splits.train, &scores, w)
    })?;
    log::info!(
        "{} sensitivities over {} training points, total {}",
        provider.name(),
        scores.len(),
        fmt_f64(scores.total())
    );
    Ok(Status::Done)
}

pub fn build(loaded: &Loaded) -> anyhow::Result<Status> {
    let layout = Layout::new(loaded);
    let splits = load_splits(&layout)?;
    let scores = load_scores(loaded, &layout, &splits)?;
    let cell = loaded.config.sampler.cell(loaded.config.train.c);
    let sampler = cell.sampler_config(splits.train.len(), loaded.config.seed);
    let coreset = build_coreset(&splits.train, &scores, &sampler)?;
    write_csv_artifact(&layout.coreset(), &loaded.hash(), |w| coreset.write_csv(w))?;
    log_stats("coreset", &coreset.stats());
    Ok(Status::Done)
}

fn log_stats(what: &str, stats: &CoresetStats) {
    log::info!(
        "{what}: {} unique points, total weight {}, classes {:?}",
        stats.unique_points,
        fmt_f64(stats.total_weight),
        stats.class_counts
    );
}

#[derive(Debug, Serialize)]
struct BestConfig<'a> {
    config_hash: &'a str,
    metric: coretune::metrics::Metric,
    provider: &'a str,
    cell: usize,
    config: &'a CellConfig,
    validation: MetricMeans,
    test: MetricMeans,
}

pub fn tune(loaded: &Loaded) -> anyhow::Result<Status> {
    let layout = Layout::new(loaded);
    let grid = loaded.grid()?;
    let splits = load_splits(&layout)?;
    let scores = load_scores(loaded, &layout, &splits)?;
    let outcome = run_grid(&splits, &scores, grid, &loaded.config.train, loaded.config.workers)?;
    let hash = loaded.hash();
    let dir = layout.tune();
    ensure_dir(&dir)?;
    write_csv_artifact(&dir.join("cells.csv"), &hash, |w| write_cells_csv(&outcome, w))?;
    write_csv_artifact(&dir.join("trials.csv"), &hash, |w| write_trials_csv(&outcome, w))?;
    write_json_artifact(
        &layout.outcome(),
        &OutcomeFile {
            config_hash: hash.clone(),
            outcome: outcome.clone(),
        },
    )?;
    match outcome.best() {
        Some(best) => {
            write_json_artifact(
                &dir.join("best_config.json"),
                &BestConfig {
                    config_hash: &hash,
                    metric: outcome.metric,
                    provider: &outcome.provider,
                    cell: best.index,
                    config: &best.config,
                    validation: best.validation(),
                    test: best.test(),
                },
            )?;
            log::info!(
                "best cell {} with validation {:?} {}",
                best.index,
                outcome.metric,
                fmt_f64(best.validation().get(outcome.metric))
            );
        }
        None => anyhow::bail!("every grid cell failed; see {}", dir.join("cells.csv").display()),
    }
    let failed = outcome.failed();
    if failed > 0 {
        log::warn!("{failed} of {} grid cells failed", outcome.cells.len());
        return Ok(Status::PartialGrid);
    }
    Ok(Status::Done)
}

#[derive(Debug, Serialize)]
struct RefineSummary<'a> {
    config_hash: &'a str,
    cell: usize,
    seed: u64,
    decision: Decision,
    rounds: usize,
    phi_original: f64,
    phi_refined: f64,
    note: Option<&'a str>,
    original_size: usize,
    refined_size: usize,
    validation: &'a MetricsReport,
    test: &'a MetricsReport,
}

pub fn refine(loaded: &Loaded) -> anyhow::Result<Status> {
    let layout = Layout::new(loaded);
    let refine_cfg = loaded.refine()?;
    let outcome = load_outcome(&layout)?;
    let best = outcome
        .best()
        .ok_or_else(|| anyhow::anyhow!("tuning results hold no successful cell"))?;
    let splits = load_splits(&layout)?;
    let scores = load_scores(loaded, &layout, &splits)?;
    let refined = refine_best(&splits, &scores, best, refine_cfg, &loaded.config.train)?;
    let hash = loaded.hash();
    let dir = layout.refine();
    ensure_dir(&dir)?;
    write_csv_artifact(&dir.join("coreset.csv"), &hash, |w| refined.coreset.write_csv(w))?;
    write_csv_artifact(&dir.join("trace.csv"), &hash, |w| refined.trace.write_csv(w))?;
    write_json_artifact(
        &dir.join("summary.json"),
        &RefineSummary {
            config_hash: &hash,
            cell: best.index,
            seed: refined.base.seed,
            decision: refined.trace.decision,
            rounds: refined.trace.rounds.len(),
            phi_original: refined.trace.phi_original,
            phi_refined: refined.trace.phi_refined,
            note: refined.trace.note.as_deref(),
            original_size: refined.base.stats.unique_points,
            refined_size: refined.coreset.len(),
            validation: &refined.validation,
            test: &refined.test,
        },
    )?;
    log::info!(
        "refinement {} after {} rounds (phi {} -> {})",
        refined.trace.decision.as_str(),
        refined.trace.rounds.len(),
        fmt_f64(refined.trace.phi_original),
        fmt_f64(refined.trace.phi_refined)
    );
    Ok(Status::Done)
}

pub fn report(loaded: &Loaded) -> anyhow::Result<Status> {
    let layout = Layout::new(loaded);
    let outcome = load_outcome(&layout)?;
    let splits = load_splits(&layout)?;
    let train: &TrainConfig = &loaded.config.train;
    let comparison = compare_to_baselines(&splits, &outcome, train)?;
    let curve = f1_curve(&splits, &outcome, train)?;
    let hash = loaded.hash();
    let dir = layout.report();
    ensure_dir(&dir)?;
    write_csv_artifact(&dir.join("comparison.csv"), &hash, |w| {
        write_comparison_csv(&comparison, w)
    })?;
    write_csv_artifact(&dir.join("curve.csv"), &hash, |w| write_curve_csv(&curve, w))?;
    write_csv_artifact(&dir.join("metrics.csv"), &hash, |w| {
        writeln!(w, "{REPORT_CSV_HEADER}")?;
        let best = outcome.best();
        let vanilla = best.and_then(|b| outcome.vanilla_at(b.config.coreset_ratio, b.config.c));
        for (label, cell) in [("tuned", best), ("vanilla", vanilla)] {
            let Some(cell) = cell else { continue };
            for t in &cell.trials {
                let run_id = format!("{label}-cell{}-r{}", cell.index, t.repeat);
                t.validation.write_csv_row(&mut *w, &run_id, "validation", &hash)?;
                t.test.write_csv_row(&mut *w, &run_id, "test", &hash)?;
            }
        }
        Ok(())
    })?;
    Ok(Status::Done)
}
