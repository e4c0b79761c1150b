//! Run configuration: one JSON file drives every subcommand.

use std::path::{Path, PathBuf};

use anyhow::Context;
use coretune::dataset::{parse_csv, parse_libsvm, Dataset, LabelColumn, SplitFractions};
use coretune::learners::TrainConfig;
use coretune::refine::RefineConfig;
use coretune::sampler::{ClassAllocation, WeightStrategy};
use coretune::sensitivity::ProviderSpec;
use coretune::tuner::{CellConfig, GridSpec};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::UsageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    #[default]
    Libsvm,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    #[serde(default)]
    pub format: DataFormat,
    /// CSV only: label column by index or header name.
    #[serde(default = "default_label_column")]
    pub label_column: LabelColumn,
    #[serde(default = "default_true")]
    pub has_header: bool,
    /// LIBSVM only: minimum feature count, for files whose trailing
    /// features never appear.
    #[serde(default)]
    pub dimension_hint: Option<usize>,
}

fn default_label_column() -> LabelColumn {
    LabelColumn::Index(0)
}

fn default_true() -> bool {
    true
}

/// Sampler settings for `build`; the vanilla configuration by default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildConfig {
    pub coreset_ratio: f64,
    #[serde(default)]
    pub det_ratio: f64,
    #[serde(default = "default_strategy")]
    pub weight_strategy: WeightStrategy,
    #[serde(default = "default_allocation")]
    pub class_allocation: ClassAllocation,
}

fn default_strategy() -> WeightStrategy {
    WeightStrategy::Inv
}

fn default_allocation() -> ClassAllocation {
    ClassAllocation::Proportional
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            coreset_ratio: 0.1,
            det_ratio: 0.0,
            weight_strategy: default_strategy(),
            class_allocation: default_allocation(),
        }
    }
}

impl BuildConfig {
    pub fn cell(&self, c: f64) -> CellConfig {
        CellConfig {
            coreset_ratio: self.coreset_ratio,
            det_ratio: self.det_ratio,
            weight_strategy: self.weight_strategy,
            class_allocation: self.class_allocation.clone(),
            c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub split: SplitFractions,
    /// Seed for the split and for `build`; the grid carries its own
    /// `base_seed`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sensitivity: ProviderSpec,
    #[serde(default)]
    pub sampler: BuildConfig,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub refine: Option<RefineConfig>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Threads for `tune`; 0 uses every available core.
    #[serde(default)]
    pub workers: usize,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// A loaded config plus the directory its relative paths resolve against.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: RunConfig,
    pub base_dir: PathBuf,
}

impl Loaded {
    pub fn dataset_path(&self) -> PathBuf {
        self.base_dir.join(&self.config.dataset.path)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.base_dir.join(&self.config.output_dir)
    }

    pub fn hash(&self) -> String {
        config_hash(&self.config)
    }

    pub fn read_dataset(&self) -> anyhow::Result<Dataset> {
        let path = self.dataset_path();
        let ds = &self.config.dataset;
        let data = match ds.format {
            DataFormat::Libsvm => parse_libsvm(&path, ds.dimension_hint),
            DataFormat::Csv => parse_csv(&path, &ds.label_column, ds.has_header),
        }
        .with_context(|| format!("reading dataset {}", path.display()))?;
        Ok(data)
    }

    pub fn grid(&self) -> anyhow::Result<&GridSpec> {
        self.config
            .grid
            .as_ref()
            .ok_or_else(|| UsageError::new("config has no `grid` section").into())
    }

    pub fn refine(&self) -> anyhow::Result<&RefineConfig> {
        self.config
            .refine
            .as_ref()
            .ok_or_else(|| UsageError::new("config has no `refine` section").into())
    }
}

/// Command-line adjustments applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub assignments: Vec<String>,
}

/// Reads, overrides and validates a run config.
pub fn load(path: &Path, overrides: &Overrides) -> anyhow::Result<Loaded> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| UsageError::new(format!("cannot read config {}: {e}", path.display())))?;
    let mut value: Value = serde_json::from_str(&text)
        .map_err(|e| UsageError::new(format!("config {} is not valid JSON: {e}", path.display())))?;
    for assignment in &overrides.assignments {
        apply_override(&mut value, assignment)?;
    }
    if let Some(seed) = overrides.seed {
        set_path(&mut value, "seed", Value::from(seed))?;
        if value.get("grid").is_some_and(|g| g.is_object()) {
            set_path(&mut value, "grid.base_seed", Value::from(seed))?;
        }
    }
    if let Some(workers) = overrides.workers {
        set_path(&mut value, "workers", Value::from(workers))?;
    }
    let config: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let at = e.path().to_string();
        UsageError::new(format!("invalid config field `{at}`: {}", e.into_inner()))
    })?;
    let base_dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    let loaded = Loaded { config, base_dir };
    validate(&loaded)?;
    Ok(loaded)
}

fn validate(loaded: &Loaded) -> anyhow::Result<()> {
    let c = &loaded.config;
    let field = |name: &str, r: coretune::Result<()>| {
        r.map_err(|e| anyhow::Error::from(UsageError::new(format!("invalid config field `{name}`: {e}"))))
    };
    field("split", c.split.validate())?;
    field("train", c.train.validate())?;
    if let Some(grid) = &c.grid {
        field("grid", grid.validate())?;
    }
    if let Some(refine) = &c.refine {
        field("refine", refine.validate())?;
    }
    field(
        "sampler",
        loaded.config.sampler.cell(c.train.c).sampler_config(1, 0).validate(),
    )?;
    if !(c.sampler.coreset_ratio > 0.0 && c.sampler.coreset_ratio <= 1.0) {
        return Err(UsageError::new(format!(
            "invalid config field `sampler.coreset_ratio`: {} outside (0, 1]",
            c.sampler.coreset_ratio
        ))
        .into());
    }
    let data = loaded.dataset_path();
    if !data.is_file() {
        return Err(UsageError::new(format!(
            "invalid config field `dataset.path`: {} does not exist",
            data.display()
        ))
        .into());
    }
    if let ProviderSpec::Precomputed { path, .. } = &c.sensitivity {
        let p = loaded.base_dir.join(path);
        if !p.is_file() {
            return Err(UsageError::new(format!(
                "invalid config field `sensitivity.path`: {} does not exist",
                p.display()
            ))
            .into());
        }
    }
    Ok(())
}

/// `a.b.c=value`, where the value is JSON when it parses and a string
/// otherwise.
pub fn apply_override(root: &mut Value, assignment: &str) -> anyhow::Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| UsageError::new(format!("override `{assignment}` is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));
    set_path(root, key.trim(), value)
}

fn set_path(root: &mut Value, key: &str, value: Value) -> anyhow::Result<()> {
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(UsageError::new(format!("override key `{key}` is malformed")).into());
    }
    let mut node = root;
    let mut parts = key.split('.').peekable();
    while let Some(part) = parts.next() {
        let last = parts.peek().is_none();
        node = match node {
            Value::Object(map) => {
                if last {
                    map.insert(part.to_owned(), value);
                    return Ok(());
                }
                map.entry(part.to_owned())
                    .or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let i: usize = part
                    .parse()
                    .map_err(|_| UsageError::new(format!("override key `{key}`: `{part}` is not an index")))?;
                let len = items.len();
                let slot = items
                    .get_mut(i)
                    .ok_or_else(|| UsageError::new(format!("override key `{key}`: index {i} out of {len}")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => {
                return Err(UsageError::new(format!("override key `{key}`: `{part}` is inside a scalar")).into());
            }
        };
    }
    unreachable!("key has at least one segment")
}

/// SHA-256 of the config's compact JSON with sorted keys. `workers` and
/// `output_dir` change where and how fast a run happens, not what it
/// produces, so they are left out.
pub fn config_hash(config: &RunConfig) -> String {
    let mut value = serde_json::to_value(config).expect("config serializes");
    if let Value::Object(map) = &mut value {
        map.remove("workers");
        map.remove("output_dir");
    }
    let canonical = serde_json::to_string(&sorted(value)).expect("value serializes");
    Sha256::digest(canonical.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn sorted(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k, sorted(v))).collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sorted).collect()),
        other => other,
    }
}
