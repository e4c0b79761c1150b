use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use coretune::dataset::write_libsvm;
use coretune::sampler::Coreset;
use coretune::synthetic::GaussianMixture;
use serde_json::{json, Value};
use tempfile::TempDir;

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new(config: Value) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let data = GaussianMixture::new(600, 4, 0.25, 1.5).generate(11).unwrap();
        let mut buf = Vec::new();
        write_libsvm(&data, &mut buf).unwrap();
        fs::write(dir.path().join("data.libsvm"), buf).unwrap();
        let ws = Workspace { dir };
        ws.write_config(&config);
        ws
    }

    fn write_config(&self, config: &Value) {
        fs::write(self.config(), serde_json::to_string_pretty(config).unwrap()).unwrap();
    }

    fn config(&self) -> PathBuf {
        self.dir.path().join("run.json")
    }

    fn out(&self, rel: &str) -> PathBuf {
        self.dir.path().join("out").join(rel)
    }

    fn run(&self, cmd: &str, extra: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_coretune"))
            .arg(cmd)
            .arg("--config")
            .arg(self.config())
            .args(extra)
            .output()
            .unwrap()
    }

    fn ok(&self, cmd: &str, extra: &[&str]) {
        let out = self.run(cmd, extra);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{cmd} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

fn base_config() -> Value {
    json!({
        "dataset": {"path": "data.libsvm"},
        "seed": 7,
        "sampler": {"coreset_ratio": 0.2},
        "grid": {
            "coreset_ratios": [0.2],
            "det_ratios": [0.0],
            "weight_strategies": ["inv"],
            "class_allocations": ["proportional"],
            "repeats": 1,
            "base_seed": 1
        },
        "output_dir": "out"
    })
}

fn data_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(str::to_owned)
        .collect()
}

fn first_line(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_owned()
}

#[test]
fn build_twice_is_byte_identical() {
    let ws = Workspace::new(base_config());
    ws.ok("split", &[]);
    ws.ok("score", &[]);
    ws.ok("build", &[]);
    let first = fs::read(ws.out("coreset.csv")).unwrap();
    ws.ok("build", &[]);
    assert_eq!(first, fs::read(ws.out("coreset.csv")).unwrap());
    let coreset = Coreset::read_csv(first.as_slice()).unwrap();
    assert!(!coreset.is_empty());
}

#[test]
fn one_cell_grid_gives_one_trial_row() {
    let ws = Workspace::new(base_config());
    ws.ok("split", &[]);
    ws.ok("score", &[]);
    ws.ok("tune", &[]);
    assert_eq!(data_rows(&ws.out("tune/trials.csv")).len(), 1);
    assert_eq!(data_rows(&ws.out("tune/cells.csv")).len(), 1);
    let best: Value = serde_json::from_str(&fs::read_to_string(ws.out("tune/best_config.json")).unwrap()).unwrap();
    assert_eq!(best["cell"], json!(0));
}

#[test]
fn report_without_tune_names_the_missing_step() {
    let ws = Workspace::new(base_config());
    ws.ok("split", &[]);
    let out = ws.run("report", &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("run tune first"));
}

#[test]
fn downstream_commands_name_their_producers() {
    let ws = Workspace::new(base_config());
    let out = ws.run("score", &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("run split first"));
    ws.ok("split", &[]);
    let out = ws.run("build", &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("run score first"));
}

#[test]
fn invalid_field_reports_its_path() {
    let mut config = base_config();
    config["grid"]["weight_strategies"] = json!(["inv", "heavy"]);
    let ws = Workspace::new(config);
    let out = ws.run("split", &[]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("grid.weight_strategies[1]"), "{err}");

    let mut config = base_config();
    config["train"] = json!({"C": 1.0, "tolerence": 1e-6});
    ws.write_config(&config);
    let err = String::from_utf8_lossy(&ws.run("split", &[]).stderr).into_owned();
    assert!(err.contains("train"), "{err}");
}

#[test]
fn usage_errors_exit_with_one() {
    let ws = Workspace::new(base_config());
    assert_eq!(ws.run("split", &["--override", "seed"]).status.code(), Some(1));
    let out = Command::new(env!("CARGO_BIN_EXE_coretune"))
        .arg("split")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = Command::new(env!("CARGO_BIN_EXE_coretune"))
        .arg("explode")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn every_artifact_carries_the_config_hash() {
    let mut config = base_config();
    config["refine"] = json!({"batch_size": 5, "patience": 1, "max_rounds": 3});
    let ws = Workspace::new(config);
    for cmd in ["split", "score", "build", "tune", "refine", "report"] {
        ws.ok(cmd, &["--workers", "1"]);
    }
    let stamp = first_line(&ws.out("scores.csv"));
    assert!(stamp.starts_with("# config_hash=") && stamp.len() == "# config_hash=".len() + 64);
    let hash = stamp.trim_start_matches("# config_hash=").to_owned();
    for csv in [
        "splits/train.libsvm",
        "splits/test.libsvm",
        "coreset.csv",
        "tune/cells.csv",
        "tune/trials.csv",
        "refine/coreset.csv",
        "refine/trace.csv",
        "report/comparison.csv",
        "report/curve.csv",
        "report/metrics.csv",
    ] {
        assert_eq!(first_line(&ws.out(csv)), stamp, "{csv}");
    }
    for json_file in [
        "splits/split_manifest.json",
        "tune/outcome.json",
        "tune/best_config.json",
        "refine/summary.json",
    ] {
        let v: Value = serde_json::from_str(&fs::read_to_string(ws.out(json_file)).unwrap()).unwrap();
        assert_eq!(v["config_hash"], json!(hash), "{json_file}");
    }
    assert!(data_rows(&ws.out("report/metrics.csv"))
        .iter()
        .all(|row| row.split(',').nth(2) == Some(hash.as_str())));
}

#[test]
fn pipeline_is_reproducible_and_worker_count_free() {
    let run = |workers: &str| {
        let ws = Workspace::new(base_config());
        let grid = [
            "--override",
            "grid.det_ratios=[0.0, 0.2]",
            "--override",
            "grid.repeats=2",
        ];
        for cmd in ["split", "score", "tune", "report"] {
            let mut args = vec!["--workers", workers];
            args.extend(grid);
            ws.ok(cmd, &args);
        }
        [
            "tune/trials.csv",
            "tune/outcome.json",
            "report/comparison.csv",
            "report/curve.csv",
        ]
        .map(|f| fs::read(ws.out(f)).unwrap())
    };
    assert_eq!(run("1"), run("3"));
}

#[test]
fn seed_flag_changes_the_split_and_hash() {
    let ws = Workspace::new(base_config());
    ws.ok("split", &[]);
    let a = fs::read_to_string(ws.out("splits/train.libsvm")).unwrap();
    ws.ok("split", &["--seed", "8"]);
    let b = fs::read_to_string(ws.out("splits/train.libsvm")).unwrap();
    assert_ne!(a.lines().next(), b.lines().next());
    assert_ne!(a, b);
}

#[test]
fn infeasible_cells_exit_with_three() {
    let mut config = base_config();
    config["grid"]["class_allocations"] = json!(["proportional", {"explicit": {"0": 0.5, "2": 0.5}}]);
    let ws = Workspace::new(config);
    ws.ok("split", &[]);
    ws.ok("score", &[]);
    let out = ws.run("tune", &[]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = data_rows(&ws.out("tune/cells.csv"));
    assert_eq!(rows.len(), 2);
}
