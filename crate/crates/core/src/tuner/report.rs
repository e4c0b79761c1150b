use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{GridOutcome, MetricMeans};
use crate::error::Result;
use crate::numfmt::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Tuned,
    Vanilla,
    Random,
    Full,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Tuned => "tuned",
            Method::Vanilla => "vanilla",
            Method::Random => "random",
            Method::Full => "full",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: Method,
    pub split: String,
    pub coreset_ratio: f64,
    pub metrics: MetricMeans,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub coreset_ratio: f64,
    pub method: Method,
    pub split: String,
    pub f1: f64,
}

fn means(m: &MetricMeans) -> String {
    [m.f1, m.balanced_accuracy, m.accuracy, m.roc_auc, m.average_precision]
        .iter()
        .map(|v| fmt_f64(*v))
        .collect::<Vec<_>>()
        .join(",")
}

const MEANS_HEADER: [&str; 5] = ["f1", "balanced_accuracy", "accuracy", "roc_auc", "average_precision"];

fn prefixed(prefix: &str) -> String {
    MEANS_HEADER
        .iter()
        .map(|h| format!("{prefix}{h}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// One row per cell in cell order, with mean metrics and rank.
pub fn write_cells_csv(outcome: &GridOutcome, mut out: impl Write) -> Result<()> {
    writeln!(
        out,
        "cell,rank,status,coreset_ratio,det_ratio,weight_strategy,class_allocation,C,provider,vanilla,repeats,{},{},error",
        prefixed("val_"),
        prefixed("test_")
    )?;
    for cell in &outcome.cells {
        let c = &cell.config;
        let (status, error) = match &cell.error {
            None => ("ok", String::new()),
            Some(e) => ("failed", csv_quote(e)),
        };
        writeln!(
            out,
            "{},{},{status},{},{},{},{},{},{},{},{},{},{},{error}",
            cell.index,
            cell.rank.map(|r| r.to_string()).unwrap_or_default(),
            fmt_f64(c.coreset_ratio),
            fmt_f64(c.det_ratio),
            c.weight_strategy,
            c.class_allocation.label(),
            fmt_f64(c.c),
            outcome.provider,
            c.is_vanilla(),
            cell.trials.len(),
            means(&cell.validation()),
            means(&cell.test()),
        )?;
    }
    Ok(())
}

/// One row per successful repeat.
pub fn write_trials_csv(outcome: &GridOutcome, mut out: impl Write) -> Result<()> {
    writeln!(
        out,
        "cell,repeat,seed,coreset_ratio,det_ratio,weight_strategy,class_allocation,C,provider,{},{},unique_points,total_weight,class_counts,deterministic",
        prefixed("val_"),
        prefixed("test_")
    )?;
    for cell in &outcome.cells {
        for t in &cell.trials {
            let c = &t.config;
            let counts = t
                .stats
                .class_counts
                .iter()
                .map(|(k, v)| format!("{k}:{v}"))
                .collect::<Vec<_>>()
                .join("|");
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{counts},{}",
                t.cell,
                t.repeat,
                t.seed,
                fmt_f64(c.coreset_ratio),
                fmt_f64(c.det_ratio),
                c.weight_strategy,
                c.class_allocation.label(),
                fmt_f64(c.c),
                t.provider,
                means(&MetricMeans::of([&t.validation])),
                means(&MetricMeans::of([&t.test])),
                t.stats.unique_points,
                fmt_f64(t.stats.total_weight),
                t.stats.deterministic,
            )?;
        }
    }
    Ok(())
}

pub fn write_comparison_csv(rows: &[ComparisonRow], mut out: impl Write) -> Result<()> {
    writeln!(out, "method,split,coreset_ratio,{}", MEANS_HEADER.join(","))?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            r.method.as_str(),
            r.split,
            fmt_f64(r.coreset_ratio),
            means(&r.metrics)
        )?;
    }
    Ok(())
}

pub fn write_curve_csv(rows: &[CurveRow], mut out: impl Write) -> Result<()> {
    writeln!(out, "coreset_ratio,method,split,f1")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            fmt_f64(r.coreset_ratio),
            r.method.as_str(),
            r.split,
            fmt_f64(r.f1)
        )?;
    }
    Ok(())
}

fn csv_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}
