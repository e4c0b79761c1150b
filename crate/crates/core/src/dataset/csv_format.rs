use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{normalize_labels, Dataset, Features};
use crate::error::{CoreError, Result};

/// Which CSV column holds the class label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

impl std::fmt::Display for LabelColumn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LabelColumn::Index(i) => write!(f, "#{i}"),
            LabelColumn::Name(name) => f.write_str(name),
        }
    }
}

pub fn parse_csv(path: impl AsRef<Path>, label_column: &LabelColumn, has_header: bool) -> Result<Dataset> {
    read_csv(File::open(path.as_ref())?, label_column, has_header)
}

/// Parses a numeric CSV table. Every non-label cell must parse as a float;
/// categorical columns have to be encoded beforehand.
///
/// Row numbers in errors are 1-based file lines, header included.
pub fn read_csv(reader: impl Read, label_column: &LabelColumn, has_header: bool) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers: Option<Vec<String>> = if has_header {
        Some(rdr.headers()?.iter().map(str::to_owned).collect())
    } else {
        None
    };
    let column_name = |j: usize| -> String {
        headers
            .as_ref()
            .and_then(|h| h.get(j).cloned())
            .unwrap_or_else(|| j.to_string())
    };

    let mut width = headers.as_ref().map(Vec::len);
    let mut label_idx = match (label_column, &headers) {
        (LabelColumn::Name(name), Some(h)) => Some(
            h.iter()
                .position(|c| c == name)
                .ok_or_else(|| CoreError::MissingColumn(name.clone()))?,
        ),
        (LabelColumn::Name(name), None) => {
            return Err(CoreError::MissingColumn(format!(
                "{name} (a named label column requires a header row)"
            )))
        }
        (LabelColumn::Index(i), Some(h)) if *i >= h.len() => {
            return Err(CoreError::MissingColumn(label_column.to_string()))
        }
        (LabelColumn::Index(i), _) => Some(*i),
    };

    let first_row = usize::from(has_header) + 1;
    let mut raw_labels = Vec::new();
    let mut data = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let row = first_row + r;
        let record = record?;
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(CoreError::Csv {
                row,
                column: String::new(),
                message: format!("ragged row: {} fields, expected {w}", record.len()),
            });
        }
        let li = *label_idx.get_or_insert(0);
        if li >= w {
            return Err(CoreError::MissingColumn(label_column.to_string()));
        }
        for (j, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| CoreError::Csv {
                row,
                column: column_name(j),
                message: format!("non-numeric cell `{cell}`"),
            })?;
            if j == li {
                raw_labels.push(value);
            } else {
                data.push(value);
            }
        }
    }

    let n = raw_labels.len();
    if n == 0 {
        return Err(CoreError::EmptyInput("CSV input has no data rows".into()));
    }
    let d = width.unwrap_or(1) - 1;
    let labels = normalize_labels(&raw_labels).map_err(|(i, message)| CoreError::Csv {
        row: first_row + i,
        column: label_column.to_string(),
        message,
    })?;
    Dataset::unweighted(Features::dense(n, d, data)?, labels)
}
