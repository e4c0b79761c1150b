use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::{normalize_labels, Dataset, Features};
use crate::error::{CoreError, Result};
use crate::numfmt::fmt_f64;

/// Reads a LIBSVM/SVMlight file (`<label> <idx>:<val> ...`, 1-based
/// indices). See [`read_libsvm`].
pub fn parse_libsvm(path: impl AsRef<Path>, dimension_hint: Option<usize>) -> Result<Dataset> {
    let file = File::open(path.as_ref())?;
    read_libsvm(BufReader::new(file), dimension_hint)
}

/// Parses LIBSVM text. Blank lines and `#` comments are skipped.
///
/// The dimension is the largest index seen unless `dimension_hint` is
/// larger. Labels in `{-1, +1}` are remapped to `{0, 1}`; point ids are the
/// data-line ordinals starting at 0, weights are all 1.
pub fn read_libsvm(reader: impl Read, dimension_hint: Option<usize>) -> Result<Dataset> {
    let reader = BufReader::new(reader);
    let mut raw_labels = Vec::new();
    let mut line_numbers = Vec::new();
    let mut rows = Vec::new();
    let mut max_index = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let parse_err = |message: String| CoreError::Parse { line: lineno, message };
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().expect("non-empty line has a token");
        let label: f64 = label_tok
            .parse()
            .map_err(|_| parse_err(format!("invalid label `{label_tok}`")))?;

        let mut row = Vec::new();
        let mut last = 0usize;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(format!("expected `index:value`, found `{tok}`")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_err(format!("invalid feature index `{idx}`")))?;
            if idx == 0 {
                return Err(parse_err("feature indices are 1-based; found 0".into()));
            }
            if idx <= last {
                return Err(parse_err(format!(
                    "feature indices must be strictly increasing ({idx} after {last})"
                )));
            }
            let val: f64 = val
                .parse()
                .map_err(|_| parse_err(format!("invalid feature value `{val}`")))?;
            if !val.is_finite() {
                return Err(parse_err(format!("non-finite feature value `{val}`")));
            }
            last = idx;
            if val != 0.0 {
                row.push((idx - 1, val));
            }
        }
        max_index = max_index.max(last);
        raw_labels.push(label);
        line_numbers.push(lineno);
        rows.push(row);
    }

    if rows.is_empty() {
        return Err(CoreError::EmptyInput("LIBSVM input has no data lines".into()));
    }
    let dim = match dimension_hint {
        Some(hint) if hint < max_index => {
            return Err(CoreError::DimensionMismatch(format!(
                "dimension hint {hint} is smaller than the largest feature index {max_index}"
            )))
        }
        Some(hint) => hint,
        None => max_index,
    };
    let labels = normalize_labels(&raw_labels).map_err(|(i, message)| CoreError::Parse {
        line: line_numbers[i],
        message,
    })?;
    Dataset::unweighted(Features::from_sparse_rows(rows, dim)?, labels)
}

/// Writes one LIBSVM line per row with internal `{0, 1, ...}` labels.
///
/// Values use the shortest round-trip decimal form, so reading the output
/// back reproduces the features bit for bit.
pub fn write_libsvm(data: &Dataset, mut out: impl Write) -> Result<()> {
    for i in 0..data.len() {
        write!(out, "{}", data.labels()[i])?;
        for (j, v) in data.features().row(i).iter() {
            if v != 0.0 {
                write!(out, " {}:{}", j + 1, fmt_f64(v))?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}
