use nalgebra::DMatrix;

use crate::error::{CoreError, Result};

/// Rows with fewer than this fraction of nonzeros are stored in CSR form.
pub const SPARSE_DENSITY_THRESHOLD: f64 = 0.25;

/// Feature matrix with row-major dense or compressed-sparse-row storage.
#[derive(Debug, Clone, PartialEq)]
pub enum Features {
    Dense {
        rows: usize,
        cols: usize,
        data: Vec<f64>,
    },
    Sparse {
        rows: usize,
        cols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    },
}

/// Borrowed view of one feature row.
#[derive(Debug, Clone, Copy)]
pub enum Row<'a> {
    Dense(&'a [f64]),
    Sparse { indices: &'a [usize], values: &'a [f64] },
}

impl<'a> Row<'a> {
    pub fn dot(&self, w: &[f64]) -> f64 {
        match *self {
            Row::Dense(xs) => xs.iter().zip(w).map(|(x, w)| x * w).sum(),
            Row::Sparse { indices, values } => indices.iter().zip(values).map(|(&j, v)| v * w[j]).sum(),
        }
    }

    /// Iterates `(column, value)` pairs. Dense rows yield every column.
    pub fn iter(&self) -> Box<dyn Iterator<Item = (usize, f64)> + 'a> {
        match *self {
            Row::Dense(xs) => Box::new(xs.iter().copied().enumerate()),
            Row::Sparse { indices, values } => Box::new(indices.iter().copied().zip(values.iter().copied())),
        }
    }

    pub fn squared_norm(&self) -> f64 {
        match *self {
            Row::Dense(xs) => xs.iter().map(|x| x * x).sum(),
            Row::Sparse { values, .. } => values.iter().map(|x| x * x).sum(),
        }
    }
}

impl Features {
    /// Dense matrix from row-major data.
    pub fn dense(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(CoreError::DimensionMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Features::Dense { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
            return Err(CoreError::DimensionMismatch(format!(
                "row {bad} has {} columns, expected {cols}",
                rows[bad].len()
            )));
        }
        let data = rows.iter().flatten().copied().collect();
        Features::dense(rows.len(), cols, data)
    }

    /// Builds from per-row `(column, value)` lists with strictly increasing
    /// columns, choosing sparse storage when the density is below
    /// [`SPARSE_DENSITY_THRESHOLD`].
    pub fn from_sparse_rows(rows: Vec<Vec<(usize, f64)>>, cols: usize) -> Result<Self> {
        let nnz: usize = rows.iter().map(Vec::len).sum();
        for (i, row) in rows.iter().enumerate() {
            if let Some(&(j, _)) = row.iter().find(|(j, _)| *j >= cols) {
                return Err(CoreError::DimensionMismatch(format!(
                    "row {i} references column {j} but the matrix has {cols} columns"
                )));
            }
        }
        let n = rows.len();
        let density = if n * cols == 0 {
            1.0
        } else {
            nnz as f64 / (n * cols) as f64
        };
        if density < SPARSE_DENSITY_THRESHOLD {
            let mut indptr = Vec::with_capacity(n + 1);
            let mut indices = Vec::with_capacity(nnz);
            let mut values = Vec::with_capacity(nnz);
            indptr.push(0);
            for row in rows {
                for (j, v) in row {
                    indices.push(j);
                    values.push(v);
                }
                indptr.push(indices.len());
            }
            Ok(Features::Sparse {
                rows: n,
                cols,
                indptr,
                indices,
                values,
            })
        } else {
            let mut data = vec![0.0; n * cols];
            for (i, row) in rows.into_iter().enumerate() {
                for (j, v) in row {
                    data[i * cols + j] = v;
                }
            }
            Ok(Features::Dense { rows: n, cols, data })
        }
    }

    pub fn n_rows(&self) -> usize {
        match self {
            Features::Dense { rows, .. } | Features::Sparse { rows, .. } => *rows,
        }
    }

    pub fn n_cols(&self) -> usize {
        match self {
            Features::Dense { cols, .. } | Features::Sparse { cols, .. } => *cols,
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, Features::Sparse { .. })
    }

    pub fn row(&self, i: usize) -> Row<'_> {
        match self {
            Features::Dense { cols, data, .. } => Row::Dense(&data[i * cols..(i + 1) * cols]),
            Features::Sparse {
                indptr,
                indices,
                values,
                ..
            } => {
                let range = indptr[i]..indptr[i + 1];
                Row::Sparse {
                    indices: &indices[range.clone()],
                    values: &values[range],
                }
            }
        }
    }

    /// Dense copy of row `i`.
    pub fn row_dense(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_cols()];
        for (j, v) in self.row(i).iter() {
            out[j] = v;
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Features::Dense { data, .. } => data.iter().all(|v| v.is_finite()),
            Features::Sparse { values, .. } => values.iter().all(|v| v.is_finite()),
        }
    }

    /// New matrix holding the given rows in the given order.
    pub fn select(&self, positions: &[usize]) -> Features {
        match self {
            Features::Dense { cols, data, .. } => {
                let mut out = Vec::with_capacity(positions.len() * cols);
                for &i in positions {
                    out.extend_from_slice(&data[i * cols..(i + 1) * cols]);
                }
                Features::Dense {
                    rows: positions.len(),
                    cols: *cols,
                    data: out,
                }
            }
            Features::Sparse {
                cols,
                indptr,
                indices,
                values,
                ..
            } => {
                let mut new_indptr = Vec::with_capacity(positions.len() + 1);
                let mut new_indices = Vec::new();
                let mut new_values = Vec::new();
                new_indptr.push(0);
                for &i in positions {
                    let range = indptr[i]..indptr[i + 1];
                    new_indices.extend_from_slice(&indices[range.clone()]);
                    new_values.extend_from_slice(&values[range]);
                    new_indptr.push(new_indices.len());
                }
                Features::Sparse {
                    rows: positions.len(),
                    cols: *cols,
                    indptr: new_indptr,
                    indices: new_indices,
                    values: new_values,
                }
            }
        }
    }

    /// Widens the column count, e.g. to align a test file that never uses
    /// the last feature with its training file.
    pub fn with_cols(self, new_cols: usize) -> Result<Features> {
        if new_cols < self.n_cols() {
            return Err(CoreError::DimensionMismatch(format!(
                "cannot shrink {} columns to {new_cols}",
                self.n_cols()
            )));
        }
        Ok(match self {
            Features::Dense { rows, cols, data } => {
                let mut out = vec![0.0; rows * new_cols];
                for i in 0..rows {
                    out[i * new_cols..i * new_cols + cols].copy_from_slice(&data[i * cols..(i + 1) * cols]);
                }
                Features::Dense {
                    rows,
                    cols: new_cols,
                    data: out,
                }
            }
            Features::Sparse {
                rows,
                indptr,
                indices,
                values,
                ..
            } => Features::Sparse {
                rows,
                cols: new_cols,
                indptr,
                indices,
                values,
            },
        })
    }

    /// Dense nalgebra copy, optionally with a trailing constant-1 column.
    pub fn to_matrix(&self, intercept: bool) -> DMatrix<f64> {
        let n = self.n_rows();
        let d = self.n_cols();
        let width = d + usize::from(intercept);
        let mut m = DMatrix::zeros(n, width);
        for i in 0..n {
            for (j, v) in self.row(i).iter() {
                m[(i, j)] = v;
            }
            if intercept {
                m[(i, d)] = 1.0;
            }
        }
        m
    }
}
