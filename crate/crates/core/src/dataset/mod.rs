//! Labelled, weighted classification data plus the file formats and the
//! stratified splitter that feed it.

mod csv_format;
mod libsvm;
mod matrix;
mod split;

use std::collections::{BTreeMap, HashMap};

pub use csv_format::{parse_csv, read_csv, LabelColumn};
pub use libsvm::{parse_libsvm, read_libsvm, write_libsvm};
pub use matrix::{Features, Row, SPARSE_DENSITY_THRESHOLD};
pub use split::{stratified_split, SplitBundle, SplitFractions, SplitManifest, MANIFEST_FILE};

use crate::error::{CoreError, Result};

/// Class identifier. Binary tasks use `0` and `1`.
pub type ClassId = usize;

/// Stable identifier of a point across splits and coresets.
pub type PointId = u64;

/// Feature matrix, labels, per-point weights and stable point ids.
///
/// Immutable once built; every accessor borrows.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Features,
    labels: Vec<ClassId>,
    weights: Vec<f64>,
    point_ids: Vec<PointId>,
    positions: HashMap<PointId, usize>,
}

impl Dataset {
    pub fn new(features: Features, labels: Vec<ClassId>, weights: Vec<f64>, point_ids: Vec<PointId>) -> Result<Self> {
        let n = features.n_rows();
        if n == 0 {
            return Err(CoreError::EmptyInput("dataset has no rows".into()));
        }
        if labels.len() != n || weights.len() != n || point_ids.len() != n {
            return Err(CoreError::DimensionMismatch(format!(
                "{n} rows but {} labels, {} weights, {} point ids",
                labels.len(),
                weights.len(),
                point_ids.len()
            )));
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return Err(CoreError::InvalidArgument(format!(
                "weight {} at row {i} is not a finite nonnegative number",
                weights[i]
            )));
        }
        if !features.is_finite() {
            return Err(CoreError::NonFinite("feature matrix".into()));
        }
        let mut positions = HashMap::with_capacity(n);
        for (pos, &id) in point_ids.iter().enumerate() {
            if positions.insert(id, pos).is_some() {
                return Err(CoreError::InvalidArgument(format!("duplicate point id {id}")));
            }
        }
        Ok(Dataset {
            features,
            labels,
            weights,
            point_ids,
            positions,
        })
    }

    /// Unit weights and point ids `0..n`.
    pub fn unweighted(features: Features, labels: Vec<ClassId>) -> Result<Self> {
        let n = features.n_rows();
        Dataset::new(features, labels, vec![1.0; n], (0..n as PointId).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.n_cols()
    }

    pub fn features(&self) -> &Features {
        &self.features
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn point_ids(&self) -> &[PointId] {
        &self.point_ids
    }

    pub fn position_of(&self, id: PointId) -> Option<usize> {
        self.positions.get(&id).copied()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Rows at `positions`, keeping their ids, labels and weights.
    pub fn subset(&self, positions: &[usize]) -> Result<Dataset> {
        Dataset::new(
            self.features.select(positions),
            positions.iter().map(|&i| self.labels[i]).collect(),
            positions.iter().map(|&i| self.weights[i]).collect(),
            positions.iter().map(|&i| self.point_ids[i]).collect(),
        )
    }

    /// Same rows with replacement weights.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Dataset> {
        Dataset::new(
            self.features.clone(),
            self.labels.clone(),
            weights,
            self.point_ids.clone(),
        )
    }

    /// Widens the feature dimension (see [`Features::with_cols`]).
    pub fn with_dim(self, dim: usize) -> Result<Dataset> {
        let features = self.features.with_cols(dim)?;
        Ok(Dataset { features, ..self })
    }

    pub fn class_counts(&self) -> BTreeMap<ClassId, usize> {
        let mut counts = BTreeMap::new();
        for &c in &self.labels {
            *counts.entry(c).or_insert(0) += 1;
        }
        counts
    }

    /// Positions of the rows labelled `class`, in row order.
    pub fn class_positions(&self, class: ClassId) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == class).collect()
    }

    /// Errors unless labels are drawn from `{0, 1}` with both present.
    pub fn require_binary(&self) -> Result<()> {
        let counts = self.class_counts();
        if let Some(&c) = counts.keys().find(|&&c| c > 1) {
            return Err(CoreError::InvalidArgument(format!(
                "binary task expects labels 0/1, found class {c}"
            )));
        }
        if counts.len() < 2 {
            return Err(CoreError::SingleClass(*counts.keys().next().unwrap_or(&0)));
        }
        Ok(())
    }
}

/// Fraction of points in each class.
pub fn class_distribution(data: &Dataset) -> BTreeMap<ClassId, f64> {
    let n = data.len() as f64;
    data.class_counts()
        .into_iter()
        .map(|(c, k)| (c, k as f64 / n))
        .collect()
}

/// Maps raw numeric labels onto class ids.
///
/// Label sets contained in `{-1, +1}` become `{0, 1}`; anything else must
/// already be a nonnegative integer. `Err` carries the offending index.
pub(crate) fn normalize_labels(raw: &[f64]) -> std::result::Result<Vec<ClassId>, (usize, String)> {
    let signed = raw.iter().all(|&y| y == -1.0 || y == 1.0);
    raw.iter()
        .enumerate()
        .map(|(i, &y)| {
            if signed {
                Ok(usize::from(y > 0.0))
            } else if y >= 0.0 && y.fract() == 0.0 && y.is_finite() {
                Ok(y as ClassId)
            } else {
                Err((i, format!("label {y} is not a class id")))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(ys: &[ClassId]) -> Dataset {
        let rows: Vec<Vec<f64>> = ys.iter().map(|_| vec![0.0]).collect();
        Dataset::unweighted(Features::from_rows(&rows).unwrap(), ys.to_vec()).unwrap()
    }

    #[test]
    fn a9a_class_balance() {
        let mut ys = vec![0; 37_155];
        ys.extend(std::iter::repeat_n(1, 48_842 - 37_155));
        let dist = class_distribution(&labels(&ys));
        assert!((dist[&0] - 0.7607).abs() < 5e-5);
        assert!((dist[&1] - 0.2393).abs() < 5e-5);
    }

    #[test]
    fn distribution_edge_cases() {
        let single = class_distribution(&labels(&[1, 1, 1]));
        assert_eq!(single.len(), 1);
        assert_eq!(single[&1], 1.0);
        let half = class_distribution(&labels(&[0, 0, 1, 1]));
        assert_eq!(half[&0], 0.5);
        assert_eq!(half[&1], 0.5);
    }

    #[test]
    fn label_normalization() {
        assert_eq!(normalize_labels(&[-1.0, 1.0, 1.0]).unwrap(), vec![0, 1, 1]);
        assert_eq!(normalize_labels(&[0.0, 1.0, 2.0]).unwrap(), vec![0, 1, 2]);
        assert!(normalize_labels(&[0.5]).is_err());
        assert!(normalize_labels(&[-2.0, 1.0]).is_err());
    }

    #[test]
    fn invariants_are_enforced() {
        let f = Features::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        assert!(Dataset::new(f.clone(), vec![0, 1], vec![1.0, -1.0], vec![0, 1]).is_err());
        assert!(Dataset::new(f.clone(), vec![0, 1], vec![1.0, f64::NAN], vec![0, 1]).is_err());
        assert!(Dataset::new(f.clone(), vec![0], vec![1.0, 1.0], vec![0, 1]).is_err());
        assert!(Dataset::new(f.clone(), vec![0, 1], vec![1.0, 1.0], vec![3, 3]).is_err());
        let empty = Features::dense(0, 2, vec![]).unwrap();
        assert!(matches!(
            Dataset::unweighted(empty, vec![]),
            Err(CoreError::EmptyInput(_))
        ));
        let ok = Dataset::new(f, vec![0, 1], vec![1.0, 2.0], vec![10, 20]).unwrap();
        assert_eq!(ok.position_of(20), Some(1));
        assert!(ok.require_binary().is_ok());
        assert!(labels(&[0, 0]).require_binary().is_err());
    }
}
