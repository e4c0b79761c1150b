use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{parse_libsvm, write_libsvm, Dataset, PointId};
use crate::error::{CoreError, Result};
use crate::rounding::largest_remainder;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 0.8,
            validation: 0.1,
            test: 0.1,
        }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(CoreError::InvalidArgument(format!(
                "split fractions must be positive, got {parts:?}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CoreError::InvalidArgument(format!(
                "split fractions must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

/// Disjoint train/validation/test partition of one source dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitBundle {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
}

/// Shuffles each class with a seeded generator and cuts it into the three
/// splits by largest-remainder rounding of `fraction * class_count`.
///
/// Rows inside each split keep their source order.
pub fn stratified_split(data: &Dataset, fractions: SplitFractions, seed: u64) -> Result<SplitBundle> {
    fractions.validate()?;
    let shares = [fractions.train, fractions.validation, fractions.test];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts: [Vec<usize>; 3] = Default::default();

    for (class, count) in data.class_counts() {
        if count < shares.len() {
            return Err(CoreError::InvalidArgument(format!(
                "class {class} has {count} points, fewer than the {} splits",
                shares.len()
            )));
        }
        let mut positions = data.class_positions(class);
        positions.shuffle(&mut rng);
        let sizes = largest_remainder(count, &shares);
        let mut rest = positions.as_slice();
        for (part, size) in parts.iter_mut().zip(sizes) {
            let (head, tail) = rest.split_at(size);
            part.extend_from_slice(head);
            rest = tail;
        }
    }

    let names = ["train", "validation", "test"];
    let mut built = Vec::with_capacity(3);
    for (part, name) in parts.iter_mut().zip(names) {
        if part.is_empty() {
            return Err(CoreError::EmptyInput(format!("{name} split would be empty")));
        }
        part.sort_unstable();
        built.push(data.subset(part)?);
    }
    let test = built.pop().expect("three splits");
    let validation = built.pop().expect("three splits");
    let train = built.pop().expect("three splits");
    Ok(SplitBundle {
        train,
        validation,
        test,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SplitEntry {
    file: String,
    point_ids: Vec<PointId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
}

/// Sidecar JSON describing a split written by [`SplitBundle::write_dir`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub fractions: SplitFractions,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    train: SplitEntry,
    validation: SplitEntry,
    test: SplitEntry,
}

pub const MANIFEST_FILE: &str = "split_manifest.json";

impl SplitBundle {
    pub fn parts(&self) -> [(&'static str, &Dataset); 3] {
        [
            ("train", &self.train),
            ("validation", &self.validation),
            ("test", &self.test),
        ]
    }

    /// Writes `train.libsvm`, `validation.libsvm`, `test.libsvm` and a
    /// manifest carrying the seed, fractions and per-split point ids.
    pub fn write_dir(&self, dir: &Path, seed: u64, fractions: SplitFractions, config_hash: Option<&str>) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut entries = Vec::new();
        for (name, part) in self.parts() {
            let file = format!("{name}.libsvm");
            crate::fsutil::write_atomic(&dir.join(&file), |w| {
                if let Some(hash) = config_hash {
                    writeln!(w, "# config_hash={hash}")?;
                }
                write_libsvm(part, w)
            })?;
            let unit = part.weights().iter().all(|&w| w == 1.0);
            entries.push(SplitEntry {
                file,
                point_ids: part.point_ids().to_vec(),
                weights: (!unit).then(|| part.weights().to_vec()),
            });
        }
        let test = entries.pop().expect("three entries");
        let validation = entries.pop().expect("three entries");
        let train = entries.pop().expect("three entries");
        let manifest = SplitManifest {
            seed,
            fractions,
            dim: self.train.dim(),
            config_hash: config_hash.map(str::to_owned),
            train,
            validation,
            test,
        };
        crate::fsutil::write_atomic(&dir.join(MANIFEST_FILE), |w| {
            serde_json::to_writer_pretty(&mut *w, &manifest).map_err(std::io::Error::from)?;
            writeln!(w)?;
            Ok(())
        })
    }

    /// Reads a split written by [`SplitBundle::write_dir`].
    pub fn read_dir(dir: &Path) -> Result<(SplitBundle, SplitManifest)> {
        let file = File::open(dir.join(MANIFEST_FILE))?;
        let manifest: SplitManifest = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| CoreError::InvalidArgument(format!("split manifest: {e}")))?;
        let load = |entry: &SplitEntry| -> Result<Dataset> {
            let parsed = parse_libsvm(dir.join(&entry.file), Some(manifest.dim))?;
            let weights = entry.weights.clone().unwrap_or_else(|| vec![1.0; parsed.len()]);
            Dataset::new(
                parsed.features().clone(),
                parsed.labels().to_vec(),
                weights,
                entry.point_ids.clone(),
            )
        };
        let bundle = SplitBundle {
            train: load(&manifest.train)?,
            validation: load(&manifest.validation)?,
            test: load(&manifest.test)?,
        };
        Ok((bundle, manifest))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{class_distribution, Features};
    use std::collections::HashSet;

    fn balanced(n0: usize, n1: usize) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..n0 + n1).map(|i| vec![i as f64]).collect();
        let labels = (0..n0 + n1).map(|i| usize::from(i >= n0)).collect();
        Dataset::unweighted(Features::from_rows(&rows).unwrap(), labels).unwrap()
    }

    #[test]
    fn exact_stratified_counts() {
        let data = balanced(60, 40);
        for seed in [0, 1, 99] {
            let s = stratified_split(&data, SplitFractions::default(), seed).unwrap();
            let c = s.train.class_counts();
            assert_eq!((c[&0], c[&1]), (48, 32));
            assert_eq!(s.validation.len(), 10);
            assert_eq!(s.test.len(), 10);
        }
    }

    #[test]
    fn same_seed_same_split() {
        let data = balanced(60, 40);
        let a = stratified_split(&data, SplitFractions::default(), 7).unwrap();
        let b = stratified_split(&data, SplitFractions::default(), 7).unwrap();
        assert_eq!(a, b);
        let c = stratified_split(&data, SplitFractions::default(), 8).unwrap();
        assert_ne!(a.train.point_ids(), c.train.point_ids());
    }

    #[test]
    fn bad_fractions() {
        let data = balanced(60, 40);
        let f = SplitFractions {
            train: 0.5,
            validation: 0.5,
            test: 0.5,
        };
        assert!(stratified_split(&data, f, 0).is_err());
        let f = SplitFractions {
            train: 1.0,
            validation: 0.0,
            test: 0.0,
        };
        assert!(stratified_split(&data, f, 0).is_err());
    }

    #[test]
    fn tiny_class_is_rejected() {
        let data = balanced(50, 2);
        assert!(stratified_split(&data, SplitFractions::default(), 0).is_err());
    }

    #[test]
    fn partition_and_distribution_hold() {
        let data = balanced(137, 41);
        let s = stratified_split(
            &data,
            SplitFractions {
                train: 0.6,
                validation: 0.25,
                test: 0.15,
            },
            3,
        )
        .unwrap();
        let mut seen = HashSet::new();
        for (_, part) in s.parts() {
            for &id in part.point_ids() {
                assert!(seen.insert(id), "point {id} appears twice");
            }
        }
        assert_eq!(seen.len(), data.len());
        let src = data.class_counts();
        for (part, frac) in [(&s.train, 0.6), (&s.validation, 0.25), (&s.test, 0.15)] {
            for (c, k) in part.class_counts() {
                assert!((k as f64 - frac * src[&c] as f64).abs() <= 1.0);
            }
        }
        let _ = class_distribution(&s.train);
    }

    #[test]
    fn write_and_read_back() {
        let data = balanced(30, 20);
        let s = stratified_split(&data, SplitFractions::default(), 5).unwrap();
        let dir = std::env::temp_dir().join(format!("coretune-split-{}", std::process::id()));
        s.write_dir(&dir, 5, SplitFractions::default(), Some("abc")).unwrap();
        let (back, manifest) = SplitBundle::read_dir(&dir).unwrap();
        assert_eq!(manifest.seed, 5);
        assert_eq!(manifest.config_hash.as_deref(), Some("abc"));
        for ((_, a), (_, b)) in s.parts().iter().zip(back.parts().iter()) {
            assert_eq!(a.point_ids(), b.point_ids());
            assert_eq!(a.labels(), b.labels());
            for i in 0..a.len() {
                assert_eq!(a.features().row_dense(i), b.features().row_dense(i));
            }
        }
        std::fs::remove_dir_all(&dir).ok();
    }
}
