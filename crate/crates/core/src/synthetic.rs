//! Seeded two-class Gaussian mixtures for tests, benches and demos.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::{Dataset, Features};
use crate::error::{CoreError, Result};
use crate::rounding::largest_remainder;

/// Class 1 has mean `+separation/2` and class 0 mean `-separation/2` along
/// the unit diagonal; both have identity covariance. Feature `j` is then
/// scaled by `1 + j * spread`, so rows differ in leverage.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    pub n: usize,
    pub dim: usize,
    pub positive_fraction: f64,
    pub separation: f64,
    pub spread: f64,
}

impl GaussianMixture {
    pub fn new(n: usize, dim: usize, positive_fraction: f64, separation: f64) -> Self {
        GaussianMixture {
            n,
            dim,
            positive_fraction,
            separation,
            spread: 0.0,
        }
    }

    pub fn generate(&self, seed: u64) -> Result<Dataset> {
        if self.n < 2 || self.dim == 0 {
            return Err(CoreError::InvalidArgument("need n >= 2 and dim >= 1".into()));
        }
        if !(self.positive_fraction > 0.0 && self.positive_fraction < 1.0) {
            return Err(CoreError::InvalidArgument(format!(
                "positive_fraction {} not in (0, 1)",
                self.positive_fraction
            )));
        }
        let counts = largest_remainder(self.n, &[1.0 - self.positive_fraction, self.positive_fraction]);
        let mut labels: Vec<usize> = std::iter::repeat_n(0, counts[0])
            .chain(std::iter::repeat_n(1, counts[1]))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        labels.shuffle(&mut rng);

        let shift = self.separation / 2.0 / (self.dim as f64).sqrt();
        let mut data = Vec::with_capacity(self.n * self.dim);
        for &y in &labels {
            let sign = if y == 1 { 1.0 } else { -1.0 };
            for j in 0..self.dim {
                let z: f64 = StandardNormal.sample(&mut rng);
                data.push((z + sign * shift) * (1.0 + j as f64 * self.spread));
            }
        }
        Dataset::unweighted(Features::dense(self.n, self.dim, data)?, labels)
    }
}
