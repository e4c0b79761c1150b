//! Fixtures shared by the benchmarks.

use coretune::dataset::Dataset;
use coretune::synthetic::GaussianMixture;

/// Imbalanced two-class mixture of `n` points in `dim` dimensions.
pub fn mixture(n: usize, dim: usize) -> Dataset {
    GaussianMixture::new(n, dim, 0.1, 1.5)
        .generate(2024)
        .expect("valid mixture parameters")
}

/// Deterministic scores in (-1, 1) with labels that agree with them most of
/// the time, for ranking metrics.
pub fn scored_labels(n: usize) -> (Vec<usize>, Vec<f64>) {
    (0..n)
        .map(|i| {
            let s = ((i as f64) * 0.618_033_988_75).fract() * 2.0 - 1.0;
            let flip = i % 7 == 0;
            (usize::from((s > 0.0) != flip), s)
        })
        .unzip()
}
