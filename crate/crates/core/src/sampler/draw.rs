use std::collections::{BTreeMap, BTreeSet};

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use super::WeightStrategy;
use crate::dataset::{ClassId, PointId};
use crate::error::{CoreError, Result};

/// `⌊ratio · budget⌋`, tolerant of products like `0.29 * 100 = 28.999…`.
pub fn deterministic_count(budget: usize, det_ratio: f64) -> usize {
    (det_ratio * budget as f64 + 1e-9).floor() as usize
}

/// Positions of the `⌊det_ratio · budget⌋` largest probabilities, ties
/// broken by ascending point id. The result is in selection order.
pub fn select_deterministic(probs: &[f64], point_ids: &[PointId], budget: usize, det_ratio: f64) -> Result<Vec<usize>> {
    if probs.len() != point_ids.len() {
        return Err(CoreError::DimensionMismatch(format!(
            "{} probabilities for {} point ids",
            probs.len(),
            point_ids.len()
        )));
    }
    if !(0.0..1.0).contains(&det_ratio) {
        return Err(CoreError::InvalidArgument(format!(
            "det_ratio {det_ratio} outside [0, 1)"
        )));
    }
    let k = deterministic_count(budget, det_ratio);
    if budget > 0 && k >= budget {
        return Err(CoreError::InvalidArgument(format!(
            "{k} deterministic points would fill the whole budget of {budget}"
        )));
    }
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(point_ids[a].cmp(&point_ids[b])));
    order.truncate(k.min(probs.len()));
    Ok(order)
}

/// Draws `draws` positions i.i.d. with replacement from the probabilities
/// renormalized over everything outside `excluded`, returning multiplicities.
pub fn sample_residual<R: Rng + ?Sized>(
    probs: &[f64],
    excluded: &[usize],
    draws: usize,
    rng: &mut R,
) -> Result<BTreeMap<usize, usize>> {
    let mut counts = BTreeMap::new();
    if draws == 0 {
        return Ok(counts);
    }
    let excluded: BTreeSet<usize> = excluded.iter().copied().collect();
    let residual: Vec<usize> = (0..probs.len())
        .filter(|i| !excluded.contains(i) && probs[*i] > 0.0)
        .collect();
    if residual.is_empty() {
        return Err(CoreError::DegenerateScores(
            "no probability mass left outside the deterministic set".into(),
        ));
    }
    let dist = WeightedIndex::new(residual.iter().map(|&i| probs[i]))
        .map_err(|e| CoreError::DegenerateScores(e.to_string()))?;
    for _ in 0..draws {
        *counts.entry(residual[dist.sample(rng)]).or_insert(0) += 1;
    }
    Ok(counts)
}

/// Inputs to [`assign_weights`] for one class.
#[derive(Debug, Clone, Copy)]
pub struct WeightInputs<'a> {
    /// Sampling probabilities of the class's points under the distribution
    /// over the whole training set.
    pub probs: &'a [f64],
    /// Original point weights `w(p)`, aligned with `probs`.
    pub source_weights: &'a [f64],
    /// Total coreset size `m`.
    pub total_size: usize,
    /// This class's share of `m`.
    pub class_budget: usize,
    /// Σ w(p) over the class.
    pub prev_w: f64,
    pub class: ClassId,
}

/// Coreset weights for the deterministic set `q` and the sampled
/// multiplicities `counts` (disjoint position sets).
///
/// * `keep`: `w(q)` for deterministic points; sampled points share the
///   remaining mass `prev_W - Σ_Q w` in proportion to `count · w / Pr'`.
/// * `inv`: every point gets `count · w / (Pr · m)` with the training-set
///   `Pr` and the total size `m` (count is 1 for deterministic points).
/// * `prop`: deterministic points share `|Q| / budget · prev_W` in
///   proportion to `w`; sampled points share the rest in proportion to
///   `count · w / Pr'`.
///
/// `Pr'` is `Pr` renormalized over the class minus `Q`; as only ratios of
/// `1 / Pr'` enter the proportional rules, the normalizing constant cancels.
pub fn assign_weights(
    strategy: WeightStrategy,
    q: &[usize],
    counts: &BTreeMap<usize, usize>,
    inputs: WeightInputs<'_>,
) -> Result<BTreeMap<usize, f64>> {
    let WeightInputs {
        probs,
        source_weights: w,
        total_size,
        class_budget,
        prev_w,
        class,
    } = inputs;
    for &i in q.iter().chain(counts.keys()) {
        assert!(probs[i] > 0.0, "selected point at position {i} has zero probability");
    }
    if let Some(i) = q.iter().find(|i| counts.contains_key(i)) {
        return Err(CoreError::InvalidArgument(format!(
            "position {i} is both deterministic and sampled"
        )));
    }

    let mut out = BTreeMap::new();
    let inverse_sampled = |target: f64, out: &mut BTreeMap<usize, f64>| {
        let raw: Vec<(usize, f64)> = counts.iter().map(|(&i, &k)| (i, k as f64 * w[i] / probs[i])).collect();
        let total: f64 = raw.iter().map(|(_, r)| r).sum();
        for (i, r) in raw {
            out.insert(i, if total > 0.0 { target * r / total } else { 0.0 });
        }
    };

    match strategy {
        WeightStrategy::Inv => {
            let m = total_size as f64;
            for &i in q {
                out.insert(i, w[i] / (probs[i] * m));
            }
            for (&i, &k) in counts {
                out.insert(i, k as f64 * w[i] / (probs[i] * m));
            }
        }
        WeightStrategy::Keep => {
            let det_mass: f64 = q.iter().map(|&i| w[i]).sum();
            let remaining = prev_w - det_mass;
            if !counts.is_empty() && remaining <= 0.0 {
                return Err(CoreError::StrategyInfeasible {
                    strategy: "keep".into(),
                    class,
                    message: format!("deterministic weights {det_mass} leave no mass of the class total {prev_w}"),
                });
            }
            for &i in q {
                out.insert(i, w[i]);
            }
            inverse_sampled(remaining, &mut out);
        }
        WeightStrategy::Prop => {
            if class_budget == 0 {
                return Err(CoreError::InvalidArgument("class budget is zero".into()));
            }
            let det_share = q.len() as f64 / class_budget as f64 * prev_w;
            let det_mass: f64 = q.iter().map(|&i| w[i]).sum();
            for &i in q {
                out.insert(
                    i,
                    if det_mass > 0.0 {
                        det_share * w[i] / det_mass
                    } else {
                        0.0
                    },
                );
            }
            inverse_sampled(prev_w - det_share, &mut out);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ids(n: usize) -> Vec<PointId> {
        (0..n as PointId).collect()
    }

    #[test]
    fn deterministic_examples() {
        assert_eq!(
            select_deterministic(&[0.7, 0.1, 0.1, 0.1], &ids(4), 2, 0.5).unwrap(),
            vec![0]
        );
        assert!(select_deterministic(&[0.7, 0.1, 0.1, 0.1], &ids(4), 2, 0.0)
            .unwrap()
            .is_empty());
        assert_eq!(select_deterministic(&[0.25; 4], &ids(4), 4, 0.5).unwrap(), vec![0, 1]);
        // Ties resolve by point id, not by position.
        assert_eq!(
            select_deterministic(&[0.25; 4], &[9, 4, 7, 1], 4, 0.5).unwrap(),
            vec![3, 1]
        );
        assert!(select_deterministic(&[0.5, 0.5], &ids(2), 2, 1.0).is_err());
    }

    #[test]
    fn deterministic_count_snaps() {
        assert_eq!(deterministic_count(100, 0.29), 29);
        assert_eq!(deterministic_count(20, 0.05), 1);
        assert_eq!(deterministic_count(19, 0.05), 0);
    }

    #[test]
    fn forced_residual_draw() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = sample_residual(&[0.3, 0.3, 0.4], &[0, 2], 5, &mut rng).unwrap();
        assert_eq!(c, BTreeMap::from([(1, 5)]));
        assert!(sample_residual(&[0.5, 0.5], &[0, 1], 1, &mut rng).is_err());
    }

    #[test]
    fn residual_counts_are_binomial() {
        let draws = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let c = sample_residual(&[0.5, 0.5], &[], draws, &mut rng).unwrap();
        let sigma = (draws as f64 * 0.25).sqrt();
        for i in 0..2 {
            assert!((c[&i] as f64 - 50_000.0).abs() < 3.0 * sigma, "{c:?}");
        }
        assert_eq!(c.values().sum::<usize>(), draws);
    }

    #[test]
    fn residual_is_reproducible() {
        let probs = [0.1, 0.2, 0.3, 0.4];
        let a = sample_residual(&probs, &[3], 50, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_residual(&probs, &[3], 50, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    fn inputs<'a>(probs: &'a [f64], w: &'a [f64], m: usize, prev_w: f64) -> WeightInputs<'a> {
        WeightInputs {
            probs,
            source_weights: w,
            total_size: m,
            class_budget: m,
            prev_w,
            class: 0,
        }
    }

    #[test]
    fn inv_single_point() {
        let probs = [0.1; 10];
        let w = [1.0; 10];
        let out = assign_weights(
            WeightStrategy::Inv,
            &[],
            &BTreeMap::from([(3, 1)]),
            inputs(&probs, &w, 10, 10.0),
        )
        .unwrap();
        assert_eq!(out[&3], 1.0);
    }

    #[test]
    fn prop_deterministic_share() {
        let probs = vec![0.01; 100];
        let w = vec![1.0; 100];
        let counts = BTreeMap::from([(10, 3), (20, 2), (30, 3)]);
        let out = assign_weights(WeightStrategy::Prop, &[0, 1], &counts, inputs(&probs, &w, 10, 100.0)).unwrap();
        assert!((out[&0] - 10.0).abs() < 1e-12);
        assert!((out[&1] - 10.0).abs() < 1e-12);
        let total: f64 = out.values().sum();
        assert!((total - 100.0).abs() < 1e-9);
    }

    #[test]
    fn keep_without_deterministic_points_is_normalized_inverse_probability() {
        let probs = [0.1, 0.2, 0.3, 0.15, 0.25];
        let w = [1.0, 2.0, 1.0, 1.0, 3.0];
        let counts = BTreeMap::from([(0, 2), (2, 1), (4, 1)]);
        let out = assign_weights(WeightStrategy::Keep, &[], &counts, inputs(&probs, &w, 4, 8.0)).unwrap();
        // Raw inverse-probability terms: 2·1/0.1 = 20, 1·1/0.3 = 10/3, 1·3/0.25 = 12.
        let raw = [20.0, 10.0 / 3.0, 12.0];
        let raw_sum: f64 = raw.iter().sum();
        for (pos, r) in [0, 2, 4].iter().zip(raw) {
            assert!((out[pos] - 8.0 * r / raw_sum).abs() < 1e-12);
        }
        assert!((out.values().sum::<f64>() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn keep_rejects_exhausted_mass() {
        let probs = [0.5, 0.25, 0.25];
        let w = [5.0, 1.0, 1.0];
        let err = assign_weights(
            WeightStrategy::Keep,
            &[0],
            &BTreeMap::from([(1, 1)]),
            inputs(&probs, &w, 2, 4.0),
        )
        .unwrap_err();
        assert!(matches!(err, CoreError::StrategyInfeasible { class: 0, .. }));
    }
}
