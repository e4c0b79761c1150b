use coretune::dataset::{Dataset, Features};
use coretune::learners::{train, LinearModel, LogisticObjective, Loss, TrainConfig};
use coretune::synthetic::GaussianMixture;

fn distance(a: &LinearModel, b: &LinearModel) -> f64 {
    let coef: f64 = a
        .coefficients
        .iter()
        .zip(&b.coefficients)
        .map(|(x, y)| (x - y).powi(2))
        .sum();
    (coef + (a.intercept - b.intercept).powi(2)).sqrt()
}

fn sample() -> Dataset {
    GaussianMixture::new(120, 4, 0.35, 1.5).generate(21).unwrap()
}

/// The data with every third point duplicated, and the same data with
/// those points carrying weight 2 instead.
fn duplicated_and_doubled(data: &Dataset) -> (Dataset, Dataset) {
    let mut positions: Vec<usize> = (0..data.len()).collect();
    positions.extend((0..data.len()).step_by(3));
    let dup = Dataset::new(
        data.features().select(&positions),
        positions.iter().map(|&i| data.labels()[i]).collect(),
        vec![1.0; positions.len()],
        (0..positions.len() as u64).collect(),
    )
    .unwrap();
    let weights = (0..data.len()).map(|i| if i % 3 == 0 { 2.0 } else { 1.0 }).collect();
    (dup, data.with_weights(weights).unwrap())
}

fn fit(data: &Dataset, cfg: &TrainConfig) -> LinearModel {
    train(data.features(), data.labels(), data.weights(), cfg).unwrap()
}

#[test]
fn duplication_matches_doubled_weight() {
    let data = sample();
    let (dup, doubled) = duplicated_and_doubled(&data);
    for loss in [Loss::Logistic, Loss::Hinge] {
        let cfg = TrainConfig {
            loss,
            ..TrainConfig::default()
        };
        let d = distance(&fit(&dup, &cfg), &fit(&doubled, &cfg));
        assert!(d < 1e-6, "{loss:?}: coefficient distance {d}");
    }
}

#[test]
fn weights_times_k_with_c_over_k_leaves_the_solution() {
    let data = sample();
    let k = 3.5;
    let scaled = data.with_weights(vec![k; data.len()]).unwrap();
    for loss in [Loss::Logistic, Loss::Hinge] {
        let base = TrainConfig {
            loss,
            c: 0.7,
            ..TrainConfig::default()
        };
        let big = TrainConfig {
            c: 0.7 / k,
            ..base.clone()
        };
        let d = distance(&fit(&data, &base), &fit(&scaled, &big));
        assert!(d < 1e-6, "{loss:?}: coefficient distance {d}");
    }
}

#[test]
fn logistic_optimum_has_zero_gradient() {
    let data = sample();
    let cfg = TrainConfig::default();
    let m = fit(&data, &cfg);
    assert!(m.converged);
    let obj = LogisticObjective::new(data.features(), data.labels(), data.weights(), cfg.c, true).unwrap();
    let mut theta = m.coefficients.clone();
    theta.push(m.intercept);
    let g = obj.gradient(&theta);
    assert!(g.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-6);
}

#[test]
fn sparse_and_dense_inputs_train_alike() {
    let rows: Vec<Vec<f64>> = (0..80)
        .map(|i| {
            let mut r = vec![0.0; 12];
            r[i % 12] = 1.0 + (i % 5) as f64 * 0.3;
            r[(i * 7) % 12] -= 0.5;
            r
        })
        .collect();
    let labels: Vec<usize> = (0..80).map(|i| usize::from(i % 12 < 5 || i % 7 == 0)).collect();
    let dense = Features::from_rows(&rows).unwrap();
    let sparse_rows: Vec<Vec<(usize, f64)>> = rows
        .iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(j, v)| (j, *v))
                .collect()
        })
        .collect();
    let sparse = Features::from_sparse_rows(sparse_rows, 12).unwrap();
    assert!(sparse.is_sparse());
    let w = vec![1.0; 80];
    let cfg = TrainConfig::default();
    let a = train(&dense, &labels, &w, &cfg).unwrap();
    let b = train(&sparse, &labels, &w, &cfg).unwrap();
    assert!(distance(&a, &b) < 1e-9);
}
