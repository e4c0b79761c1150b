use std::collections::HashSet;

use coretune::dataset::Dataset;
use coretune::learners::{weighted_loss, LinearModel, Loss};
use coretune::sampler::{
    allocate_class_budgets, build_coreset, deterministic_count, ClassAllocation, Coreset, Provenance, SamplerConfig,
    WeightStrategy,
};
use coretune::sensitivity::{to_probabilities, Leverage, SensitivityProvider, SensitivityScores};
use coretune::synthetic::GaussianMixture;

fn instance() -> (Dataset, SensitivityScores) {
    let data = GaussianMixture::new(200, 3, 0.5, 2.0).generate(8).unwrap();
    let scores = Leverage::default().scores(&data).unwrap();
    (data, scores)
}

fn config(m: usize, det_ratio: f64, strategy: WeightStrategy, seed: u64) -> SamplerConfig {
    SamplerConfig {
        coreset_size: m,
        det_ratio,
        weight_strategy: strategy,
        class_allocation: ClassAllocation::Proportional,
        seed,
    }
}

#[test]
fn inverse_probability_weights_are_unbiased() {
    let (data, scores) = instance();
    let n = data.len() as f64;
    let resamples = 1000;
    let mean: f64 = (0..resamples)
        .map(|s| {
            build_coreset(&data, &scores, &config(40, 0.0, WeightStrategy::Inv, s))
                .unwrap()
                .total_weight()
        })
        .sum::<f64>()
        / resamples as f64;
    assert!((mean / n - 1.0).abs() < 0.02, "mean total weight {mean} for n = {n}");
}

#[test]
fn keep_and_prop_conserve_class_mass() {
    let (data, scores) = instance();
    let counts = data.class_counts();
    for strategy in [WeightStrategy::Keep, WeightStrategy::Prop] {
        for seed in 0..200 {
            let c = build_coreset(&data, &scores, &config(40, 0.2, strategy, seed)).unwrap();
            for (&class, &n_c) in &counts {
                let mass: f64 = c.entries().iter().filter(|e| e.label == class).map(|e| e.weight).sum();
                let rel = (mass - n_c as f64).abs() / n_c as f64;
                assert!(rel < 1e-9, "{strategy} seed {seed} class {class}: mass {mass} vs {n_c}");
            }
        }
    }
}

#[test]
fn top_probability_points_are_included_once() {
    let (data, scores) = instance();
    let probs = to_probabilities(&scores).unwrap();
    for det_ratio in [0.05, 0.1, 0.2, 0.3, 0.4, 0.5] {
        for seed in 0..10 {
            let m = 60;
            let c = build_coreset(&data, &scores, &config(m, det_ratio, WeightStrategy::Inv, seed)).unwrap();
            let budgets = allocate_class_budgets(m, &data.class_counts(), &ClassAllocation::Proportional).unwrap();
            for (&class, &budget) in &budgets {
                let mut members = data.class_positions(class);
                members.sort_by(|&a, &b| {
                    probs[b]
                        .total_cmp(&probs[a])
                        .then(data.point_ids()[a].cmp(&data.point_ids()[b]))
                });
                let k = deterministic_count(budget, det_ratio);
                let top: HashSet<u64> = members[..k].iter().map(|&i| data.point_ids()[i]).collect();
                let det: HashSet<u64> = c
                    .entries()
                    .iter()
                    .filter(|e| e.label == class && e.provenance == Provenance::Deterministic)
                    .map(|e| e.point_id)
                    .collect();
                assert_eq!(det, top, "det_ratio {det_ratio} seed {seed} class {class}");
                assert!(c
                    .entries()
                    .iter()
                    .filter(|e| top.contains(&e.point_id))
                    .all(|e| e.count == 1));
            }
        }
    }
}

#[test]
fn weighted_loss_tracks_full_loss() {
    let data = GaussianMixture::new(1000, 5, 0.5, 1.5).generate(2).unwrap();
    let scores = Leverage::default().scores(&data).unwrap();
    let thetas: Vec<Vec<f64>> = (0..10)
        .map(|k| {
            let v: Vec<f64> = (0..5).map(|j| ((k * 5 + j) as f64 * 1.7).sin()).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / norm).collect()
        })
        .collect();
    let mut within = 0;
    let mut total = 0;
    for seed in 0..20 {
        let c = build_coreset(&data, &scores, &config(200, 0.0, WeightStrategy::Inv, seed)).unwrap();
        let sub = c.to_dataset(&data).unwrap();
        for theta in &thetas {
            let model = LinearModel {
                coefficients: theta.clone(),
                ..LinearModel::zeros(5, Loss::Logistic)
            };
            let full = weighted_loss(&model, data.features(), data.labels(), data.weights()).unwrap();
            let approx = weighted_loss(&model, sub.features(), sub.labels(), sub.weights()).unwrap();
            total += 1;
            if (approx / full - 1.0).abs() <= 0.2 {
                within += 1;
            }
        }
    }
    assert!(within as f64 >= 0.95 * total as f64, "{within}/{total}");
}

#[test]
fn coreset_csv_round_trips() {
    let (data, scores) = instance();
    let c = build_coreset(&data, &scores, &config(50, 0.3, WeightStrategy::Prop, 4)).unwrap();
    let mut buf = Vec::new();
    c.write_csv(&mut buf).unwrap();
    assert_eq!(Coreset::read_csv(buf.as_slice()).unwrap(), c);
}
