use super::{LinearModel, Loss, TrainConfig};
use crate::dataset::Features;
use crate::error::{CoreError, Result};

/// Initial step of the `η0 / √t` schedule on the weight-normalized objective.
const STEP0: f64 = 0.5;

struct HingeObjective<'a> {
    features: &'a Features,
    signs: &'a [f64],
    weights: &'a [f64],
    total_weight: f64,
    c: f64,
    fit_intercept: bool,
}

impl HingeObjective<'_> {
    fn score(&self, i: usize, theta: &[f64]) -> f64 {
        let d = self.features.n_cols();
        let b = if self.fit_intercept { theta[d] } else { 0.0 };
        self.features.row(i).dot(&theta[..d]) + b
    }

    /// Subgradient of `(Σ ω_i max(0, 1 - ỹ_i f_i) + ‖β‖²/(2C)) / Σω`,
    /// taking 0 for terms sitting exactly on the hinge.
    fn subgradient(&self, theta: &[f64]) -> Vec<f64> {
        let d = self.features.n_cols();
        let mut g = vec![0.0; theta.len()];
        for i in 0..self.features.n_rows() {
            let y = self.signs[i];
            if y * self.score(i, theta) < 1.0 {
                let coef = -self.weights[i] * y;
                for (j, v) in self.features.row(i).iter() {
                    g[j] += coef * v;
                }
                if self.fit_intercept {
                    g[d] += coef;
                }
            }
        }
        for j in 0..d {
            g[j] += theta[j] / self.c;
        }
        g.iter_mut().for_each(|v| *v /= self.total_weight);
        g
    }
}

/// Deterministic subgradient descent with step `η0/√t`, returning the
/// average of the iterates from the second half of the run.
pub(super) fn fit(features: &Features, signs: &[f64], weights: &[f64], config: &TrainConfig) -> Result<LinearModel> {
    let objective = HingeObjective {
        features,
        signs,
        weights,
        total_weight: weights.iter().sum(),
        c: config.c,
        fit_intercept: config.fit_intercept,
    };
    let d = features.n_cols();
    let p = d + usize::from(config.fit_intercept);
    let mut theta = vec![0.0; p];
    let mut average = vec![0.0; p];
    let mut averaged = 0usize;
    let burn_in = config.max_iterations / 2;
    let mut iterations = 0;
    let mut converged = false;

    for t in 1..=config.max_iterations {
        let g = objective.subgradient(&theta);
        if g.iter().map(|v| v * v).sum::<f64>().sqrt() < config.tolerance {
            converged = true;
            average.clone_from(&theta);
            averaged = 1;
            break;
        }
        iterations = t;
        let eta = STEP0 / (t as f64).sqrt();
        for (x, gi) in theta.iter_mut().zip(&g) {
            *x -= eta * gi;
        }
        if t > burn_in {
            averaged += 1;
            let k = averaged as f64;
            for (a, x) in average.iter_mut().zip(&theta) {
                *a += (x - *a) / k;
            }
        }
    }
    let mut solution = if averaged > 0 { average } else { theta };
    if !solution.iter().all(|v| v.is_finite()) {
        return Err(CoreError::NonFinite("hinge solver diverged".into()));
    }
    let intercept = if config.fit_intercept { solution[d] } else { 0.0 };
    solution.truncate(d);
    Ok(LinearModel {
        coefficients: solution,
        intercept,
        loss: Loss::Hinge,
        c: config.c,
        converged,
        iterations,
    })
}
