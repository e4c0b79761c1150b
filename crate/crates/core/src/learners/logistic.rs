use nalgebra::{DMatrix, DVector};

use super::{log1p_exp, sigmoid, signed_labels, LinearModel, Loss, TrainConfig};
use crate::dataset::{ClassId, Features, Row};
use crate::error::{CoreError, Result};

/// Regularized weighted logistic objective over `θ = [β, b]` (the
/// intercept entry is present only when `fit_intercept`).
///
/// `F(θ) = Σ ω_i ln(1 + exp(-ỹ_i (x_iᵀβ + b))) + ‖β‖² / (2C)`
#[derive(Debug, Clone)]
pub struct LogisticObjective<'a> {
    features: &'a Features,
    signs: Vec<f64>,
    weights: &'a [f64],
    c: f64,
    fit_intercept: bool,
}

impl<'a> LogisticObjective<'a> {
    pub fn new(
        features: &'a Features,
        labels: &[ClassId],
        weights: &'a [f64],
        c: f64,
        fit_intercept: bool,
    ) -> Result<Self> {
        Ok(Self::from_signs(
            features,
            signed_labels(labels)?,
            weights,
            c,
            fit_intercept,
        ))
    }

    pub(crate) fn from_signs(
        features: &'a Features,
        signs: Vec<f64>,
        weights: &'a [f64],
        c: f64,
        fit_intercept: bool,
    ) -> Self {
        LogisticObjective {
            features,
            signs,
            weights,
            c,
            fit_intercept,
        }
    }

    /// Length of `θ`.
    pub fn n_params(&self) -> usize {
        self.features.n_cols() + usize::from(self.fit_intercept)
    }

    fn score(&self, i: usize, theta: &[f64]) -> f64 {
        let d = self.features.n_cols();
        let b = if self.fit_intercept { theta[d] } else { 0.0 };
        self.features.row(i).dot(&theta[..d]) + b
    }

    fn penalty(&self, theta: &[f64]) -> f64 {
        let d = self.features.n_cols();
        theta[..d].iter().map(|v| v * v).sum::<f64>() / (2.0 * self.c)
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        let data: f64 = (0..self.features.n_rows())
            .map(|i| self.weights[i] * log1p_exp(-self.signs[i] * self.score(i, theta)))
            .sum();
        data + self.penalty(theta)
    }

    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let d = self.features.n_cols();
        let mut g = vec![0.0; self.n_params()];
        for i in 0..self.features.n_rows() {
            let y = self.signs[i];
            // d/dz ln(1 + e^{-yz}) = -y σ(-yz)
            let dz = -self.weights[i] * y * sigmoid(-y * self.score(i, theta));
            if dz == 0.0 {
                continue;
            }
            for (j, v) in self.features.row(i).iter() {
                g[j] += dz * v;
            }
            if self.fit_intercept {
                g[d] += dz;
            }
        }
        for j in 0..d {
            g[j] += theta[j] / self.c;
        }
        g
    }

    pub fn hessian(&self, theta: &[f64]) -> DMatrix<f64> {
        let d = self.features.n_cols();
        let p = self.n_params();
        let mut h = DMatrix::zeros(p, p);
        for i in 0..self.features.n_rows() {
            let m = self.signs[i] * self.score(i, theta);
            let curv = self.weights[i] * sigmoid(m) * sigmoid(-m);
            if curv == 0.0 {
                continue;
            }
            accumulate_outer(&mut h, self.features.row(i), curv, self.fit_intercept, d);
        }
        // Only the lower triangle was accumulated.
        for a in 0..p {
            for b in 0..a {
                h[(b, a)] = h[(a, b)];
            }
        }
        for j in 0..d {
            h[(j, j)] += 1.0 / self.c;
        }
        h
    }
}

/// Adds `scale · x̃ x̃ᵀ` to the lower triangle of `h`, where `x̃` is the row
/// with a trailing 1 when `intercept`.
fn accumulate_outer(h: &mut DMatrix<f64>, row: Row<'_>, scale: f64, intercept: bool, d: usize) {
    match row {
        Row::Dense(xs) => {
            for a in 0..d {
                let sa = scale * xs[a];
                if sa == 0.0 {
                    continue;
                }
                for b in 0..=a {
                    h[(a, b)] += sa * xs[b];
                }
            }
            if intercept {
                for b in 0..d {
                    h[(d, b)] += scale * xs[b];
                }
            }
        }
        Row::Sparse { indices, values } => {
            for (ka, (&a, &va)) in indices.iter().zip(values).enumerate() {
                let sa = scale * va;
                for (&b, &vb) in indices[..=ka].iter().zip(values) {
                    h[(a, b)] += sa * vb;
                }
                if intercept {
                    h[(d, a)] += sa;
                }
            }
        }
    }
    if intercept {
        h[(d, d)] += scale;
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solves `H δ = -g`, adding a growing ridge if `H` is not numerically
/// positive definite.
fn newton_direction(h: DMatrix<f64>, g: &[f64]) -> Result<Vec<f64>> {
    let rhs = -DVector::from_column_slice(g);
    if let Some(chol) = h.clone().cholesky() {
        return Ok(chol.solve(&rhs).iter().copied().collect());
    }
    let scale = h.diagonal().amax().max(1.0);
    let mut ridge = 1e-12 * scale;
    while ridge < 1e6 * scale {
        let mut damped = h.clone();
        for k in 0..damped.nrows() {
            damped[(k, k)] += ridge;
        }
        if let Some(chol) = damped.cholesky() {
            return Ok(chol.solve(&rhs).iter().copied().collect());
        }
        ridge *= 100.0;
    }
    Err(CoreError::Linalg("Newton system is not positive definite".into()))
}

pub(super) fn fit(features: &Features, signs: &[f64], weights: &[f64], config: &TrainConfig) -> Result<LinearModel> {
    let objective = LogisticObjective::from_signs(features, signs.to_vec(), weights, config.c, config.fit_intercept);
    let mut theta = vec![0.0; objective.n_params()];
    let mut value = objective.value(&theta);
    let mut converged = false;
    let mut iterations = 0;
    // The gradient is a weighted sum, so its rounding noise grows with the total weight.
    let tolerance = config.tolerance * weights.iter().sum::<f64>().max(1.0);

    while iterations < config.max_iterations {
        let g = objective.gradient(&theta);
        if norm(&g) < tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let step = newton_direction(objective.hessian(&theta), &g)?;
        let slope: f64 = g.iter().zip(&step).map(|(a, b)| a * b).sum();
        // Armijo backtracking; a full Newton step is accepted near the optimum.
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-10 {
            let trial: Vec<f64> = theta.iter().zip(&step).map(|(x, s)| x + t * s).collect();
            let trial_value = objective.value(&trial);
            if trial_value <= value + 1e-4 * t * slope {
                theta = trial;
                value = trial_value;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // No representable decrease left; report the gradient test honestly.
            converged = norm(&objective.gradient(&theta)) < tolerance;
            break;
        }
    }
    if !theta.iter().all(|v| v.is_finite()) {
        return Err(CoreError::NonFinite("logistic regression diverged".into()));
    }

    let d = features.n_cols();
    let intercept = if config.fit_intercept { theta[d] } else { 0.0 };
    theta.truncate(d);
    Ok(LinearModel {
        coefficients: theta,
        intercept,
        loss: Loss::Logistic,
        c: config.c,
        converged,
        iterations,
    })
}
