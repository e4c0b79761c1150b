use nalgebra::{Cholesky, DMatrix, DVector};

use super::{mix_with_uniform, SensitivityScores};
use crate::dataset::Features;
use crate::error::{CoreError, Result};

/// Raw ℓ1 Lewis weights and how the fixed-point iteration ended.
#[derive(Debug, Clone, PartialEq)]
pub struct LewisWeights {
    pub weights: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// A ridge of `1e-8 * trace / d` was added to a singular Gram matrix.
    pub ridge_used: bool,
    /// Largest relative change in the final iteration.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LewisOutcome {
    pub scores: SensitivityScores,
    pub weights: LewisWeights,
}

/// Factor `XᵀW⁻¹X`, falling back to a small ridge when it is singular.
fn factor_gram(x: &DMatrix<f64>, w: &[f64]) -> Result<(Cholesky<f64, nalgebra::Dyn>, bool)> {
    let d = x.ncols();
    let mut gram = DMatrix::zeros(d, d);
    for (i, &wi) in w.iter().enumerate() {
        if wi > 0.0 {
            let row = x.row(i);
            gram.ger(1.0 / wi, &row.transpose(), &row.transpose(), 1.0);
        }
    }
    if let Some(chol) = gram.clone().cholesky() {
        return Ok((chol, false));
    }
    let trace = gram.trace();
    let lambda = if trace > 0.0 { 1e-8 * trace / d as f64 } else { 1e-8 };
    for k in 0..d {
        gram[(k, k)] += lambda;
    }
    gram.cholesky()
        .map(|c| (c, true))
        .ok_or_else(|| CoreError::Linalg("Gram matrix not positive definite after ridge".into()))
}

/// One sweep `w_i ← (x_iᵀ (Xᵀ W⁻¹ X)⁻¹ x_i)^{1/2}`.
fn lewis_step(x: &DMatrix<f64>, w: &[f64]) -> Result<(Vec<f64>, bool)> {
    let (chol, ridge) = factor_gram(x, w)?;
    let l = chol.l();
    let next = (0..x.nrows())
        .map(|i| {
            let xi = DVector::from_iterator(x.ncols(), x.row(i).iter().copied());
            let z = l
                .solve_lower_triangular(&xi)
                .expect("Cholesky factor has a positive diagonal");
            z.norm()
        })
        .collect();
    Ok((next, ridge))
}

/// Fixed-point iteration for ℓ1 Lewis weights, started at `d / n`.
///
/// Stops once `max_i |w_i' - w_i| / w_i < tol` or after `max_iters` sweeps.
pub fn lewis_weights(x: &DMatrix<f64>, max_iters: usize, tol: f64) -> Result<LewisWeights> {
    let (n, d) = x.shape();
    if n == 0 || d == 0 {
        return Err(CoreError::EmptyInput("Lewis weights of an empty matrix".into()));
    }
    let mut w = vec![d as f64 / n as f64; n];
    let mut ridge_used = false;
    let mut residual = f64::INFINITY;
    for iter in 1..=max_iters {
        let (next, ridge) = lewis_step(x, &w)?;
        ridge_used |= ridge;
        residual = w
            .iter()
            .zip(&next)
            .map(|(old, new)| if *old > 0.0 { (new - old).abs() / old } else { new.abs() })
            .fold(0.0, f64::max);
        w = next;
        if residual < tol {
            return Ok(LewisWeights {
                weights: w,
                iterations: iter,
                converged: true,
                ridge_used,
                residual,
            });
        }
    }
    Ok(LewisWeights {
        weights: w,
        iterations: max_iters,
        converged: false,
        ridge_used,
        residual,
    })
}

/// ℓ1 Lewis-weight sensitivities mixed with the uniform distribution.
pub fn lewis_weight_sensitivities(
    features: &Features,
    max_iters: usize,
    tol: f64,
    mix: f64,
    intercept: bool,
) -> Result<LewisOutcome> {
    let weights = lewis_weights(&features.to_matrix(intercept), max_iters, tol)?;
    let scores = mix_with_uniform(&weights.weights, mix, "lewis")?;
    Ok(LewisOutcome { scores, weights })
}
