use nalgebra::DMatrix;

use super::{mix_with_uniform, SensitivityScores};
use crate::dataset::Features;
use crate::error::Result;

/// Statistical leverage of every row and the numerical rank they sum to.
#[derive(Debug, Clone, PartialEq)]
pub struct LeverageScores {
    pub values: Vec<f64>,
    pub rank: usize,
}

/// Squared row norms of an orthonormal basis for the column space of `x`.
///
/// The basis comes from a column-pivoted Householder QR; columns whose
/// pivot falls below `max(n, d) * eps * |R_00|` are treated as dependent.
pub fn leverage_scores(x: &DMatrix<f64>) -> LeverageScores {
    let (n, d) = x.shape();
    if n == 0 || d == 0 {
        return LeverageScores {
            values: vec![0.0; n],
            rank: 0,
        };
    }
    let qr = x.clone().col_piv_qr();
    let r = qr.r();
    let k = r.nrows().min(r.ncols());
    let lead = r[(0, 0)].abs();
    let cutoff = n.max(d) as f64 * f64::EPSILON * lead;
    let rank = if lead == 0.0 {
        0
    } else {
        (0..k).take_while(|&i| r[(i, i)].abs() > cutoff).count()
    };
    let q = qr.q();
    let values = (0..n).map(|i| (0..rank).map(|j| q[(i, j)] * q[(i, j)]).sum()).collect();
    LeverageScores { values, rank }
}

/// Leverage-based sensitivities mixed with the uniform distribution.
///
/// With `intercept`, a constant-1 column is appended first so the scores
/// describe the same design matrix the learners fit.
pub fn leverage_sensitivities(features: &Features, mix: f64, intercept: bool) -> Result<SensitivityScores> {
    let lev = leverage_scores(&features.to_matrix(intercept));
    mix_with_uniform(&lev.values, mix, "leverage")
}
