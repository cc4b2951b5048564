//! Least squares with the true frequencies known.

use faer::linalg::solvers::SolveLstsq;
use faer::Mat;

use crate::error::{check_dim, domain, Error, Result};
use crate::model::{mse, sample_index, unit_phase, Subspace, C64};

#[derive(Debug, Clone)]
pub struct OracleFit {
    pub x_hat: Vec<C64>,
    pub mse: f64,
}

/// `N x KJ` design whose column `j K + k` has entry `e^{-i 2 pi m tau_j} conj(b_m(k))`.
pub fn oracle_design(subspace: &Subspace, freqs: &[f64]) -> Mat<C64> {
    let (n, k) = (subspace.n_samples(), subspace.dim());
    let order = subspace.order();
    Mat::from_fn(n, k * freqs.len(), |i, col| {
        let (j, kk) = (col / k, col % k);
        unit_phase(-freqs[j] * sample_index(i, order) as f64) * subspace.row(i)[kk].conj()
    })
}

/// Fits the stacked coefficients by least squares and scores the fit
/// against `clean`.
pub fn oracle_lsq(y: &[C64], subspace: &Subspace, freqs: &[f64], clean: &[C64]) -> Result<OracleFit> {
    let n = subspace.n_samples();
    check_dim("observation length", n, y.len())?;
    check_dim("clean signal length", n, clean.len())?;
    let cols = subspace.dim() * freqs.len();
    if freqs.is_empty() {
        return domain("at least one frequency is required");
    }
    if cols > n {
        return Err(Error::RankDeficient { ratio: 0.0 });
    }
    let design = oracle_design(subspace, freqs);
    let sv = design
        .singular_values()
        .map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let largest = sv.iter().cloned().fold(0.0, f64::max);
    let smallest = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let ratio = if largest > 0.0 { smallest / largest } else { 0.0 };
    if ratio < 1e-10 {
        return Err(Error::RankDeficient { ratio });
    }
    let rhs = Mat::from_fn(n, 1, |i, _| y[i]);
    let coef = design.qr().solve_lstsq(&rhs);
    let fitted = &design * &coef;
    let x_hat: Vec<C64> = (0..n).map(|i| fitted[(i, 0)]).collect();
    let mse = mse(&x_hat, clean)?;
    Ok(OracleFit { x_hat, mse })
}
