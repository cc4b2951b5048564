//! Atomic-norm regularized least squares
//!
//! `min_X 1/2 ||y - B(X)||^2 + lambda ||X||_A`, solved through its
//! Toeplitz-block SDP with a dedicated ADMM engine. A grid group-lasso
//! solver and the frequency-oracle least-squares estimator serve as
//! independent references.

mod admm;
mod oracle;
mod reference;

use faer::Mat;
use serde::{Deserialize, Serialize};

pub use admm::{atomic_norm_sdp, solve_admm, AtomicNormSdp};
pub use oracle::{oracle_design, oracle_lsq, OracleFit};
pub use reference::{reference_solver, ReferenceSolution, MIN_GRID_FACTOR, REFERENCE_MAX_SAMPLES};

use crate::atomic::{dual_norm, ToeplitzGenerator};
use crate::error::{check_dim, domain, Result};
use crate::model::{apply_badj, DataMatrix, Subspace, C64};

/// `lambda = 2 eta sigma ||B||_F sqrt(ln N)`.
pub fn regularization_lambda(sigma: f64, subspace: &Subspace, eta: f64) -> Result<f64> {
    if !(eta > 0.0) || !eta.is_finite() {
        return domain(format!("eta must be positive, got {eta}"));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return domain(format!("sigma must be nonnegative, got {sigma}"));
    }
    let n = subspace.n_samples() as f64;
    Ok(2.0 * eta * sigma * subspace.frobenius_norm() * n.ln().sqrt())
}

#[derive(Debug, Clone)]
pub struct DenoiseProblem {
    y: Vec<C64>,
    subspace: Subspace,
    lambda: f64,
}

impl DenoiseProblem {
    pub fn new(y: Vec<C64>, subspace: Subspace, lambda: f64) -> Result<Self> {
        check_dim("observation length", subspace.n_samples(), y.len())?;
        if !(lambda > 0.0) || !lambda.is_finite() {
            return domain(format!("lambda must be positive, got {lambda}"));
        }
        Ok(Self { y, subspace, lambda })
    }

    pub fn y(&self) -> &[C64] {
        &self.y
    }

    pub fn subspace(&self) -> &Subspace {
        &self.subspace
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmConfig {
    pub rho: f64,
    pub max_iters: usize,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub adaptive_rho: bool,
    /// Over-relaxation factor in `(0, 2)`; `1.0` disables it.
    #[serde(default = "default_relaxation")]
    pub relaxation: f64,
    /// Keep the objective value of every iterate in [`SdpSolution::history`].
    #[serde(default)]
    pub record_history: bool,
}

fn default_relaxation() -> f64 {
    1.0
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            rho: 1.0,
            max_iters: 20_000,
            eps_abs: 1e-5,
            eps_rel: 1e-5,
            adaptive_rho: true,
            relaxation: 1.0,
            record_history: false,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) {
            return domain("rho must be positive");
        }
        if !(self.eps_abs > 0.0) || !(self.eps_rel > 0.0) {
            return domain("tolerances must be positive");
        }
        if !(self.relaxation > 0.0 && self.relaxation < 2.0) {
            return domain("relaxation must lie in (0, 2)");
        }
        if self.max_iters == 0 {
            return domain("max_iters must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub x_matrix: DataMatrix,
    pub u_hat: ToeplitzGenerator,
    pub t_hat: Mat<C64>,
    /// `B(X_hat)`.
    pub x_hat: Vec<C64>,
    pub objective: f64,
    pub atomic_norm_surrogate: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub lambda: f64,
    pub history: Vec<f64>,
}

impl SdpSolution {
    /// `[[Toep(u), X^H], [X, T]]`.
    pub fn block(&self) -> Mat<C64> {
        let n = self.u_hat.len();
        let k = self.t_hat.nrows();
        let u = self.u_hat.as_slice();
        Mat::from_fn(n + k, n + k, |r, c| match (r < n, c < n) {
            (true, true) if r >= c => u[r - c],
            (true, true) => u[c - r].conj(),
            (false, true) => self.x_matrix.get(r - n, c),
            (true, false) => self.x_matrix.get(c - n, r).conj(),
            (false, false) => self.t_hat[(r - n, c - n)],
        })
    }
}

/// Slack of the two optimality conditions at a computed point:
/// `lambda - ||B*(y - x_hat)||_A*` and the normalized gap
/// `|<X_hat, B*(y - x_hat)>_R - lambda ||X_hat||_A| / (1 + lambda ||X_hat||_A)`.
pub fn check_optimality(problem: &DenoiseProblem, solution: &SdpSolution) -> Result<(f64, f64)> {
    let residual: Vec<C64> = problem
        .y
        .iter()
        .zip(&solution.x_hat)
        .map(|(a, b)| a - b)
        .collect();
    let correlation = apply_badj(&problem.subspace, &residual)?;
    let (dual, _) = dual_norm(&correlation);
    let lambda = problem.lambda;
    let penalty = lambda * solution.atomic_norm_surrogate;
    let cond1 = lambda - dual;
    let cond2 = (solution.x_matrix.inner(&correlation).re - penalty).abs() / (1.0 + penalty);
    Ok((cond1, cond2))
}
