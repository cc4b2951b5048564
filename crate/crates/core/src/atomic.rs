//! Atomic norm machinery: Hermitian Toeplitz blocks, the SDP surrogate of
//! the atomic norm, the dual atomic norm `sup_tau ||Q a(tau)||_2` and its
//! certified grid bound.

use std::f64::consts::PI;

use faer::{Mat, MatRef};

use crate::error::{domain, Result};
use crate::model::{DataMatrix, C64};
use crate::poly::VectorPoly;

/// First column `u` of a Hermitian Toeplitz matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzGenerator {
    u: Vec<C64>,
}

impl ToeplitzGenerator {
    pub fn new(u: Vec<C64>) -> Result<Self> {
        match u.first() {
            None => domain("Toeplitz generator must be nonempty"),
            Some(u0) if u0.im != 0.0 => domain(format!(
                "Toeplitz diagonal entry {u0} must be real for a Hermitian matrix"
            )),
            Some(_) => Ok(Self { u }),
        }
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.u
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.u.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// `Toep(u)` with entry `(r, c) = u(r - c)` below the diagonal and its
/// conjugate above.
pub fn build_toeplitz(u: &ToeplitzGenerator) -> Mat<C64> {
    let n = u.len();
    Mat::from_fn(n, n, |r, c| {
        if r >= c {
            u.u[r - c]
        } else {
            u.u[c - r].conj()
        }
    })
}

/// `1/2 ((1/N) tr Toep(u) + tr T)`, where `(1/N) tr Toep(u) = u(0)`.
pub fn atomic_norm_value(u: &ToeplitzGenerator, t: MatRef<'_, C64>) -> f64 {
    let trace_t: f64 = (0..t.nrows().min(t.ncols())).map(|k| t[(k, k)].re).sum();
    0.5 * (u.u[0].re + trace_t)
}

/// Grid size `ceil(4 pi N ln N)` used for dual-norm evaluation, never below
/// the certification minimum `ceil(4 pi N) + 1`.
pub fn default_grid_size(n: usize) -> usize {
    let n_f = n as f64;
    let proof_grid = (4.0 * PI * n_f * n_f.ln()).ceil() as usize;
    proof_grid.max(min_certified_grid(n))
}

pub fn min_certified_grid(n: usize) -> usize {
    (4.0 * PI * n as f64).ceil() as usize + 1
}

/// Dual atomic norm `sup_{tau in [0,1)} ||Q a(tau)||_2` and a maximizer.
///
/// Coarse FFT grid of size [`default_grid_size`], then derivative bisection
/// around every competitive grid maximum.
pub fn dual_norm(q: &DataMatrix) -> (f64, f64) {
    VectorPoly::from_matrix(q).sup_norm(default_grid_size(q.cols()))
}

/// Guaranteed upper bound on the dual norm from an `L`-point grid:
/// `sqrt(max_l ||Q a(l/L)||^2 / (1 - 2 pi N / L))`.
pub fn certified_dual_norm_bound(q: &DataMatrix, grid: usize) -> Result<f64> {
    let n = q.cols();
    if grid < min_certified_grid(n) {
        return domain(format!(
            "grid size {grid} below the certified minimum {} for N = {n}",
            min_certified_grid(n)
        ));
    }
    let grid_max = VectorPoly::from_matrix(q)
        .grid_norm_sqr(grid)
        .into_iter()
        .fold(0.0, f64::max);
    let shrink = 1.0 - 2.0 * PI * n as f64 / grid as f64;
    Ok((grid_max / shrink).sqrt())
}

/// Ratios `sup ||p'|| / (N sup ||p||)` and `sup ||p''|| / (N^2 sup ||p||)`
/// for `p(tau) = Q a(tau)`, derivatives taken in the angle `2 pi tau`.
/// Both are at most one for a polynomial of degree below `N`.
pub fn bernstein_check(q: &DataMatrix) -> (f64, f64) {
    let p = VectorPoly::from_matrix(q);
    if p.is_zero() {
        return (0.0, 0.0);
    }
    let n = q.cols() as f64;
    let grid = default_grid_size(q.cols());
    let (sup0, _) = p.sup_norm(grid);
    let (sup1, _) = p.angular_derivative(1).sup_norm(grid);
    let (sup2, _) = p.angular_derivative(2).sup_norm(grid);
    (sup1 / (n * sup0), sup2 / (n * n * sup0))
}
