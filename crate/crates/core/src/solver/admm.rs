//! ADMM for the Toeplitz-block SDP.
//!
//! Splitting: the structured block `Theta(X, u, T) = [[Toep(u), X^H], [X, T]]`
//! must equal a free PSD matrix `Z`, with multiplier `Lambda`:
//!
//! ```text
//! (X, u, T) <- argmin f(X, u, T) + rho/2 ||Theta(X, u, T) - Z - Lambda/rho||^2
//! Z         <- P_psd(Theta - Lambda/rho)
//! Lambda    <- Lambda + rho (Z - Theta)
//! ```
//!
//! Every block of the first step has a closed form: per-column rank-one
//! solves for `X`, diagonal averaging for `u` and a diagonal shift for `T`.
//!
//! The iteration runs on the congruent block `D Theta D` with
//! `D = diag(N^{-1/4} I_N, N^{1/4} I_K)`. At a minimal point `tr Toep(u)` is
//! `N` times `tr T`, and the dual blocks differ by the same factor; the
//! scaling evens both out and leaves `X` and the PSD cone unchanged.
//!
//! ADMM is not a descent method: the recorded objective of the (infeasible)
//! iterates can rise for a stretch before settling.

use faer::Mat;

use super::{AdmmConfig, DenoiseProblem, SdpSolution};
use crate::atomic::ToeplitzGenerator;
use crate::error::Result;
use crate::linalg::{min_eigenvalue, PsdProjector};
use crate::model::{apply_b, DataMatrix, Subspace, C64};

enum XStep<'a> {
    Denoise { y: &'a [C64], subspace: &'a Subspace },
    Fixed(&'a DataMatrix),
}

struct Iterate {
    x: DataMatrix,
    u: Vec<C64>,
    t: Mat<C64>,
    primal: f64,
    dual: f64,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
}

fn surrogate(u: &[C64], t: &Mat<C64>) -> f64 {
    0.5 * (u[0].re + (0..t.nrows()).map(|k| t[(k, k)].re).sum::<f64>())
}

fn misfit(y: &[C64], subspace: &Subspace, x: &DataMatrix) -> f64 {
    (0..y.len())
        .map(|i| {
            let bx: C64 = subspace
                .row(i)
                .iter()
                .zip(x.col(i))
                .map(|(b, v)| b.conj() * v)
                .sum();
            (y[i] - bx).norm_sqr()
        })
        .sum::<f64>()
        * 0.5
}

/// `D Theta D`, with `alpha = N^{-1/2}` on the Toeplitz block and `1/alpha` on `T`.
fn assemble(u: &[C64], x: &DataMatrix, t: &Mat<C64>, alpha: f64) -> Mat<C64> {
    let n = u.len();
    let k = t.nrows();
    Mat::from_fn(n + k, n + k, |r, c| match (r < n, c < n) {
        (true, true) if r >= c => u[r - c] * alpha,
        (true, true) => u[c - r].conj() * alpha,
        (false, true) => x.get(r - n, c),
        (true, false) => x.get(c - n, r).conj(),
        (false, false) => t[(r - n, c - n)] / alpha,
    })
}

fn run(step: XStep<'_>, n: usize, k: usize, weight: f64, config: &AdmmConfig) -> Result<Iterate> {
    config.validate()?;
    let dim = n + k;
    let mut rho = config.rho;
    let alpha = config.relaxation;
    let scale_top = 1.0 / (n as f64).sqrt();
    let scale_bottom = 1.0 / scale_top;
    let mut z = Mat::<C64>::zeros(dim, dim);
    let mut lam = Mat::<C64>::zeros(dim, dim);
    let mut x = match step {
        XStep::Fixed(fixed) => fixed.clone(),
        XStep::Denoise { .. } => DataMatrix::zeros(k, n),
    };
    let row_energy: Vec<f64> = match step {
        XStep::Denoise { subspace, .. } => (0..n).map(|i| subspace.row_norm_sqr(i)).collect(),
        XStep::Fixed(_) => Vec::new(),
    };
    let mut u = vec![C64::new(0.0, 0.0); n];
    let mut t = Mat::<C64>::zeros(k, k);
    let mut history = Vec::new();
    let mut projector = PsdProjector::default();
    let (mut primal, mut dual) = (f64::INFINITY, f64::INFINITY);
    let mut iterations = 0;
    let mut converged = false;

    for iter in 1..=config.max_iters {
        iterations = iter;
        let w = Mat::from_fn(dim, dim, |r, c| z[(r, c)] + lam[(r, c)] / rho);

        if let XStep::Denoise { y, subspace } = step {
            // (b b^H + 2 rho I) x = b y + 2 rho s, inverted by Sherman-Morrison
            let two_rho = 2.0 * rho;
            for i in 0..n {
                let b = subspace.row(i);
                let col = x.col_mut(i);
                let mut bh_rhs = C64::new(0.0, 0.0);
                for kk in 0..k {
                    let s = (w[(n + kk, i)] + w[(i, n + kk)].conj()) * 0.5;
                    col[kk] = b[kk] * y[i] + s * two_rho;
                    bh_rhs += b[kk].conj() * col[kk];
                }
                let coef = bh_rhs / (two_rho + row_energy[i]);
                for kk in 0..k {
                    col[kk] = (col[kk] - b[kk] * coef) / two_rho;
                }
            }
        }

        // minimizers of w/2 u0 + rho/2 ||a Toep(u) - W11||^2 and
        // w/2 tr T + rho/2 ||T / a - W22||^2
        let diag_mean = (0..n).map(|i| w[(i, i)].re).sum::<f64>() / n as f64;
        u[0] = C64::new(
            diag_mean / scale_top - weight / (2.0 * rho * n as f64 * scale_top * scale_top),
            0.0,
        );
        for d in 1..n {
            let mut acc = C64::new(0.0, 0.0);
            for c in 0..n - d {
                acc += w[(c + d, c)] + w[(c, c + d)].conj();
            }
            u[d] = acc / (2.0 * (n - d) as f64 * scale_top);
        }

        let shift = weight / (2.0 * rho * scale_bottom * scale_bottom);
        t = Mat::from_fn(k, k, |r, c| {
            let v = (w[(n + r, n + c)] + w[(n + c, n + r)].conj()) * (0.5 / scale_bottom);
            if r == c {
                C64::new(v.re - shift, 0.0)
            } else {
                v
            }
        });

        let theta = assemble(&u, &x, &t, scale_top);
        let relaxed = |r: usize, c: usize| {
            if alpha == 1.0 {
                theta[(r, c)]
            } else {
                theta[(r, c)] * alpha + z[(r, c)] * (1.0 - alpha)
            }
        };
        let v = Mat::from_fn(dim, dim, |r, c| relaxed(r, c) - lam[(r, c)] / rho);
        let z_next = projector.project(v.as_ref())?;
        let (mut primal_sq, mut dual_sq) = (0.0, 0.0);
        let (mut theta_sq, mut z_sq, mut lam_sq) = (0.0, 0.0, 0.0);
        for c in 0..dim {
            for r in 0..dim {
                let zn = z_next[(r, c)];
                let l = lam[(r, c)] + (zn - relaxed(r, c)) * rho;
                lam[(r, c)] = l;
                primal_sq += (zn - theta[(r, c)]).norm_sqr();
                dual_sq += (zn - z[(r, c)]).norm_sqr();
                theta_sq += theta[(r, c)].norm_sqr();
                z_sq += zn.norm_sqr();
                lam_sq += l.norm_sqr();
            }
        }
        primal = primal_sq.sqrt();
        dual = rho * dual_sq.sqrt();
        z = z_next;

        if config.record_history {
            let data = match step {
                XStep::Denoise { y, subspace } => misfit(y, subspace, &x),
                XStep::Fixed(_) => 0.0,
            };
            history.push(data + weight * surrogate(&u, &t));
        }

        let scale = dim as f64;
        let eps_pri = config.eps_abs * scale + config.eps_rel * theta_sq.max(z_sq).sqrt();
        let eps_dual = config.eps_abs * scale + config.eps_rel * lam_sq.sqrt();
        if primal <= eps_pri && dual <= eps_dual {
            converged = true;
            break;
        }

        if config.adaptive_rho && iter % 10 == 0 {
            if primal > 10.0 * dual {
                rho *= 2.0;
            } else if dual > 10.0 * primal {
                rho /= 2.0;
            }
        }
    }

    // Theta only meets the cone to within the primal tolerance; lifting the
    // scaled block by its most negative eigenvalue makes the returned point
    // feasible without touching X.
    let floor = min_eigenvalue(assemble(&u, &x, &t, scale_top).as_ref())?;
    if floor < 0.0 {
        u[0].re -= floor / scale_top;
        for kk in 0..k {
            t[(kk, kk)].re -= floor * scale_top;
        }
    }

    Ok(Iterate {
        x,
        u,
        t,
        primal,
        dual,
        iterations,
        converged,
        history,
    })
}

/// Solves the denoising SDP. Hitting `max_iters` is reported through
/// `converged = false`, not as an error.
pub fn solve_admm(problem: &DenoiseProblem, config: &AdmmConfig) -> Result<SdpSolution> {
    let subspace = problem.subspace();
    let (n, k) = (subspace.n_samples(), subspace.dim());
    let it = run(
        XStep::Denoise {
            y: problem.y(),
            subspace,
        },
        n,
        k,
        problem.lambda(),
        config,
    )?;
    let x_hat = apply_b(subspace, &it.x)?;
    let atomic = surrogate(&it.u, &it.t);
    let data: f64 = problem
        .y()
        .iter()
        .zip(&x_hat)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        * 0.5;
    Ok(SdpSolution {
        x_matrix: it.x,
        u_hat: ToeplitzGenerator::new(it.u)?,
        t_hat: it.t,
        x_hat,
        objective: data + problem.lambda() * atomic,
        atomic_norm_surrogate: atomic,
        primal_residual: it.primal,
        dual_residual: it.dual,
        iterations: it.iterations,
        converged: it.converged,
        lambda: problem.lambda(),
        history: it.history,
    })
}

/// Result of computing `||X||_A` by the SDP with `X` held fixed.
#[derive(Debug, Clone)]
pub struct AtomicNormSdp {
    pub value: f64,
    pub u_hat: ToeplitzGenerator,
    pub t_hat: Mat<C64>,
    pub primal_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `||X||_A = min 1/2 (u(0) + tr T)` over PSD blocks `[[Toep(u), X^H], [X, T]]`.
pub fn atomic_norm_sdp(x: &DataMatrix, config: &AdmmConfig) -> Result<AtomicNormSdp> {
    let it = run(XStep::Fixed(x), x.cols(), x.rows(), 1.0, config)?;
    let value = surrogate(&it.u, &it.t);
    Ok(AtomicNormSdp {
        value,
        u_hat: ToeplitzGenerator::new(it.u)?,
        t_hat: it.t,
        primal_residual: it.primal,
        iterations: it.iterations,
        converged: it.converged,
    })
}
