//! Dual polynomials `Q(tau) = B*(q) a(tau)`: evaluation, frequency
//! localization from a solved problem, and an explicit interpolating
//! certificate built from a squared Fejer kernel modulated by the subspace.

use std::f64::consts::TAU;

use faer::linalg::solvers::Solve;
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::atomic::default_grid_size;
use crate::error::{check_dim, domain, Error, Result};
use crate::model::{apply_badj, sample_index, unit_phase, wrap_distance, GroundTruth, Subspace, C64};
use crate::poly::{Peak, VectorPoly};
use crate::solver::{DenoiseProblem, SdpSolution};

/// Default localization threshold on `||Q(tau)||_2`.
pub const DEFAULT_THRESHOLD: f64 = 0.99;
/// Half-width of the near region, in units of `1/N`.
pub const NEAR_RADIUS: f64 = 0.16;
/// Interpolation systems with a larger condition number are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct DualCertificate {
    q: Vec<C64>,
    subspace: Subspace,
    poly: VectorPoly,
}

impl DualCertificate {
    pub fn new(q: Vec<C64>, subspace: Subspace) -> Result<Self> {
        check_dim("certificate length", subspace.n_samples(), q.len())?;
        let poly = VectorPoly::from_matrix(&apply_badj(&subspace, &q)?);
        Ok(Self { q, subspace, poly })
    }

    pub fn q(&self) -> &[C64] {
        &self.q
    }

    pub fn subspace(&self) -> &Subspace {
        &self.subspace
    }

    pub fn polynomial(&self) -> &VectorPoly {
        &self.poly
    }

    /// `Q(tau) = sum_m q(m) e^{i 2 pi m tau} b_m`.
    pub fn eval(&self, tau: f64) -> Vec<C64> {
        self.poly.eval(tau)
    }

    /// `d^order Q / d tau^order`.
    pub fn eval_derivative(&self, tau: f64, order: u32) -> Vec<C64> {
        self.poly.eval_derivative(tau, order)
    }

    pub fn norm_at(&self, tau: f64) -> f64 {
        self.poly.norm_sqr(tau).sqrt()
    }
}

/// `q = (y - x_hat) / lambda`; at the optimum `||B*(q)||_A* <= 1`.
pub fn residual_certificate(problem: &DenoiseProblem, solution: &SdpSolution) -> Result<DualCertificate> {
    let lambda = problem.lambda();
    if !(lambda > 0.0) {
        return domain("lambda must be positive to form the residual certificate");
    }
    check_dim("solution length", problem.y().len(), solution.x_hat.len())?;
    let q = problem
        .y()
        .iter()
        .zip(&solution.x_hat)
        .map(|(y, x)| (y - x) / lambda)
        .collect();
    DualCertificate::new(q, problem.subspace().clone())
}

/// Local maxima of `||Q||_2` at or above `threshold`, sorted by `tau`.
///
/// Peaks closer than `0.5/N` (circularly) are merged, keeping the strongest.
pub fn localize(cert: &DualCertificate, threshold: f64) -> Result<Vec<Peak>> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return domain(format!("threshold must lie in (0, 1), got {threshold}"));
    }
    let n = cert.subspace.n_samples();
    let poly = &cert.poly;
    if poly.is_zero() {
        return Ok(Vec::new());
    }
    let grid = default_grid_size(n);
    // grid samples can sit below a qualifying peak by the Bernstein slack
    let slack = (1.0 - TAU * poly.degree().max(1) as f64 / grid as f64).max(0.0);
    let mut found: Vec<Peak> = poly
        .peaks(grid, threshold * slack.sqrt())
        .into_iter()
        .filter(|p| p.value >= threshold)
        .collect();

    let radius = 0.5 / n as f64;
    found.sort_by(|a, b| b.value.total_cmp(&a.value).then(a.tau.total_cmp(&b.tau)));
    let mut kept: Vec<Peak> = Vec::new();
    for p in found {
        if kept.iter().all(|k| wrap_distance(k.tau, p.tau) > radius) {
            kept.push(p);
        }
    }
    kept.sort_by(|a, b| a.tau.total_cmp(&b.tau));
    Ok(kept)
}

/// Coefficients `g_M(m)`, `m = -2M..=2M`, with
/// `(1/M) sum_m g_M(m) e^{i 2 pi tau m} = [sin(pi (M+1) tau) / ((M+1) sin(pi tau))]^4`.
///
/// The Fejer kernel has coefficients `(M + 1 - |k|) / (M + 1)^2`; its square
/// is their self-convolution, and `g_M` is that scaled by `M`.
pub fn squared_fejer_coeffs(order: usize) -> Result<Vec<f64>> {
    if order == 0 {
        return domain("kernel order M must be at least 1");
    }
    let m1 = (order + 1) as f64;
    let fejer: Vec<f64> = (0..=2 * order)
        .map(|i| (m1 - (i as f64 - order as f64).abs()) / (m1 * m1))
        .collect();
    let mut conv = vec![0.0; 4 * order + 1];
    for (a, fa) in fejer.iter().enumerate() {
        for (b, fb) in fejer.iter().enumerate() {
            conv[a + b] += fa * fb;
        }
    }
    Ok(conv.into_iter().map(|c| c * order as f64).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportCheck {
    pub tau: f64,
    /// `||Q(tau_j) - h_j||_2`.
    pub defect: f64,
    /// `||Q'(tau_j)||_2`.
    pub derivative_defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub support: Vec<SupportCheck>,
    /// Largest `||Q(tau)||_2` at distance more than `0.16/N` from every `tau_j`.
    pub far_max: f64,
    /// Per atom: `||Q|| <= 1` near `tau_j` and `1 - ||Q||` decays quadratically.
    pub near_ok: Vec<bool>,
    /// Fitted exponent of `1 - ||Q(tau_j + d)||` against `d`.
    pub near_exponent: Vec<f64>,
    pub condition_number: f64,
}

impl CertificateReport {
    pub fn is_valid(&self) -> bool {
        self.far_max < 1.0 && self.near_ok.iter().all(|&ok| ok)
    }
}

/// `K^(d)(delta) = sum_m c(m) (i 2 pi m)^d e^{i 2 pi delta m} b_m b_m^H`.
fn kernel_block(subspace: &Subspace, weights: &[f64], delta: f64, d: u32) -> Mat<C64> {
    let k = subspace.dim();
    let mut out = Mat::<C64>::zeros(k, k);
    for (i, w) in weights.iter().enumerate() {
        if *w == 0.0 {
            continue;
        }
        let m = sample_index(i, subspace.order()) as f64;
        let s = unit_phase(delta * m) * C64::new(0.0, TAU * m).powu(d) * *w;
        let b = subspace.row(i);
        for c in 0..k {
            let bc = b[c].conj() * s;
            for r in 0..k {
                out[(r, c)] += b[r] * bc;
            }
        }
    }
    out
}

/// Builds `Q(tau) = sum_j K(tau - tau_j) alpha_j + K'(tau - tau_j) beta_j`
/// with `Q(tau_j) = h_j` and `Q'(tau_j) = 0`, where
/// `K(tau) = (1/M) sum_m g_M(m) e^{i 2 pi tau m} b_m b_m^H`, and scans it.
pub fn construct_certificate(truth: &GroundTruth, subspace: &Subspace) -> Result<(DualCertificate, CertificateReport)> {
    check_dim("waveform dimension", subspace.dim(), truth.dim())?;
    let order = subspace.order();
    let n = subspace.n_samples();
    let k = subspace.dim();
    let j = truth.n_atoms();
    let freqs = truth.freqs();
    let weights: Vec<f64> = squared_fejer_coeffs(order)?
        .into_iter()
        .map(|g| g / order as f64)
        .collect();
    // balances the derivative columns against the value columns
    let kappa = weights
        .iter()
        .enumerate()
        .map(|(i, w)| w * (TAU * sample_index(i, order) as f64).powi(2))
        .sum::<f64>()
        .sqrt();

    let dim = 2 * j * k;
    let mut system = Mat::<C64>::zeros(dim, dim);
    for (row_atom, tr) in freqs.iter().enumerate() {
        for (col_atom, tc) in freqs.iter().enumerate() {
            let delta = tr - tc;
            let blocks = [
                (0, 0, kernel_block(subspace, &weights, delta, 0), 1.0),
                (0, 1, kernel_block(subspace, &weights, delta, 1), 1.0 / kappa),
                (1, 0, kernel_block(subspace, &weights, delta, 1), 1.0 / kappa),
                (1, 1, kernel_block(subspace, &weights, delta, 2), 1.0 / (kappa * kappa)),
            ];
            for (br, bc, block, scale) in blocks {
                let r0 = br * j * k + row_atom * k;
                let c0 = bc * j * k + col_atom * k;
                for c in 0..k {
                    for r in 0..k {
                        system[(r0 + r, c0 + c)] = block[(r, c)] * scale;
                    }
                }
            }
        }
    }
    let sv = system
        .singular_values()
        .map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let largest = sv.iter().cloned().fold(0.0, f64::max);
    let smallest = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = if smallest > 0.0 { largest / smallest } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Singular { condition });
    }
    let rhs = Mat::from_fn(dim, 1, |r, _| {
        if r < j * k {
            truth.waveforms()[r / k][r % k]
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let sol = system.full_piv_lu().solve(&rhs);

    let q: Vec<C64> = (0..n)
        .map(|i| {
            let m = sample_index(i, order) as f64;
            let b = subspace.row(i);
            let ramp = C64::new(0.0, TAU * m / kappa);
            let mut acc = C64::new(0.0, 0.0);
            for (a, tau) in freqs.iter().enumerate() {
                let mut inner = C64::new(0.0, 0.0);
                for kk in 0..k {
                    let alpha = sol[(a * k + kk, 0)];
                    let beta = sol[(j * k + a * k + kk, 0)];
                    inner += b[kk].conj() * (alpha + ramp * beta);
                }
                acc += unit_phase(-tau * m) * inner;
            }
            acc * weights[i]
        })
        .collect();

    let cert = DualCertificate::new(q, subspace.clone())?;
    let report = scan(&cert, truth, condition);
    Ok((cert, report))
}

fn scan(cert: &DualCertificate, truth: &GroundTruth, condition: f64) -> CertificateReport {
    let n = cert.subspace.n_samples();
    let nf = n as f64;
    let freqs = truth.freqs();
    let support = freqs
        .iter()
        .zip(truth.waveforms())
        .map(|(&tau, h)| {
            let v = cert.eval(tau);
            let defect = v.iter().zip(h).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            let dv = cert.eval_derivative(tau, 1);
            let derivative_defect = dv.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            SupportCheck { tau, defect, derivative_defect }
        })
        .collect();

    let radius = NEAR_RADIUS / nf;
    let is_far = |t: f64| freqs.iter().all(|&f| wrap_distance(t, f) > radius);
    let grid = 1000 * n;
    let values = cert.poly.grid_norm_sqr(grid);
    let mut far_sq = 0.0f64;
    for (l, v) in values.iter().enumerate() {
        if is_far(l as f64 / grid as f64) {
            far_sq = far_sq.max(*v);
        }
    }
    for p in cert.poly.peaks(grid, 0.0) {
        if is_far(p.tau) {
            far_sq = far_sq.max(p.value * p.value);
        }
    }
    // the far region is closed off at distance exactly 0.16/N
    for &f in freqs {
        for t in [f - radius, f + radius] {
            let t = t.rem_euclid(1.0);
            if freqs.iter().all(|&g| wrap_distance(t, g) >= radius * (1.0 - 1e-12)) {
                far_sq = far_sq.max(cert.poly.norm_sqr(t));
            }
        }
    }

    let (near_ok, near_exponent) = freqs
        .iter()
        .map(|&f| near_region(cert, f, nf))
        .unzip();

    CertificateReport {
        support,
        far_max: far_sq.sqrt(),
        near_ok,
        near_exponent,
        condition_number: condition,
    }
}

/// Log-log slope of `1 - ||Q(tau_j +- d)||` over `d in [0.01/N, 0.16/N]`.
fn near_region(cert: &DualCertificate, tau: f64, nf: f64) -> (bool, f64) {
    let (lo, hi) = (0.01 / nf, NEAR_RADIUS / nf);
    let steps = 40;
    let mut bounded = true;
    let mut pts = Vec::with_capacity(2 * steps);
    for s in 0..steps {
        let d = lo * (hi / lo).powf(s as f64 / (steps - 1) as f64);
        for t in [tau + d, tau - d] {
            let gap = 1.0 - cert.norm_at(t.rem_euclid(1.0));
            if gap <= 0.0 {
                bounded = false;
            } else {
                pts.push((d.ln(), gap.ln()));
            }
        }
    }
    if pts.len() < 4 {
        return (false, f64::NAN);
    }
    let (mx, my) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (mx / pts.len() as f64, my / pts.len() as f64);
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (bounded && (slope - 2.0).abs() <= 0.2, slope)
}
