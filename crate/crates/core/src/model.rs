//! Signal model: steering vectors, the known subspace, the lifted data
//! matrix and the sampling operator `B` with its adjoint.
//!
//! Samples are indexed symmetrically, `m = -2M..=2M`, and stored in a
//! zero-based array of length `N = 4M + 1` where array slot `i` holds sample
//! `m = i - 2M`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, domain, Error, Result};
use crate::rng::{stream_rng, Stream};

pub type C64 = Complex64;

/// `N = 4M + 1`.
pub fn sample_count(order: usize) -> usize {
    4 * order + 1
}

/// Recovers `M` from `N`, failing unless `N = 4M + 1` with `M >= 1`.
pub fn order_from_count(n: usize) -> Result<usize> {
    if n >= 5 && (n - 1) % 4 == 0 {
        Ok((n - 1) / 4)
    } else {
        domain(format!("sample count {n} is not of the form 4M+1 with M >= 1"))
    }
}

/// Symmetric sample index of array slot `i`.
#[inline]
pub fn sample_index(i: usize, order: usize) -> i64 {
    i as i64 - 2 * order as i64
}

/// `e^{i 2 pi t}` with `t` reduced to `[-1/2, 1/2]` first so large phases keep
/// full precision.
#[inline]
pub fn unit_phase(t: f64) -> C64 {
    let r = t - t.round();
    C64::cis(TAU * r)
}

/// Steering vector `a(tau)` with entries `e^{i 2 pi tau m}`.
pub fn atom_vector(tau: f64, order: usize) -> Result<Vec<C64>> {
    if !(0.0..1.0).contains(&tau) {
        return domain(format!("frequency {tau} outside [0, 1)"));
    }
    let n = sample_count(order);
    Ok((0..n)
        .map(|i| unit_phase(tau * sample_index(i, order) as f64))
        .collect())
}

/// Circular distance on the unit interval with 0 and 1 identified.
pub fn wrap_distance(t1: f64, t2: f64) -> f64 {
    let d = (t1 - t2).abs().rem_euclid(1.0);
    d.min(1.0 - d)
}

/// The known subspace: rows `b_m` of length `K` for every sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    order: usize,
    dim: usize,
    /// Row `b_m` for array slot `i` lives at `rows[i*dim..(i+1)*dim]`.
    rows: Vec<C64>,
    coherence: f64,
}

impl Subspace {
    /// Builds a subspace from row vectors `b_m` given in array order.
    pub fn from_rows(order: usize, dim: usize, rows: Vec<C64>) -> Result<Self> {
        if order == 0 {
            return domain("order M must be at least 1");
        }
        let n = sample_count(order);
        if dim == 0 || dim > n {
            return domain(format!("subspace dimension {dim} outside 1..={n}"));
        }
        check_dim("subspace entries", n * dim, rows.len())?;
        let coherence = rows.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
        Ok(Self {
            order,
            dim,
            rows,
            coherence,
        })
    }

    /// Entries i.i.d. uniform on `{-1, +1}`.
    pub fn rademacher(order: usize, dim: usize, seed: u64) -> Result<Self> {
        let n = sample_count(order);
        let mut rng = stream_rng(seed, Stream::Subspace);
        let rows = (0..n * dim)
            .map(|_| C64::new(if rng.gen::<bool>() { 1.0 } else { -1.0 }, 0.0))
            .collect();
        Self::from_rows(order, dim, rows)
    }

    /// `K = 1` with every `b_m = 1`: the classic line-spectral model.
    pub fn ones(order: usize) -> Result<Self> {
        let n = sample_count(order);
        Self::from_rows(order, 1, vec![C64::new(1.0, 0.0); n])
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n_samples(&self) -> usize {
        sample_count(self.order)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Max squared entry magnitude over all rows.
    pub fn coherence(&self) -> f64 {
        self.coherence
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[C64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> &[C64] {
        &self.rows
    }

    pub fn row_norm_sqr(&self, i: usize) -> f64 {
        self.row(i).iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.rows.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// `K x N` complex matrix stored column-major, so column `i` (the lifted
/// coefficient vector of sample slot `i`) is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    dim: usize,
    n: usize,
    data: Vec<C64>,
}

impl DataMatrix {
    pub fn zeros(dim: usize, n: usize) -> Self {
        Self {
            dim,
            n,
            data: vec![C64::new(0.0, 0.0); dim * n],
        }
    }

    pub fn from_column_major(dim: usize, n: usize, data: Vec<C64>) -> Result<Self> {
        check_dim("data matrix entries", dim * n, data.len())?;
        Ok(Self { dim, n, data })
    }

    pub fn from_fn(dim: usize, n: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dim * n);
        for i in 0..n {
            for k in 0..dim {
                data.push(f(k, i));
            }
        }
        Self { dim, n, data }
    }

    pub fn rows(&self) -> usize {
        self.dim
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize) -> C64 {
        self.data[i * self.dim + k]
    }

    #[inline]
    pub fn set(&mut self, k: usize, i: usize, v: C64) {
        self.data[i * self.dim + k] = v;
    }

    #[inline]
    pub fn col(&self, i: usize) -> &[C64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn col_mut(&mut self, i: usize) -> &mut [C64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `<self, other> = tr(other^H self)`.
    pub fn inner(&self, other: &DataMatrix) -> C64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b.conj())
            .sum()
    }

    pub fn scaled(&self, s: f64) -> DataMatrix {
        Self {
            dim: self.dim,
            n: self.n,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &DataMatrix) -> Result<DataMatrix> {
        check_dim("matrix rows", self.dim, other.dim)?;
        check_dim("matrix columns", self.n, other.n)?;
        Ok(Self {
            dim: self.dim,
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }
}

/// Unknown parameters of the sparse signal.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    freqs: Vec<f64>,
    amps: Vec<f64>,
    waveforms: Vec<Vec<C64>>,
}

impl GroundTruth {
    pub fn new(freqs: Vec<f64>, amps: Vec<f64>, waveforms: Vec<Vec<C64>>) -> Result<Self> {
        check_dim("amplitudes", freqs.len(), amps.len())?;
        check_dim("waveform coefficient vectors", freqs.len(), waveforms.len())?;
        if freqs.is_empty() {
            return domain("at least one frequency is required");
        }
        if let Some(t) = freqs.iter().find(|t| !(0.0..1.0).contains(*t)) {
            return domain(format!("frequency {t} outside [0, 1)"));
        }
        if let Some(c) = amps.iter().find(|c| !(**c > 0.0) || !c.is_finite()) {
            return domain(format!("amplitude {c} is not positive"));
        }
        let k = waveforms[0].len();
        for h in &waveforms {
            check_dim("waveform coefficient length", k, h.len())?;
            let norm = h.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                return domain(format!("waveform coefficients have norm {norm}, expected 1"));
            }
        }
        Ok(Self {
            freqs,
            amps,
            waveforms,
        })
    }

    pub fn n_atoms(&self) -> usize {
        self.freqs.len()
    }

    pub fn dim(&self) -> usize {
        self.waveforms[0].len()
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn amps(&self) -> &[f64] {
        &self.amps
    }

    pub fn waveforms(&self) -> &[Vec<C64>] {
        &self.waveforms
    }

    /// Smallest pairwise wrap-around distance; `1.0` for a single atom.
    pub fn min_separation(&self) -> f64 {
        let mut best = 1.0f64;
        for (a, &ta) in self.freqs.iter().enumerate() {
            for &tb in &self.freqs[a + 1..] {
                best = best.min(wrap_distance(ta, tb));
            }
        }
        best
    }
}

/// Waveform coefficients `h_j`: i.i.d. standard normal real and imaginary
/// parts, then scaled to unit norm.
pub fn draw_waveforms(n_atoms: usize, dim: usize, seed: u64) -> Vec<Vec<C64>> {
    let mut rng = stream_rng(seed, Stream::Waveforms);
    (0..n_atoms)
        .map(|_| {
            let h: Vec<C64> = (0..dim)
                .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect();
            let norm = h.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            h.into_iter().map(|v| v / norm).collect()
        })
        .collect()
}

/// Draws `n_atoms` distinct frequencies from the grid `{0, 1/M, ..., 1 - 1/M}`
/// without replacement, returned in ascending order.
pub fn draw_grid_frequencies(n_atoms: usize, order: usize, seed: u64) -> Result<Vec<f64>> {
    if n_atoms == 0 || n_atoms > order {
        return domain(format!(
            "cannot draw {n_atoms} frequencies from a grid of {order} points"
        ));
    }
    let min_sep = 1.0 / order as f64;
    let mut rng = stream_rng(seed, Stream::Frequencies);
    loop {
        let mut freqs: Vec<f64> = index::sample(&mut rng, order, n_atoms)
            .into_iter()
            .map(|g| g as f64 * min_sep)
            .collect();
        freqs.sort_by(f64::total_cmp);
        let separated = freqs.iter().enumerate().all(|(a, &ta)| {
            freqs[a + 1..]
                .iter()
                .all(|&tb| wrap_distance(ta, tb) >= min_sep * (1.0 - 1e-9))
        });
        if separated {
            return Ok(freqs);
        }
    }
}

/// `X* = sum_j c_j h_j a(tau_j)^H`.
pub fn lift_truth(truth: &GroundTruth, subspace: &Subspace) -> Result<DataMatrix> {
    check_dim("waveform dimension", subspace.dim(), truth.dim())?;
    let (k, n, order) = (subspace.dim(), subspace.n_samples(), subspace.order());
    let mut x = DataMatrix::zeros(k, n);
    for ((&tau, &c), h) in truth.freqs.iter().zip(&truth.amps).zip(&truth.waveforms) {
        for i in 0..n {
            let w = unit_phase(-tau * sample_index(i, order) as f64) * c;
            for (dst, hk) in x.col_mut(i).iter_mut().zip(h) {
                *dst += hk * w;
            }
        }
    }
    Ok(x)
}

/// `[B(X)]_m = b_m^H X e_m`.
pub fn apply_b(subspace: &Subspace, x: &DataMatrix) -> Result<Vec<C64>> {
    check_dim("data matrix rows", subspace.dim(), x.rows())?;
    check_dim("data matrix columns", subspace.n_samples(), x.cols())?;
    Ok((0..x.cols())
        .map(|i| {
            subspace
                .row(i)
                .iter()
                .zip(x.col(i))
                .map(|(b, v)| b.conj() * v)
                .sum()
        })
        .collect())
}

/// `B*(x) = sum_m x(m) b_m e_m^H`: column `m` is `x(m) b_m`.
pub fn apply_badj(subspace: &Subspace, x: &[C64]) -> Result<DataMatrix> {
    check_dim("sample vector", subspace.n_samples(), x.len())?;
    let (k, n) = (subspace.dim(), subspace.n_samples());
    let mut out = DataMatrix::zeros(k, n);
    for (i, &xi) in x.iter().enumerate() {
        for (dst, b) in out.col_mut(i).iter_mut().zip(subspace.row(i)) {
            *dst = b * xi;
        }
    }
    Ok(out)
}

/// Clean samples `x*(m) = sum_j c_j e^{-i 2 pi m tau_j} b_m^H h_j`.
pub fn generate_signal(subspace: &Subspace, truth: &GroundTruth) -> Result<Vec<C64>> {
    check_dim("waveform dimension", subspace.dim(), truth.dim())?;
    let order = subspace.order();
    Ok((0..subspace.n_samples())
        .map(|i| {
            let m = sample_index(i, order) as f64;
            let b = subspace.row(i);
            truth
                .freqs
                .iter()
                .zip(&truth.amps)
                .zip(&truth.waveforms)
                .map(|((&tau, &c), h)| {
                    let bh: C64 = b.iter().zip(h).map(|(bk, hk)| bk.conj() * hk).sum();
                    unit_phase(-tau * m) * bh * c
                })
                .sum()
        })
        .collect())
}

/// Adds circularly-symmetric complex Gaussian noise `CN(0, sigma^2)`: real
/// and imaginary parts i.i.d. `N(0, sigma^2 / 2)`.
pub fn add_noise(clean: &[C64], sigma: f64, seed: u64) -> Result<Vec<C64>> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return domain(format!("noise level {sigma} must be finite and nonnegative"));
    }
    if sigma == 0.0 {
        return Ok(clean.to_vec());
    }
    let s = sigma / std::f64::consts::SQRT_2;
    let mut rng = stream_rng(seed, Stream::Noise);
    Ok(clean
        .iter()
        .map(|&v| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            v + C64::new(re * s, im * s)
        })
        .collect())
}

/// A synthesized observation together with everything used to make it.
#[derive(Debug, Clone)]
pub struct SignalInstance {
    pub subspace: Subspace,
    pub truth: GroundTruth,
    pub clean: Vec<C64>,
    pub noisy: Vec<C64>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SignalInstance {
    pub fn synthesize(subspace: Subspace, truth: GroundTruth, sigma: f64, seed: u64) -> Result<Self> {
        let clean = generate_signal(&subspace, &truth)?;
        let noisy = add_noise(&clean, sigma, seed)?;
        Ok(Self {
            subspace,
            truth,
            clean,
            noisy,
            noise_sigma: sigma,
            seed,
        })
    }

    pub fn mse(&self, estimate: &[C64]) -> Result<f64> {
        mse(estimate, &self.clean)
    }
}

/// `(1/N) ||a - b||^2`.
pub fn mse(a: &[C64], b: &[C64]) -> Result<f64> {
    check_dim("signal length", a.len(), b.len())?;
    if a.is_empty() {
        return Err(Error::Domain("empty signal".into()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>() / a.len() as f64)
}

/// `<a, b> = sum a_i conj(b_i)`.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, proptest, ProptestConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, k: usize, n: usize) -> DataMatrix {
        DataMatrix::from_fn(k, n, |_, _| {
            C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        })
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
        (0..n)
            .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect()
    }

    fn random_subspace(rng: &mut ChaCha8Rng, order: usize, k: usize) -> Subspace {
        let n = sample_count(order);
        let k = k.min(n);
        Subspace::from_rows(order, k, random_vec(rng, n * k)).unwrap()
    }

    #[test]
    fn atom_vector_trivial_cases() {
        let a = atom_vector(0.0, 1).unwrap();
        assert!(a.iter().all(|v| (*v - C64::new(1.0, 0.0)).norm() < 1e-15));
        let a = atom_vector(0.5, 1).unwrap();
        let expected = [1.0, -1.0, 1.0, -1.0, 1.0];
        for (v, e) in a.iter().zip(expected) {
            assert!((*v - C64::new(e, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn atom_vector_energy_matches_direct_sum() {
        let a = atom_vector(0.1, 20).unwrap();
        // direct summation of |e^{i 2 pi 0.1 m}|^2 computed from cos/sin
        let direct: f64 = (-40i64..=40)
            .map(|m| {
                let th = 2.0 * std::f64::consts::PI * 0.1 * m as f64;
                th.cos().powi(2) + th.sin().powi(2)
            })
            .sum();
        let energy = inner(&a, &a);
        assert!((energy.re - 81.0).abs() < 1e-12);
        assert!((direct - 81.0).abs() < 1e-12);
        assert!(energy.im.abs() < 1e-12);
    }

    #[test]
    fn atom_vector_rejects_out_of_range() {
        assert!(atom_vector(1.0, 2).is_err());
        assert!(atom_vector(-0.1, 2).is_err());
    }

    #[test]
    fn rademacher_properties() {
        let s1 = Subspace::rademacher(20, 4, 99).unwrap();
        let s2 = Subspace::rademacher(20, 4, 99).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(s1.frobenius_norm().powi(2), (81 * 4) as f64);
        assert_eq!(s1.coherence(), 1.0);
        assert!(s1.rows().iter().all(|v| v.im == 0.0 && v.re.abs() == 1.0));
        assert_ne!(s1, Subspace::rademacher(20, 4, 100).unwrap());
    }

    #[test]
    fn rademacher_isotropy() {
        // 10^4 rows pooled over seeds
        let k = 4;
        let mut second = vec![C64::new(0.0, 0.0); k * k];
        let mut normalized = vec![C64::new(0.0, 0.0); k * k];
        let mut count = 0usize;
        for seed in 0..124u64 {
            let s = Subspace::rademacher(20, k, seed).unwrap();
            for i in 0..s.n_samples() {
                let b = s.row(i);
                let nb = s.row_norm_sqr(i);
                for r in 0..k {
                    for c in 0..k {
                        second[r * k + c] += b[r] * b[c].conj();
                        normalized[r * k + c] += b[r] * b[c].conj() / nb;
                    }
                }
                count += 1;
            }
        }
        assert!(count >= 10_000);
        let dev = |acc: &[C64], diag: f64| -> f64 {
            let mut num = 0.0;
            for r in 0..k {
                for c in 0..k {
                    let target = if r == c { diag } else { 0.0 };
                    num += (acc[r * k + c] / count as f64 - target).norm_sqr();
                }
            }
            num.sqrt() / (diag * (k as f64).sqrt())
        };
        assert!(dev(&second, 1.0) < 0.05);
        assert!(dev(&normalized, 1.0 / k as f64) < 0.05);
    }

    #[test]
    fn single_unit_atom_is_constant() {
        let s = Subspace::ones(3).unwrap();
        let t = GroundTruth::new(vec![0.0], vec![1.0], vec![vec![C64::new(1.0, 0.0)]]).unwrap();
        let x = generate_signal(&s, &t).unwrap();
        assert!(x.iter().all(|v| (*v - C64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn three_atom_signal_matches_double_loop() {
        let order = 20;
        let s = Subspace::rademacher(order, 4, 5).unwrap();
        let h = draw_waveforms(3, 4, 5);
        let t = GroundTruth::new(vec![0.1, 0.15, 0.5], vec![1.0, 2.0, 3.0], h.clone()).unwrap();
        let x = generate_signal(&s, &t).unwrap();
        assert_eq!(x.len(), 81);
        for (i, xi) in x.iter().enumerate() {
            let m = i as f64 - 40.0;
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..3 {
                for k in 0..4 {
                    let th = -2.0 * std::f64::consts::PI * t.freqs()[j] * m;
                    acc += t.amps()[j] * C64::new(th.cos(), th.sin()) * s.row(i)[k].conj() * h[j][k];
                }
            }
            assert!((acc - xi).norm() < 1e-12);
        }
        let lifted = apply_b(&s, &lift_truth(&t, &s).unwrap()).unwrap();
        for (a, b) in lifted.iter().zip(&x) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn lift_truth_single_atom() {
        let s = Subspace::rademacher(2, 3, 1).unwrap();
        let e1 = vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
        let t = GroundTruth::new(vec![0.0], vec![1.0], vec![e1]).unwrap();
        let x = lift_truth(&t, &s).unwrap();
        for i in 0..x.cols() {
            assert_eq!(x.get(0, i), C64::new(1.0, 0.0));
            assert_eq!(x.get(1, i), C64::new(0.0, 0.0));
            assert_eq!(x.get(2, i), C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn lift_truth_rank_and_norm() {
        let order = 20;
        let s = Subspace::rademacher(order, 4, 2).unwrap();
        let h = draw_waveforms(3, 4, 2);
        let t = GroundTruth::new(vec![0.1, 0.15, 0.5], vec![1.0, 2.0, 3.0], h.clone()).unwrap();
        let x = lift_truth(&t, &s).unwrap();
        let mat = faer::Mat::<C64>::from_fn(4, 81, |k, i| x.get(k, i));
        let sv = mat.singular_values().unwrap();
        let rank = sv.iter().filter(|v| **v > 1e-9 * sv[0]).count();
        assert!(rank <= 3);

        // direct Frobenius norm of sum_j c_j h_j a_j^H
        let mut fro = 0.0;
        for i in 0..81 {
            let m = i as f64 - 40.0;
            for k in 0..4 {
                let mut v = C64::new(0.0, 0.0);
                for j in 0..3 {
                    let th = -2.0 * std::f64::consts::PI * t.freqs()[j] * m;
                    v += t.amps()[j] * h[j][k] * C64::new(th.cos(), th.sin());
                }
                fro += v.norm_sqr();
            }
        }
        assert!((fro.sqrt() - x.frobenius_norm()).abs() < 1e-10);
    }

    #[test]
    fn scalar_subspace_operator() {
        let s = Subspace::ones(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_matrix(&mut rng, 1, 9);
        let bx = apply_b(&s, &x).unwrap();
        for i in 0..9 {
            assert_eq!(bx[i], x.get(0, i));
        }
        assert!(apply_b(&s, &DataMatrix::zeros(1, 9)).unwrap().iter().all(|v| v.norm() == 0.0));
        assert_eq!(apply_badj(&s, &vec![C64::new(0.0, 0.0); 9]).unwrap(), DataMatrix::zeros(1, 9));
    }

    #[test]
    fn operator_dimension_mismatch() {
        let s = Subspace::rademacher(2, 3, 1).unwrap();
        assert!(apply_b(&s, &DataMatrix::zeros(2, 9)).is_err());
        assert!(apply_badj(&s, &vec![C64::new(0.0, 0.0); 8]).is_err());
    }

    #[test]
    fn wrap_distance_cases() {
        assert!((wrap_distance(0.1, 0.15) - 0.05).abs() < 1e-15);
        assert!((wrap_distance(0.05, 0.95) - 0.10).abs() < 1e-15);
        assert_eq!(wrap_distance(0.3, 0.3), 0.0);
    }

    #[test]
    fn noise_zero_and_determinism() {
        let clean = vec![C64::new(1.0, 2.0); 9];
        assert_eq!(add_noise(&clean, 0.0, 4).unwrap(), clean);
        assert_eq!(add_noise(&clean, 0.3, 4).unwrap(), add_noise(&clean, 0.3, 4).unwrap());
        assert!(add_noise(&clean, -1.0, 4).is_err());
    }

    #[test]
    fn noise_variance_monte_carlo() {
        let clean = vec![C64::new(0.0, 0.0); 100_000];
        let y = add_noise(&clean, 0.1, 11).unwrap();
        let mean: C64 = y.iter().sum::<C64>() / y.len() as f64;
        let var = y.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / (y.len() - 1) as f64;
        assert!(mean.norm() < 3e-3);
        assert!((var - 0.01).abs() / 0.01 < 0.03, "variance {var}");
        let re_var = y.iter().map(|v| v.re * v.re).sum::<f64>() / y.len() as f64;
        assert!((re_var - 0.005).abs() / 0.005 < 0.03);
    }

    #[test]
    fn grid_frequencies_are_separated() {
        for seed in 0..20 {
            let f = draw_grid_frequencies(6, 20, seed).unwrap();
            assert_eq!(f.len(), 6);
            let t = GroundTruth::new(
                f.clone(),
                vec![1.0; 6],
                draw_waveforms(6, 2, seed),
            )
            .unwrap();
            assert!(t.min_separation() >= 0.05 - 1e-12);
        }
        assert!(draw_grid_frequencies(21, 20, 0).is_err());
    }

    #[test]
    fn ground_truth_validation() {
        let h = vec![vec![C64::new(1.0, 0.0)]];
        assert!(GroundTruth::new(vec![1.0], vec![1.0], h.clone()).is_err());
        assert!(GroundTruth::new(vec![0.2], vec![0.0], h.clone()).is_err());
        assert!(GroundTruth::new(vec![0.2], vec![1.0], vec![vec![C64::new(2.0, 0.0)]]).is_err());
        let w = draw_waveforms(4, 5, 8);
        assert!(w.iter().all(|h| (norm(h) - 1.0).abs() < 1e-12));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn adjoint_identity(seed in any::<u64>(), order in 1usize..=20, k in 1usize..=8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_subspace(&mut rng, order, k);
            let n = s.n_samples();
            let x = random_matrix(&mut rng, s.dim(), n);
            let z = random_vec(&mut rng, n);
            let lhs = inner(&apply_b(&s, &x).unwrap(), &z);
            let rhs = x.inner(&apply_badj(&s, &z).unwrap());
            let defect = (lhs - rhs).norm() / (x.frobenius_norm() * norm(&z));
            prop_assert!(defect <= 1e-12, "defect {}", defect);
        }

        #[test]
        fn composition_is_row_energy_scaling(seed in any::<u64>(), order in 1usize..=20, k in 1usize..=8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_subspace(&mut rng, order, k);
            let z = random_vec(&mut rng, s.n_samples());
            let bbz = apply_b(&s, &apply_badj(&s, &z).unwrap()).unwrap();
            for (i, (a, zi)) in bbz.iter().zip(&z).enumerate() {
                let expect = zi * s.row_norm_sqr(i);
                prop_assert!((a - expect).norm() <= 1e-12 * (1.0 + expect.norm()));
            }
        }
    }
}
