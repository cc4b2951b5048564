//! Vector-valued trigonometric polynomials `p(tau) = sum_m c_m e^{i 2 pi tau m}`
//! with coefficient vectors `c_m in C^K`, `m = -2M..=2M`.
//!
//! This is the shape of `Q a(tau)` for any `K x N` matrix `Q`, which covers
//! the dual atomic norm, the dual polynomial of a certificate and their
//! derivatives.

use std::f64::consts::TAU;

use rustfft::FftPlanner;

use crate::model::{unit_phase, DataMatrix, C64};

/// Number of bisection steps on the derivative of `||p||^2`.
pub const BISECTION_STEPS: usize = 60;

#[derive(Debug, Clone)]
pub struct VectorPoly {
    /// Column `i` is the coefficient vector of frequency `i - center`.
    coeffs: DataMatrix,
    center: i64,
}

/// A refined local maximum of `||p(tau)||_2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub tau: f64,
    pub value: f64,
}

impl VectorPoly {
    /// Polynomial `tau -> Q a(tau)`; the frequency of column `i` is `i - (N-1)/2`.
    pub fn from_matrix(q: &DataMatrix) -> Self {
        Self {
            coeffs: q.clone(),
            center: ((q.cols().saturating_sub(1)) / 2) as i64,
        }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.rows()
    }

    pub fn n_terms(&self) -> usize {
        self.coeffs.cols()
    }

    #[inline]
    fn freq(&self, i: usize) -> i64 {
        i as i64 - self.center
    }

    /// Largest `|m|` carried by the polynomial.
    pub fn degree(&self) -> usize {
        (0..self.n_terms())
            .map(|i| self.freq(i).unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.as_slice().iter().all(|v| *v == C64::new(0.0, 0.0))
    }

    /// Coefficients multiplied by `(i m)^order`: the derivative with respect
    /// to the angle `theta = 2 pi tau`.
    pub fn angular_derivative(&self, order: u32) -> Self {
        let im = C64::new(0.0, 1.0);
        let coeffs = DataMatrix::from_fn(self.dim(), self.n_terms(), |k, i| {
            self.coeffs.get(k, i) * (im * self.freq(i) as f64).powu(order)
        });
        Self {
            coeffs,
            center: self.center,
        }
    }

    /// `d^order p / d tau^order` at `tau`.
    pub fn eval_derivative(&self, tau: f64, order: u32) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim()];
        for i in 0..self.n_terms() {
            let m = self.freq(i) as f64;
            let w = unit_phase(tau * m) * C64::new(0.0, TAU * m).powu(order);
            for (o, c) in out.iter_mut().zip(self.coeffs.col(i)) {
                *o += c * w;
            }
        }
        out
    }

    pub fn eval(&self, tau: f64) -> Vec<C64> {
        self.eval_derivative(tau, 0)
    }

    /// `||p(tau)||^2` and its `tau`-derivative `2 Re <p', p>`.
    pub fn norm_sqr_and_slope(&self, tau: f64) -> (f64, f64) {
        let mut p = vec![C64::new(0.0, 0.0); self.dim()];
        let mut dp = vec![C64::new(0.0, 0.0); self.dim()];
        for i in 0..self.n_terms() {
            let m = self.freq(i) as f64;
            let w = unit_phase(tau * m);
            let dw = w * C64::new(0.0, TAU * m);
            for ((a, b), c) in p.iter_mut().zip(dp.iter_mut()).zip(self.coeffs.col(i)) {
                *a += c * w;
                *b += c * dw;
            }
        }
        let f = p.iter().map(|v| v.norm_sqr()).sum();
        let df = 2.0 * p.iter().zip(&dp).map(|(a, b)| (a.conj() * b).re).sum::<f64>();
        (f, df)
    }

    pub fn norm_sqr(&self, tau: f64) -> f64 {
        self.norm_sqr_and_slope(tau).0
    }

    /// Values `p(l / L)` for `l = 0..L`, via one length-`L` FFT per row
    /// (coefficients whose frequencies alias modulo `L` are summed first).
    pub fn grid_values(&self, grid: usize) -> Vec<Vec<C64>> {
        assert!(grid > 0, "grid size must be positive");
        let fft = FftPlanner::<f64>::new().plan_fft_inverse(grid);
        let mut out = vec![vec![C64::new(0.0, 0.0); self.dim()]; grid];
        let mut buf = vec![C64::new(0.0, 0.0); grid];
        for k in 0..self.dim() {
            buf.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            for i in 0..self.n_terms() {
                let slot = self.freq(i).rem_euclid(grid as i64) as usize;
                buf[slot] += self.coeffs.get(k, i);
            }
            fft.process(&mut buf);
            for (row, v) in out.iter_mut().zip(&buf) {
                row[k] = *v;
            }
        }
        out
    }

    /// `||p(l / L)||^2` for `l = 0..L`.
    pub fn grid_norm_sqr(&self, grid: usize) -> Vec<f64> {
        assert!(grid > 0, "grid size must be positive");
        let fft = FftPlanner::<f64>::new().plan_fft_inverse(grid);
        let mut acc = vec![0.0; grid];
        let mut buf = vec![C64::new(0.0, 0.0); grid];
        for k in 0..self.dim() {
            buf.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            for i in 0..self.n_terms() {
                let slot = self.freq(i).rem_euclid(grid as i64) as usize;
                buf[slot] += self.coeffs.get(k, i);
            }
            fft.process(&mut buf);
            for (a, v) in acc.iter_mut().zip(&buf) {
                *a += v.norm_sqr();
            }
        }
        acc
    }

    /// Maximizes `||p||^2` on the bracket `[lo, hi]` (unwrapped coordinates).
    ///
    /// Bisection on the slope when it changes sign from + to - across the
    /// bracket, golden-section search otherwise.
    fn refine(&self, lo: f64, hi: f64) -> (f64, f64) {
        let (_, dlo) = self.norm_sqr_and_slope(lo);
        let (_, dhi) = self.norm_sqr_and_slope(hi);
        let tau = if dlo > 0.0 && dhi < 0.0 {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..BISECTION_STEPS {
                let mid = 0.5 * (a + b);
                if self.norm_sqr_and_slope(mid).1 > 0.0 {
                    a = mid;
                } else {
                    b = mid;
                }
                if b - a <= f64::EPSILON * 4.0 {
                    break;
                }
            }
            0.5 * (a + b)
        } else {
            golden_max(|t| self.norm_sqr(t), lo, hi)
        };
        (tau, self.norm_sqr(tau))
    }

    /// Local maxima of `||p||_2` whose grid value reaches `floor`, refined
    /// off the `grid`-point lattice and sorted by `tau`.
    ///
    /// A grid point is a candidate when it is a circular local maximum of
    /// the sampled `||p||^2`; the refined maximum is kept if it is at least
    /// the grid value.
    pub fn peaks(&self, grid: usize, floor: f64) -> Vec<Peak> {
        let values = self.grid_norm_sqr(grid);
        let floor_sq = floor.max(0.0).powi(2);
        let step = 1.0 / grid as f64;
        let mut peaks = Vec::new();
        for l in 0..grid {
            let f = values[l];
            if f <= 0.0 || f < floor_sq {
                continue;
            }
            let prev = values[(l + grid - 1) % grid];
            let next = values[(l + 1) % grid];
            // plateaus are claimed by their first point
            if !(f > prev && f >= next) && !(grid == 1) {
                continue;
            }
            let center = l as f64 * step;
            let (tau, value) = self.refine(center - step, center + step);
            let (tau, value) = if value >= f { (tau, value) } else { (center, f) };
            peaks.push(Peak {
                tau: tau.rem_euclid(1.0),
                value: value.sqrt(),
            });
        }
        peaks.sort_by(|a, b| a.tau.total_cmp(&b.tau));
        peaks
    }

    /// `sup_tau ||p(tau)||_2` with a maximizer; ties go to the smaller `tau`.
    ///
    /// Every grid local maximum within the Bernstein slack
    /// `(1 - 2 pi deg / L)` of the grid maximum is refined.
    pub fn sup_norm(&self, grid: usize) -> (f64, f64) {
        if self.is_zero() {
            return (0.0, 0.0);
        }
        let values = self.grid_norm_sqr(grid);
        let grid_max = values.iter().cloned().fold(0.0, f64::max);
        let slack = (1.0 - TAU * self.degree().max(1) as f64 / grid as f64).max(0.0);
        let floor = (grid_max * slack).sqrt();
        let mut best = (0.0f64, 0.0f64);
        for p in self.peaks(grid, floor) {
            if p.value > best.0 || (p.value == best.0 && p.tau < best.1) {
                best = (p.value, p.tau);
            }
        }
        if best.0 == 0.0 {
            // flat polynomial: every grid point ties
            let l = values
                .iter()
                .position(|v| *v == grid_max)
                .unwrap_or(0);
            return (grid_max.sqrt(), l as f64 / grid as f64);
        }
        best
    }
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if b - a <= 1e-15 {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}
