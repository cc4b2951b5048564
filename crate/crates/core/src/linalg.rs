//! Dense Hermitian helpers on top of faer.

use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};
use crate::model::C64;

/// `(A + A^H) / 2`.
pub fn hermitian_part(a: MatRef<'_, C64>) -> Mat<C64> {
    let n = a.nrows();
    Mat::from_fn(n, n, |r, c| (a[(r, c)] + a[(c, r)].conj()) * 0.5)
}

/// Eigenvalues of the Hermitian part of `a`, ascending.
pub fn hermitian_eigenvalues(a: MatRef<'_, C64>) -> Result<Vec<f64>> {
    let h = hermitian_part(a);
    let mut vals = h
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Linalg(format!("{e:?}")))?;
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

pub fn min_eigenvalue(a: MatRef<'_, C64>) -> Result<f64> {
    Ok(hermitian_eigenvalues(a)?.first().copied().unwrap_or(0.0))
}

/// Projection of the Hermitian part of `a` onto the positive semidefinite
/// cone, `sum_{lambda_i > 0} lambda_i v_i v_i^H`.
pub fn project_psd(a: MatRef<'_, C64>) -> Result<Mat<C64>> {
    PsdProjector::default().project(a)
}

/// PSD projection that decomposes only one side of the spectrum.
///
/// `P(A) = sum_{lambda > 0} lambda v v^H = A - sum_{lambda <= 0} lambda v v^H`,
/// so only the eigenpairs on the less populated side are needed. Iterative
/// callers see slowly varying inertia; the side that was smaller last time
/// is tried first.
#[derive(Debug, Clone, Default)]
pub struct PsdProjector {
    negative_side: bool,
}

impl PsdProjector {
    pub fn project(&mut self, a: MatRef<'_, C64>) -> Result<Mat<C64>> {
        let h = hermitian_part(a);
        let n = h.nrows();
        let (vals, vecs) = side_eigenpairs(h.as_ref(), self.negative_side)?;
        let count = vals.len();
        let rebuilt = if count == 0 {
            None
        } else {
            let scaled = Mat::from_fn(n, count, |r, j| vecs[(r, j)] * vals[j].abs().sqrt());
            Some(&scaled * scaled.adjoint())
        };
        let out = match (self.negative_side, rebuilt) {
            (false, Some(pos)) => pos,
            (false, None) => Mat::zeros(n, n),
            (true, Some(neg)) => &h + &neg,
            (true, None) => h,
        };
        if 2 * count > n {
            self.negative_side = !self.negative_side;
        }
        Ok(out)
    }
}

#[cfg(feature = "lapack")]
#[link(name = "openblas")]
extern "C" {
    fn openblas_set_num_threads(n: std::ffi::c_int);
}

#[cfg(feature = "lapack")]
static SINGLE_THREADED: std::sync::Once = std::sync::Once::new();

/// Eigenpairs of Hermitian `h` with eigenvalue `> 0`, or `<= 0` when
/// `negative` is set.
#[cfg(feature = "lapack")]
fn side_eigenpairs(h: MatRef<'_, C64>, negative: bool) -> Result<(Vec<f64>, Mat<C64>)> {
    // parallelism lives at the trial level; nested BLAS threads only contend
    // SAFETY: plain setter exported by OpenBLAS.
    SINGLE_THREADED.call_once(|| unsafe { openblas_set_num_threads(1) });
    let n = h.nrows();
    if n == 0 {
        return Ok((Vec::new(), Mat::zeros(0, 0)));
    }
    let mut buf = vec![C64::new(0.0, 0.0); n * n];
    let mut frob = 0.0f64;
    for c in 0..n {
        for r in c..n {
            let v = h[(r, c)];
            buf[c * n + r] = v;
            frob += if r == c { v.norm_sqr() } else { 2.0 * v.norm_sqr() };
        }
    }
    // the Frobenius norm bounds every eigenvalue
    let bound = 2.0 * frob.sqrt() + 1.0;
    let (vl, vu) = if negative { (-bound, 0.0) } else { (0.0, bound) };
    let ni = n as i32;
    let mut found = 0i32;
    let mut w = vec![0.0; n];
    let mut z = vec![C64::new(0.0, 0.0); n * n];
    let mut isuppz = vec![0i32; 2 * n];
    let mut info = 0i32;
    let mut work = vec![C64::new(0.0, 0.0); 1];
    let mut rwork = vec![0.0; 1];
    let mut iwork = vec![0i32; 1];
    for query in [true, false] {
        if !query {
            work = vec![C64::new(0.0, 0.0); work[0].re as usize];
            rwork = vec![0.0; rwork[0] as usize];
            iwork = vec![0i32; iwork[0] as usize];
        }
        let (lwork, lrwork, liwork) = if query {
            (-1, -1, -1)
        } else {
            (work.len() as i32, rwork.len() as i32, iwork.len() as i32)
        };
        // SAFETY: every buffer is sized as zheevr documents for order n, or
        // by its own workspace query.
        unsafe {
            lapack::zheevr(
                b'V', b'V', b'L', ni, &mut buf, ni, vl, vu, 0, 0, f64::MIN_POSITIVE,
                &mut found, &mut w, &mut z, ni, &mut isuppz, &mut work, lwork, &mut rwork,
                lrwork, &mut iwork, liwork, &mut info,
            );
        }
        if info != 0 {
            return Err(Error::Linalg(format!("zheevr failed with info = {info}")));
        }
    }
    let m = found as usize;
    let vals = w[..m].to_vec();
    let vecs = Mat::from_fn(n, m, |r, j| z[j * n + r]);
    Ok((vals, vecs))
}

#[cfg(not(feature = "lapack"))]
fn side_eigenpairs(h: MatRef<'_, C64>, negative: bool) -> Result<(Vec<f64>, Mat<C64>)> {
    let n = h.nrows();
    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let keep: Vec<usize> = (0..n)
        .filter(|&i| (evd.S()[i].re > 0.0) != negative)
        .collect();
    let vals = keep.iter().map(|&i| evd.S()[i].re).collect();
    let vecs = Mat::from_fn(n, keep.len(), |r, j| evd.U()[(r, keep[j])]);
    Ok((vals, vecs))
}

pub fn frobenius(a: MatRef<'_, C64>) -> f64 {
    let mut acc = 0.0;
    for c in 0..a.ncols() {
        for r in 0..a.nrows() {
            acc += a[(r, c)].norm_sqr();
        }
    }
    acc.sqrt()
}
