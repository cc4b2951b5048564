//! On-disk formats.
//!
//! Signals are CSV `m,re,im` with `m = -2M..=2M`; the subspace and data
//! matrices are CSV `m,k,re,im`, `m`-major. JSON files write complex numbers
//! as `{"re": .., "im": ..}`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{order_from_count, sample_index, DataMatrix, GroundTruth, Subspace, C64};
use crate::poly::Peak;
use crate::solver::SdpSolution;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cx {
    pub re: f64,
    pub im: f64,
}

impl From<C64> for Cx {
    fn from(c: C64) -> Self {
        Cx { re: c.re, im: c.im }
    }
}

impl From<Cx> for C64 {
    fn from(c: Cx) -> Self {
        C64::new(c.re, c.im)
    }
}

fn parse_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parse(msg.into()))
}

fn check_headers<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str], what: &str) -> Result<()> {
    let headers = rdr.headers()?;
    if headers.iter().ne(expected.iter().copied()) {
        return parse_err(format!(
            "{what} header must be `{}`, found `{}`",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        ));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct SampleRow {
    m: i64,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct EntryRow {
    m: i64,
    k: usize,
    re: f64,
    im: f64,
}

pub fn write_signal_csv<W: Write>(x: &[C64], out: W) -> Result<()> {
    let order = order_from_count(x.len())?;
    let mut w = csv::Writer::from_writer(out);
    for (i, v) in x.iter().enumerate() {
        w.serialize(SampleRow {
            m: sample_index(i, order),
            re: v.re,
            im: v.im,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Returns the samples in storage order; `N` must be `4M + 1`.
pub fn read_signal_csv<R: Read>(input: R) -> Result<Vec<C64>> {
    let mut rdr = csv::Reader::from_reader(input);
    check_headers(&mut rdr, &["m", "re", "im"], "signal")?;
    let rows: Vec<SampleRow> = rdr.deserialize().collect::<std::result::Result<_, _>>()?;
    let order = order_from_count(rows.len())
        .map_err(|_| Error::Parse(format!("signal has {} rows, expected 4M+1", rows.len())))?;
    for (i, r) in rows.iter().enumerate() {
        if r.m != sample_index(i, order) {
            return parse_err(format!(
                "signal row {} has m = {}, expected {}",
                i + 1,
                r.m,
                sample_index(i, order)
            ));
        }
    }
    Ok(rows.into_iter().map(|r| C64::new(r.re, r.im)).collect())
}

fn write_entries<W: Write>(n: usize, k: usize, entry: impl Fn(usize, usize) -> C64, out: W) -> Result<()> {
    let order = order_from_count(n)?;
    let mut w = csv::Writer::from_writer(out);
    for i in 0..n {
        for kk in 0..k {
            let v = entry(i, kk);
            w.serialize(EntryRow {
                m: sample_index(i, order),
                k: kk,
                re: v.re,
                im: v.im,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Returns `(N, K, entries)` with `entries[i * K + k]`.
fn read_entries<R: Read>(input: R, what: &str) -> Result<(usize, usize, Vec<C64>)> {
    let mut rdr = csv::Reader::from_reader(input);
    check_headers(&mut rdr, &["m", "k", "re", "im"], what)?;
    let rows: Vec<EntryRow> = rdr.deserialize().collect::<std::result::Result<_, _>>()?;
    let Some(first) = rows.first() else {
        return parse_err(format!("{what} file has no rows"));
    };
    if first.m > 0 {
        return parse_err(format!("{what} must start at m = -2M"));
    }
    let order = first.m.unsigned_abs() as usize / 2;
    let n = 4 * order + 1;
    if rows.len() % n != 0 || order == 0 {
        return parse_err(format!("{what} has {} rows, not a multiple of N = {n}", rows.len()));
    }
    let k = rows.len() / n;
    for (idx, r) in rows.iter().enumerate() {
        let (i, kk) = (idx / k, idx % k);
        if r.m != sample_index(i, order) || r.k != kk {
            return parse_err(format!(
                "{what} row {} is (m = {}, k = {}), expected (m = {}, k = {kk})",
                idx + 1,
                r.m,
                r.k,
                sample_index(i, order)
            ));
        }
    }
    Ok((n, k, rows.into_iter().map(|r| C64::new(r.re, r.im)).collect()))
}

/// Entry `(m, k)` is `b_m(k)`.
pub fn write_subspace_csv<W: Write>(subspace: &Subspace, out: W) -> Result<()> {
    write_entries(subspace.n_samples(), subspace.dim(), |i, k| subspace.row(i)[k], out)
}

pub fn read_subspace_csv<R: Read>(input: R) -> Result<Subspace> {
    let (n, k, entries) = read_entries(input, "subspace")?;
    Subspace::from_rows(order_from_count(n)?, k, entries)
}

/// Entry `(m, k)` is `X(k, m)`.
pub fn write_matrix_csv<W: Write>(x: &DataMatrix, out: W) -> Result<()> {
    write_entries(x.cols(), x.rows(), |i, k| x.get(k, i), out)
}

pub fn read_matrix_csv<R: Read>(input: R) -> Result<DataMatrix> {
    let (n, k, entries) = read_entries(input, "data matrix")?;
    DataMatrix::from_column_major(k, n, entries)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthFile {
    #[serde(rename = "M")]
    pub order: usize,
    #[serde(rename = "K")]
    pub dim: usize,
    #[serde(rename = "J")]
    pub n_atoms: usize,
    pub freqs: Vec<f64>,
    pub amps: Vec<f64>,
    pub h: Vec<Vec<Cx>>,
    pub seed: u64,
}

impl TruthFile {
    pub fn new(truth: &GroundTruth, order: usize, seed: u64) -> Self {
        TruthFile {
            order,
            dim: truth.dim(),
            n_atoms: truth.n_atoms(),
            freqs: truth.freqs().to_vec(),
            amps: truth.amps().to_vec(),
            h: truth
                .waveforms()
                .iter()
                .map(|h| h.iter().map(|&c| c.into()).collect())
                .collect(),
            seed,
        }
    }

    pub fn to_truth(&self) -> Result<GroundTruth> {
        if self.freqs.len() != self.n_atoms || self.h.iter().any(|h| h.len() != self.dim) {
            return parse_err(format!(
                "truth file declares J = {} and K = {} but lists {} frequencies with waveforms of lengths {:?}",
                self.n_atoms,
                self.dim,
                self.freqs.len(),
                self.h.iter().map(Vec::len).collect::<Vec<_>>()
            ));
        }
        let waveforms = self
            .h
            .iter()
            .map(|h| h.iter().map(|&c| c.into()).collect())
            .collect();
        GroundTruth::new(self.freqs.clone(), self.amps.clone(), waveforms)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub objective: f64,
    pub atomic_norm_surrogate: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub x_hat: Vec<Cx>,
}

impl SolutionFile {
    pub fn new(sol: &SdpSolution) -> Self {
        SolutionFile {
            objective: sol.objective,
            atomic_norm_surrogate: sol.atomic_norm_surrogate,
            iterations: sol.iterations,
            primal_residual: sol.primal_residual,
            dual_residual: sol.dual_residual,
            converged: sol.converged,
            lambda: Some(sol.lambda),
            x_hat: sol.x_hat.iter().map(|&c| c.into()).collect(),
        }
    }

    pub fn x_hat(&self) -> Vec<C64> {
        self.x_hat.iter().map(|&c| c.into()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizedFreq {
    pub tau: f64,
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreqsFile {
    pub freqs: Vec<LocalizedFreq>,
}

impl FreqsFile {
    pub fn new(peaks: &[Peak]) -> Self {
        FreqsFile {
            freqs: peaks
                .iter()
                .map(|p| LocalizedFreq {
                    tau: p.tau,
                    strength: p.value,
                })
                .collect(),
        }
    }
}

pub fn write_json<T: Serialize, W: Write>(value: &T, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>, R: Read>(input: R) -> Result<T> {
    Ok(serde_json::from_reader(input)?)
}
