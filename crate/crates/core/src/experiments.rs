//! Monte Carlo sweeps over `N`, `sigma`, `J` and `K`, the oracle
//! comparison, and least-squares scaling fits of the aggregated MSE.
//!
//! Trial seeds are `mix_seed([base_seed, value.to_bits(), trial])` (see
//! [`crate::rng::mix_seed`]); the subspace, waveforms, frequency draw and
//! noise of a trial read distinct streams of that seed.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificate::{localize, residual_certificate, DEFAULT_THRESHOLD};
use crate::error::{domain, Error, Result};
use crate::model::{
    draw_grid_frequencies, draw_waveforms, mse, order_from_count, sample_count, wrap_distance, GroundTruth,
    SignalInstance, Subspace,
};
use crate::rng::mix_seed;
use crate::solver::{oracle_lsq, regularization_lambda, solve_admm, AdmmConfig, DenoiseProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVariable {
    /// Sample count `N = 4M + 1`; values must be of that form.
    N,
    #[serde(rename = "sigma")]
    Sigma,
    J,
    K,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::N => "N",
            SweepVariable::Sigma => "sigma",
            SweepVariable::J => "J",
            SweepVariable::K => "K",
        }
    }

    /// The predictor the MSE is expected to grow linearly in.
    pub fn predictor(self) -> Predictor {
        match self {
            SweepVariable::N => Predictor::LogNOverN,
            SweepVariable::Sigma => Predictor::SigmaSquared,
            SweepVariable::J => Predictor::JLogJ,
            SweepVariable::K => Predictor::KLogK,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedParams {
    #[serde(rename = "M")]
    pub order: usize,
    #[serde(rename = "J")]
    pub n_atoms: usize,
    #[serde(rename = "K")]
    pub dim: usize,
    pub sigma: f64,
    pub eta: f64,
    pub trials: usize,
    pub base_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum FreqsMode {
    Fixed { freqs: Vec<f64>, amps: Vec<f64> },
    /// `J` distinct points of the grid `{g/M}`, amplitudes `c_j = j`.
    GridRandom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum LambdaRule {
    /// `2 eta sigma ||B||_F sqrt(ln N)` with `eta` from the fixed parameters.
    Theory,
    /// `factor * ||B||_F`, independent of the noise level.
    Frobenius { factor: f64 },
}

impl Default for LambdaRule {
    fn default() -> Self {
        LambdaRule::Theory
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub fixed: FixedParams,
    pub freqs: FreqsMode,
    #[serde(default)]
    pub lambda: LambdaRule,
    #[serde(default)]
    pub admm: AdmmConfig,
}

/// Parameters of one sweep point after substituting the swept value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialSetup {
    pub order: usize,
    pub n_atoms: usize,
    pub dim: usize,
    pub sigma: f64,
}

fn as_count(v: f64, what: &str) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 && v < 1e9 {
        Ok(v as usize)
    } else {
        domain(format!("{what} value {v} is not a positive integer"))
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return domain("values must be nonempty");
        }
        let up = self.values.windows(2).all(|w| w[0] < w[1]);
        let down = self.values.windows(2).all(|w| w[0] > w[1]);
        if !(up || down) {
            return domain("values must be strictly monotone");
        }
        if self.fixed.trials == 0 {
            return domain("trials must be at least 1");
        }
        if let LambdaRule::Frobenius { factor } = self.lambda {
            if !(factor > 0.0) || !factor.is_finite() {
                return domain(format!("lambda factor must be positive, got {factor}"));
            }
        }
        if let FreqsMode::Fixed { freqs, amps } = &self.freqs {
            if self.variable == SweepVariable::J {
                return domain("a J sweep needs grid_random frequencies");
            }
            if freqs.len() != self.fixed.n_atoms || amps.len() != self.fixed.n_atoms {
                return domain(format!(
                    "fixed frequency list has {} entries and {} amplitudes, J = {}",
                    freqs.len(),
                    amps.len(),
                    self.fixed.n_atoms
                ));
            }
        }
        self.admm.validate()?;
        for &v in &self.values {
            let setup = self.setup(v)?;
            if setup.dim > sample_count(setup.order) {
                return domain(format!("K = {} exceeds N", setup.dim));
            }
            if matches!(self.freqs, FreqsMode::GridRandom) && setup.n_atoms > setup.order {
                return domain(format!("cannot place J = {} atoms on a grid of M = {}", setup.n_atoms, setup.order));
            }
        }
        Ok(())
    }

    pub fn setup(&self, value: f64) -> Result<TrialSetup> {
        let f = &self.fixed;
        let mut s = TrialSetup {
            order: f.order,
            n_atoms: f.n_atoms,
            dim: f.dim,
            sigma: f.sigma,
        };
        match self.variable {
            SweepVariable::N => s.order = order_from_count(as_count(value, "N")?)?,
            SweepVariable::Sigma => s.sigma = value,
            SweepVariable::J => s.n_atoms = as_count(value, "J")?,
            SweepVariable::K => s.dim = as_count(value, "K")?,
        }
        if s.order == 0 || s.n_atoms == 0 || s.dim == 0 {
            return domain("M, J and K must be positive");
        }
        if !(s.sigma >= 0.0) || !s.sigma.is_finite() {
            return domain(format!("sigma must be nonnegative, got {}", s.sigma));
        }
        Ok(s)
    }

    pub fn trial_seed(&self, value: f64, trial: usize) -> u64 {
        mix_seed(&[self.fixed.base_seed, value.to_bits(), trial as u64])
    }

    /// Draws the instance of one trial.
    pub fn instance(&self, value: f64, trial: usize) -> Result<SignalInstance> {
        let setup = self.setup(value)?;
        let seed = self.trial_seed(value, trial);
        let subspace = Subspace::rademacher(setup.order, setup.dim, seed)?;
        let (freqs, amps) = match &self.freqs {
            FreqsMode::Fixed { freqs, amps } => (freqs.clone(), amps.clone()),
            FreqsMode::GridRandom => (
                draw_grid_frequencies(setup.n_atoms, setup.order, seed)?,
                (1..=setup.n_atoms).map(|j| j as f64).collect(),
            ),
        };
        let truth = GroundTruth::new(freqs, amps, draw_waveforms(setup.n_atoms, setup.dim, seed))?;
        SignalInstance::synthesize(subspace, truth, setup.sigma, seed)
    }

    fn lambda_for(&self, subspace: &Subspace, sigma: f64) -> Result<f64> {
        match self.lambda {
            LambdaRule::Theory => regularization_lambda(sigma, subspace, self.fixed.eta),
            LambdaRule::Frobenius { factor } => Ok(factor * subspace.frobenius_norm()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub variable: SweepVariable,
    pub value: f64,
    pub trial: usize,
    pub seed: u64,
    #[serde(rename = "M")]
    pub order: usize,
    #[serde(rename = "J")]
    pub n_atoms: usize,
    #[serde(rename = "K")]
    pub dim: usize,
    pub sigma: f64,
    pub lambda: f64,
    pub mse: f64,
    /// `(1/N) ||y - x*||^2`.
    pub raw_mse: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Distance from each true frequency to the nearest localized peak
    /// (`0.5` when nothing was localized).
    pub localization_errors: Vec<f64>,
    pub wall_time: f64,
}

impl ExperimentRecord {
    /// Every true frequency has a peak within `0.5/N`.
    pub fn localized(&self) -> bool {
        let radius = 0.5 / sample_count(self.order) as f64;
        self.localization_errors.iter().all(|&e| e <= radius)
    }
}

/// Solves one trial. Non-convergence is recorded in the result.
pub fn run_trial(config: &SweepConfig, value: f64, trial: usize) -> Result<ExperimentRecord> {
    let setup = config.setup(value)?;
    let inst = config.instance(value, trial)?;
    let lambda = config.lambda_for(&inst.subspace, setup.sigma)?;
    let start = Instant::now();
    let problem = DenoiseProblem::new(inst.noisy.clone(), inst.subspace.clone(), lambda)?;
    let sol = solve_admm(&problem, &config.admm)?;
    let peaks = localize(&residual_certificate(&problem, &sol)?, DEFAULT_THRESHOLD)?;
    let wall_time = start.elapsed().as_secs_f64();
    let localization_errors = inst
        .truth
        .freqs()
        .iter()
        .map(|&tau| peaks.iter().map(|p| wrap_distance(p.tau, tau)).fold(0.5, f64::min))
        .collect();
    Ok(ExperimentRecord {
        variable: config.variable,
        value,
        trial,
        seed: inst.seed,
        order: setup.order,
        n_atoms: setup.n_atoms,
        dim: setup.dim,
        sigma: setup.sigma,
        lambda,
        mse: inst.mse(&sol.x_hat)?,
        raw_mse: mse(&inst.noisy, &inst.clean)?,
        converged: sol.converged,
        iterations: sol.iterations,
        localization_errors,
        wall_time,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatePoint {
    pub value: f64,
    pub mean_mse: f64,
    /// Sample standard deviation (`n - 1` denominator; 0 for a single trial).
    pub std_mse: f64,
    pub scaled_mse: f64,
    /// Converged trials entering the mean.
    pub trials_used: usize,
    pub mean_raw_mse: f64,
    pub localization_rate: f64,
    /// The `J log J` / `K log K` scaler was clamped to `J` (or `K`).
    pub scaler_clamped: bool,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub records: Vec<ExperimentRecord>,
    pub points: Vec<AggregatePoint>,
}

/// `x max(ln x, 1)`; the flag reports whether the clamp was active.
pub fn clamped_x_log_x(x: f64) -> (f64, bool) {
    let l = x.ln();
    if l < 1.0 {
        (x, true)
    } else {
        (x * l, false)
    }
}

/// Per-figure normalization of a mean MSE at a sweep value.
pub fn scaled_mse(variable: SweepVariable, value: f64, mean_mse: f64) -> (f64, bool) {
    match variable {
        SweepVariable::N => (mean_mse * value / value.ln(), false),
        SweepVariable::Sigma => (mean_mse / (value * value), false),
        SweepVariable::J | SweepVariable::K => {
            let (s, clamped) = clamped_x_log_x(value);
            (mean_mse / s, clamped)
        }
    }
}

/// Reduces the records of one sweep value, in trial order.
pub fn aggregate(variable: SweepVariable, value: f64, records: &[ExperimentRecord]) -> AggregatePoint {
    let mut sorted: Vec<&ExperimentRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.trial);
    let used: Vec<f64> = sorted.iter().filter(|r| r.converged).map(|r| r.mse).collect();
    let n = used.len() as f64;
    let mean = used.iter().sum::<f64>() / n;
    let std = if used.len() > 1 {
        (used.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let total = sorted.len() as f64;
    let (scaled, scaler_clamped) = scaled_mse(variable, value, mean);
    AggregatePoint {
        value,
        mean_mse: mean,
        std_mse: std,
        scaled_mse: scaled,
        trials_used: used.len(),
        mean_raw_mse: sorted.iter().map(|r| r.raw_mse).sum::<f64>() / total,
        localization_rate: sorted.iter().filter(|r| r.localized()).count() as f64 / total,
        scaler_clamped,
    }
}

/// Runs every trial of every value on a pool of `jobs` threads (`0` picks
/// the rayon default). Records come back ordered by value, then trial.
pub fn sweep(config: &SweepConfig, jobs: usize) -> Result<SweepOutput> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Domain(format!("cannot start worker pool: {e}")))?;
    let tasks: Vec<(f64, usize)> = config
        .values
        .iter()
        .flat_map(|&v| (0..config.fixed.trials).map(move |t| (v, t)))
        .collect();
    let records: Vec<ExperimentRecord> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(v, t)| run_trial(config, v, t))
            .collect::<Result<Vec<_>>>()
    })?;
    let points = config
        .values
        .iter()
        .zip(records.chunks(config.fixed.trials))
        .map(|(&v, chunk)| aggregate(config.variable, v, chunk))
        .collect();
    Ok(SweepOutput { records, points })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Predictor {
    #[serde(rename = "log(N)/N")]
    LogNOverN,
    #[serde(rename = "sigma^2")]
    SigmaSquared,
    #[serde(rename = "J log J")]
    JLogJ,
    #[serde(rename = "K log K")]
    KLogK,
}

impl Predictor {
    pub fn name(self) -> &'static str {
        match self {
            Predictor::LogNOverN => "log(N)/N",
            Predictor::SigmaSquared => "sigma^2",
            Predictor::JLogJ => "J log J",
            Predictor::KLogK => "K log K",
        }
    }

    pub fn eval(self, value: f64) -> f64 {
        match self {
            Predictor::LogNOverN => value.ln() / value,
            Predictor::SigmaSquared => value * value,
            Predictor::JLogJ | Predictor::KLogK => clamped_x_log_x(value).0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub predictor: Predictor,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = slope x + intercept` and its `R^2`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    if x.len() != y.len() {
        return Err(Error::DegenerateFit(format!("{} predictors for {} responses", x.len(), y.len())));
    }
    if x.len() < 4 {
        return Err(Error::DegenerateFit(format!("need at least 4 points, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateFit("non-finite point".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if !(sxx > 1e-300) || sxx <= 1e-24 * x.iter().map(|v| v * v).sum::<f64>() {
        return Err(Error::DegenerateFit("predictor values are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok((slope, intercept, r2.clamp(0.0, 1.0)))
}

/// Fits the mean MSE of each point against `predictor(value)`.
pub fn fit_scaling(points: &[AggregatePoint], predictor: Predictor) -> Result<ScalingFit> {
    let x: Vec<f64> = points.iter().map(|p| predictor.eval(p.value)).collect();
    let y: Vec<f64> = points.iter().map(|p| p.mean_mse).collect();
    let (slope, intercept, r_squared) = fit_line(&x, &y)?;
    Ok(ScalingFit {
        predictor,
        slope,
        intercept,
        r_squared,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub fixed: FixedParams,
    pub freqs: FreqsMode,
}

impl OracleConfig {
    /// The same instances a `sigma` sweep at `fixed.sigma` would draw.
    pub fn as_sweep(&self) -> SweepConfig {
        SweepConfig {
            variable: SweepVariable::Sigma,
            values: vec![self.fixed.sigma],
            fixed: self.fixed.clone(),
            freqs: self.freqs.clone(),
            lambda: LambdaRule::Theory,
            admm: AdmmConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub mean_oracle_mse: f64,
    /// `sigma^2 K J / N`.
    pub theory: f64,
    /// `mean / theory`; 1 by convention when `sigma = 0` and the fits are
    /// exact to round-off.
    pub ratio: f64,
    pub trials: usize,
    pub mse: Vec<f64>,
}

pub fn oracle_comparison(config: &OracleConfig) -> Result<OracleComparison> {
    let sweep = config.as_sweep();
    sweep.validate()?;
    let sigma = config.fixed.sigma;
    let mut mses = Vec::with_capacity(config.fixed.trials);
    let mut setup = None;
    for trial in 0..config.fixed.trials {
        let inst = sweep.instance(sigma, trial)?;
        let fit = oracle_lsq(&inst.noisy, &inst.subspace, inst.truth.freqs(), &inst.clean)?;
        mses.push(fit.mse);
        setup.get_or_insert((inst.subspace.n_samples(), inst.truth.n_atoms(), inst.subspace.dim()));
    }
    let (n, j, k) = setup.expect("at least one trial");
    let mean = mses.iter().sum::<f64>() / mses.len() as f64;
    let theory = sigma * sigma * (k * j) as f64 / n as f64;
    let ratio = if theory == 0.0 && mean <= 1e-20 { 1.0 } else { mean / theory };
    Ok(OracleComparison {
        mean_oracle_mse: mean,
        theory,
        ratio,
        trials: mses.len(),
        mse: mses,
    })
}

/// `variable,value,trial,seed,mse,converged,iters,wall_time`.
pub fn write_trials_csv<W: Write>(records: &[ExperimentRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["variable", "value", "trial", "seed", "mse", "converged", "iters", "wall_time"])?;
    for r in records {
        w.write_record([
            r.variable.name().to_string(),
            r.value.to_string(),
            r.trial.to_string(),
            r.seed.to_string(),
            r.mse.to_string(),
            r.converged.to_string(),
            r.iterations.to_string(),
            r.wall_time.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `value,mean_mse,std_mse,scaled_mse`.
pub fn write_aggregate_csv<W: Write>(points: &[AggregatePoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["value", "mean_mse", "std_mse", "scaled_mse"])?;
    for p in points {
        w.write_record([
            p.value.to_string(),
            p.mean_mse.to_string(),
            p.std_mse.to_string(),
            p.scaled_mse.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
