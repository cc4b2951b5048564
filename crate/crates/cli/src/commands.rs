use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use modwave::certificate::{construct_certificate, localize as find_peaks, DualCertificate};
use modwave::experiments::{
    fit_scaling, oracle_comparison, sweep as run_sweep, write_aggregate_csv, write_trials_csv, FreqsMode,
    OracleConfig, SweepConfig,
};
use modwave::io::{
    read_json, read_signal_csv, read_subspace_csv, write_json, write_matrix_csv, write_signal_csv,
    write_subspace_csv, FreqsFile, SolutionFile, TruthFile,
};
use modwave::model::{draw_grid_frequencies, draw_waveforms, GroundTruth, SignalInstance, Subspace};
use modwave::solver::{check_optimality, regularization_lambda, solve_admm, AdmmConfig, DenoiseProblem};
use modwave::Error;

use crate::manifest::{now, RunManifest};
use crate::{CertifyArgs, DenoiseArgs, GenArgs, LocalizeArgs, OracleArgs, SweepArgs};

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    NotConverged(String),
    Certificate(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::NotConverged(_) => 3,
            Failure::Certificate(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::NotConverged(m) | Failure::Certificate(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Singular { .. } => Failure::Certificate(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn open(path: &Path) -> std::result::Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn create(path: &Path) -> std::result::Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn with_context(path: &Path) -> impl Fn(Error) -> Failure + '_ {
    move |e| match e {
        Error::Singular { .. } => Failure::Certificate(e.to_string()),
        other => Failure::Usage(format!("{}: {other}", path.display())),
    }
}

fn finish_writer(mut w: BufWriter<File>, path: &Path) -> Outcome {
    w.flush()
        .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn make_dir(dir: &Path) -> Outcome {
    fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", dir.display())))
}

fn manifest_for(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

fn write_manifest(m: RunManifest, inputs: &[PathBuf], outputs: &[PathBuf], path: &Path) -> Outcome {
    m.finish(inputs, outputs, path)
        .map_err(|e| Failure::Usage(format!("cannot write manifest {}: {e}", path.display())))
}

fn read_config<T: for<'de> Deserialize<'de>>(path: &Path) -> std::result::Result<T, Failure> {
    read_json(open(path)?).map_err(|e| Failure::Usage(format!("malformed config {}: {e}", path.display())))
}

fn save<T: Serialize>(value: &T, path: &Path) -> Outcome {
    let mut w = create(path)?;
    write_json(value, &mut w).map_err(with_context(path))?;
    finish_writer(w, path)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenConfig {
    #[serde(rename = "M")]
    order: usize,
    #[serde(rename = "K")]
    dim: usize,
    #[serde(rename = "J")]
    n_atoms: usize,
    sigma: f64,
    seed: u64,
    freqs: FreqsMode,
}

pub fn gen(args: GenArgs) -> Outcome {
    let started = now();
    let mut config: GenConfig = read_config(&args.config)?;
    if let Some(s) = args.sigma {
        config.sigma = s;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    let seed = config.seed;
    let (freqs, amps) = match &config.freqs {
        FreqsMode::Fixed { freqs, amps } => {
            if freqs.len() != config.n_atoms {
                return Err(Failure::Usage(format!(
                    "config field `freqs.freqs` lists {} frequencies but `J` is {}",
                    freqs.len(),
                    config.n_atoms
                )));
            }
            (freqs.clone(), amps.clone())
        }
        FreqsMode::GridRandom => (
            draw_grid_frequencies(config.n_atoms, config.order, seed)?,
            (1..=config.n_atoms).map(|j| j as f64).collect(),
        ),
    };
    let subspace = Subspace::rademacher(config.order, config.dim, seed)?;
    let truth = GroundTruth::new(freqs, amps, draw_waveforms(config.n_atoms, config.dim, seed))?;
    let inst = SignalInstance::synthesize(subspace, truth, config.sigma, seed)?;

    make_dir(&args.out_dir)?;
    let signal = args.out_dir.join("signal.csv");
    let clean = args.out_dir.join("clean.csv");
    let subspace = args.out_dir.join("subspace.csv");
    let truth = args.out_dir.join("truth.json");
    for (path, x) in [(&signal, &inst.noisy), (&clean, &inst.clean)] {
        let mut w = create(path)?;
        write_signal_csv(x, &mut w).map_err(with_context(path))?;
        finish_writer(w, path)?;
    }
    let mut w = create(&subspace)?;
    write_subspace_csv(&inst.subspace, &mut w).map_err(with_context(&subspace))?;
    finish_writer(w, &subspace)?;
    save(&TruthFile::new(&inst.truth, config.order, seed), &truth)?;

    let m = RunManifest::new("gen", json!(config), vec![seed], started);
    write_manifest(
        m,
        &[args.config.clone()],
        &[signal, clean, subspace, truth],
        &args.out_dir.join("manifest.json"),
    )
}

fn load_problem_inputs(signal: &Path, subspace: &Path) -> std::result::Result<(Vec<modwave::C64>, Subspace), Failure> {
    let y = read_signal_csv(open(signal)?).map_err(with_context(signal))?;
    let s = read_subspace_csv(open(subspace)?).map_err(with_context(subspace))?;
    if y.len() != s.n_samples() {
        return Err(Failure::Usage(format!(
            "signal has {} samples but the subspace has {} rows",
            y.len(),
            s.n_samples()
        )));
    }
    Ok((y, s))
}

pub fn denoise(args: DenoiseArgs) -> Outcome {
    let started = now();
    let (y, subspace) = load_problem_inputs(&args.signal, &args.subspace)?;
    let lambda = match (args.lambda, args.sigma, args.eta) {
        (Some(l), _, _) => l,
        (None, Some(sigma), Some(eta)) => regularization_lambda(sigma, &subspace, eta)?,
        _ => return Err(Failure::Usage("give --lambda, or --sigma together with --eta".into())),
    };
    let config = AdmmConfig {
        max_iters: args.max_iters,
        eps_abs: args.eps,
        eps_rel: args.eps,
        ..AdmmConfig::default()
    };
    let problem = DenoiseProblem::new(y, subspace, lambda)?;
    let sol = solve_admm(&problem, &config)?;
    let (cond1, cond2) = check_optimality(&problem, &sol)?;

    save(&SolutionFile::new(&sol), &args.out)?;
    let mut outputs = vec![args.out.clone()];
    if let Some(path) = &args.matrix_out {
        let mut w = create(path)?;
        write_matrix_csv(&sol.x_matrix, &mut w).map_err(with_context(path))?;
        finish_writer(w, path)?;
        outputs.push(path.clone());
    }
    let settings = json!({
        "lambda": lambda,
        "sigma": args.sigma,
        "eta": args.eta,
        "admm": config,
        "optimality": { "cond1_slack": cond1, "cond2_gap": cond2 },
    });
    let m = RunManifest::new("denoise", settings, Vec::new(), started);
    write_manifest(
        m,
        &[args.signal.clone(), args.subspace.clone()],
        &outputs,
        &manifest_for(&args.out),
    )?;
    if sol.converged {
        Ok(())
    } else {
        Err(Failure::NotConverged(format!(
            "no convergence in {} iterations (primal {:e}, dual {:e}); output written",
            sol.iterations, sol.primal_residual, sol.dual_residual
        )))
    }
}

pub fn localize(args: LocalizeArgs) -> Outcome {
    let started = now();
    let (y, subspace) = load_problem_inputs(&args.signal, &args.subspace)?;
    let sol: SolutionFile = read_json(open(&args.solution)?).map_err(with_context(&args.solution))?;
    let Some(lambda) = sol.lambda.filter(|l| *l > 0.0) else {
        return Err(Failure::Usage(format!(
            "{} carries no positive `lambda`",
            args.solution.display()
        )));
    };
    let x_hat = sol.x_hat();
    if x_hat.len() != y.len() {
        return Err(Failure::Usage(format!(
            "solution has {} samples, signal has {}",
            x_hat.len(),
            y.len()
        )));
    }
    let q = y.iter().zip(&x_hat).map(|(a, b)| (a - b) / lambda).collect();
    let cert = DualCertificate::new(q, subspace)?;
    let peaks = find_peaks(&cert, args.threshold)?;
    save(&FreqsFile::new(&peaks), &args.out)?;
    let m = RunManifest::new(
        "localize",
        json!({ "threshold": args.threshold, "lambda": lambda }),
        Vec::new(),
        started,
    );
    write_manifest(
        m,
        &[args.signal.clone(), args.subspace.clone(), args.solution.clone()],
        &[args.out.clone()],
        &manifest_for(&args.out),
    )
}

pub fn certify(args: CertifyArgs) -> Outcome {
    let started = now();
    let file: TruthFile = read_json(open(&args.truth)?).map_err(with_context(&args.truth))?;
    let truth = file.to_truth().map_err(with_context(&args.truth))?;
    let subspace = read_subspace_csv(open(&args.subspace)?).map_err(with_context(&args.subspace))?;
    if subspace.order() != file.order {
        return Err(Failure::Usage(format!(
            "truth file has M = {} but the subspace has M = {}",
            file.order,
            subspace.order()
        )));
    }
    let (_, report) = construct_certificate(&truth, &subspace)?;
    save(&report, &args.out)?;
    let m = RunManifest::new("certify", json!({}), vec![file.seed], started);
    write_manifest(
        m,
        &[args.truth.clone(), args.subspace.clone()],
        &[args.out.clone()],
        &manifest_for(&args.out),
    )?;
    if report.is_valid() {
        Ok(())
    } else {
        Err(Failure::Certificate(format!(
            "certificate fails: far-region max {:.6}, near-region checks {:?}",
            report.far_max, report.near_ok
        )))
    }
}

pub fn sweep(args: SweepArgs) -> Outcome {
    let started = now();
    let mut config: SweepConfig = read_config(&args.config)?;
    if let Some(s) = args.seed {
        config.fixed.base_seed = s;
    }
    config.validate().map_err(with_context(&args.config))?;
    make_dir(&args.out_dir)?;
    let output = run_sweep(&config, args.jobs)?;

    let trials = args.out_dir.join("trials.csv");
    let aggregate = args.out_dir.join("aggregate.csv");
    let records = args.out_dir.join("records.json");
    let fit_path = args.out_dir.join("fit.json");
    let mut w = create(&trials)?;
    write_trials_csv(&output.records, &mut w).map_err(with_context(&trials))?;
    finish_writer(w, &trials)?;
    let mut w = create(&aggregate)?;
    write_aggregate_csv(&output.points, &mut w).map_err(with_context(&aggregate))?;
    finish_writer(w, &aggregate)?;
    save(&output.records, &records)?;

    let predictor = config.variable.predictor();
    let mut fit = match fit_scaling(&output.points, predictor) {
        Ok(f) => json!({ "fit": f }),
        Err(e) => json!({ "fit": null, "predictor": predictor, "reason": e.to_string() }),
    };
    fit["points"] = json!(output.points);
    save(&fit, &fit_path)?;

    let not_converged = output.records.iter().filter(|r| !r.converged).count();
    if not_converged > 0 {
        eprintln!("modwave: {not_converged} trial(s) did not converge; they are excluded from the means");
    }
    let m = RunManifest::new(
        "sweep",
        json!({ "sweep": config, "jobs": args.jobs }),
        vec![config.fixed.base_seed],
        started,
    );
    write_manifest(
        m,
        &[args.config.clone()],
        &[trials, aggregate, records, fit_path],
        &args.out_dir.join("manifest.json"),
    )
}

pub fn oracle(args: OracleArgs) -> Outcome {
    let started = now();
    let mut config: OracleConfig = read_config(&args.config)?;
    if let Some(s) = args.seed {
        config.fixed.base_seed = s;
    }
    let result = oracle_comparison(&config).map_err(with_context(&args.config))?;
    save(&result, &args.out)?;
    let m = RunManifest::new("oracle", json!(config), vec![config.fixed.base_seed], started);
    write_manifest(m, &[args.config.clone()], &[args.out.clone()], &manifest_for(&args.out))
}
