mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Gridless denoising of spectrally sparse signals with subspace-modulated
/// waveforms.
#[derive(Debug, Parser)]
#[command(name = "modwave", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize a noisy signal, its subspace and ground truth.
    Gen(GenArgs),
    /// Solve the atomic-norm denoising problem.
    Denoise(DenoiseArgs),
    /// Read frequencies off the residual dual polynomial of a solution.
    Localize(LocalizeArgs),
    /// Build the interpolating dual certificate for a ground truth.
    Certify(CertifyArgs),
    /// Run a Monte Carlo sweep.
    Sweep(SweepArgs),
    /// Compare the known-frequency least-squares MSE with sigma^2 K J / N.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Overrides the noise level of the config.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, env = "MODWAVE_SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    #[arg(long)]
    pub signal: PathBuf,
    #[arg(long)]
    pub subspace: PathBuf,
    /// Noise level for the theoretical lambda rule; needs --eta.
    #[arg(long, requires = "eta", conflicts_with = "lambda", required_unless_present = "lambda")]
    pub sigma: Option<f64>,
    #[arg(long, requires = "sigma", conflicts_with = "lambda")]
    pub eta: Option<f64>,
    /// Explicit regularization weight.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 20_000)]
    pub max_iters: usize,
    /// Absolute and relative stopping tolerance.
    #[arg(long, default_value_t = 1e-5)]
    pub eps: f64,
    /// Solution JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the lifted estimate as an `m,k,re,im` CSV.
    #[arg(long)]
    pub matrix_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LocalizeArgs {
    #[arg(long)]
    pub signal: PathBuf,
    #[arg(long)]
    pub subspace: PathBuf,
    #[arg(long)]
    pub solution: PathBuf,
    #[arg(long, default_value_t = modwave::certificate::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub subspace: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Worker threads; 0 uses every logical core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Overrides `fixed.base_seed`.
    #[arg(long, env = "MODWAVE_SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides `fixed.base_seed`.
    #[arg(long, env = "MODWAVE_SEED")]
    pub seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Denoise(a) => commands::denoise(a),
        Command::Localize(a) => commands::localize(a),
        Command::Certify(a) => commands::certify(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Oracle(a) => commands::oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("modwave: {failure}");
            ExitCode::from(failure.code())
        }
    }
}
