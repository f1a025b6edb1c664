use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use polsnr_experiment::{execute, ExperimentConfig, ExperimentError, Mode, Overrides};

/// Analytic vs time-domain SNR of PM-QAM over 2x2 frequency-dependent
/// channels.
#[derive(Parser)]
#[command(name = "polsnr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic prediction only.
    Estimate(RunArgs),
    /// Time-domain simulation only.
    Simulate(RunArgs),
    /// Both paths and the comparison report.
    Compare(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides master_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides n_realizations.
    #[arg(long)]
    runs: Option<usize>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report unbiased MMSE SNR (default from config).
    #[arg(long, overrides_with = "no_unbias")]
    unbias: bool,
    /// Report the biased MMSE SNR.
    #[arg(long)]
    no_unbias: bool,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Omit the timestamp and wall-time columns so outputs are reproducible.
    #[arg(long)]
    no_timestamp: bool,
}

fn run(mode: Mode, a: RunArgs) -> Result<(), ExperimentError> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    let unbias = match (a.unbias, a.no_unbias) {
        (true, _) => Some(true),
        (_, true) => Some(false),
        _ => None,
    };
    cfg.apply(&Overrides {
        master_seed: a.seed,
        n_realizations: a.runs,
        out_dir: a.out,
        unbias,
    })?;
    if a.workers == Some(0) {
        return Err(ExperimentError::Config("--workers must be at least 1".into()));
    }
    let (sweep, outputs) = execute(cfg, mode, a.workers, !a.no_timestamp)?;
    let out = serde_json::json!({ "summary": sweep.summary, "outputs": outputs });
    println!("{}", serde_json::to_string_pretty(&out).unwrap_or_default());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, args) = match cli.command {
        Command::Estimate(a) => (Mode::Estimate, a),
        Command::Simulate(a) => (Mode::Simulate, a),
        Command::Compare(a) => (Mode::Compare, a),
    };
    match run(mode, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::from(2)
        }
    }
}
