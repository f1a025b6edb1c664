//! Seeded Monte Carlo sweeps comparing the analytic SNR prediction with the
//! time-domain simulator over channel realizations, with CSV reports.

pub mod config;
pub mod report;
pub mod run;
pub mod seeds;

use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

pub use config::{ChannelSource, ExperimentConfig};
pub use report::{emit_csv, emit_plot_data, read_runs_csv, summarize, Metadata, RunReport, Summary};
pub use run::{run_comparison, Experiment, Mode, Sweep};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl ExperimentError {
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentError::Config(_) => "config",
            ExperimentError::Io(_) => "io",
        }
    }
}

/// Command-line style overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub master_seed: Option<u64>,
    pub n_realizations: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub unbias: Option<bool>,
}

impl ExperimentConfig {
    pub fn apply(&mut self, o: &Overrides) -> Result<(), ExperimentError> {
        if let Some(s) = o.master_seed {
            self.master_seed = s;
        }
        if let Some(n) = o.n_realizations {
            self.n_realizations = n;
        }
        if let Some(d) = &o.out_dir {
            self.output.dir = d.clone();
        }
        if let Some(u) = o.unbias {
            self.unbias = u;
        }
        self.validate()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Outputs {
    pub runs_csv: PathBuf,
    pub plot_csv: PathBuf,
    pub summary_json: PathBuf,
}

/// Runs the sweep and writes the runs CSV, plot data and summary into the
/// configured output directory.
pub fn execute(
    cfg: ExperimentConfig,
    mode: Mode,
    workers: Option<usize>,
    timestamp: bool,
) -> Result<(Sweep, Outputs), ExperimentError> {
    let meta = Metadata::new(mode, &cfg, timestamp);
    let out = &cfg.output;
    std::fs::create_dir_all(&out.dir).map_err(|e| ExperimentError::Io(format!("{}: {e}", out.dir.display())))?;
    let outputs = Outputs {
        runs_csv: out.dir.join(&out.runs_csv),
        plot_csv: out.dir.join(&out.plot_csv),
        summary_json: out.dir.join(&out.summary_json),
    };
    let sweep = run_comparison(cfg, mode, workers)?;
    emit_csv(&sweep.reports, &outputs.runs_csv, &meta)?;
    emit_plot_data(&sweep.reports, &outputs.plot_csv, &meta)?;
    report::write_summary(&sweep.summary, &outputs.summary_json)?;
    Ok((sweep, outputs))
}
