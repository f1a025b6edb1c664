//! Monte Carlo orchestration over channel realizations.

use std::time::Instant;

use polsnr_core::analytic::to_db;
use polsnr_core::{
    build_mmf_channel, load_channel, predict_snr, AnalyticError, ChannelError, ChannelSpectrum, FrequencyGrid,
    ModalChannelSpec, NoiseModel,
};
use polsnr_sim::{frame_grid, simulate, SimError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{bundled_profile, ChannelSource, ExperimentConfig};
use crate::report::{summarize, RunReport, Summary};
use crate::seeds::{channel_seed, run_seed};
use crate::ExperimentError;

/// Which paths a sweep evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Estimate,
    Simulate,
    Compare,
}

impl Mode {
    fn model(self) -> bool {
        self != Mode::Simulate
    }

    fn sim(self) -> bool {
        self != Mode::Estimate
    }
}

#[derive(Debug, Clone)]
enum Channel {
    Identity,
    Modal(ModalChannelSpec),
    /// Sampled on the analytic grid; the simulator interpolates it onto
    /// its frame.
    File(ChannelSpectrum),
}

impl Channel {
    fn on(&self, grid: &FrequencyGrid, seed: u64) -> ChannelSpectrum {
        match self {
            Channel::Identity => ChannelSpectrum::identity(*grid),
            Channel::Modal(spec) => build_mmf_channel(spec, grid, seed),
            Channel::File(h) => h.clone(),
        }
    }
}

/// A validated config with its channel and noise resolved.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub cfg: ExperimentConfig,
    channel: Channel,
    noise: NoiseModel,
    model_grid: FrequencyGrid,
}

/// All rows of a sweep, ordered by run id, plus their summary.
#[derive(Debug, Clone)]
pub struct Sweep {
    pub mode: Mode,
    pub reports: Vec<RunReport>,
    pub summary: Summary,
}

fn status_of_model(e: &AnalyticError) -> &'static str {
    match e {
        AnalyticError::Channel(ChannelError::IllConditioned { .. }) => "ill_conditioned",
        _ => "model_error",
    }
}

fn status_of_sim(e: &SimError) -> &'static str {
    match e {
        SimError::AlignmentFailed { .. } => "alignment_failed",
        _ => "sim_error",
    }
}

impl Experiment {
    pub fn new(cfg: ExperimentConfig) -> Result<Self, ExperimentError> {
        cfg.validate()?;
        let model_grid = cfg.model_grid()?;
        let channel = match &cfg.channel {
            ChannelSource::Identity => Channel::Identity,
            ChannelSource::Modal { spec } => Channel::Modal(spec.clone()),
            ChannelSource::Bundled { name } => Channel::Modal(bundled_profile(name)?),
            ChannelSource::File { path } => Channel::File(
                load_channel(path, &model_grid)
                    .map_err(|e| ExperimentError::Config(format!("channel file {}: {e}", path.display())))?,
            ),
        };
        let noise = cfg.noise.resolve(&cfg.tx)?;
        Ok(Self {
            cfg,
            channel,
            noise,
            model_grid,
        })
    }

    /// One realization. Failures are recorded in the row's status.
    pub fn run_one(&self, run_id: usize, mode: Mode) -> RunReport {
        let seed = run_seed(self.cfg.master_seed, run_id as u64);
        let ch_seed = channel_seed(seed);
        let mut row = RunReport::empty(run_id, seed);
        let mut status: Vec<String> = Vec::new();

        if mode.model() {
            let t0 = Instant::now();
            let h = self.channel.on(&self.model_grid, ch_seed);
            let r = predict_snr(&self.cfg.tx, &h, &self.noise, self.cfg.cond_limit, self.cfg.unbias);
            row.wall_time_model_s = Some(t0.elapsed().as_secs_f64());
            match r {
                Ok(s) => row.set_model(s.x_db(), s.y_db()),
                Err(e) => status.push(status_of_model(&e).into()),
            }
        }
        if mode.sim() {
            let t0 = Instant::now();
            let sim_cfg = self.cfg.sim_config(seed);
            let r = frame_grid(&sim_cfg)
                .and_then(|g| simulate(&sim_cfg, &self.channel.on(&g, ch_seed), &self.noise));
            row.wall_time_sim_s = Some(t0.elapsed().as_secs_f64());
            match r {
                Ok(res) => {
                    row.set_sim(
                        to_db(res.snr_evm.snr_x),
                        to_db(res.snr_evm.snr_y),
                        res.ber[0].ratio_or_bound(),
                        res.ber[1].ratio_or_bound(),
                    );
                    row.converged = Some(res.converged);
                    if !res.converged {
                        status.push("not_converged".into());
                    }
                }
                Err(e) => status.push(status_of_sim(&e).into()),
            }
        }
        row.finish();
        row.status = if status.is_empty() { "ok".into() } else { status.join(";") };
        row
    }

    /// Runs every realization on `workers` threads (all cores when `None`).
    /// Rows come back sorted by run id whatever the worker count.
    pub fn run(&self, mode: Mode, workers: Option<usize>) -> Result<Sweep, ExperimentError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.unwrap_or(0))
            .build()
            .map_err(|e| ExperimentError::Config(format!("worker pool: {e}")))?;
        let mut reports: Vec<RunReport> = pool.install(|| {
            (0..self.cfg.n_realizations)
                .into_par_iter()
                .map(|i| self.run_one(i, mode))
                .collect()
        });
        reports.sort_by_key(|r| r.run_id);
        let summary = summarize(&reports);
        Ok(Sweep {
            mode,
            reports,
            summary,
        })
    }
}

/// Builds the experiment and runs the sweep.
pub fn run_comparison(cfg: ExperimentConfig, mode: Mode, workers: Option<usize>) -> Result<Sweep, ExperimentError> {
    Experiment::new(cfg)?.run(mode, workers)
}
