//! Time-domain Monte Carlo reference for PM-QAM links.
//!
//! A run synthesizes Gray-coded QAM on both polarizations, applies a 2x2
//! channel and Gaussian noise on a circular frame, recovers the symbols
//! with an adaptive butterfly equalizer and measures SNR from the error
//! vectors and BER from counted bit errors.

pub mod equalizer;
pub mod measure;
pub mod modulation;
pub mod waveform;

use polsnr_core::{ChannelSpectrum, NoiseModel, Pol, TxSpec};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use equalizer::{mmse_butterfly_equalize, Adaptation, EqualizerConfig, Equalized, MseSummary};
pub use measure::{measure, Alignment, BerCount, SimResult, SNR_CAP};
pub use modulation::Constellation;
pub use waveform::{frame_grid, propagate, receive_front_end, synthesize_tx, TxReference, WaveformPair};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulator configuration: {0}")]
    Config(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("could not align output {output:?} to any transmitted tributary (best correlation {correlation:.3})")]
    AlignmentFailed { output: Pol, correlation: f64 },
}

fn default_n_symbols() -> usize {
    1 << 16
}

fn default_sps() -> usize {
    2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub tx: TxSpec,
    /// Symbols per tributary; the frame holds `n_symbols·samples_per_symbol`
    /// samples, a power of two.
    #[serde(default = "default_n_symbols")]
    pub n_symbols: usize,
    #[serde(default = "default_sps")]
    pub samples_per_symbol: usize,
    #[serde(default)]
    pub equalizer: EqualizerConfig,
    #[serde(default)]
    pub seed: u64,
}

impl SimConfig {
    pub fn new(tx: TxSpec, seed: u64) -> Self {
        Self {
            tx,
            n_symbols: default_n_symbols(),
            samples_per_symbol: default_sps(),
            equalizer: EqualizerConfig::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        self.tx.validate().map_err(|e| SimError::Config(e.to_string()))?;
        let eq = &self.equalizer;
        if eq.n_taps % 2 == 0 {
            return bad(format!("n_taps must be odd, got {}", eq.n_taps));
        }
        if !matches!(eq.taps_per_symbol, 1 | 2) {
            return bad(format!("taps_per_symbol must be 1 or 2, got {}", eq.taps_per_symbol));
        }
        if self.samples_per_symbol % eq.taps_per_symbol != 0 {
            return bad(format!(
                "samples_per_symbol {} is not a multiple of taps_per_symbol {}",
                self.samples_per_symbol, eq.taps_per_symbol
            ));
        }
        for mu in [eq.mu_training, eq.mu_tracking] {
            if !(mu.is_finite() && mu > 0.0) {
                return bad(format!("step size must be positive, got {mu}"));
            }
        }
        if eq.n_training_symbols == 0 {
            return bad("n_training_symbols must be positive".into());
        }
        if eq.measure_from() >= self.n_symbols {
            return bad(format!(
                "training ({}) plus guard ({}) leave no symbols of {} to measure",
                eq.n_training_symbols, eq.n_guard_symbols, self.n_symbols
            ));
        }
        if eq.span_symbols() > eq.n_guard_symbols {
            return bad(format!(
                "equalizer spans {} symbols, longer than the {} guard symbols",
                eq.span_symbols(),
                eq.n_guard_symbols
            ));
        }
        waveform::frame_grid(self).map(|_| ())
    }
}

/// Synthesize, propagate, equalize and measure one realization.
pub fn simulate(cfg: &SimConfig, h: &ChannelSpectrum, noise: &NoiseModel) -> Result<SimResult, SimError> {
    let (tx, reference) = synthesize_tx(cfg)?;
    let rx = propagate(&tx, h, noise, cfg.seed)?;
    let eq = mmse_butterfly_equalize(&rx, cfg, &reference)?;
    measure(&eq, &reference, &cfg.tx)
}
