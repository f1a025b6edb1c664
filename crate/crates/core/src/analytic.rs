//! Analytic post-equalizer SNR.
//!
//! The receiver is modeled as a per-frequency polarization demultiplexer
//! `K(f) = H(f)⁻¹` followed by an infinitely long MMSE equalizer on each
//! tributary. Demultiplexing recovers the signal exactly but colors the
//! noise, so tributary `x` sees the spectral SNR
//!
//! ```text
//! SNR_x(f) = P_x(f) / ((|K_xx(f)|² + |K_xy(f)|²) · N0_x(f)),   P_x(f) = σ²_x · T · |H_T(f)|²
//! ```
//!
//! (and likewise for `y` with the second row of `K`). The equalizer output
//! SNR then follows from the folded spectral SNR `S̄(f)`:
//!
//! ```text
//! SNR_out = 1 / ( T ∫_{-1/2T}^{1/2T} df / (S̄(f) + 1) )
//! ```
//!
//! which is the *biased* MMSE figure; the unbiased SNR is one less.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{invert_channel, ChannelError, ChannelSpectrum};
use crate::qam::QamOrder;
use crate::spectral::{fold_spectrum, FrequencyGrid, PulseShape, ScalarSpectrum};

/// Floor applied to unbiased SNRs so dB views stay finite.
pub const UNBIASED_SNR_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum AnalyticError {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("noise PSD must be finite and positive in band, got {value} at {frequency_hz:.6e} Hz")]
    InvalidNoise { frequency_hz: f64, value: f64 },
    #[error("spectral SNR is not finite at {frequency_hz:.6e} Hz")]
    NonFiniteResult { frequency_hz: f64 },
    #[error("invalid transmitter: {0}")]
    InvalidTx(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pol {
    X,
    Y,
}

/// Transmitter parameters shared by the analytic model and the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TxSpec {
    pub baud_rate_hz: f64,
    pub m_qam: QamOrder,
    pub roll_off: PulseShape,
    /// Symbol variance σ² of each tributary.
    #[serde(default = "unit")]
    pub sigma_a2_x: f64,
    #[serde(default = "unit")]
    pub sigma_a2_y: f64,
}

fn unit() -> f64 {
    1.0
}

impl TxSpec {
    pub fn new(baud_rate_hz: f64, m_qam: QamOrder, roll_off: f64) -> Result<Self, AnalyticError> {
        let tx = Self {
            baud_rate_hz,
            m_qam,
            roll_off: PulseShape::srrc(roll_off).map_err(|e| AnalyticError::InvalidTx(e.to_string()))?,
            sigma_a2_x: 1.0,
            sigma_a2_y: 1.0,
        };
        tx.validate()?;
        Ok(tx)
    }

    pub fn validate(&self) -> Result<(), AnalyticError> {
        if !(self.baud_rate_hz.is_finite() && self.baud_rate_hz > 0.0) {
            return Err(AnalyticError::InvalidTx(format!("baud rate {}", self.baud_rate_hz)));
        }
        for s in [self.sigma_a2_x, self.sigma_a2_y] {
            if !(s.is_finite() && s > 0.0) {
                return Err(AnalyticError::InvalidTx(format!("symbol power {s}")));
            }
        }
        Ok(())
    }

    pub fn symbol_period(&self) -> f64 {
        1.0 / self.baud_rate_hz
    }

    pub fn sigma_a2(&self, pol: Pol) -> f64 {
        match pol {
            Pol::X => self.sigma_a2_x,
            Pol::Y => self.sigma_a2_y,
        }
    }

    /// `P_TX(f) = σ² · T · |H_T(f)|²` for one tributary.
    pub fn tx_psd(&self, pol: Pol, f: f64) -> f64 {
        let t = self.symbol_period();
        let a = self.roll_off.amplitude(f, t);
        self.sigma_a2(pol) * t * a * a
    }

    fn check_grid(&self, grid: &FrequencyGrid) -> Result<(), AnalyticError> {
        let rel = (grid.baud_rate() - self.baud_rate_hz).abs() / self.baud_rate_hz;
        if rel > 1e-12 {
            return Err(AnalyticError::GridMismatch(format!(
                "grid baud rate {} Hz, transmitter {} Hz",
                grid.baud_rate(),
                self.baud_rate_hz
            )));
        }
        Ok(())
    }
}

/// Equivalent noise PSD seen by one receiver branch.
#[derive(Debug, Clone, PartialEq)]
pub enum NoisePsd {
    Flat(f64),
    Sampled(ScalarSpectrum<f64>),
}

impl NoisePsd {
    fn at(&self, i: usize) -> f64 {
        match self {
            NoisePsd::Flat(v) => *v,
            NoisePsd::Sampled(s) => s.values()[i],
        }
    }

    fn check_grid(&self, grid: &FrequencyGrid) -> Result<(), AnalyticError> {
        match self {
            NoisePsd::Sampled(s) if s.grid() != grid => Err(AnalyticError::GridMismatch(
                "noise PSD is sampled on a different grid".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        match self {
            NoisePsd::Flat(v) => NoisePsd::Flat(v * c),
            NoisePsd::Sampled(s) => NoisePsd::Sampled(s.map(|v| v * c)),
        }
    }
}

/// Noise PSDs of the x and y receiver branches.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub x: NoisePsd,
    pub y: NoisePsd,
}

impl NoiseModel {
    pub fn flat(n0: f64) -> Self {
        Self::common(NoisePsd::Flat(n0))
    }

    pub fn common(psd: NoisePsd) -> Self {
        Self {
            x: psd.clone(),
            y: psd,
        }
    }

    pub fn branch(&self, pol: Pol) -> &NoisePsd {
        match pol {
            Pol::X => &self.x,
            Pol::Y => &self.y,
        }
    }

    /// Flat PSD giving spectral SNR `snr` at `f = 0` over an ideal channel,
    /// i.e. `N0 = σ² T / snr`.
    pub fn for_input_snr(tx: &TxSpec, snr: f64) -> Self {
        let t = tx.symbol_period();
        Self {
            x: NoisePsd::Flat(tx.sigma_a2_x * t / snr),
            y: NoisePsd::Flat(tx.sigma_a2_y * t / snr),
        }
    }
}

/// Linear per-frequency SNR of one tributary.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrSpectrum(ScalarSpectrum<f64>);

impl SnrSpectrum {
    pub fn new(s: ScalarSpectrum<f64>) -> Option<Self> {
        s.is_nonnegative().then_some(Self(s))
    }

    pub fn spectrum(&self) -> &ScalarSpectrum<f64> {
        &self.0
    }

    pub fn values(&self) -> &[f64] {
        self.0.values()
    }

    pub fn grid(&self) -> &FrequencyGrid {
        self.0.grid()
    }
}

/// Linear SNRs of the two tributaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrPair {
    pub snr_x: f64,
    pub snr_y: f64,
}

impl SnrPair {
    pub fn x_db(&self) -> f64 {
        to_db(self.snr_x)
    }

    pub fn y_db(&self) -> f64 {
        to_db(self.snr_y)
    }

    pub fn get(&self, pol: Pol) -> f64 {
        match pol {
            Pol::X => self.snr_x,
            Pol::Y => self.snr_y,
        }
    }
}

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn noise_at(noise: &NoisePsd, grid: &FrequencyGrid, i: usize, in_band: bool) -> Result<f64, AnalyticError> {
    let n0 = noise.at(i);
    if in_band && !(n0.is_finite() && n0 > 0.0) {
        return Err(AnalyticError::InvalidNoise {
            frequency_hz: grid.frequency(i),
            value: n0,
        });
    }
    Ok(n0)
}

/// Single-polarization spectral SNR `T σ² |H_T H_C|² / N0` of tributary `pol`.
pub fn spectral_snr_single_pol(
    tx: &TxSpec,
    pol: Pol,
    h_c: &ScalarSpectrum<Complex64>,
    noise: &NoisePsd,
) -> Result<SnrSpectrum, AnalyticError> {
    let grid = *h_c.grid();
    tx.check_grid(&grid)?;
    noise.check_grid(&grid)?;
    let values = grid
        .frequencies()
        .zip(h_c.values())
        .enumerate()
        .map(|(i, (f, h))| {
            let p = tx.tx_psd(pol, f);
            if p == 0.0 {
                return Ok(0.0);
            }
            Ok(p * h.norm_sqr() / noise_at(noise, &grid, i, true)?)
        })
        .collect::<Result<Vec<_>, AnalyticError>>()?;
    Ok(SnrSpectrum(ScalarSpectrum::new(grid, values).expect("grid length")))
}

/// Dual-polarization spectral SNRs after channel inversion; `k` is `H⁻¹`.
pub fn spectral_snr_dual_pol(
    tx: &TxSpec,
    k: &ChannelSpectrum,
    noise: &NoiseModel,
) -> Result<(SnrSpectrum, SnrSpectrum), AnalyticError> {
    let grid = *k.grid();
    tx.check_grid(&grid)?;
    noise.x.check_grid(&grid)?;
    noise.y.check_grid(&grid)?;
    let mut sx = Vec::with_capacity(grid.n_points());
    let mut sy = Vec::with_capacity(grid.n_points());
    for (i, (f, m)) in k.iter().enumerate() {
        let [rx, ry] = m.row_norms_sqr();
        for (pol, row, out) in [(Pol::X, rx, &mut sx), (Pol::Y, ry, &mut sy)] {
            let p = tx.tx_psd(pol, f);
            let v = if p == 0.0 {
                0.0
            } else {
                p / (row * noise_at(noise.branch(pol), &grid, i, true)?)
            };
            if !v.is_finite() {
                return Err(AnalyticError::NonFiniteResult { frequency_hz: f });
            }
            out.push(v);
        }
    }
    let wrap = |v| SnrSpectrum(ScalarSpectrum::new(grid, v).expect("grid length"));
    Ok((wrap(sx), wrap(sy)))
}

/// Output SNR of an infinitely long MMSE equalizer fed by spectral SNR `s`.
///
/// Returns the biased figure `1 / (T ∫ df / (S̄ + 1))`, or with `unbias`
/// that value minus one, floored at [`UNBIASED_SNR_FLOOR`]. The integral is
/// the rectangle rule over the folded spectrum's period.
pub fn equalizer_output_snr(s: &SnrSpectrum, unbias: bool) -> f64 {
    let folded = fold_spectrum(&s.0);
    let biased = 1.0 / folded.period_mean(|v| 1.0 / (v + 1.0));
    if unbias {
        unbiased(biased)
    } else {
        biased
    }
}

pub fn unbiased(biased: f64) -> f64 {
    (biased - 1.0).max(UNBIASED_SNR_FLOOR)
}

/// Full analytic path: invert `h`, evaluate both tributaries' spectral SNR,
/// and return their equalizer output SNRs.
pub fn predict_snr(
    tx: &TxSpec,
    h: &ChannelSpectrum,
    noise: &NoiseModel,
    cond_limit: f64,
    unbias: bool,
) -> Result<SnrPair, AnalyticError> {
    let inv = invert_channel(h, cond_limit, &tx.roll_off)?;
    let (sx, sy) = spectral_snr_dual_pol(tx, &inv.k, noise)?;
    Ok(SnrPair {
        snr_x: equalizer_output_snr(&sx, unbias),
        snr_y: equalizer_output_snr(&sy, unbias),
    })
}
