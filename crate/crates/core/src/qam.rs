//! Square QAM orders and the Gray-coded BER approximation.

use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QamError {
    #[error("unsupported QAM order {0}, expected 4, 16 or 64")]
    UnsupportedOrder(u32),
    #[error("SNR must be positive and finite, got {0}")]
    InvalidSnr(f64),
    #[error("BER {ber} outside the invertible range (0, {max})")]
    InvalidBer { ber: f64, max: f64 },
}

/// Square QAM constellation size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct QamOrder(u32);

impl QamOrder {
    pub fn new(m: u32) -> Result<Self, QamError> {
        match m {
            4 | 16 | 64 => Ok(Self(m)),
            _ => Err(QamError::UnsupportedOrder(m)),
        }
    }

    pub fn order(&self) -> u32 {
        self.0
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.0.trailing_zeros()
    }

    /// Levels per I/Q axis.
    pub fn side(&self) -> u32 {
        1 << (self.bits_per_symbol() / 2)
    }

    /// `(4 / log2 M)(1 - 1/√M)`, the BER prefactor.
    fn prefactor(&self) -> f64 {
        4.0 / self.bits_per_symbol() as f64 * (1.0 - 1.0 / self.side() as f64)
    }

    /// Scale from SNR to the squared Q-function argument: `3 / (M - 1)`.
    fn snr_to_q_arg2(&self) -> f64 {
        3.0 / (self.0 as f64 - 1.0)
    }
}

impl TryFrom<u32> for QamOrder {
    type Error = QamError;

    fn try_from(m: u32) -> Result<Self, Self::Error> {
        Self::new(m)
    }
}

impl From<QamOrder> for u32 {
    fn from(m: QamOrder) -> u32 {
        m.0
    }
}

/// Gaussian tail `Q(x) = P(N(0,1) > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Inverse of [`q_function`] for `q ∈ (0, 0.5]`.
///
/// Seeded by the rational `erfc⁻¹` approximation and polished with Newton
/// steps on `ln Q`, which keeps full relative precision deep in the tail.
pub fn q_inverse(q: f64) -> f64 {
    let mut x = std::f64::consts::SQRT_2 * erfc_inv(2.0 * q);
    let target = q.ln();
    for _ in 0..4 {
        let qx = q_function(x);
        if qx <= 0.0 {
            break;
        }
        let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        if pdf == 0.0 {
            break;
        }
        // d ln Q / dx = -φ(x) / Q(x)
        let step = (qx.ln() - target) * qx / pdf;
        x += step;
        if step.abs() <= 1e-16 * x.abs() {
            break;
        }
    }
    x
}

/// `BER ≈ (4/log2 M)(1 - 1/√M) · Q(√(3·SNR/(M-1)))` for Gray-coded square QAM.
pub fn ber_from_snr_qam(snr: f64, m: QamOrder) -> Result<f64, QamError> {
    if !(snr.is_finite() && snr > 0.0) {
        return Err(QamError::InvalidSnr(snr));
    }
    Ok(m.prefactor() * q_function((m.snr_to_q_arg2() * snr).sqrt()))
}

/// Inverse of [`ber_from_snr_qam`].
pub fn snr_from_ber_qam(ber: f64, m: QamOrder) -> Result<f64, QamError> {
    let max = 0.5 * m.prefactor();
    if !(ber > 0.0 && ber < max) {
        return Err(QamError::InvalidBer { ber, max });
    }
    let x = q_inverse(ber / m.prefactor());
    Ok(x * x / m.snr_to_q_arg2())
}
