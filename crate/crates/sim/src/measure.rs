//! EVM SNR and bit error counting against the transmitted reference.

use num_complex::Complex64;
use polsnr_core::{Pol, SnrPair, TxSpec};
use serde::{Deserialize, Serialize};

use crate::equalizer::{Equalized, MseSummary};
use crate::modulation::Constellation;
use crate::waveform::TxReference;
use crate::SimError;

/// Reported SNRs are capped here (60 dB).
pub const SNR_CAP: f64 = 1e6;
/// Candidate symbol lags searched during alignment.
pub const MAX_LAG: isize = 8;
/// Normalized correlation required to accept an alignment.
pub const MIN_CORRELATION: f64 = 0.5;
/// Symbols used for the alignment search.
const ALIGN_SYMBOLS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BerCount {
    pub errors: u64,
    pub bits: u64,
}

impl BerCount {
    pub fn ratio(&self) -> f64 {
        self.errors as f64 / self.bits as f64
    }

    /// The ratio, or `1/bits` when no error was counted.
    pub fn ratio_or_bound(&self) -> f64 {
        if self.errors == 0 {
            1.0 / self.bits as f64
        } else {
            self.ratio()
        }
    }

    /// Binomial standard deviation of the ratio at true error rate `p`.
    pub fn sigma(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.bits as f64).sqrt()
    }
}

/// How an output stream was matched to a transmitted tributary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub source: Pol,
    pub lag: isize,
    pub conjugated: bool,
    pub correlation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    /// Per transmitted tributary.
    pub snr_evm: SnrPair,
    pub ber: [BerCount; 2],
    pub converged: bool,
    pub residual_mse: MseSummary,
    pub alignment: [Alignment; 2],
}

fn pol(i: usize) -> Pol {
    if i == 0 {
        Pol::X
    } else {
        Pol::Y
    }
}

fn at(v: &[Complex64], k: usize, lag: isize) -> Complex64 {
    let n = v.len() as isize;
    v[(k as isize + lag).rem_euclid(n) as usize]
}

/// Best (source, lag, conjugation) for stream `z` over `[from, to)`.
fn align(z: &[Complex64], reference: &TxReference, from: usize, to: usize) -> Alignment {
    let ez: f64 = z[from..to].iter().map(|v| v.norm_sqr()).sum();
    let mut best = Alignment {
        source: Pol::X,
        lag: 0,
        conjugated: false,
        correlation: 0.0,
    };
    for (s, a) in reference.symbols.iter().enumerate() {
        let ea: f64 = a[from..to].iter().map(|v| v.norm_sqr()).sum();
        let norm = (ez * ea).sqrt();
        for lag in -MAX_LAG..=MAX_LAG {
            for conjugated in [false, true] {
                let c: Complex64 = (from..to)
                    .map(|k| {
                        let zk = if conjugated { z[k].conj() } else { z[k] };
                        zk * at(a, k, lag).conj()
                    })
                    .sum();
                let rho = if norm > 0.0 { c.norm() / norm } else { 0.0 };
                if rho > best.correlation {
                    best = Alignment {
                        source: pol(s),
                        lag,
                        conjugated,
                        correlation: rho,
                    };
                }
            }
        }
    }
    best
}

/// Aligns each output to a reference tributary, removes its complex gain by
/// least squares and reports `Σ|a|² / Σ|z/g - a|²` and Gray bit errors over
/// the measurement window.
pub fn measure(eq: &Equalized, reference: &TxReference, tx: &TxSpec) -> Result<SimResult, SimError> {
    let n = eq.y[0].len();
    let from = eq.measure_from;
    if from >= n {
        return Err(SimError::Config(format!("measurement window starts at {from}, frame has {n} symbols")));
    }
    let probe_end = (from + ALIGN_SYMBOLS).min(n);

    let mut alignment = [Alignment {
        source: Pol::X,
        lag: 0,
        conjugated: false,
        correlation: 0.0,
    }; 2];
    for (p, z) in eq.y.iter().enumerate() {
        let a = align(z, reference, from, probe_end);
        if a.correlation < MIN_CORRELATION {
            return Err(SimError::AlignmentFailed {
                output: pol(p),
                correlation: a.correlation,
            });
        }
        alignment[p] = a;
    }
    if alignment[0].source == alignment[1].source {
        return Err(SimError::AlignmentFailed {
            output: Pol::Y,
            correlation: alignment[1].correlation,
        });
    }

    let mut snr = [0.0; 2];
    let mut ber = [BerCount { errors: 0, bits: 0 }; 2];
    for (p, z) in eq.y.iter().enumerate() {
        let al = alignment[p];
        let s = if al.source == Pol::X { 0 } else { 1 };
        let cons = Constellation::new(tx.m_qam, tx.sigma_a2(al.source));
        let zk = |k: usize| if al.conjugated { z[k].conj() } else { z[k] };
        let sym = &reference.symbols[s];
        let lab = &reference.labels[s];

        let (mut cross, mut ea) = (Complex64::new(0.0, 0.0), 0.0);
        for k in from..n {
            let a = at(sym, k, al.lag);
            cross += zk(k) * a.conj();
            ea += a.norm_sqr();
        }
        let g = cross / ea;
        let mut ee = 0.0;
        let mut errors = 0u64;
        for k in from..n {
            let a = at(sym, k, al.lag);
            let u = zk(k) / g;
            ee += (u - a).norm_sqr();
            let l = lab[(k as isize + al.lag).rem_euclid(n as isize) as usize];
            errors += (cons.slice(u) ^ l).count_ones() as u64;
        }
        snr[s] = if ee > 0.0 { (ea / ee).min(SNR_CAP) } else { SNR_CAP };
        ber[s] = BerCount {
            errors,
            bits: (n - from) as u64 * tx.m_qam.bits_per_symbol() as u64,
        };
    }
    Ok(SimResult {
        snr_evm: SnrPair {
            snr_x: snr[0],
            snr_y: snr[1],
        },
        ber,
        converged: eq.converged,
        residual_mse: eq.mse.clone(),
        alignment,
    })
}
