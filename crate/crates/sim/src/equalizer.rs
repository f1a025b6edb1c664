//! Adaptive 2x2 butterfly FFE: trained, then decision directed.

use num_complex::Complex64;
use polsnr_core::Pol;
use serde::{Deserialize, Serialize};

use crate::modulation::Constellation;
use crate::waveform::{receive_front_end, TxReference, WaveformPair};
use crate::{SimConfig, SimError};

/// Symbols per residual-MSE block.
pub const MSE_BLOCK: usize = 1024;
/// Largest relative MSE drift across the last quarter still counted as
/// converged.
const MAX_DRIFT: f64 = 0.25;
/// Normalized MSE above which decisions are meaningless.
const MAX_MSE: f64 = 0.5;

/// Tap adaptation rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Adaptation {
    /// Stochastic gradient, `w += μ·e·conj(u)`.
    Lms,
    /// Recursive least squares; converges independently of the input
    /// eigenvalue spread, so the taps reach the Wiener solution within one
    /// frame even across deep spectral fades.
    #[default]
    Rls,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EqualizerConfig {
    /// Taps per filter, odd.
    pub n_taps: usize,
    /// Input samples per symbol seen by the filters, 1 or 2.
    pub taps_per_symbol: usize,
    pub adaptation: Adaptation,
    /// LMS step sizes.
    pub mu_training: f64,
    pub mu_tracking: f64,
    pub n_training_symbols: usize,
    /// Symbols after training excluded from measurement.
    pub n_guard_symbols: usize,
}

impl Default for EqualizerConfig {
    fn default() -> Self {
        Self {
            n_taps: 33,
            taps_per_symbol: 2,
            adaptation: Adaptation::Rls,
            mu_training: 1e-3,
            mu_tracking: 1e-4,
            n_training_symbols: 4096,
            n_guard_symbols: 2048,
        }
    }
}

impl EqualizerConfig {
    pub fn measure_from(&self) -> usize {
        self.n_training_symbols + self.n_guard_symbols
    }

    /// Filter span in symbols.
    pub fn span_symbols(&self) -> usize {
        self.n_taps.div_ceil(self.taps_per_symbol)
    }
}

/// Residual MSE per block of [`MSE_BLOCK`] symbols, normalized by symbol
/// power and averaged over both tributaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseSummary {
    pub blocks: Vec<f64>,
    pub last_quarter_mean: f64,
    /// Fitted change across the last quarter relative to its mean.
    pub last_quarter_drift: f64,
}

impl MseSummary {
    fn new(blocks: Vec<f64>) -> Self {
        let q = (blocks.len() / 4).max(2).min(blocks.len());
        let tail = &blocks[blocks.len() - q..];
        let n = tail.len() as f64;
        let mean = tail.iter().sum::<f64>() / n;
        let xm = (n - 1.0) / 2.0;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for (i, v) in tail.iter().enumerate() {
            let dx = i as f64 - xm;
            sxy += dx * (v - mean);
            sxx += dx * dx;
        }
        let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        let drift = if mean > 0.0 { slope * (n - 1.0) / mean } else { 0.0 };
        Self {
            blocks,
            last_quarter_mean: mean,
            last_quarter_drift: drift,
        }
    }

    pub fn converged(&self) -> bool {
        self.last_quarter_mean.is_finite()
            && self.last_quarter_mean < MAX_MSE
            && self.last_quarter_drift.abs() <= MAX_DRIFT
    }
}

/// Equalizer output at one sample per symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct Equalized {
    pub y: [Vec<Complex64>; 2],
    /// `taps[out][in]`.
    pub taps: [[Vec<Complex64>; 2]; 2],
    /// First symbol index belonging to the measurement window.
    pub measure_from: usize,
    pub mse: MseSummary,
    pub converged: bool,
}

/// Growing-window RLS state for `y = wᵀu`, shared by both outputs since
/// they see the same regressor.
///
/// No forgetting: the matched filter leaves part of the regressor space
/// unexcited, where any `λ < 1` would let `P` grow without bound, and the
/// channel is static anyway.
struct Rls {
    /// Inverse autocorrelation of `conj(u)`.
    p: Vec<Complex64>,
    pi: Vec<Complex64>,
    gain: Vec<Complex64>,
    dim: usize,
}

impl Rls {
    /// Initial `P = I/δ` with `δ` small against the unit input power.
    const DELTA: f64 = 1e-2;

    fn new(dim: usize) -> Self {
        let mut p = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            p[i * dim + i] = Complex64::new(1.0 / Self::DELTA, 0.0);
        }
        Self {
            p,
            pi: vec![Complex64::new(0.0, 0.0); dim],
            gain: vec![Complex64::new(0.0, 0.0); dim],
            dim,
        }
    }

    /// Gain vector for regressor `u`, then the `P` update.
    fn update(&mut self, u: &[Complex64]) -> &[Complex64] {
        let n = self.dim;
        for i in 0..n {
            let row = &self.p[i * n..(i + 1) * n];
            self.pi[i] = row.iter().zip(u).map(|(a, b)| a * b.conj()).sum();
        }
        let denom = 1.0 + u.iter().zip(&self.pi).map(|(a, b)| a * b).sum::<Complex64>().re;
        for i in 0..n {
            self.gain[i] = self.pi[i] / denom;
        }
        // P ← P − π πᴴ / denom; the outer product keeps P Hermitian.
        for i in 0..n {
            let gi = self.gain[i];
            let row = &mut self.p[i * n..(i + 1) * n];
            for (pij, pj) in row.iter_mut().zip(&self.pi) {
                *pij -= gi * pj.conj();
            }
        }
        &self.gain
    }
}

/// Runs the butterfly over the received frame.
///
/// Output `p` at symbol `k` is `Σ_q Σ_j w[p][q][j] · r_q[k·s + j - c]`
/// with `c` the center tap and indices taken circularly. The first
/// `n_training_symbols` adapt on the known symbols, the rest on slicer
/// decisions.
pub fn mmse_butterfly_equalize(
    rx: &WaveformPair,
    cfg: &SimConfig,
    reference: &TxReference,
) -> Result<Equalized, SimError> {
    cfg.validate()?;
    let eq = cfg.equalizer;
    let r = receive_front_end(rx, cfg);
    let n_sym = r[0].len() / eq.taps_per_symbol;
    if reference.symbols[0].len() != n_sym || reference.symbols[1].len() != n_sym {
        return Err(SimError::Config(format!(
            "reference has {} symbols, frame carries {n_sym}",
            reference.symbols[0].len()
        )));
    }
    let len = r[0].len();
    let nt = eq.n_taps;
    let c = nt / 2;
    let cons = [
        Constellation::new(cfg.tx.m_qam, cfg.tx.sigma_a2(Pol::X)),
        Constellation::new(cfg.tx.m_qam, cfg.tx.sigma_a2(Pol::Y)),
    ];

    let zero = Complex64::new(0.0, 0.0);
    let dim = 2 * nt;
    // w[p] holds [w_px | w_py]; the regressor u is [r_x window | r_y window].
    // Taps start at zero: components in the subspace the matched filter
    // leaves unexcited are never adapted, so any other start would persist.
    let mut w = [vec![zero; dim], vec![zero; dim]];
    let mut rls = (eq.adaptation == Adaptation::Rls).then(|| Rls::new(dim));

    let mut y = [vec![zero; n_sym], vec![zero; n_sym]];
    let mut u = vec![zero; dim];
    let mut blocks = Vec::with_capacity(n_sym / MSE_BLOCK + 1);
    let mut block_acc = 0.0;
    let mut block_n = 0;

    for k in 0..n_sym {
        let base = (k * eq.taps_per_symbol + len - c) % len;
        for q in 0..2 {
            for j in 0..nt {
                u[q * nt + j] = r[q][(base + j) % len];
            }
        }
        let training = k < eq.n_training_symbols;
        let mut err = [zero; 2];
        for p in 0..2 {
            let out: Complex64 = w[p].iter().zip(&u).map(|(a, b)| a * b).sum();
            y[p][k] = out;
            let d = if training {
                reference.symbols[p][k]
            } else {
                cons[p].decide(out)
            };
            err[p] = d - out;
            block_acc += err[p].norm_sqr() / cfg.tx.sigma_a2(if p == 0 { Pol::X } else { Pol::Y });
        }
        match rls.as_mut() {
            Some(rls) => {
                let gain = rls.update(&u);
                for p in 0..2 {
                    for (t, g) in w[p].iter_mut().zip(gain) {
                        *t += g * err[p];
                    }
                }
            }
            None => {
                let mu = if training { eq.mu_training } else { eq.mu_tracking };
                for p in 0..2 {
                    let g = err[p] * mu;
                    for (t, v) in w[p].iter_mut().zip(&u) {
                        *t += g * v.conj();
                    }
                }
            }
        }
        block_n += 1;
        if block_n == MSE_BLOCK {
            blocks.push(block_acc / (2 * block_n) as f64);
            block_acc = 0.0;
            block_n = 0;
        }
    }
    if block_n > 0 {
        blocks.push(block_acc / (2 * block_n) as f64);
    }
    let mse = MseSummary::new(blocks);
    let converged = mse.converged();
    let split = |v: &Vec<Complex64>| [v[..nt].to_vec(), v[nt..].to_vec()];
    Ok(Equalized {
        y,
        taps: [split(&w[0]), split(&w[1])],
        measure_from: eq.measure_from(),
        mse,
        converged,
    })
}
