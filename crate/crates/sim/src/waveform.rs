//! Transmit synthesis, channel/noise application and the receiver front end.
//!
//! Frames are circular: pulse shaping, channel and matched filtering are all
//! exact products on the frame's FFT grid, so the waveform has no edges.

use num_complex::Complex64;
use polsnr_core::{ChannelSpectrum, FrequencyGrid, Jones, NoiseModel, NoisePsd, Pol, ScalarSpectrum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;

use crate::modulation::Constellation;
use crate::{SimConfig, SimError};

/// Sub-stream ids under one run seed.
const STREAM_BITS: [u64; 2] = [0, 1];
const STREAM_NOISE: [u64; 2] = [2, 3];

/// Two-polarization complex baseband samples on a frame grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformPair {
    pub grid: FrequencyGrid,
    pub x: Vec<Complex64>,
    pub y: Vec<Complex64>,
}

impl WaveformPair {
    pub fn sample_rate(&self) -> f64 {
        self.grid.sample_rate()
    }

    pub fn pols(&self) -> [&Vec<Complex64>; 2] {
        [&self.x, &self.y]
    }

    pub fn mean_power(&self) -> f64 {
        let e: f64 = self.x.iter().chain(&self.y).map(|v| v.norm_sqr()).sum();
        e / (self.x.len() + self.y.len()) as f64
    }
}

/// What the transmitter sent: per tributary labels and mapped symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct TxReference {
    pub labels: [Vec<u32>; 2],
    pub symbols: [Vec<Complex64>; 2],
}

pub(crate) fn fft(buf: &mut [Complex64], inverse: bool) {
    let mut planner = FftPlanner::new();
    let plan = if inverse {
        planner.plan_fft_inverse(buf.len())
    } else {
        planner.plan_fft_forward(buf.len())
    };
    plan.process(buf);
    if inverse {
        let s = 1.0 / buf.len() as f64;
        buf.iter_mut().for_each(|v| *v *= s);
    }
}

/// Frequency of FFT bin `k` on `grid`.
fn bin_frequency(grid: &FrequencyGrid, k: usize) -> f64 {
    grid.frequency(grid.fft_index(k))
}

/// Multiplies a time series by a real frequency response.
fn filter_real(grid: &FrequencyGrid, v: &mut [Complex64], resp: impl Fn(f64) -> f64) {
    fft(v, false);
    for (k, s) in v.iter_mut().enumerate() {
        *s *= resp(bin_frequency(grid, k));
    }
    fft(v, true);
}

pub fn frame_grid(cfg: &SimConfig) -> Result<FrequencyGrid, SimError> {
    FrequencyGrid::new(
        cfg.tx.baud_rate_hz,
        cfg.samples_per_symbol,
        cfg.n_symbols * cfg.samples_per_symbol,
    )
    .map_err(|e| SimError::Config(e.to_string()))
}

/// Random Gray-mapped QAM per tributary, SRRC shaped with unit peak gain
/// so each tributary's PSD is `σ²·T·|H_T(f)|²`.
pub fn synthesize_tx(cfg: &SimConfig) -> Result<(WaveformPair, TxReference), SimError> {
    cfg.validate()?;
    let grid = frame_grid(cfg)?;
    let sps = cfg.samples_per_symbol;
    let t = cfg.tx.symbol_period();
    let m = cfg.tx.m_qam.order();

    let mut labels: [Vec<u32>; 2] = Default::default();
    let mut symbols: [Vec<Complex64>; 2] = Default::default();
    let mut wave: [Vec<Complex64>; 2] = Default::default();
    for (p, pol) in [Pol::X, Pol::Y].into_iter().enumerate() {
        let cons = Constellation::new(cfg.tx.m_qam, cfg.tx.sigma_a2(pol));
        let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
        rng.set_stream(STREAM_BITS[p]);
        labels[p] = (0..cfg.n_symbols).map(|_| rng.random_range(0..m)).collect();
        symbols[p] = labels[p].iter().map(|&l| cons.map(l)).collect();

        let mut buf = vec![Complex64::new(0.0, 0.0); grid.n_points()];
        for (k, &a) in symbols[p].iter().enumerate() {
            buf[k * sps] = a;
        }
        filter_real(&grid, &mut buf, |f| sps as f64 * cfg.tx.roll_off.amplitude(f, t));
        wave[p] = buf;
    }
    let [x, y] = wave;
    Ok((WaveformPair { grid, x, y }, TxReference { labels, symbols }))
}

/// Noise PSD of one branch, linearly interpolated (periodically) onto
/// `grid`.
fn noise_on_grid(psd: &NoisePsd, grid: &FrequencyGrid) -> Result<Option<Vec<f64>>, SimError> {
    let s: &ScalarSpectrum<f64> = match psd {
        NoisePsd::Flat(_) => return Ok(None),
        NoisePsd::Sampled(s) => s,
    };
    let src = s.grid();
    check_rate(src, grid, "noise PSD")?;
    let n = src.n_points();
    let df = src.df();
    let f0 = src.frequency(0);
    let v = s.values();
    Ok(Some(
        grid.frequencies()
            .map(|f| {
                let pos = (f - f0) / df;
                let lo = pos.floor();
                let w = pos - lo;
                let i0 = (lo as isize).rem_euclid(n as isize) as usize;
                v[i0] * (1.0 - w) + v[(i0 + 1) % n] * w
            })
            .collect(),
    ))
}

fn check_rate(src: &FrequencyGrid, dst: &FrequencyGrid, what: &str) -> Result<(), SimError> {
    let rel = (src.sample_rate() - dst.sample_rate()).abs() / dst.sample_rate();
    let baud = (src.baud_rate() - dst.baud_rate()).abs() / dst.baud_rate();
    if rel > 1e-9 || baud > 1e-9 {
        return Err(SimError::GridMismatch(format!(
            "{what} sampled at {} Hz / {} Bd, waveform at {} Hz / {} Bd",
            src.sample_rate(),
            src.baud_rate(),
            dst.sample_rate(),
            dst.baud_rate()
        )));
    }
    Ok(())
}

/// Applies `H(f)` by frequency-domain multiplication over the whole frame,
/// then adds circular complex Gaussian noise with PSD `N₀(f)` per branch
/// (flat: variance `N₀·fs` per complex sample).
pub fn propagate(
    tx: &WaveformPair,
    h: &ChannelSpectrum,
    noise: &NoiseModel,
    seed: u64,
) -> Result<WaveformPair, SimError> {
    let grid = tx.grid;
    check_rate(h.grid(), &grid, "channel")?;
    let h = h.resample_periodic(&grid);
    let n = grid.n_points();
    let fs = grid.sample_rate();

    let mut fx = tx.x.clone();
    let mut fy = tx.y.clone();
    fft(&mut fx, false);
    fft(&mut fy, false);
    let m = h.matrices();
    for k in 0..n {
        let j: &Jones = &m[grid.fft_index(k)];
        let [a, b] = j.apply([fx[k], fy[k]]);
        fx[k] = a;
        fy[k] = b;
    }
    fft(&mut fx, true);
    fft(&mut fy, true);

    for (p, (out, pol)) in [(&mut fx, Pol::X), (&mut fy, Pol::Y)].into_iter().enumerate() {
        let psd = noise.branch(pol);
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(STREAM_NOISE[p]);
        let mut w: Vec<Complex64> = (0..n)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
            })
            .collect();
        match (psd, noise_on_grid(psd, &grid)?) {
            (NoisePsd::Flat(n0), _) => {
                let s = (n0 * fs).sqrt();
                w.iter_mut().for_each(|v| *v *= s);
            }
            (_, Some(shape)) => {
                fft(&mut w, false);
                for (k, v) in w.iter_mut().enumerate() {
                    *v *= (shape[grid.fft_index(k)] * fs).sqrt();
                }
                fft(&mut w, true);
            }
            (_, None) => unreachable!("sampled PSD always yields a shape"),
        }
        for (o, v) in out.iter_mut().zip(&w) {
            *o += v;
        }
    }
    Ok(WaveformPair { grid, x: fx, y: fy })
}

/// SRRC matched filter (unit peak), decimation to `taps_per_symbol`
/// samples per symbol and a common gain normalizing the mean sample power
/// over both polarizations to one.
pub fn receive_front_end(rx: &WaveformPair, cfg: &SimConfig) -> [Vec<Complex64>; 2] {
    let grid = rx.grid;
    let t = cfg.tx.symbol_period();
    let step = cfg.samples_per_symbol / cfg.equalizer.taps_per_symbol;
    let mut out: [Vec<Complex64>; 2] = Default::default();
    for (p, v) in rx.pols().into_iter().enumerate() {
        let mut buf = v.clone();
        filter_real(&grid, &mut buf, |f| cfg.tx.roll_off.amplitude(f, t));
        out[p] = buf.into_iter().step_by(step).collect();
    }
    let e: f64 = out.iter().flatten().map(|v| v.norm_sqr()).sum();
    let count = out[0].len() + out[1].len();
    let g = if e > 0.0 { (count as f64 / e).sqrt() } else { 1.0 };
    out.iter_mut().flatten().for_each(|v| *v *= g);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::EqualizerConfig;
    use polsnr_core::{QamOrder, TxSpec};

    fn cfg(m: u32, n_symbols: usize, seed: u64) -> SimConfig {
        SimConfig {
            tx: TxSpec::new(25e9, QamOrder::new(m).unwrap(), 0.2).unwrap(),
            n_symbols,
            samples_per_symbol: 2,
            equalizer: EqualizerConfig {
                n_training_symbols: n_symbols / 4,
                n_guard_symbols: n_symbols / 8,
                ..Default::default()
            },
            seed,
        }
    }

    #[test]
    fn qpsk_frame_is_deterministic_unit_power_points() {
        let mut c = cfg(4, 4, 11);
        c.equalizer = EqualizerConfig {
            n_taps: 1,
            n_training_symbols: 1,
            n_guard_symbols: 1,
            ..Default::default()
        };
        let (_, r1) = synthesize_tx(&c).unwrap();
        let (_, r2) = synthesize_tx(&c).unwrap();
        assert_eq!(r1, r2);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for a in r1.symbols.iter().flatten().take(4) {
            assert!((a.re.abs() - s).abs() < 1e-15 && (a.im.abs() - s).abs() < 1e-15);
        }
    }

    #[test]
    fn shaping_filter_matches_rrc_and_power_is_sigma2() {
        let c = cfg(16, 1 << 14, 3);
        let (w, r) = synthesize_tx(&c).unwrap();
        let sym_power: f64 = r.symbols[0].iter().map(|a| a.norm_sqr()).sum::<f64>() / r.symbols[0].len() as f64;
        assert!((sym_power - 1.0).abs() < 0.01, "{sym_power}");
        // sample power = symbol power · ∫|H_T|² df / (1/T) = symbol power
        let px: f64 = w.x.iter().map(|v| v.norm_sqr()).sum::<f64>() / w.x.len() as f64;
        assert!((px / sym_power - 1.0).abs() < 1e-2, "{px}");

        // Impulse response of the shaping filter reproduces the rrc grid.
        let g = w.grid;
        let mut imp = vec![Complex64::new(0.0, 0.0); g.n_points()];
        imp[0] = Complex64::new(1.0, 0.0);
        let t = c.tx.symbol_period();
        filter_real(&g, &mut imp, |f| c.tx.roll_off.amplitude(f, t));
        fft(&mut imp, false);
        for k in 0..g.n_points() {
            let f = bin_frequency(&g, k);
            assert!((imp[k].re - c.tx.roll_off.amplitude(f, t)).abs() < 1e-6);
        }
    }

    /// Full-frame periodogram averaged over 2.5 GHz bands, against the
    /// model PSD averaged over the same bins.
    #[test]
    fn psd_matches_tx_model_in_band() {
        let c = cfg(16, 1 << 16, 5);
        let (w, _) = synthesize_tx(&c).unwrap();
        let g = w.grid;
        let norm = g.n_points() as f64 * g.sample_rate();
        let mut per: Vec<(f64, f64)> = vec![(0.0, 0.0); g.n_points()];
        for pol in w.pols() {
            let mut b = pol.clone();
            fft(&mut b, false);
            for (k, v) in b.iter().enumerate() {
                per[k].0 = bin_frequency(&g, k);
                per[k].1 += v.norm_sqr() / norm / 2.0;
            }
        }
        let width = 2.5e9;
        for band in -5..5 {
            let (lo, hi) = (band as f64 * width, (band + 1) as f64 * width);
            let (mut m, mut model, mut n) = (0.0, 0.0, 0);
            for &(f, p) in per.iter().filter(|(f, _)| *f >= lo && *f < hi) {
                m += p;
                model += c.tx.tx_psd(Pol::X, f);
                n += 1;
            }
            assert!(n > 1000);
            let db = 10.0 * (m / model).log10();
            assert!(db.abs() < 0.2, "band [{lo:e}, {hi:e}): {db} dB");
        }
    }

    #[test]
    fn seeds_give_decorrelated_streams() {
        let n = 1 << 14;
        let (_, a) = synthesize_tx(&cfg(16, n, 1)).unwrap();
        let (_, b) = synthesize_tx(&cfg(16, n, 2)).unwrap();
        let bound = 5.0 / (n as f64).sqrt();
        for (u, v) in [(&a.symbols[0], &b.symbols[0]), (&a.symbols[0], &a.symbols[1])] {
            for lag in 0..16 {
                let c: Complex64 = (0..n).map(|k| u[k] * v[(k + lag) % n].conj()).sum();
                assert!(c.norm() / (n as f64) < bound, "lag {lag}: {}", c.norm() / n as f64);
            }
        }
    }

    #[test]
    fn identity_and_unitary_propagation_without_noise() {
        let c = cfg(16, 1024, 9);
        let (w, _) = synthesize_tx(&c).unwrap();
        let zero = NoiseModel::flat(0.0);
        let out = propagate(&w, &ChannelSpectrum::identity(w.grid), &zero, 1).unwrap();
        for (a, b) in w.x.iter().chain(&w.y).zip(out.x.iter().chain(&out.y)) {
            assert!((a - b).norm() < 1e-12);
        }
        let u = Jones::rotation(0.7) * Jones::diag(Complex64::from_polar(1.0, 0.3), Complex64::from_polar(1.0, -1.1));
        let out = propagate(&w, &ChannelSpectrum::flat(w.grid, u), &zero, 1).unwrap();
        assert!((out.mean_power() / w.mean_power() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flat_noise_variance_and_grid_check() {
        let c = cfg(16, 1 << 14, 9);
        let (w, _) = synthesize_tx(&c).unwrap();
        let silent = WaveformPair {
            x: vec![Complex64::new(0.0, 0.0); w.x.len()],
            y: vec![Complex64::new(0.0, 0.0); w.y.len()],
            ..w.clone()
        };
        let n0 = 2e-12;
        let out = propagate(&silent, &ChannelSpectrum::identity(w.grid), &NoiseModel::flat(n0), 4).unwrap();
        let expected = n0 * w.grid.sample_rate();
        assert!((out.mean_power() / expected - 1.0).abs() < 0.03);

        let other = FrequencyGrid::new(20e9, 2, 256).unwrap();
        assert!(matches!(
            propagate(&w, &ChannelSpectrum::identity(other), &NoiseModel::flat(n0), 4),
            Err(SimError::GridMismatch(_))
        ));
    }

    #[test]
    fn sampled_noise_shape_is_followed() {
        let c = cfg(16, 1 << 14, 9);
        let (w, _) = synthesize_tx(&c).unwrap();
        let silent = WaveformPair {
            x: vec![Complex64::new(0.0, 0.0); w.x.len()],
            y: vec![Complex64::new(0.0, 0.0); w.y.len()],
            ..w.clone()
        };
        let coarse = FrequencyGrid::new(25e9, 2, 64).unwrap();
        // N₀ twice as large on positive frequencies
        let shape = ScalarSpectrum::from_fn(coarse, |f| if f > 0.0 { 2e-12 } else { 1e-12 });
        let out = propagate(
            &silent,
            &ChannelSpectrum::identity(w.grid),
            &NoiseModel::common(NoisePsd::Sampled(shape)),
            4,
        )
        .unwrap();
        let mut s = out.x.clone();
        fft(&mut s, false);
        let (mut pos, mut neg) = (0.0, 0.0);
        for (k, v) in s.iter().enumerate() {
            let f = bin_frequency(&w.grid, k);
            if f > 1e9 && f < 10e9 {
                pos += v.norm_sqr();
            } else if f < -1e9 && f > -10e9 {
                neg += v.norm_sqr();
            }
        }
        assert!((pos / neg - 2.0).abs() < 0.1, "{}", pos / neg);
    }
}
