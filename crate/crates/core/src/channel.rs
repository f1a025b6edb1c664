//! Frequency-dependent 2x2 channel matrices.
//!
//! A [`ChannelSpectrum`] holds one [`Jones`] matrix per grid frequency. It is
//! produced by [`build_mmf_channel`] (coupled modal propagation through a
//! multimode fiber section), loaded from a channel CSV file, or built
//! directly. [`invert_channel`] turns `H(f)` into the polarization
//! demultiplexer `K(f) = H(f)⁻¹`.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::jones::Jones;
use crate::spectral::{FrequencyGrid, PulseShape};

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("channel is ill-conditioned inside the signal band at {} frequencies (first: {:.6e} Hz)", .frequencies_hz.len(), .frequencies_hz.first().copied().unwrap_or(f64::NAN))]
    IllConditioned { frequencies_hz: Vec<f64> },
    #[error("malformed channel file, line {line}: {reason}")]
    MalformedFile { line: u64, reason: String },
    #[error("channel file spans [{file_lo:.6e}, {file_hi:.6e}] Hz, grid needs [{grid_lo:.6e}, {grid_hi:.6e}] Hz")]
    GridMismatch {
        file_lo: f64,
        file_hi: f64,
        grid_lo: f64,
        grid_hi: f64,
    },
    #[error("invalid modal channel spec: {0}")]
    InvalidSpec(String),
    #[error("condition-number limit must exceed 1, got {0}")]
    InvalidCondLimit(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One 2x2 matrix per frequency of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpectrum {
    grid: FrequencyGrid,
    matrices: Vec<Jones>,
}

impl ChannelSpectrum {
    pub fn new(grid: FrequencyGrid, matrices: Vec<Jones>) -> Option<Self> {
        (matrices.len() == grid.n_points()).then_some(Self { grid, matrices })
    }

    pub fn from_fn(grid: FrequencyGrid, f: impl Fn(f64) -> Jones) -> Self {
        Self {
            grid,
            matrices: grid.frequencies().map(f).collect(),
        }
    }

    pub fn flat(grid: FrequencyGrid, m: Jones) -> Self {
        Self {
            grid,
            matrices: vec![m; grid.n_points()],
        }
    }

    pub fn identity(grid: FrequencyGrid) -> Self {
        Self::flat(grid, Jones::identity())
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn matrices(&self) -> &[Jones] {
        &self.matrices
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &Jones)> {
        self.grid.frequencies().zip(&self.matrices)
    }

    /// Linear interpolation onto another grid with the same sample rate,
    /// treating the spectrum as periodic in `fs` (as any sampled-time
    /// system is). Used to move a channel to a finer FFT frame grid.
    pub fn resample_periodic(&self, target: &FrequencyGrid) -> ChannelSpectrum {
        if target == &self.grid {
            return self.clone();
        }
        let n = self.grid.n_points();
        let df = self.grid.df();
        let f0 = self.grid.frequency(0);
        let matrices = target
            .frequencies()
            .map(|f| {
                let pos = (f - f0) / df;
                let lo = pos.floor();
                let w = pos - lo;
                let i0 = (lo as isize).rem_euclid(n as isize) as usize;
                let i1 = (i0 + 1) % n;
                lerp(&self.matrices[i0], &self.matrices[i1], w)
            })
            .collect();
        ChannelSpectrum {
            grid: *target,
            matrices,
        }
    }
}

fn lerp(a: &Jones, b: &Jones, w: f64) -> Jones {
    if w == 0.0 {
        return *a;
    }
    a.scale((1.0 - w).into()) + b.scale(w.into())
}

/// Where a mode's birefringence matrix comes from.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JonesSource {
    /// Haar draw from the realization's per-mode sub-stream.
    #[default]
    Random,
    /// Haar draw from a fixed seed; identical in every realization.
    Seeded(u64),
    Explicit(Jones),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    #[serde(deserialize_with = "complex_or_real")]
    pub rho_in: Complex64,
    #[serde(deserialize_with = "complex_or_real")]
    pub rho_out: Complex64,
    /// Delay relative to the fundamental mode.
    pub tau_s: f64,
    #[serde(default)]
    pub jones: JonesSource,
}

fn complex_or_real<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Input {
        Real(f64),
        Pair([f64; 2]),
    }
    Ok(match Input::deserialize(d)? {
        Input::Real(re) => Complex64::new(re, 0.0),
        Input::Pair([re, im]) => Complex64::new(re, im),
    })
}

/// Coupling and delay profile of an SMF-MMF-SMF link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalChannelSpec {
    #[serde(default)]
    pub label: String,
    #[serde(default)]
    pub mmf_length_m: f64,
    pub modes: Vec<ModeSpec>,
}

impl ModalChannelSpec {
    pub fn validate(&self) -> Result<(), ChannelError> {
        let first = self
            .modes
            .first()
            .ok_or_else(|| ChannelError::InvalidSpec("at least one mode required".into()))?;
        if first.tau_s != 0.0 {
            return Err(ChannelError::InvalidSpec(format!(
                "delays are relative to mode 0, whose tau_s must be 0 (got {})",
                first.tau_s
            )));
        }
        for (j, m) in self.modes.iter().enumerate() {
            let finite = m.tau_s.is_finite()
                && m.rho_in.re.is_finite()
                && m.rho_in.im.is_finite()
                && m.rho_out.re.is_finite()
                && m.rho_out.im.is_finite();
            if !finite {
                return Err(ChannelError::InvalidSpec(format!("mode {j} has non-finite values")));
            }
        }
        Ok(())
    }

    /// `Σ_j |ρ_in ρ_out|`, an upper bound on the 2-norm of every `H(f)`.
    pub fn coupling_bound(&self) -> f64 {
        self.modes.iter().map(|m| (m.rho_in * m.rho_out).norm()).sum()
    }

    /// Same profile with every delay shifted by `dt`.
    pub fn delayed(&self, dt: f64) -> Self {
        let mut out = self.clone();
        for m in &mut out.modes {
            m.tau_s += dt;
        }
        out
    }

    /// Per-mode Jones matrices of one realization.
    ///
    /// Random modes draw from `ChaCha20(seed)` on stream `j`, so each mode
    /// owns an independent sub-stream: appending modes, or changing another
    /// mode's source, never changes mode `j`'s matrix.
    pub fn jones_matrices(&self, seed: u64) -> Vec<Jones> {
        self.modes
            .iter()
            .enumerate()
            .map(|(j, m)| match m.jones {
                JonesSource::Random => {
                    let mut rng = ChaCha20Rng::seed_from_u64(seed);
                    rng.set_stream(j as u64);
                    Jones::sample_haar(&mut rng)
                }
                JonesSource::Seeded(s) => Jones::sample_haar(&mut ChaCha20Rng::seed_from_u64(s)),
                JonesSource::Explicit(jm) => jm,
            })
            .collect()
    }
}

/// `H(f) = Σ_j ρ_in,j ρ_out,j J_j e^{-i2πfτ_j}` on every grid frequency.
pub fn build_mmf_channel(spec: &ModalChannelSpec, grid: &FrequencyGrid, seed: u64) -> ChannelSpectrum {
    let terms: Vec<(Jones, f64)> = spec
        .jones_matrices(seed)
        .into_iter()
        .zip(&spec.modes)
        .map(|(j, m)| (j.scale(m.rho_in * m.rho_out), m.tau_s))
        .collect();
    ChannelSpectrum::from_fn(*grid, |f| {
        let mut h = Jones::ZERO;
        for (a, tau) in &terms {
            let phase = -2.0 * std::f64::consts::PI * f * tau;
            h += a.scale(Complex64::from_polar(1.0, phase));
        }
        h
    })
}

/// `K(f) = H(f)⁻¹` plus the frequencies that needed regularization.
#[derive(Debug, Clone)]
pub struct InvertedChannel {
    pub k: ChannelSpectrum,
    /// Out-of-band grid indices inverted with the regularized pseudo-inverse.
    pub regularized: Vec<usize>,
}

/// Inverts every matrix of `h`.
///
/// A frequency is ill-conditioned when its condition number exceeds
/// `cond_limit`, or when its smallest singular value falls below
/// `σ_peak / cond_limit` (σ_peak = largest in-band singular value), which
/// also catches scalar fades `c·I` with `c → 0`. Ill-conditioned
/// frequencies inside `|f| ≤ (1+β)/(2T)` are fatal; outside the band they
/// get the Tikhonov pseudo-inverse with `ε = 1e-12·‖H‖₂`.
pub fn invert_channel(
    h: &ChannelSpectrum,
    cond_limit: f64,
    pulse: &PulseShape,
) -> Result<InvertedChannel, ChannelError> {
    if !(cond_limit > 1.0) {
        return Err(ChannelError::InvalidCondLimit(cond_limit));
    }
    let grid = h.grid();
    let edge = pulse.band_edge(grid.symbol_period());
    let svs: Vec<(f64, f64)> = h.matrices.iter().map(Jones::singular_values).collect();
    let in_band = |f: f64| f.abs() <= edge;
    let peak = grid
        .frequencies()
        .zip(&svs)
        .filter(|(f, _)| in_band(*f))
        .map(|(_, sv)| sv.0)
        .fold(0.0, f64::max);
    let floor = peak / cond_limit;

    let mut bad = Vec::new();
    let mut regularized = Vec::new();
    let mut matrices = Vec::with_capacity(h.matrices.len());
    for (i, (m, &(smax, smin))) in h.matrices.iter().zip(&svs).enumerate() {
        let f = grid.frequency(i);
        let ill = smin <= floor || smin * cond_limit < smax;
        let inv = if ill { None } else { m.inverse() };
        match inv {
            Some(k) => matrices.push(k),
            None if in_band(f) => {
                bad.push(f);
                matrices.push(Jones::ZERO);
            }
            None => {
                regularized.push(i);
                matrices.push(m.regularized_inverse(1e-12 * smax));
            }
        }
    }
    if !bad.is_empty() {
        return Err(ChannelError::IllConditioned { frequencies_hz: bad });
    }
    Ok(InvertedChannel {
        k: ChannelSpectrum {
            grid: *grid,
            matrices,
        },
        regularized,
    })
}

pub const CHANNEL_FILE_HEADER: [&str; 9] = [
    "f_hz", "re_hxx", "im_hxx", "re_hxy", "im_hxy", "re_hyx", "im_hyx", "re_hyy", "im_hyy",
];

pub fn save_channel(h: &ChannelSpectrum, path: impl AsRef<Path>) -> Result<(), ChannelError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_channel(h, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_channel(h: &ChannelSpectrum, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "{}", CHANNEL_FILE_HEADER.join(","))?;
    for (f, m) in h.iter() {
        write!(w, "{f:e}")?;
        for z in m.0.iter().flatten() {
            write!(w, ",{:e},{:e}", z.re, z.im)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn load_channel(path: impl AsRef<Path>, grid: &FrequencyGrid) -> Result<ChannelSpectrum, ChannelError> {
    read_channel(File::open(path)?, grid)
}

/// Parses a channel CSV and places it on `grid`, interpolating linearly
/// (real and imaginary parts separately) unless the file already matches
/// the grid within 1e-6 relative.
pub fn read_channel(r: impl Read, grid: &FrequencyGrid) -> Result<ChannelSpectrum, ChannelError> {
    let (freqs, mats) = parse_channel(r)?;
    let tol = 1e-6;
    let close = |a: f64, b: f64| (a - b).abs() <= tol * b.abs().max(grid.df());
    if freqs.len() == grid.n_points() && freqs.iter().zip(grid.frequencies()).all(|(&a, b)| close(a, b)) {
        return Ok(ChannelSpectrum {
            grid: *grid,
            matrices: mats,
        });
    }
    let (lo, hi) = (freqs[0], freqs[freqs.len() - 1]);
    let (glo, ghi) = grid.span();
    if glo < lo && !close(lo, glo) || ghi > hi && !close(hi, ghi) {
        return Err(ChannelError::GridMismatch {
            file_lo: lo,
            file_hi: hi,
            grid_lo: glo,
            grid_hi: ghi,
        });
    }
    let matrices = grid
        .frequencies()
        .map(|f| {
            let f = f.clamp(lo, hi);
            let j = freqs.partition_point(|&x| x <= f).clamp(1, freqs.len() - 1);
            let (f0, f1) = (freqs[j - 1], freqs[j]);
            lerp(&mats[j - 1], &mats[j], (f - f0) / (f1 - f0))
        })
        .collect();
    Ok(ChannelSpectrum {
        grid: *grid,
        matrices,
    })
}

fn parse_channel(r: impl Read) -> Result<(Vec<f64>, Vec<Jones>), ChannelError> {
    let malformed = |line: u64, reason: String| ChannelError::MalformedFile { line, reason };
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(r);
    let header = rdr.headers().map_err(|e| malformed(1, e.to_string()))?.clone();
    if header.len() != 9 || header[0].parse::<f64>().is_ok() {
        return Err(malformed(1, format!("expected a 9-column header row, got {:?}", header)));
    }
    let mut freqs: Vec<f64> = Vec::new();
    let mut mats = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| malformed(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 9 {
            return Err(malformed(line, format!("expected 9 columns, found {}", rec.len())));
        }
        let mut v = [0.0; 9];
        for (slot, field) in v.iter_mut().zip(rec.iter()) {
            *slot = field
                .parse()
                .map_err(|_| malformed(line, format!("not a number: {field:?}")))?;
        }
        if let Some(&prev) = freqs.last() {
            if v[0] <= prev {
                return Err(malformed(line, "frequencies must be strictly increasing".into()));
            }
        }
        freqs.push(v[0]);
        let c = |k: usize| Complex64::new(v[k], v[k + 1]);
        mats.push(Jones::new(c(1), c(3), c(5), c(7)));
    }
    if freqs.len() < 2 {
        return Err(malformed(0, "need at least two frequency rows".into()));
    }
    Ok((freqs, mats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn grid() -> FrequencyGrid {
        FrequencyGrid::new(25e9, 2, 4096).unwrap()
    }

    fn beta02() -> PulseShape {
        PulseShape::srrc(0.2).unwrap()
    }

    fn mode(a: f64, tau: f64, jones: JonesSource) -> ModeSpec {
        ModeSpec {
            rho_in: Complex64::new(a.sqrt(), 0.0),
            rho_out: Complex64::new(a.sqrt(), 0.0),
            tau_s: tau,
            jones,
        }
    }

    fn spec(modes: Vec<ModeSpec>) -> ModalChannelSpec {
        ModalChannelSpec {
            label: "test".into(),
            mmf_length_m: 100.0,
            modes,
        }
    }

    #[test]
    fn single_ideal_mode_is_identity() {
        let s = spec(vec![mode(1.0, 0.0, JonesSource::Explicit(Jones::identity()))]);
        let h = build_mmf_channel(&s, &grid(), 1);
        assert!(h.matrices().iter().all(|m| *m == Jones::identity()));
    }

    fn notch_tau(g: &FrequencyGrid) -> f64 {
        // put 1/(2τ) exactly on bin +800 (≈ 9.77 GHz, inside the signal band)
        1.0 / (2.0 * 800.0 * g.df())
    }

    fn two_path(g: &FrequencyGrid) -> ModalChannelSpec {
        let i = JonesSource::Explicit(Jones::identity());
        spec(vec![mode(0.5, 0.0, i), mode(0.5, notch_tau(g), i)])
    }

    #[test]
    fn two_path_interferometer_closed_form() {
        let g = grid();
        let tau = notch_tau(&g);
        let h = build_mmf_channel(&two_path(&g), &g, 0);
        for (f, m) in h.iter() {
            let expect = 0.5 + 0.5 * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * f * tau);
            assert!((m.xx() - expect).norm() < 1e-12);
            assert!((m.yy() - expect).norm() < 1e-12);
            assert_eq!(m.xy(), Complex64::new(0.0, 0.0));
        }
        let notch = g.index_of_offset(800).unwrap();
        assert!(h.matrices()[notch].max_abs() < 1e-14);
    }

    /// Direct per-frequency evaluation of the modal sum, independent of
    /// `build_mmf_channel`'s term caching.
    fn oracle(spec: &ModalChannelSpec, js: &[Jones], f: f64) -> Jones {
        let mut acc = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (m, j) in spec.modes.iter().zip(js) {
            let arg = 2.0 * std::f64::consts::PI * f * m.tau_s;
            let ph = Complex64::new(arg.cos(), -arg.sin());
            for r in 0..2 {
                for c in 0..2 {
                    acc[r][c] += m.rho_in * j.0[r][c] * ph * m.rho_out;
                }
            }
        }
        Jones(acc)
    }

    #[test]
    fn random_three_mode_matches_direct_sum() {
        let g = grid();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let mut modes = vec![];
        for j in 0..3 {
            modes.push(ModeSpec {
                rho_in: Complex64::new(rng.random_range(0.1..0.8), rng.random_range(-0.3..0.3)),
                rho_out: Complex64::new(rng.random_range(0.1..0.8), rng.random_range(-0.3..0.3)),
                tau_s: if j == 0 { 0.0 } else { rng.random_range(0.0..80e-12) },
                jones: JonesSource::Random,
            });
        }
        let s = spec(modes);
        let h = build_mmf_channel(&s, &g, 42);
        let js = s.jones_matrices(42);
        for (f, m) in h.iter() {
            assert!((*m - oracle(&s, &js, f)).max_abs() < 1e-12);
        }
    }

    #[test]
    fn per_mode_streams_are_independent() {
        let m = |tau| mode(0.3, tau, JonesSource::Random);
        let short = spec(vec![m(0.0), m(10e-12)]);
        let long = spec(vec![m(0.0), m(10e-12), m(20e-12)]);
        let a = short.jones_matrices(11);
        let b = long.jones_matrices(11);
        assert_eq!(a[..], b[..2]);
        assert_ne!(short.jones_matrices(12)[0], a[0]);
        let fixed = spec(vec![mode(1.0, 0.0, JonesSource::Seeded(5))]);
        assert_eq!(fixed.jones_matrices(1), fixed.jones_matrices(2));
    }

    #[test]
    fn build_is_deterministic() {
        let g = grid();
        let s = spec(vec![
            mode(0.5, 0.0, JonesSource::Random),
            mode(0.3, 17e-12, JonesSource::Random),
        ]);
        assert_eq!(build_mmf_channel(&s, &g, 9), build_mmf_channel(&s, &g, 9));
    }

    #[test]
    fn spec_validation() {
        assert!(spec(vec![]).validate().is_err());
        assert!(spec(vec![mode(1.0, 1e-12, JonesSource::Random)]).validate().is_err());
        assert!(spec(vec![mode(1.0, 0.0, JonesSource::Random)]).validate().is_ok());
    }

    #[test]
    fn spec_json_forms() {
        let json = r#"{
            "label": "x", "mmf_length_m": 100,
            "modes": [
                {"rho_in": 0.9, "rho_out": [0.8, 0.1], "tau_s": 0},
                {"rho_in": 0.2, "rho_out": 0.2, "tau_s": 1e-11, "jones": {"seeded": 4}},
                {"rho_in": 0.1, "rho_out": 0.1, "tau_s": 2e-11,
                 "jones": {"explicit": [[[1,0],[0,0]],[[0,0],[1,0]]]}}
            ]}"#;
        let s: ModalChannelSpec = serde_json::from_str(json).unwrap();
        assert_eq!(s.modes[0].rho_out, Complex64::new(0.8, 0.1));
        assert_eq!(s.modes[0].jones, JonesSource::Random);
        assert_eq!(s.modes[1].jones, JonesSource::Seeded(4));
        assert_eq!(s.modes[2].jones, JonesSource::Explicit(Jones::identity()));
    }

    #[test]
    fn invert_identity_and_unitary() {
        let g = grid();
        let k = invert_channel(&ChannelSpectrum::identity(g), 1e8, &beta02()).unwrap();
        assert!(k.k.matrices().iter().all(|m| *m == Jones::identity()));
        assert!(k.regularized.is_empty());

        let u = Jones::sample_haar(&mut ChaCha20Rng::seed_from_u64(1));
        let k = invert_channel(&ChannelSpectrum::flat(g, u), 1e8, &beta02()).unwrap();
        for m in k.k.matrices() {
            assert!((*m - u.adjoint()).max_abs() < 1e-12);
        }
    }

    #[test]
    fn invert_flags_in_band_notch() {
        let g = grid();
        let h = build_mmf_channel(&two_path(&g), &g, 0);
        match invert_channel(&h, 1e8, &beta02()) {
            Err(ChannelError::IllConditioned { frequencies_hz }) => {
                let f0 = 800.0 * g.df();
                assert_eq!(frequencies_hz, vec![-f0, f0]);
                // oracle: both singular values of c·I equal |c|, so only the
                // smallest-singular-value floor can catch the notch
                for &f in &frequencies_hz {
                    let i = g.index_of_offset((f / g.df()).round() as isize).unwrap();
                    let m = h.matrices()[i];
                    assert!(m.xx().norm() < 1e-14 && m.yy().norm() < 1e-14);
                }
            }
            other => panic!("expected IllConditioned, got {other:?}"),
        }
    }

    #[test]
    fn out_of_band_singularity_is_regularized() {
        let g = grid();
        let edge = beta02().band_edge(g.symbol_period());
        let h = ChannelSpectrum::from_fn(g, |f| {
            if f.abs() > edge {
                Jones::diag(1.0.into(), 0.0.into())
            } else {
                Jones::rotation(0.3)
            }
        });
        let k = invert_channel(&h, 1e6, &beta02()).unwrap();
        assert!(!k.regularized.is_empty());
        for &i in &k.regularized {
            assert!(g.frequency(i).abs() > edge);
            assert!(k.k.matrices()[i].max_abs().is_finite());
        }
        for (i, (m, kk)) in h.matrices().iter().zip(k.k.matrices()).enumerate() {
            if !k.regularized.contains(&i) {
                assert!((*kk * *m - Jones::identity()).max_abs() < 1e-10);
            }
        }
    }

    #[test]
    fn invert_rejects_bad_limit() {
        let g = grid();
        assert!(matches!(
            invert_channel(&ChannelSpectrum::identity(g), 1.0, &beta02()),
            Err(ChannelError::InvalidCondLimit(_))
        ));
    }

    #[test]
    fn energy_bound_holds() {
        let g = grid();
        let s = spec(vec![
            mode(0.6, 0.0, JonesSource::Random),
            mode(0.25, 13e-12, JonesSource::Random),
            mode(0.15, 31e-12, JonesSource::Random),
        ]);
        let c = s.coupling_bound();
        let h = build_mmf_channel(&s, &g, 5);
        for m in h.matrices() {
            assert!(m.singular_values().0 <= c * (1.0 + 1e-12));
        }
    }

    #[test]
    fn save_load_round_trip() {
        let g = grid();
        let s = spec(vec![
            mode(0.6, 0.0, JonesSource::Random),
            mode(0.4, 13.7e-12, JonesSource::Random),
        ]);
        let h = build_mmf_channel(&s, &g, 77);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        save_channel(&h, &path).unwrap();
        let back = load_channel(&path, &g).unwrap();
        for (a, b) in h.matrices().iter().zip(back.matrices()) {
            assert!((*a - *b).max_abs() <= 1e-12);
        }

        save_channel(&ChannelSpectrum::identity(g), &path).unwrap();
        let back = load_channel(&path, &g).unwrap();
        assert_eq!(back, ChannelSpectrum::identity(g));
    }

    #[test]
    fn load_rejects_wrong_column_count() {
        let g = grid();
        let text = "f_hz,a,b,c,d,e,f\n0,1,0,0,0,0,1\n1,1,0,0,0,0,1\n";
        assert!(matches!(
            read_channel(text.as_bytes(), &g),
            Err(ChannelError::MalformedFile { .. })
        ));
        let text = format!("{}\n0,1,0,0,0,0,0,1,0\n1,1,0,0,0\n", CHANNEL_FILE_HEADER.join(","));
        assert!(matches!(
            read_channel(text.as_bytes(), &g),
            Err(ChannelError::MalformedFile { .. })
        ));
    }

    #[test]
    fn load_rejects_missing_header_and_non_monotone() {
        let g = grid();
        let text = "0,1,0,0,0,0,0,1,0\n1,1,0,0,0,0,0,1,0\n";
        assert!(matches!(read_channel(text.as_bytes(), &g), Err(ChannelError::MalformedFile { .. })));
        let text = format!(
            "{}\n# comment\n1,1,0,0,0,0,0,1,0\n0,1,0,0,0,0,0,1,0\n",
            CHANNEL_FILE_HEADER.join(",")
        );
        assert!(matches!(read_channel(text.as_bytes(), &g), Err(ChannelError::MalformedFile { .. })));
    }

    fn linear_matrix(f: f64) -> Jones {
        let x = f / 1e10;
        Jones::new(
            Complex64::new(1.0 + x, -0.5 * x),
            Complex64::new(0.2 * x, 0.1),
            Complex64::new(-0.3, 0.7 * x),
            Complex64::new(2.0 - x, x),
        )
    }

    #[test]
    fn coarse_file_interpolates_linear_matrix_exactly() {
        let g = grid();
        // 2x coarser spacing, spanning the whole target grid
        let mut text = format!("# coarse\n{}\n", CHANNEL_FILE_HEADER.join(","));
        for k in 0..=g.n_points() / 2 {
            let f = g.frequency(0) + 2.0 * k as f64 * g.df();
            let m = linear_matrix(f);
            text.push_str(&format!("{f:e}"));
            for z in m.0.iter().flatten() {
                text.push_str(&format!(",{:e},{:e}", z.re, z.im));
            }
            text.push('\n');
        }
        let h = read_channel(text.as_bytes(), &g).unwrap();
        for (f, m) in h.iter() {
            assert!((*m - linear_matrix(f)).max_abs() < 1e-9);
        }
    }

    #[test]
    fn narrow_file_is_grid_mismatch() {
        let g = grid();
        let text = format!(
            "{}\n-1e9,1,0,0,0,0,0,1,0\n1e9,1,0,0,0,0,0,1,0\n",
            CHANNEL_FILE_HEADER.join(",")
        );
        assert!(matches!(read_channel(text.as_bytes(), &g), Err(ChannelError::GridMismatch { .. })));
    }

    #[test]
    fn periodic_resample_hits_coarse_points() {
        let g = FrequencyGrid::new(25e9, 2, 256).unwrap();
        let fine = g.with_points(1024).unwrap();
        let s = spec(vec![
            mode(0.7, 0.0, JonesSource::Random),
            mode(0.3, 9e-12, JonesSource::Random),
        ]);
        let h = build_mmf_channel(&s, &g, 3);
        let r = h.resample_periodic(&fine);
        for (i, m) in h.matrices().iter().enumerate() {
            let j = fine.index_of_offset(4 * g.offset(i)).unwrap();
            assert!((*m - r.matrices()[j]).max_abs() < 1e-12);
        }
    }

    proptest::proptest! {
        #[test]
        fn common_delay_is_a_phase_ramp(seed in 0u64..1000, dt in 0.0f64..100e-12) {
            let g = FrequencyGrid::new(25e9, 2, 512).unwrap();
            let s = spec(vec![
                mode(0.5, 0.0, JonesSource::Random),
                mode(0.3, 11e-12, JonesSource::Random),
                mode(0.2, 23e-12, JonesSource::Random),
            ]);
            let h0 = build_mmf_channel(&s, &g, seed);
            let h1 = build_mmf_channel(&s.delayed(dt), &g, seed);
            for ((f, a), b) in h0.iter().zip(h1.matrices()) {
                let ramp = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * f * dt);
                proptest::prop_assert!((a.scale(ramp) - *b).max_abs() < 1e-12);
            }
        }
    }
}
