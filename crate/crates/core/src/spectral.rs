//! Frequency grids, the square-root raised-cosine pulse spectrum and
//! symbol-rate spectral folding.
//!
//! Every spectrum in the crate lives on a [`FrequencyGrid`]: `n_points`
//! uniformly spaced samples covering `[-fs/2, +fs/2)` with `fs` equal to
//! `baud_rate * samples_per_symbol`. Sample `i` sits at
//! `(i - n_points/2) * df`, so `f = 0` is always on-grid, and so are the
//! symbol-rate Nyquist edges `±1/(2T)`. Folding is then pure index
//! arithmetic.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("n_points = {0} is not a power of two")]
    NonPowerOfTwo(usize),
    #[error("samples_per_symbol = {0} is below 2, the roll-off region would alias")]
    UndersampledPulse(usize),
    #[error("baud rate must be positive and finite, got {0}")]
    InvalidBaudRate(f64),
    #[error(
        "n_points = {n_points} does not split into an even number of bins per \
         symbol-rate period at {samples_per_symbol} samples/symbol"
    )]
    IncommensurateSymbolRate {
        n_points: usize,
        samples_per_symbol: usize,
    },
    #[error("spectrum has {got} samples, grid has {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("roll-off must lie in [0, 1], got {0}")]
    InvalidRollOff(f64),
}

/// Uniform FFT-compatible frequency axis tied to a baud rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    baud_rate: f64,
    samples_per_symbol: usize,
    n_points: usize,
}

impl FrequencyGrid {
    pub fn new(
        baud_rate: f64,
        samples_per_symbol: usize,
        n_points: usize,
    ) -> Result<Self, GridError> {
        if !(baud_rate.is_finite() && baud_rate > 0.0) {
            return Err(GridError::InvalidBaudRate(baud_rate));
        }
        if !n_points.is_power_of_two() {
            return Err(GridError::NonPowerOfTwo(n_points));
        }
        if samples_per_symbol < 2 {
            return Err(GridError::UndersampledPulse(samples_per_symbol));
        }
        if n_points % (2 * samples_per_symbol) != 0 {
            return Err(GridError::IncommensurateSymbolRate {
                n_points,
                samples_per_symbol,
            });
        }
        Ok(Self {
            baud_rate,
            samples_per_symbol,
            n_points,
        })
    }

    pub fn baud_rate(&self) -> f64 {
        self.baud_rate
    }

    /// Symbol period `T = 1 / baud_rate`.
    pub fn symbol_period(&self) -> f64 {
        1.0 / self.baud_rate
    }

    pub fn samples_per_symbol(&self) -> usize {
        self.samples_per_symbol
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn sample_rate(&self) -> f64 {
        self.baud_rate * self.samples_per_symbol as f64
    }

    pub fn df(&self) -> f64 {
        self.sample_rate() / self.n_points as f64
    }

    /// Number of grid bins in one symbol-rate period `1/T`.
    pub fn bins_per_period(&self) -> usize {
        self.n_points / self.samples_per_symbol
    }

    /// Signed bin offset of sample `i` relative to `f = 0`.
    pub fn offset(&self, i: usize) -> isize {
        i as isize - (self.n_points / 2) as isize
    }

    pub fn frequency(&self, i: usize) -> f64 {
        self.offset(i) as f64 * self.df()
    }

    pub fn frequencies(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.frequency(i))
    }

    /// Index of the sample at signed bin offset `k`, if it lies on the grid.
    pub fn index_of_offset(&self, k: isize) -> Option<usize> {
        let i = k + (self.n_points / 2) as isize;
        (0..self.n_points as isize).contains(&i).then_some(i as usize)
    }

    /// Position of centered sample `i` in standard FFT ordering
    /// (DC first, negative frequencies in the upper half).
    pub fn fft_index(&self, i: usize) -> usize {
        (i + self.n_points / 2) % self.n_points
    }

    /// `[lowest, highest]` grid frequency.
    pub fn span(&self) -> (f64, f64) {
        (self.frequency(0), self.frequency(self.n_points - 1))
    }

    /// Same sampling, different resolution.
    pub fn with_points(&self, n_points: usize) -> Result<Self, GridError> {
        Self::new(self.baud_rate, self.samples_per_symbol, n_points)
    }
}

/// Samples of a real or complex function on a [`FrequencyGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSpectrum<T> {
    grid: FrequencyGrid,
    values: Vec<T>,
}

impl<T: Copy> ScalarSpectrum<T> {
    pub fn new(grid: FrequencyGrid, values: Vec<T>) -> Result<Self, GridError> {
        if values.len() != grid.n_points() {
            return Err(GridError::LengthMismatch {
                expected: grid.n_points(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: FrequencyGrid, f: impl Fn(f64) -> T) -> Self {
        let values = grid.frequencies().map(f).collect();
        Self { grid, values }
    }

    pub fn constant(grid: FrequencyGrid, value: T) -> Self {
        Self {
            grid,
            values: vec![value; grid.n_points()],
        }
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> ScalarSpectrum<U> {
        ScalarSpectrum {
            grid: self.grid,
            values: self.values.iter().copied().map(f).collect(),
        }
    }
}

impl ScalarSpectrum<f64> {
    /// True when every sample is finite and non-negative (the PSD/SNR role).
    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|v| v.is_finite() && *v >= 0.0)
    }
}

/// Transmit pulse: square-root raised cosine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PulseShape {
    roll_off: f64,
}

impl PulseShape {
    pub fn srrc(roll_off: f64) -> Result<Self, GridError> {
        if !(0.0..=1.0).contains(&roll_off) {
            return Err(GridError::InvalidRollOff(roll_off));
        }
        Ok(Self { roll_off })
    }

    pub fn roll_off(&self) -> f64 {
        self.roll_off
    }

    /// `|f|` beyond which the pulse spectrum vanishes: `(1+β)/(2T)`.
    pub fn band_edge(&self, symbol_period: f64) -> f64 {
        (1.0 + self.roll_off) / (2.0 * symbol_period)
    }

    pub fn amplitude(&self, f: f64, symbol_period: f64) -> f64 {
        rrc_amplitude(f, symbol_period, self.roll_off)
    }

    /// `|H_T(f)|` sampled on `grid`.
    pub fn spectrum(&self, grid: &FrequencyGrid) -> ScalarSpectrum<f64> {
        let t = grid.symbol_period();
        ScalarSpectrum::from_fn(*grid, |f| self.amplitude(f, t))
    }
}

impl TryFrom<f64> for PulseShape {
    type Error = GridError;

    fn try_from(roll_off: f64) -> Result<Self, Self::Error> {
        Self::srrc(roll_off)
    }
}

impl From<PulseShape> for f64 {
    fn from(p: PulseShape) -> f64 {
        p.roll_off
    }
}

/// Square-root raised-cosine amplitude, normalized to 1 at `f = 0`.
///
/// Squared, this is the raised-cosine response, whose aliases at multiples
/// of `1/T` sum to exactly one. With `roll_off = 0` the response is a brick
/// wall; the edge sample `|f| = 1/(2T)` takes the half-power value so the
/// alias sum stays one there as well.
pub fn rrc_amplitude(f: f64, symbol_period: f64, roll_off: f64) -> f64 {
    let x = f.abs() * symbol_period;
    let lo = (1.0 - roll_off) / 2.0;
    let hi = (1.0 + roll_off) / 2.0;
    if roll_off == 0.0 {
        // grid samples land on the edge only up to rounding of f·T
        return if (x - 0.5).abs() <= 1e-9 {
            std::f64::consts::FRAC_1_SQRT_2
        } else if x < 0.5 {
            1.0
        } else {
            0.0
        };
    }
    if x <= lo {
        1.0
    } else if x >= hi {
        0.0
    } else {
        (std::f64::consts::PI / (2.0 * roll_off) * (x - lo)).cos()
    }
}

/// A spectrum folded onto one symbol-rate period.
///
/// Holds `P + 1` samples at offsets `-P/2 ..= P/2` (P = bins per period),
/// so both Nyquist edges are present and carry identical values.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldedSpectrum {
    grid: FrequencyGrid,
    values: Vec<f64>,
}

impl FoldedSpectrum {
    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        let half = (self.grid.bins_per_period() / 2) as isize;
        let df = self.grid.df();
        (-half..=half).map(move |m| m as f64 * df)
    }

    /// `T * ∫ g(S(f)) df` over one period, by the rectangle rule on the
    /// `P` distinct samples (the duplicated edge is counted once).
    pub fn period_mean(&self, g: impl Fn(f64) -> f64) -> f64 {
        let p = self.grid.bins_per_period();
        self.values[..p].iter().map(|&v| g(v)).sum::<f64>() / p as f64
    }
}

/// Sums every alias `s(f - μ/T)` that falls inside the grid span.
pub fn fold_spectrum(s: &ScalarSpectrum<f64>) -> FoldedSpectrum {
    let grid = *s.grid();
    let p = grid.bins_per_period() as isize;
    let mut acc = vec![0.0; p as usize];
    for (i, v) in s.values().iter().enumerate() {
        acc[grid.offset(i).rem_euclid(p) as usize] += v;
    }
    let half = p / 2;
    let values = (-half..=half)
        .map(|m| acc[m.rem_euclid(p) as usize])
        .collect();
    FoldedSpectrum { grid, values }
}
