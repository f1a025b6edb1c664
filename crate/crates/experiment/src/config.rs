//! Experiment configuration: a JSON document with units in field names.

use std::path::{Path, PathBuf};

use polsnr_core::analytic::from_db;
use polsnr_core::{FrequencyGrid, ModalChannelSpec, NoiseModel, NoisePsd, Pol, TxSpec};
use polsnr_sim::{EqualizerConfig, SimConfig};
use serde::{Deserialize, Serialize};

use crate::ExperimentError;

/// Profiles shipped with the tool, selectable by name.
pub const BUNDLED_PROFILES: [(&str, &str); 2] = [
    ("mmf_100m", include_str!("../profiles/mmf_100m.json")),
    ("mmf_100m_strong", include_str!("../profiles/mmf_100m_strong.json")),
];

pub fn bundled_profile(name: &str) -> Result<ModalChannelSpec, ExperimentError> {
    let (_, text) = BUNDLED_PROFILES
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| {
            let known: Vec<&str> = BUNDLED_PROFILES.iter().map(|(n, _)| *n).collect();
            ExperimentError::Config(format!("unknown bundled profile {name:?}, known: {known:?}"))
        })?;
    serde_json::from_str(text).map_err(|e| ExperimentError::Config(format!("bundled profile {name}: {e}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Shared by the analytic grid and the simulator's frame.
    pub samples_per_symbol: usize,
    /// Points of the analytic frequency grid.
    pub n_points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            samples_per_symbol: 2,
            n_points: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelSource {
    Identity,
    Modal { spec: ModalChannelSpec },
    Bundled { name: String },
    /// Channel CSV; relative paths resolve against the config file.
    File { path: PathBuf },
}

/// A value common to both polarizations or given per polarization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerPol {
    Common(f64),
    Split { x: f64, y: f64 },
}

impl PerPol {
    pub fn get(&self, pol: Pol) -> f64 {
        match (self, pol) {
            (PerPol::Common(v), _) => *v,
            (PerPol::Split { x, .. }, Pol::X) => *x,
            (PerPol::Split { y, .. }, Pol::Y) => *y,
        }
    }
}

/// Flat receiver noise, given either as `N₀` or as the spectral SNR at
/// `f = 0` over an ideal channel (`N₀ = σ²·T / snr`).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_snr_db: Option<PerPol>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n0_w_per_hz: Option<PerPol>,
}

impl NoiseConfig {
    pub fn resolve(&self, tx: &TxSpec) -> Result<NoiseModel, ExperimentError> {
        let n0 = |pol: Pol| -> Result<f64, ExperimentError> {
            let v = match (self.input_snr_db, self.n0_w_per_hz) {
                (Some(s), None) => tx.sigma_a2(pol) * tx.symbol_period() / from_db(s.get(pol)),
                (None, Some(n)) => n.get(pol),
                _ => {
                    return Err(ExperimentError::Config(
                        "noise needs exactly one of input_snr_db or n0_w_per_hz".into(),
                    ))
                }
            };
            if !(v.is_finite() && v > 0.0) {
                return Err(ExperimentError::Config(format!("noise PSD for {pol:?} must be positive, got {v}")));
            }
            Ok(v)
        };
        Ok(NoiseModel {
            x: NoisePsd::Flat(n0(Pol::X)?),
            y: NoisePsd::Flat(n0(Pol::Y)?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSettings {
    pub n_symbols: usize,
    pub equalizer: EqualizerConfig,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            n_symbols: 1 << 16,
            equalizer: EqualizerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub runs_csv: String,
    pub plot_csv: String,
    pub summary_json: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            runs_csv: "runs.csv".into(),
            plot_csv: "plot_data.csv".into(),
            summary_json: "summary.json".into(),
        }
    }
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

fn default_cond_limit() -> f64 {
    1e6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub tx: TxSpec,
    #[serde(default)]
    pub grid: GridConfig,
    pub channel: ChannelSource,
    pub noise: NoiseConfig,
    #[serde(default = "one")]
    pub n_realizations: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub sim: SimSettings,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default = "yes")]
    pub unbias: bool,
    #[serde(default = "default_cond_limit")]
    pub cond_limit: f64,
}

impl ExperimentConfig {
    /// Parses a config file; relative channel-file paths are resolved
    /// against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("reading {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let ChannelSource::File { path: p } = &mut cfg.channel {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        self.tx.validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
        if self.n_realizations == 0 {
            return bad("n_realizations must be at least 1".into());
        }
        if !(self.cond_limit > 1.0) {
            return bad(format!("cond_limit must exceed 1, got {}", self.cond_limit));
        }
        self.model_grid()?;
        self.sim_config(0).validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
        self.noise.resolve(&self.tx)?;
        match &self.channel {
            ChannelSource::Modal { spec } => spec.validate().map_err(|e| ExperimentError::Config(e.to_string()))?,
            ChannelSource::Bundled { name } => {
                bundled_profile(name)?;
            }
            ChannelSource::Identity | ChannelSource::File { .. } => {}
        }
        Ok(())
    }

    pub fn model_grid(&self) -> Result<FrequencyGrid, ExperimentError> {
        FrequencyGrid::new(self.tx.baud_rate_hz, self.grid.samples_per_symbol, self.grid.n_points)
            .map_err(|e| ExperimentError::Config(format!("analytic grid: {e}")))
    }

    pub fn sim_config(&self, seed: u64) -> SimConfig {
        SimConfig {
            tx: self.tx,
            n_symbols: self.sim.n_symbols,
            samples_per_symbol: self.grid.samples_per_symbol,
            equalizer: self.sim.equalizer,
            seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "tx": {"baud_rate_hz": 25e9, "m_qam": 16, "roll_off": 0.2},
        "channel": {"kind": "identity"},
        "noise": {"input_snr_db": 18}
    }"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.n_realizations, 1);
        assert!(c.unbias);
        assert_eq!(c.cond_limit, 1e6);
        assert_eq!(c.sim.n_symbols, 65536);
        assert_eq!(c.grid.n_points, 1024);
    }

    #[test]
    fn noise_forms() {
        let tx = TxSpec::new(25e9, polsnr_core::QamOrder::new(16).unwrap(), 0.2).unwrap();
        let snr = NoiseConfig {
            input_snr_db: Some(PerPol::Common(20.0)),
            n0_w_per_hz: None,
        };
        assert_eq!(snr.resolve(&tx).unwrap(), NoiseModel::for_input_snr(&tx, 100.0));
        let split: NoiseConfig = serde_json::from_str(r#"{"n0_w_per_hz": {"x": 1e-12, "y": 2e-12}}"#).unwrap();
        let m = split.resolve(&tx).unwrap();
        assert_eq!(m.y, NoisePsd::Flat(2e-12));
        assert!(NoiseConfig::default().resolve(&tx).is_err());
        let both: NoiseConfig = serde_json::from_str(r#"{"n0_w_per_hz": 1e-12, "input_snr_db": 3}"#).unwrap();
        assert!(both.resolve(&tx).is_err());
    }

    #[test]
    fn rejects_bad_values() {
        let with = |patch: &str| MINIMAL.replacen('{', &format!("{{{patch},"), 1);
        assert!(ExperimentConfig::from_json(&with(r#""n_realizations": 0"#)).is_err());
        assert!(ExperimentConfig::from_json(&with(r#""cond_limit": 0.5"#)).is_err());
        assert!(ExperimentConfig::from_json(&with(r#""typo_field": 1"#)).is_err());
        assert!(ExperimentConfig::from_json(&with(r#""sim": {"n_symbols": 1000}"#)).is_err());
        let bundled = MINIMAL.replace(r#"{"kind": "identity"}"#, r#"{"kind": "bundled", "name": "nope"}"#);
        assert!(ExperimentConfig::from_json(&bundled).is_err());
    }

    #[test]
    fn bundled_profiles_parse_and_are_valid() {
        for (name, _) in BUNDLED_PROFILES {
            let p = bundled_profile(name).unwrap();
            p.validate().unwrap();
            assert!(p.modes.len() >= 2);
        }
    }

    #[test]
    fn shipped_example_config_is_valid() {
        ExperimentConfig::from_json(include_str!("../configs/mmf_100m_compare.json")).unwrap();
    }
}
