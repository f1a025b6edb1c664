//! Analytic SNR prediction for polarization-multiplexed QAM links.
//!
//! Given a 2x2 frequency-dependent channel `H(f)` and an additive Gaussian
//! noise PSD, [`analytic::predict_snr`] returns the SNR at the output of an
//! ideal adaptive equalizer on each polarization tributary, without any
//! time-domain simulation.

pub mod analytic;
pub mod channel;
pub mod jones;
pub mod qam;
pub mod spectral;

pub use analytic::{
    equalizer_output_snr, predict_snr, spectral_snr_dual_pol, spectral_snr_single_pol, AnalyticError,
    NoiseModel, NoisePsd, Pol, SnrPair, SnrSpectrum, TxSpec,
};
pub use channel::{
    build_mmf_channel, invert_channel, load_channel, save_channel, ChannelError, ChannelSpectrum,
    JonesSource, ModalChannelSpec, ModeSpec,
};
pub use jones::Jones;
pub use qam::{ber_from_snr_qam, snr_from_ber_qam, QamOrder};
pub use spectral::{fold_spectrum, rrc_amplitude, FrequencyGrid, PulseShape, ScalarSpectrum};
