//! Preprocessing: powerline notch, Butterworth bandpass, artifact subspace
//! reconstruction, and overlapping windows.

mod asr;
mod filter;
mod window;

pub use asr::{asr_calibrate, asr_clean, AsrModel, AsrWindowReport, DEFAULT_K, DEFAULT_WINDOW_S};
pub use filter::{
    apply_filter, design_butterworth_bandpass, design_notch, BiquadSection, FilterCascade,
};
pub use window::{segment_windows, window_geometry, Window, HOP_S, WINDOW_S};

use thiserror::Error;

use crate::signal_io::{Recording, SignalIoError};

#[derive(Debug, Error)]
pub enum DspError {
    #[error("frequency {freq_hz} Hz outside (0, fs/2) for fs = {fs} Hz")]
    FrequencyOutOfRange { freq_hz: f64, fs: f64 },
    #[error("unsupported filter order {0}: bandpass order must be even and positive")]
    UnsupportedOrder(usize),
    #[error("filter cascade has no sections")]
    EmptyCascade,
    #[error("filter produced non-finite output on channel {channel}")]
    NonFiniteOutput { channel: usize },
    #[error("recording of {samples} samples too short for ASR calibration ({needed} needed)")]
    TooShortForCalibration { samples: usize, needed: usize },
    #[error("calibration covariance is rank deficient ({samples} samples, {channels} channels)")]
    RankDeficientCovariance { samples: usize, channels: usize },
    #[error("channel count mismatch: model has {expected}, recording has {found}")]
    ChannelMismatch { expected: usize, found: usize },
    #[error("recording of {samples} samples shorter than one window ({needed})")]
    RecordingTooShort { samples: usize, needed: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Recording(#[from] SignalIoError),
}

pub const NOTCH_HZ: f64 = 60.0;
pub const NOTCH_Q: f64 = 30.0;
pub const BANDPASS_ORDER: usize = 4;
pub const BANDPASS_LO_HZ: f64 = 0.1;
pub const BANDPASS_HI_HZ: f64 = 100.0;

/// Settings for the whole-recording preprocessing chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreprocessConfig {
    pub notch_hz: f64,
    pub notch_q: f64,
    pub bandpass_order: usize,
    pub bandpass_lo_hz: f64,
    pub bandpass_hi_hz: f64,
    /// ASR cutoff; `None` disables artifact reduction.
    pub asr_k: Option<f64>,
    pub asr_window_s: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            notch_hz: NOTCH_HZ,
            notch_q: NOTCH_Q,
            bandpass_order: BANDPASS_ORDER,
            bandpass_lo_hz: BANDPASS_LO_HZ,
            bandpass_hi_hz: BANDPASS_HI_HZ,
            asr_k: Some(DEFAULT_K),
            asr_window_s: DEFAULT_WINDOW_S,
        }
    }
}

impl PreprocessConfig {
    /// Notch followed by bandpass, as one cascade.
    pub fn filter_chain(&self, fs: f64) -> Result<FilterCascade, DspError> {
        let notch = design_notch(self.notch_hz, self.notch_q, fs)?;
        let band = design_butterworth_bandpass(
            self.bandpass_order,
            self.bandpass_lo_hz,
            self.bandpass_hi_hz,
            fs,
        )?;
        Ok(FilterCascade::from(notch).then(&band))
    }
}

/// Notch, then bandpass, then (optionally) ASR calibrated on the recording itself.
pub fn preprocess(r: &Recording, cfg: &PreprocessConfig) -> Result<Recording, DspError> {
    let filtered = apply_filter(&cfg.filter_chain(r.fs())?, r)?;
    match cfg.asr_k {
        Some(k) => asr_calibrate(&filtered, k, cfg.asr_window_s)?.clean(&filtered),
        None => Ok(filtered),
    }
}
