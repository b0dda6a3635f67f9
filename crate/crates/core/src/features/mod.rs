//! Per-window feature extraction: ten features per channel, channel-major.
//!
//! Index of feature `f` on channel `c` is `c * 10 + f`, with `f` following
//! [`Feature::ALL`]. This layout is part of the model file contract and is
//! versioned by [`FEATURE_CONTRACT_VERSION`].

mod spectral;
mod table;
mod time;

pub use spectral::{
    band_power, hann, periodogram, spectral_entropy, PsdEstimate, BAND_HI_HZ, BAND_LO_HZ,
};
pub use table::{read_features_csv, write_features_csv};
pub use time::{
    hjorth, kurtosis, rms, shannon_entropy, skewness, std_dev, Hjorth, DEGENERATE_EPS, SHANNON_BINS,
};

use rayon::prelude::*;
use thiserror::Error;

use crate::dsp::Window;

pub const FEATURES_PER_CHANNEL: usize = 10;
pub const FEATURE_CONTRACT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("empty input")]
    EmptyInput,
    #[error("need at least {needed} samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("no spectral bins in [{f_lo}, {f_hi}] Hz")]
    EmptyBand { f_lo: f64, f_hi: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("channel {channel}: {source}")]
    InChannel {
        channel: usize,
        #[source]
        source: Box<FeatureError>,
    },
    #[error("features file: {0}")]
    Table(String),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Feature {
    Rms,
    Std,
    Skew,
    Kurt,
    HjorthActivity,
    HjorthMobility,
    HjorthComplexity,
    ShannonEntropy,
    SpectralEntropy,
    BandPower,
}

impl Feature {
    pub const ALL: [Feature; FEATURES_PER_CHANNEL] = [
        Feature::Rms,
        Feature::Std,
        Feature::Skew,
        Feature::Kurt,
        Feature::HjorthActivity,
        Feature::HjorthMobility,
        Feature::HjorthComplexity,
        Feature::ShannonEntropy,
        Feature::SpectralEntropy,
        Feature::BandPower,
    ];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Feature::Rms => "rms",
            Feature::Std => "std",
            Feature::Skew => "skew",
            Feature::Kurt => "kurt",
            Feature::HjorthActivity => "hj_act",
            Feature::HjorthMobility => "hj_mob",
            Feature::HjorthComplexity => "hj_comp",
            Feature::ShannonEntropy => "shan_ent",
            Feature::SpectralEntropy => "spec_ent",
            Feature::BandPower => "band_pow",
        }
    }
}

/// Position of `feature` on `channel` in a feature vector.
pub fn feature_index(channel: usize, feature: Feature) -> usize {
    channel * FEATURES_PER_CHANNEL + feature.id()
}

/// Column names `c<ch>_<feat>` in vector order.
pub fn feature_names(n_channels: usize) -> Vec<String> {
    (0..n_channels)
        .flat_map(|c| {
            Feature::ALL
                .iter()
                .map(move |f| format!("c{c}_{}", f.name()))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub subject_id: u32,
    pub start_index: usize,
}

impl FeatureVector {
    pub fn get(&self, channel: usize, feature: Feature) -> f64 {
        self.values[feature_index(channel, feature)]
    }
}

/// The ten features of one channel, in [`Feature::ALL`] order.
pub fn channel_features(x: &[f64], fs: f64) -> Result<[f64; FEATURES_PER_CHANNEL], FeatureError> {
    let h = hjorth(x)?;
    let psd = periodogram(x, fs)?;
    Ok([
        rms(x)?,
        std_dev(x)?,
        skewness(x)?,
        kurtosis(x)?,
        h.activity,
        h.mobility,
        h.complexity,
        shannon_entropy(x, SHANNON_BINS)?,
        spectral_entropy(&psd)?,
        band_power(&psd, BAND_LO_HZ, BAND_HI_HZ)?,
    ])
}

pub fn extract_feature_vector(w: &Window) -> Result<FeatureVector, FeatureError> {
    let mut values = Vec::with_capacity(w.n_channels() * FEATURES_PER_CHANNEL);
    for (channel, x) in w.data.iter().enumerate() {
        let f = channel_features(x, w.fs).map_err(|e| FeatureError::InChannel {
            channel,
            source: Box::new(e),
        })?;
        values.extend_from_slice(&f);
    }
    Ok(FeatureVector {
        values,
        subject_id: w.subject_id,
        start_index: w.start_index,
    })
}

/// Extracts every window; order of the output matches the input.
pub fn extract_all(windows: &[Window]) -> Result<Vec<FeatureVector>, FeatureError> {
    windows.par_iter().map(extract_feature_vector).collect()
}
