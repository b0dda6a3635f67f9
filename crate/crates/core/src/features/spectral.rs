//! Single-segment Hann periodogram and the two spectral features built on it.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::FeatureError;

/// Band used for the scalar power feature.
pub const BAND_LO_HZ: f64 = 0.1;
pub const BAND_HI_HZ: f64 = 100.0;

/// One-sided power spectral density, µV²/Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdEstimate {
    pub frequencies: Vec<f64>,
    pub power: Vec<f64>,
}

impl PsdEstimate {
    pub fn resolution(&self) -> f64 {
        self.frequencies
            .get(1)
            .map_or(0.0, |f| f - self.frequencies[0])
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Periodic Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Mean-removed, Hann-windowed, one-sided periodogram scaled by `1 / (fs * Σw²)`
/// with interior bins doubled.
pub fn periodogram(x: &[f64], fs: f64) -> Result<PsdEstimate, FeatureError> {
    let n = x.len();
    if n < 8 {
        return Err(FeatureError::TooFewSamples {
            needed: 8,
            found: n,
        });
    }
    if fs.is_nan() || fs <= 0.0 {
        return Err(FeatureError::InvalidParameter(format!(
            "sampling rate {fs}"
        )));
    }
    let mu = x.iter().sum::<f64>() / n as f64;
    let w = hann(n);
    let wss: f64 = w.iter().map(|v| v * v).sum();
    let mut buf: Vec<Complex64> = x
        .iter()
        .zip(&w)
        .map(|(v, wi)| Complex64::new((v - mu) * wi, 0.0))
        .collect();
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n));
    fft.process(&mut buf);

    let n_bins = n / 2 + 1;
    let scale = 1.0 / (fs * wss);
    let power = (0..n_bins)
        .map(|k| {
            let p = buf[k].norm_sqr() * scale;
            let nyquist = n.is_multiple_of(2) && k == n / 2;
            if k == 0 || nyquist {
                p
            } else {
                2.0 * p
            }
        })
        .collect();
    let frequencies = (0..n_bins).map(|k| k as f64 * fs / n as f64).collect();
    Ok(PsdEstimate { frequencies, power })
}

/// Shannon entropy of the normalized spectrum divided by `ln(#bins)`.
pub fn spectral_entropy(p: &PsdEstimate) -> Result<f64, FeatureError> {
    let bins = p.power.len();
    if bins < 2 {
        return Err(FeatureError::TooFewSamples {
            needed: 2,
            found: bins,
        });
    }
    let total: f64 = p.power.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Ok(0.0);
    }
    let h: f64 = p
        .power
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| {
            let q = v / total;
            -q * q.ln()
        })
        .sum();
    Ok((h / (bins as f64).ln()).clamp(0.0, 1.0))
}

/// Trapezoidal integral of the PSD over bins with `f_lo <= f <= f_hi`.
pub fn band_power(p: &PsdEstimate, f_lo: f64, f_hi: f64) -> Result<f64, FeatureError> {
    if f_lo.is_nan() || f_hi.is_nan() || f_lo >= f_hi {
        return Err(FeatureError::InvalidParameter(format!(
            "band [{f_lo}, {f_hi}] is empty"
        )));
    }
    let idx: Vec<usize> = (0..p.frequencies.len())
        .filter(|&i| p.frequencies[i] >= f_lo && p.frequencies[i] <= f_hi)
        .collect();
    if idx.is_empty() {
        return Err(FeatureError::EmptyBand { f_lo, f_hi });
    }
    Ok(idx
        .windows(2)
        .map(|w| {
            0.5 * (p.power[w[0]] + p.power[w[1]]) * (p.frequencies[w[1]] - p.frequencies[w[0]])
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn white(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn parseval_against_windowed_power() {
        let x = white(200, 1);
        let p = periodogram(&x, 250.0).unwrap();
        let mu = x.iter().sum::<f64>() / 200.0;
        let w = hann(200);
        let time: f64 = x
            .iter()
            .zip(&w)
            .map(|(v, wi)| ((v - mu) * wi).powi(2))
            .sum::<f64>()
            / w.iter().map(|v| v * v).sum::<f64>();
        let freq: f64 = p.power.iter().sum::<f64>() * p.resolution();
        assert!((freq - time).abs() / time <= 0.01);
    }

    #[test]
    fn sinusoid_peaks_on_its_bin() {
        let x: Vec<f64> = (0..200)
            .map(|i| (2.0 * PI * 25.0 * i as f64 / 250.0).sin())
            .collect();
        let p = periodogram(&x, 250.0).unwrap();
        let argmax = (0..p.power.len())
            .max_by(|&a, &b| p.power[a].total_cmp(&p.power[b]))
            .unwrap();
        assert_eq!(argmax, 20);
        assert_eq!(p.frequencies[argmax], 25.0);
        assert_eq!(p.frequencies.len(), 101);
    }

    #[test]
    fn zero_signal_and_short_input() {
        let p = periodogram(&[0.0; 64], 250.0).unwrap();
        assert!(p.power.iter().all(|&v| v == 0.0));
        assert_eq!(spectral_entropy(&p).unwrap(), 0.0);
        assert_eq!(band_power(&p, 0.1, 100.0).unwrap(), 0.0);
        assert!(periodogram(&[1.0; 7], 250.0).is_err());
    }

    #[test]
    fn spectral_entropy_extremes() {
        let mut delta = PsdEstimate {
            frequencies: (0..10).map(f64::from).collect(),
            power: vec![0.0; 10],
        };
        delta.power[3] = 2.0;
        assert_eq!(spectral_entropy(&delta).unwrap(), 0.0);
        let flat = PsdEstimate {
            frequencies: (0..10).map(f64::from).collect(),
            power: vec![0.7; 10],
        };
        assert!((spectral_entropy(&flat).unwrap() - 1.0).abs() <= 1e-12);
        // single windows scatter around 0.91; the typical (median) window clears 0.9
        let mut se: Vec<f64> = (0..101)
            .map(|s| spectral_entropy(&periodogram(&white(200, 100 + s), 250.0).unwrap()).unwrap())
            .collect();
        se.sort_by(f64::total_cmp);
        assert!(se[50] >= 0.9, "median {}", se[50]);
        assert!(se.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn band_power_of_white_noise_matches_variance() {
        let x = white(1 << 16, 3);
        let p = periodogram(&x, 250.0).unwrap();
        let mu = x.iter().sum::<f64>() / x.len() as f64;
        let var = x.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / x.len() as f64;
        let bp = band_power(&p, 0.0, 125.0).unwrap();
        assert!((bp - var).abs() / var <= 0.05);
    }

    #[test]
    fn band_power_is_additive_on_shared_grid() {
        let p = periodogram(&white(200, 4), 250.0).unwrap();
        let full = band_power(&p, 0.0, 125.0).unwrap();
        let split = band_power(&p, 0.0, 50.0).unwrap() + band_power(&p, 50.0, 125.0).unwrap();
        assert!((full - split).abs() <= 1e-9);
        assert!(matches!(
            band_power(&p, 10.1, 10.2),
            Err(FeatureError::EmptyBand { .. })
        ));
        assert!(band_power(&p, 5.0, 5.0).is_err());
    }
}
