//! Simplified artifact subspace reconstruction.
//!
//! Calibration eigendecomposes the covariance of the quietest reference
//! windows and sets a per-component RMS ceiling at `mean + k * std`. Cleaning
//! slides half-overlapping windows over the signal, scales every component
//! whose windowed RMS exceeds its ceiling back down to it, and blends window
//! gains with a periodic Hann cross-fade.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

use super::DspError;
use crate::signal_io::Recording;

pub const DEFAULT_K: f64 = 15.0;
pub const DEFAULT_WINDOW_S: f64 = 0.5;
const CLEAN_PERCENTILE: f64 = 0.75;
const CALIBRATION_WINDOWS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct AsrModel {
    /// channels × channels; column `j` is component `j`.
    pub mixing: DMatrix<f64>,
    /// Per-component RMS ceiling, µV.
    pub thresholds: Vec<f64>,
    pub k: f64,
    pub window_s: f64,
}

/// Per-window record of what cleaning did.
#[derive(Debug, Clone, PartialEq)]
pub struct AsrWindowReport {
    /// May be negative for the leading half-window.
    pub start: isize,
    /// Component RMS of the window after attenuation.
    pub component_rms: Vec<f64>,
    pub attenuated: bool,
}

/// Even processing length so that half-overlapping Hann windows sum to one.
fn processing_len(win_s: f64, fs: f64) -> usize {
    2 * ((win_s * fs / 2.0).round() as usize).max(1)
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn component_rms(mixing: &DMatrix<f64>, data: &[Vec<f64>], from: usize, to: usize) -> Vec<f64> {
    let c = data.len();
    let len = (to - from) as f64;
    (0..c)
        .map(|j| {
            let col = mixing.column(j);
            let ss: f64 = (from..to)
                .map(|t| {
                    let v: f64 = (0..c).map(|ch| col[ch] * data[ch][t]).sum();
                    v * v
                })
                .sum();
            (ss / len).sqrt()
        })
        .collect()
}

pub fn asr_calibrate(reference: &Recording, k: f64, win_s: f64) -> Result<AsrModel, DspError> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(DspError::InvalidParameter(format!(
            "k must be positive, got {k}"
        )));
    }
    if !(win_s > 0.0 && win_s.is_finite()) {
        return Err(DspError::InvalidParameter(format!(
            "window must be positive, got {win_s}"
        )));
    }
    let fs = reference.fs();
    let w = processing_len(win_s, fs);
    let h = w / 2;
    let n = reference.n_samples();
    let needed = (CALIBRATION_WINDOWS * win_s * fs).round() as usize;
    if n < needed.max(w) {
        return Err(DspError::TooShortForCalibration { samples: n, needed });
    }
    let c = reference.n_channels();
    let data = reference.data();
    let starts: Vec<usize> = (0..=(n - w) / h).map(|i| i * h).collect();

    let chan_rms: Vec<Vec<f64>> = starts
        .iter()
        .map(|&s| {
            data.iter()
                .map(|row| (row[s..s + w].iter().map(|v| v * v).sum::<f64>() / w as f64).sqrt())
                .collect()
        })
        .collect();
    let cutoffs: Vec<f64> = (0..c)
        .map(|ch| {
            let mut v: Vec<f64> = chan_rms.iter().map(|r| r[ch]).collect();
            v.sort_by(f64::total_cmp);
            percentile(&v, CLEAN_PERCENTILE)
        })
        .collect();
    let clean: Vec<usize> = starts
        .iter()
        .zip(&chan_rms)
        .filter(|(_, r)| r.iter().zip(&cutoffs).all(|(v, cut)| v <= cut))
        .map(|(&s, _)| s)
        .collect();

    let n_used = clean.len() * w;
    if n_used < c {
        return Err(DspError::RankDeficientCovariance {
            samples: n_used,
            channels: c,
        });
    }
    let mut cov = DMatrix::<f64>::zeros(c, c);
    for &s in &clean {
        #[allow(clippy::needless_range_loop)]
        for t in s..s + w {
            for i in 0..c {
                let xi = data[i][t];
                for j in i..c {
                    cov[(i, j)] += xi * data[j][t];
                }
            }
        }
    }
    for i in 0..c {
        for j in i..c {
            cov[(i, j)] /= n_used as f64;
            cov[(j, i)] = cov[(i, j)];
        }
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]];
    let bottom = eig.eigenvalues[order[c - 1]];
    if top.is_nan() || top <= 0.0 || bottom <= top * 1e-12 {
        return Err(DspError::RankDeficientCovariance {
            samples: n_used,
            channels: c,
        });
    }
    let mut mixing = DMatrix::<f64>::zeros(c, c);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let pivot = col
            .iter()
            .copied()
            .fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for ch in 0..c {
            mixing[(ch, dst)] = sign * col[ch];
        }
    }

    let per_window: Vec<Vec<f64>> = clean
        .iter()
        .map(|&s| component_rms(&mixing, data, s, s + w))
        .collect();
    let m = per_window.len() as f64;
    let thresholds: Vec<f64> = (0..c)
        .map(|j| {
            let mean = per_window.iter().map(|r| r[j]).sum::<f64>() / m;
            let var = per_window
                .iter()
                .map(|r| (r[j] - mean).powi(2))
                .sum::<f64>()
                / m;
            mean + k * var.sqrt()
        })
        .collect();
    if thresholds.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(DspError::RankDeficientCovariance {
            samples: n_used,
            channels: c,
        });
    }
    Ok(AsrModel {
        mixing,
        thresholds,
        k,
        window_s: win_s,
    })
}

impl AsrModel {
    pub fn n_channels(&self) -> usize {
        self.thresholds.len()
    }

    pub fn clean(&self, r: &Recording) -> Result<Recording, DspError> {
        self.clean_with_report(r).map(|(out, _)| out)
    }

    pub fn clean_with_report(
        &self,
        r: &Recording,
    ) -> Result<(Recording, Vec<AsrWindowReport>), DspError> {
        let c = self.n_channels();
        if r.n_channels() != c {
            return Err(DspError::ChannelMismatch {
                expected: c,
                found: r.n_channels(),
            });
        }
        let w = processing_len(self.window_s, r.fs());
        let h = w / 2;
        let n = r.n_samples();
        let data = r.data();

        // window i starts at (i - 1) * h so every sample sits in exactly two windows
        let n_windows = n.div_ceil(h) + 1;
        let mut gains: Vec<Option<Vec<f64>>> = Vec::with_capacity(n_windows);
        let mut reports = Vec::with_capacity(n_windows);
        for i in 0..n_windows {
            let start = i as isize * h as isize - h as isize;
            let from = start.max(0) as usize;
            let to = ((start + w as isize) as usize).min(n);
            if from >= to {
                gains.push(None);
                continue;
            }
            let rms = component_rms(&self.mixing, data, from, to);
            let g: Vec<f64> = rms
                .iter()
                .zip(&self.thresholds)
                .map(|(&v, &thr)| if v > thr { thr / v } else { 1.0 })
                .collect();
            let attenuated = g.iter().any(|&v| v < 1.0);
            reports.push(AsrWindowReport {
                start,
                component_rms: rms.iter().zip(&g).map(|(v, g)| v * g).collect(),
                attenuated,
            });
            gains.push(attenuated.then_some(g));
        }

        let hann: Vec<f64> = (0..w)
            .map(|j| 0.5 - 0.5 * (2.0 * PI * j as f64 / w as f64).cos())
            .collect();
        let mut out: Vec<Vec<f64>> = data.to_vec();
        let mut comp = vec![0.0; c];
        for t in 0..n {
            let j = t % h;
            let second = t / h + 1;
            let first = second - 1;
            let (ga, gb) = (&gains[first], &gains[second]);
            if ga.is_none() && gb.is_none() {
                continue;
            }
            let (wa, wb) = (hann[j + h], hann[j]);
            for (q, slot) in comp.iter_mut().enumerate() {
                let col = self.mixing.column(q);
                let v: f64 = (0..c).map(|ch| col[ch] * data[ch][t]).sum();
                let gain =
                    wa * ga.as_ref().map_or(1.0, |g| g[q]) + wb * gb.as_ref().map_or(1.0, |g| g[q]);
                *slot = gain * v;
            }
            for (ch, row) in out.iter_mut().enumerate() {
                row[t] = (0..c).map(|q| self.mixing[(ch, q)] * comp[q]).sum();
            }
        }
        Ok((r.with_data(out)?, reports))
    }
}

pub fn asr_clean(m: &AsrModel, r: &Recording) -> Result<Recording, DspError> {
    m.clean(r)
}
