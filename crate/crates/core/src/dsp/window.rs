use super::DspError;
use crate::signal_io::Recording;

pub const WINDOW_S: f64 = 0.8;
pub const HOP_S: f64 = 0.4;

/// A fixed-length multi-channel segment cut from a labelled recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    /// channels × samples, µV
    pub data: Vec<Vec<f64>>,
    pub subject_id: u32,
    /// Offset of the first sample in the source recording.
    pub start_index: usize,
    pub fs: f64,
}

impl Window {
    pub fn n_channels(&self) -> usize {
        self.data.len()
    }

    pub fn len(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Window and hop lengths in samples for a given rate.
pub fn window_geometry(fs: f64, win_s: f64, hop_s: f64) -> (usize, usize) {
    ((win_s * fs).round() as usize, (hop_s * fs).round() as usize)
}

/// Cuts `floor((N - W) / H) + 1` windows; the trailing partial window is dropped.
pub fn segment_windows(
    r: &Recording,
    subject_id: u32,
    win_s: f64,
    hop_s: f64,
) -> Result<Vec<Window>, DspError> {
    let (w, h) = window_geometry(r.fs(), win_s, hop_s);
    if w == 0 || h == 0 {
        return Err(DspError::InvalidParameter(format!(
            "window {win_s} s / hop {hop_s} s round to zero samples at {} Hz",
            r.fs()
        )));
    }
    let n = r.n_samples();
    if n < w {
        return Err(DspError::RecordingTooShort {
            samples: n,
            needed: w,
        });
    }
    let count = (n - w) / h + 1;
    Ok((0..count)
        .map(|k| {
            let start = k * h;
            Window {
                data: r
                    .data()
                    .iter()
                    .map(|row| row[start..start + w].to_vec())
                    .collect(),
                subject_id,
                start_index: start,
                fs: r.fs(),
            }
        })
        .collect())
}
