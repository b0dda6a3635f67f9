//! Second-order IIR sections: powerline notch and Butterworth bandpass.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::DspError;
use crate::signal_io::Recording;

/// One biquad, `a0` normalized to 1:
///
/// ```text
/// H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiquadSection {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl BiquadSection {
    pub const IDENTITY: Self = Self {
        b0: 1.0,
        b1: 0.0,
        b2: 0.0,
        a1: 0.0,
        a2: 0.0,
    };

    /// Roots of `z^2 + a1 z + a2`.
    pub fn poles(&self) -> [Complex64; 2] {
        let disc = Complex64::new(self.a1 * self.a1 - 4.0 * self.a2, 0.0).sqrt();
        [(-self.a1 + disc) / 2.0, (-self.a1 - disc) / 2.0]
    }

    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|p| p.norm() < 1.0)
    }

    /// Complex response at `freq_hz`.
    pub fn response(&self, freq_hz: f64, fs: f64) -> Complex64 {
        let zi = Complex64::from_polar(1.0, -2.0 * PI * freq_hz / fs);
        let zi2 = zi * zi;
        (self.b0 + self.b1 * zi + self.b2 * zi2) / (1.0 + self.a1 * zi + self.a2 * zi2)
    }

    /// Direct form II transposed, zero initial state.
    pub fn filter_in_place(&self, x: &mut [f64]) {
        let (mut s1, mut s2) = (0.0, 0.0);
        for v in x.iter_mut() {
            let input = *v;
            let y = self.b0 * input + s1;
            s1 = self.b1 * input - self.a1 * y + s2;
            s2 = self.b2 * input - self.a2 * y;
            *v = y;
        }
    }
}

/// Biquads applied in order.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterCascade {
    sections: Vec<BiquadSection>,
}

impl FilterCascade {
    pub fn new(sections: Vec<BiquadSection>) -> Result<Self, DspError> {
        if sections.is_empty() {
            return Err(DspError::EmptyCascade);
        }
        Ok(Self { sections })
    }

    pub fn sections(&self) -> &[BiquadSection] {
        &self.sections
    }

    pub fn is_stable(&self) -> bool {
        self.sections.iter().all(BiquadSection::is_stable)
    }

    pub fn response(&self, freq_hz: f64, fs: f64) -> Complex64 {
        self.sections
            .iter()
            .map(|s| s.response(freq_hz, fs))
            .fold(Complex64::new(1.0, 0.0), |acc, h| acc * h)
    }

    pub fn magnitude_db(&self, freq_hz: f64, fs: f64) -> f64 {
        20.0 * self.response(freq_hz, fs).norm().log10()
    }

    pub fn filter_in_place(&self, x: &mut [f64]) {
        for s in &self.sections {
            s.filter_in_place(x);
        }
    }

    /// Concatenates two cascades, `self` first.
    pub fn then(mut self, other: &FilterCascade) -> Self {
        self.sections.extend_from_slice(&other.sections);
        self
    }
}

impl From<BiquadSection> for FilterCascade {
    fn from(s: BiquadSection) -> Self {
        Self { sections: vec![s] }
    }
}

fn check_band(f: f64, fs: f64) -> Result<(), DspError> {
    if !(fs > 0.0 && f > 0.0 && f < fs / 2.0) {
        return Err(DspError::FrequencyOutOfRange { freq_hz: f, fs });
    }
    Ok(())
}

/// Constrained pole-zero notch: zeros on the unit circle at `f0`, poles at the
/// same angle pulled inward by the quality factor. Unit gain at DC and Nyquist.
pub fn design_notch(f0: f64, q: f64, fs: f64) -> Result<BiquadSection, DspError> {
    check_band(f0, fs)?;
    if !(q > 0.0 && q.is_finite()) {
        return Err(DspError::InvalidParameter(format!(
            "notch q must be positive, got {q}"
        )));
    }
    let w0 = 2.0 * PI * f0 / fs;
    let alpha = w0.sin() / (2.0 * q);
    let cw = w0.cos();
    let a0 = 1.0 + alpha;
    Ok(BiquadSection {
        b0: 1.0 / a0,
        b1: -2.0 * cw / a0,
        b2: 1.0 / a0,
        a1: -2.0 * cw / a0,
        a2: (1.0 - alpha) / a0,
    })
}

/// Bilinear-transform Butterworth bandpass of total order `order` (even),
/// built from an `order / 2` analog lowpass prototype with prewarped edges.
/// Returns `order / 2` sections normalized to unit gain at the center
/// frequency.
pub fn design_butterworth_bandpass(
    order: usize,
    f_lo: f64,
    f_hi: f64,
    fs: f64,
) -> Result<FilterCascade, DspError> {
    if order == 0 || !order.is_multiple_of(2) {
        return Err(DspError::UnsupportedOrder(order));
    }
    check_band(f_lo, fs)?;
    check_band(f_hi, fs)?;
    if f_lo >= f_hi {
        return Err(DspError::FrequencyOutOfRange { freq_hz: f_lo, fs });
    }
    let proto_order = order / 2;
    let warp = |f: f64| 2.0 * fs * (PI * f / fs).tan();
    let (w_lo, w_hi) = (warp(f_lo), warp(f_hi));
    let bw = w_hi - w_lo;
    let w0_sq = w_lo * w_hi;
    let center_hz = fs / PI * (w0_sq.sqrt() / (2.0 * fs)).atan();

    let bilinear = |s: Complex64| (1.0 + s / (2.0 * fs)) / (1.0 - s / (2.0 * fs));
    let proto_pole = |k: usize| {
        let theta = PI * (2 * k + proto_order + 1) as f64 / (2 * proto_order) as f64;
        Complex64::from_polar(1.0, theta)
    };

    // Each prototype pole p maps to the roots of s^2 - p*bw*s + w0^2.
    // Upper-half-plane prototype poles give two sections (their conjugates
    // supply the partner poles); a real prototype pole gives one.
    let mut pole_pairs: Vec<[Complex64; 2]> = Vec::with_capacity(proto_order);
    for k in 0..proto_order {
        let p = proto_pole(k);
        if p.im < -1e-12 {
            continue;
        }
        let b = p * bw;
        let disc = (b * b - 4.0 * w0_sq).sqrt();
        let roots = [(b + disc) / 2.0, (b - disc) / 2.0];
        if p.im.abs() <= 1e-12 {
            pole_pairs.push([bilinear(roots[0]), bilinear(roots[1])]);
        } else {
            for r in roots {
                let z = bilinear(r);
                pole_pairs.push([z, z.conj()]);
            }
        }
    }

    let sections = pole_pairs
        .into_iter()
        .map(|[p1, p2]| {
            let a1 = -(p1 + p2).re;
            let a2 = (p1 * p2).re;
            // zeros at z = 1 and z = -1
            let raw = BiquadSection {
                b0: 1.0,
                b1: 0.0,
                b2: -1.0,
                a1,
                a2,
            };
            let g = 1.0 / raw.response(center_hz, fs).norm();
            BiquadSection {
                b0: g,
                b1: 0.0,
                b2: -g,
                a1,
                a2,
            }
        })
        .collect();
    FilterCascade::new(sections)
}

/// Filters every channel independently with zero initial state.
pub fn apply_filter(f: &FilterCascade, r: &Recording) -> Result<Recording, DspError> {
    let data: Vec<Vec<f64>> = r
        .data()
        .iter()
        .map(|row| {
            let mut y = row.clone();
            f.filter_in_place(&mut y);
            y
        })
        .collect();
    if let Some((ch, _)) = data
        .iter()
        .enumerate()
        .find(|(_, row)| row.iter().any(|v| !v.is_finite()))
    {
        return Err(DspError::NonFiniteOutput { channel: ch });
    }
    Ok(r.with_data(data)?)
}
