//! Independent reference implementations used by the integration tests.
//!
//! Nothing here calls into the library's numeric code: moments use compensated
//! two-pass sums, spectra use a direct O(n²) DFT, filter responses evaluate the
//! transfer polynomials directly, and the SVM dual is solved by accelerated
//! projected gradient.

#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;

pub fn rng(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// Neumaier-compensated sum.
pub fn ksum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = s + v;
        if s.abs() >= v.abs() {
            c += (s - t) + v;
        } else {
            c += (v - t) + s;
        }
        s = t;
    }
    s + c
}

pub fn mean(x: &[f64]) -> f64 {
    ksum(x.iter().copied()) / x.len() as f64
}

/// Population central moment of order `k`.
pub fn central(x: &[f64], k: i32) -> f64 {
    let mu = mean(x);
    ksum(x.iter().map(|v| (v - mu).powi(k))) / x.len() as f64
}

pub fn rms(x: &[f64]) -> f64 {
    (ksum(x.iter().map(|v| v * v)) / x.len() as f64).sqrt()
}

pub fn diff(x: &[f64]) -> Vec<f64> {
    (1..x.len()).map(|i| x[i] - x[i - 1]).collect()
}

/// Histogram with explicit edges `lo + k (hi - lo) / bins`, last bin closed.
pub fn shannon(x: &[f64], bins: usize) -> f64 {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return 0.0;
    }
    let edges: Vec<f64> = (0..=bins)
        .map(|k| lo + (hi - lo) * k as f64 / bins as f64)
        .collect();
    let mut counts = vec![0usize; bins];
    for &v in x {
        let k = (0..bins).find(|&k| v < edges[k + 1]).unwrap_or(bins - 1);
        counts[k] += 1;
    }
    let n = x.len() as f64;
    -ksum(counts.iter().filter(|&&c| c > 0).map(|&c| {
        let p = c as f64 / n;
        p * p.ln()
    }))
}

/// One-sided Hann periodogram via direct DFT: `(frequencies, psd)`.
pub fn psd(x: &[f64], fs: f64) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let mu = mean(x);
    let w: Vec<f64> = (0..n)
        .map(|i| (PI * i as f64 / n as f64).sin().powi(2))
        .collect();
    let u = ksum(w.iter().map(|v| v * v));
    let y: Vec<f64> = (0..n).map(|i| (x[i] - mu) * w[i]).collect();
    let bins = n / 2 + 1;
    let mut p = Vec::with_capacity(bins);
    for k in 0..bins {
        let re = ksum((0..n).map(|t| y[t] * (2.0 * PI * ((k * t) % n) as f64 / n as f64).cos()));
        let im = ksum((0..n).map(|t| -y[t] * (2.0 * PI * ((k * t) % n) as f64 / n as f64).sin()));
        let mut v = (re * re + im * im) / (fs * u);
        if k != 0 && !(n.is_multiple_of(2) && k == n / 2) {
            v *= 2.0;
        }
        p.push(v);
    }
    ((0..bins).map(|k| k as f64 * fs / n as f64).collect(), p)
}

pub fn spectral_entropy(p: &[f64]) -> f64 {
    let total = ksum(p.iter().copied());
    if total <= 0.0 {
        return 0.0;
    }
    -ksum(
        p.iter()
            .filter(|&&v| v > 0.0)
            .map(|&v| (v / total) * (v / total).ln()),
    ) / (p.len() as f64).ln()
}

pub fn band_power(f: &[f64], p: &[f64], lo: f64, hi: f64) -> f64 {
    let idx: Vec<usize> = (0..f.len()).filter(|&i| f[i] >= lo && f[i] <= hi).collect();
    ksum(
        idx.windows(2)
            .map(|w| (f[w[1]] - f[w[0]]) * (p[w[0]] + p[w[1]]) / 2.0),
    )
}

/// The ten per-channel features in library order:
/// rms, std, skew, kurt, hjorth activity/mobility/complexity, shannon, spectral entropy, band power.
pub fn channel_features(x: &[f64], fs: f64) -> [f64; 10] {
    let m2 = central(x, 2);
    let d1 = diff(x);
    let d2 = diff(&d1);
    let v1 = central(&d1, 2);
    let v2 = central(&d2, 2);
    let mob = (v1 / m2).sqrt();
    let (f, p) = psd(x, fs);
    [
        rms(x),
        m2.sqrt(),
        central(x, 3) / m2.powf(1.5),
        central(x, 4) / (m2 * m2),
        m2,
        mob,
        (v2 / v1).sqrt() / mob,
        shannon(x, 16),
        spectral_entropy(&p),
        band_power(&f, &p, 0.1, 100.0),
    ]
}

/// A random-looking EEG-ish channel: a few tones, colored noise and an offset.
pub fn random_channel(r: &mut Xoshiro256PlusPlus, n: usize, fs: f64) -> Vec<f64> {
    let offset = r.random_range(-50.0..50.0);
    let tones: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                r.random_range(1.0..60.0),
                r.random_range(1.0..30.0),
                r.random_range(0.0..2.0 * PI),
            )
        })
        .collect();
    let mut prev = 0.0;
    (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            let g: f64 = StandardNormal.sample(r);
            prev = 0.7 * prev + 5.0 * g;
            offset
                + prev
                + tones
                    .iter()
                    .map(|(f, a, ph)| a * (2.0 * PI * f * t + ph).sin())
                    .sum::<f64>()
        })
        .collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// `H(e^{jω})` of `(b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)` as (re, im).
pub fn biquad_response(b: [f64; 3], a: [f64; 2], f: f64, fs: f64) -> (f64, f64) {
    let w = 2.0 * PI * f / fs;
    let num = (
        b[0] + b[1] * w.cos() + b[2] * (2.0 * w).cos(),
        -(b[1] * w.sin() + b[2] * (2.0 * w).sin()),
    );
    let den = (
        1.0 + a[0] * w.cos() + a[1] * (2.0 * w).cos(),
        -(a[0] * w.sin() + a[1] * (2.0 * w).sin()),
    );
    let d2 = den.0 * den.0 + den.1 * den.1;
    (
        (num.0 * den.0 + num.1 * den.1) / d2,
        (num.1 * den.0 - num.0 * den.1) / d2,
    )
}

/// Largest pole modulus of `z^2 + a1 z + a2`.
pub fn max_pole_modulus(a1: f64, a2: f64) -> f64 {
    let disc = a1 * a1 - 4.0 * a2;
    if disc >= 0.0 {
        let s = disc.sqrt();
        ((-a1 + s) / 2.0).abs().max(((-a1 - s) / 2.0).abs())
    } else {
        // complex pair: |z|^2 = product of roots
        a2.sqrt()
    }
}

/// Kernel as written in textbooks, evaluated from the raw vectors.
#[derive(Debug, Clone, Copy)]
pub enum RefKernel {
    Linear,
    Poly { gamma: f64, coef0: f64, degree: i32 },
    Rbf { gamma: f64 },
}

impl RefKernel {
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            RefKernel::Linear => x.iter().zip(y).map(|(a, b)| a * b).sum(),
            RefKernel::Poly {
                gamma,
                coef0,
                degree,
            } => (gamma * x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() + coef0).powi(degree),
            RefKernel::Rbf { gamma } => {
                (-gamma * x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()).exp()
            }
        }
    }
}

/// Dual objective `Σα − ½ αᵀQα` with `Q_ij = y_i y_j K_ij`.
pub fn dual_objective(q: &[Vec<f64>], alpha: &[f64]) -> f64 {
    let n = alpha.len();
    let quad: f64 = (0..n)
        .map(|i| (0..n).map(|j| alpha[i] * alpha[j] * q[i][j]).sum::<f64>())
        .sum();
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Euclidean projection onto `{0 ≤ α ≤ C, yᵀα = 0}` by bisection on the multiplier.
pub fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |mu: f64| -> Vec<f64> {
        v.iter()
            .zip(y)
            .map(|(vi, yi)| (vi - mu * yi).clamp(0.0, c))
            .collect()
    };
    let balance = |a: &[f64]| a.iter().zip(y).map(|(ai, yi)| ai * yi).sum::<f64>();
    let span = v.iter().fold(0.0f64, |m, x| m.max(x.abs())) + c + 1.0;
    let (mut lo, mut hi) = (-span, span);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        // balance is non-increasing in mu
        if balance(&at(mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Maximizes the soft-margin dual by FISTA-accelerated projected gradient.
pub fn solve_dual_pg(q: &[Vec<f64>], y: &[f64], c: f64, iters: usize) -> Vec<f64> {
    let n = y.len();
    // step from a Gershgorin bound on the largest eigenvalue
    let l = (0..n)
        .map(|i| q[i].iter().map(|v| v.abs()).sum::<f64>())
        .fold(1e-12, f64::max);
    let grad = |a: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| 1.0 - (0..n).map(|j| q[i][j] * a[j]).sum::<f64>())
            .collect()
    };
    let mut a = vec![0.0; n];
    let mut z = a.clone();
    let mut t = 1.0f64;
    for _ in 0..iters {
        let g = grad(&z);
        let step: Vec<f64> = (0..n).map(|i| z[i] + g[i] / l).collect();
        let next = project(&step, y, c);
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        z = (0..n)
            .map(|i| next[i] + (t - 1.0) / t_next * (next[i] - a[i]))
            .collect();
        // restart momentum when the objective drops
        if dual_objective(q, &next) < dual_objective(q, &a) {
            z = next.clone();
            t = 1.0;
        } else {
            t = t_next;
        }
        a = next;
    }
    a
}

/// Majority vote recount: wins, then summed |f| over won pairs, then lowest label.
pub fn vote(classes: &[u32], decisions: &[f64]) -> u32 {
    let mut wins = std::collections::BTreeMap::<u32, (usize, f64)>::new();
    let mut p = 0;
    for i in 0..classes.len() {
        for j in i + 1..classes.len() {
            let f = decisions[p];
            let w = if f > 0.0 { classes[i] } else { classes[j] };
            let e = wins.entry(w).or_insert((0, 0.0));
            e.0 += 1;
            e.1 += f.abs();
            p += 1;
        }
    }
    let mut best = (classes[0], 0usize, f64::NEG_INFINITY);
    for &c in classes {
        let (n, s) = wins.get(&c).copied().unwrap_or((0, 0.0));
        if n > best.1 || (n == best.1 && s > best.2) || best.2 == f64::NEG_INFINITY {
            best = (c, n, s);
        }
    }
    best.0
}

pub fn gaussian(r: &mut Xoshiro256PlusPlus) -> f64 {
    StandardNormal.sample(r)
}
