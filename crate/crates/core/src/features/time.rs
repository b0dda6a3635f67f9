//! Amplitude, moment, Hjorth and histogram-entropy features.

use super::FeatureError;

/// Central second moment below `DEGENERATE_EPS * max|x|^2` counts as zero variance.
pub const DEGENERATE_EPS: f64 = 1e-20;
pub const SHANNON_BINS: usize = 16;

fn need(x: &[f64], n: usize) -> Result<(), FeatureError> {
    if x.len() < n {
        return Err(FeatureError::TooFewSamples {
            needed: n,
            found: x.len(),
        });
    }
    Ok(())
}

/// Neumaier-compensated running sum. Odd moments of near-symmetric windows
/// cancel heavily, and plain summation would leave them with visible noise.
#[derive(Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(self) -> f64 {
        self.sum + self.carry
    }
}

fn mean(x: &[f64]) -> f64 {
    let mut s = CompensatedSum::default();
    x.iter().for_each(|&v| s.add(v));
    s.total() / x.len() as f64
}

/// Population central moments m2, m3, m4.
fn central_moments(x: &[f64]) -> (f64, f64, f64) {
    let mu = mean(x);
    let n = x.len() as f64;
    let (mut s2, mut s3, mut s4) = (
        CompensatedSum::default(),
        CompensatedSum::default(),
        CompensatedSum::default(),
    );
    for &v in x {
        let d = v - mu;
        let d2 = d * d;
        s2.add(d2);
        s3.add(d2 * d);
        s4.add(d2 * d2);
    }
    (s2.total() / n, s3.total() / n, s4.total() / n)
}

fn is_degenerate(m2: f64, x: &[f64]) -> bool {
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    m2 <= DEGENERATE_EPS * peak * peak
}

fn variance(x: &[f64]) -> f64 {
    central_moments(x).0
}

pub fn rms(x: &[f64]) -> Result<f64, FeatureError> {
    if x.is_empty() {
        return Err(FeatureError::EmptyInput);
    }
    Ok((x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt())
}

/// Population standard deviation.
pub fn std_dev(x: &[f64]) -> Result<f64, FeatureError> {
    need(x, 2)?;
    Ok(variance(x).sqrt())
}

/// `m3 / m2^1.5`; zero for (numerically) constant input.
pub fn skewness(x: &[f64]) -> Result<f64, FeatureError> {
    need(x, 3)?;
    let (m2, m3, _) = central_moments(x);
    if is_degenerate(m2, x) {
        return Ok(0.0);
    }
    Ok(m3 / m2.powf(1.5))
}

/// Pearson kurtosis `m4 / m2^2` (Gaussian ≈ 3); three for constant input.
pub fn kurtosis(x: &[f64]) -> Result<f64, FeatureError> {
    need(x, 4)?;
    let (m2, _, m4) = central_moments(x);
    if is_degenerate(m2, x) {
        return Ok(3.0);
    }
    Ok(m4 / (m2 * m2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hjorth {
    pub activity: f64,
    pub mobility: f64,
    pub complexity: f64,
}

fn diff(x: &[f64]) -> Vec<f64> {
    x.windows(2).map(|w| w[1] - w[0]).collect()
}

pub fn hjorth(x: &[f64]) -> Result<Hjorth, FeatureError> {
    need(x, 3)?;
    let var0 = variance(x);
    if is_degenerate(var0, x) {
        return Ok(Hjorth {
            activity: 0.0,
            mobility: 0.0,
            complexity: 0.0,
        });
    }
    let d1 = diff(x);
    let var1 = variance(&d1);
    let mobility = (var1 / var0).sqrt();
    if is_degenerate(var1, &d1) {
        return Ok(Hjorth {
            activity: var0,
            mobility: 0.0,
            complexity: 0.0,
        });
    }
    let d2 = diff(&d1);
    let mobility_d1 = (variance(&d2) / var1).sqrt();
    Ok(Hjorth {
        activity: var0,
        mobility,
        complexity: mobility_d1 / mobility,
    })
}

/// Natural-log entropy of an equal-width histogram over `[min, max]`.
pub fn shannon_entropy(x: &[f64], bins: usize) -> Result<f64, FeatureError> {
    need(x, 2)?;
    if bins == 0 {
        return Err(FeatureError::InvalidParameter(
            "bins must be positive".into(),
        ));
    }
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if hi <= lo {
        return Ok(0.0);
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in x {
        let idx = (((v - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let n = x.len() as f64;
    Ok(counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum())
}
