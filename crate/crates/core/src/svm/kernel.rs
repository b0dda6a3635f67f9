use std::fmt;

use super::SvmError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KernelKind {
    Linear,
    Polynomial,
    Rbf,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Linear => "linear",
            KernelKind::Polynomial => "poly",
            KernelKind::Rbf => "rbf",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Some(KernelKind::Linear),
            "poly" | "polynomial" => Some(KernelKind::Polynomial),
            "rbf" => Some(KernelKind::Rbf),
            _ => None,
        }
    }
}

/// Kernel family plus the soft-margin cost `c`.
///
/// `gamma`, `degree` and `coef0` are ignored by kinds that do not use them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub c: f64,
    pub gamma: f64,
    pub degree: u32,
    pub coef0: f64,
}

impl KernelSpec {
    pub fn linear(c: f64) -> Self {
        Self {
            kind: KernelKind::Linear,
            c,
            gamma: 1.0,
            degree: 1,
            coef0: 0.0,
        }
    }

    pub fn polynomial(c: f64, gamma: f64, degree: u32, coef0: f64) -> Self {
        Self {
            kind: KernelKind::Polynomial,
            c,
            gamma,
            degree,
            coef0,
        }
    }

    pub fn rbf(c: f64, gamma: f64) -> Self {
        Self {
            kind: KernelKind::Rbf,
            c,
            gamma,
            degree: 1,
            coef0: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), SvmError> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(SvmError::InvalidKernel(format!(
                "C must be positive, got {}",
                self.c
            )));
        }
        if self.kind != KernelKind::Linear && !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(SvmError::InvalidKernel(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if self.kind == KernelKind::Polynomial && (self.degree == 0 || !self.coef0.is_finite()) {
            return Err(SvmError::InvalidKernel(format!(
                "polynomial needs degree >= 1 and finite coef0, got {} / {}",
                self.degree, self.coef0
            )));
        }
        Ok(())
    }

    /// Kernel value from `x·y`, `x·x` and `y·y`. Every kernel evaluation in
    /// training and prediction goes through here.
    #[inline]
    pub fn from_dots(&self, xy: f64, xx: f64, yy: f64) -> f64 {
        match self.kind {
            KernelKind::Linear => xy,
            KernelKind::Polynomial => (self.gamma * xy + self.coef0).powi(self.degree as i32),
            KernelKind::Rbf => (-self.gamma * (xx + yy - 2.0 * xy).max(0.0)).exp(),
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            KernelKind::Linear => write!(f, "linear(C={})", self.c),
            KernelKind::Polynomial => write!(
                f,
                "poly(C={}, gamma={}, degree={}, coef0={})",
                self.c, self.gamma, self.degree, self.coef0
            ),
            KernelKind::Rbf => write!(f, "rbf(C={}, gamma={})", self.c, self.gamma),
        }
    }
}

#[inline]
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// linear `x·y`, polynomial `(gamma x·y + coef0)^degree`, rbf `exp(-gamma |x - y|^2)`.
pub fn kernel_eval(k: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64, SvmError> {
    if x.len() != y.len() {
        return Err(SvmError::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    Ok(k.from_dots(dot(x, y), dot(x, x), dot(y, y)))
}
