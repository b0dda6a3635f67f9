//! Binary soft-margin SVM trained with sequential minimal optimization.
//!
//! Each step optimizes two multipliers analytically. The pair is the one with
//! the largest `E_j - E_i` among pairs whose multipliers can still move in the
//! improving direction (maximal violating pair), with `E_t = f(x_t) - y_t`
//! cached for every point. The solver stops once that gap falls below `tol`,
//! which bounds every KKT residual at the averaged bias by `tol`.

use std::borrow::Cow;
use std::cell::OnceCell;

use super::kernel::dot;
use super::{KernelSpec, SvmError};

pub const DEFAULT_TOL: f64 = 1e-3;
/// One pass is `n` pair updates for an `n`-sample problem.
pub const DEFAULT_MAX_PASSES: usize = 10_000;
/// Pair problems up to this many samples keep the whole kernel matrix.
pub const KERNEL_CACHE_LIMIT: usize = 4096;

const STEP_EPS: f64 = 1e-12;

/// Decision function `f(x) = Σ dual_i K(sv_i, x) + bias` with `dual_i = α_i y_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySvm {
    pub support_vectors: Vec<Vec<f64>>,
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub kernel: KernelSpec,
}

impl BinarySvm {
    pub fn dim(&self) -> usize {
        self.support_vectors.first().map_or(0, Vec::len)
    }

    pub fn decision(&self, x: &[f64]) -> Result<f64, SvmError> {
        if !self.support_vectors.is_empty() && x.len() != self.dim() {
            return Err(SvmError::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let xx = dot(x, x);
        Ok(self
            .support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, d)| d * self.kernel.from_dots(dot(sv, x), dot(sv, sv), xx))
            .sum::<f64>()
            + self.bias)
    }
}

/// Full solver output, including the multipliers of non-support vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    /// `Σα − ½ ΣΣ α_i α_j y_i y_j K_ij`
    pub dual_objective: f64,
    /// Largest KKT violation over all points at the returned `(α, b)`.
    pub kkt_violation: f64,
    pub passes: usize,
    pub converged: bool,
}

/// Largest violation of the soft-margin KKT conditions given margins `y_i f(x_i)`.
pub fn kkt_violation(alpha: &[f64], margins: &[f64], c: f64) -> f64 {
    alpha
        .iter()
        .zip(margins)
        .map(|(&a, &m)| {
            let r = m - 1.0;
            if a <= 0.0 {
                (-r).max(0.0)
            } else if a >= c {
                r.max(0.0)
            } else {
                r.abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Kernel access for one training problem. Rows are computed the first time
/// the solver asks for them and kept when the problem is small enough.
pub(crate) struct KernelSource<'a> {
    x: &'a [Vec<f64>],
    norms: Vec<f64>,
    kernel: KernelSpec,
    rows: Vec<OnceCell<Vec<f64>>>,
}

impl<'a> KernelSource<'a> {
    pub(crate) fn new(x: &'a [Vec<f64>], kernel: KernelSpec) -> Self {
        Self::build(x, kernel, x.len() <= KERNEL_CACHE_LIMIT)
    }

    fn build(x: &'a [Vec<f64>], kernel: KernelSpec, cache: bool) -> Self {
        let rows = if cache {
            (0..x.len()).map(|_| OnceCell::new()).collect()
        } else {
            Vec::new()
        };
        Self {
            x,
            norms: x.iter().map(|r| dot(r, r)).collect(),
            kernel,
            rows,
        }
    }

    #[inline]
    fn k(&self, i: usize, j: usize) -> f64 {
        match self.rows.get(i).and_then(OnceCell::get) {
            Some(row) => row[j],
            None => {
                self.kernel
                    .from_dots(dot(&self.x[i], &self.x[j]), self.norms[i], self.norms[j])
            }
        }
    }

    fn compute_row(&self, i: usize) -> Vec<f64> {
        (0..self.x.len())
            .map(|j| {
                self.kernel
                    .from_dots(dot(&self.x[i], &self.x[j]), self.norms[i], self.norms[j])
            })
            .collect()
    }

    fn row(&self, i: usize) -> Cow<'_, [f64]> {
        match self.rows.get(i) {
            Some(cell) => Cow::Borrowed(cell.get_or_init(|| self.compute_row(i))),
            None => Cow::Owned(self.compute_row(i)),
        }
    }
}

struct Smo<'a> {
    src: &'a KernelSource<'a>,
    y: &'a [f64],
    c: f64,
    alpha: Vec<f64>,
    /// `Σ_j α_j y_j K_tj - y_t`, i.e. `E_t` without the bias.
    err: Vec<f64>,
}

impl Smo<'_> {
    fn is_free(&self, i: usize) -> bool {
        self.alpha[i] > 0.0 && self.alpha[i] < self.c
    }

    /// Can move so that `y_t f(x_t)` grows.
    fn in_up(&self, t: usize) -> bool {
        if self.y[t] > 0.0 {
            self.alpha[t] < self.c
        } else {
            self.alpha[t] > 0.0
        }
    }

    /// Can move so that `y_t f(x_t)` shrinks.
    fn in_low(&self, t: usize) -> bool {
        if self.y[t] > 0.0 {
            self.alpha[t] > 0.0
        } else {
            self.alpha[t] < self.c
        }
    }

    /// `(i, j, E_j - E_i)` with `i` minimizing `E` over the up set and `j`
    /// maximizing it over the low set. Ties go to the lower index.
    fn violating_pair(&self) -> Option<(usize, usize, f64)> {
        let mut up: Option<usize> = None;
        let mut low: Option<usize> = None;
        for t in 0..self.alpha.len() {
            if self.in_up(t) && up.is_none_or(|u| self.err[t] < self.err[u]) {
                up = Some(t);
            }
            if self.in_low(t) && low.is_none_or(|l| self.err[t] > self.err[l]) {
                low = Some(t);
            }
        }
        let (i, j) = (up?, low?);
        Some((i, j, self.err[j] - self.err[i]))
    }

    fn snap(&self, a: f64) -> f64 {
        let slack = 1e-12 * self.c;
        if a < slack {
            0.0
        } else if a > self.c - slack {
            self.c
        } else {
            a
        }
    }

    fn take_step(&mut self, i1: usize, i2: usize) -> bool {
        if i1 == i2 {
            return false;
        }
        let (a1, a2) = (self.alpha[i1], self.alpha[i2]);
        let (y1, y2) = (self.y[i1], self.y[i2]);
        let s = y1 * y2;
        let c = self.c;
        let (lo, hi) = if y1 != y2 {
            ((a2 - a1).max(0.0), (c + a2 - a1).min(c))
        } else {
            ((a1 + a2 - c).max(0.0), (a1 + a2).min(c))
        };
        if hi - lo <= 1e-15 * c {
            return false;
        }
        let eta = self.src.k(i1, i1) + self.src.k(i2, i2) - 2.0 * self.src.k(i1, i2);
        let slope = y2 * (self.err[i1] - self.err[i2]);

        let a2_new = self.snap(if eta > 0.0 {
            (a2 + slope / eta).clamp(lo, hi)
        } else {
            // objective is linear or convex along the constraint line: best endpoint wins
            let gain = |t: f64| slope * t - 0.5 * eta * t * t;
            if gain(lo - a2) >= gain(hi - a2) {
                lo
            } else {
                hi
            }
        });
        if (a2_new - a2).abs() <= STEP_EPS * c {
            return false;
        }
        let a1_new = self.snap(a1 + s * (a2 - a2_new));

        let d1 = y1 * (a1_new - a1);
        let d2 = y2 * (a2_new - a2);
        let r1 = self.src.row(i1);
        let r2 = self.src.row(i2);
        for (k, e) in self.err.iter_mut().enumerate() {
            *e += d1 * r1[k] + d2 * r2[k];
        }
        self.alpha[i1] = a1_new;
        self.alpha[i2] = a2_new;
        true
    }

    /// `Σ_j α_j y_j K_ij` for every i.
    fn fresh_sums(&self) -> Vec<f64> {
        let n = self.alpha.len();
        let mut out = vec![0.0; n];
        for j in (0..n).filter(|&j| self.alpha[j] > 0.0) {
            let w = self.alpha[j] * self.y[j];
            let row = self.src.row(j);
            for (o, kv) in out.iter_mut().zip(row.iter()) {
                *o += w * kv;
            }
        }
        out
    }

    /// Average over free vectors, or the midpoint of the feasible interval
    /// when every multiplier sits at a bound.
    fn final_bias(&self, sums: &[f64]) -> f64 {
        let free: Vec<usize> = (0..self.alpha.len()).filter(|&i| self.is_free(i)).collect();
        if !free.is_empty() {
            return free.iter().map(|&i| self.y[i] - sums[i]).sum::<f64>() / free.len() as f64;
        }
        let (mut lower, mut upper) = (f64::NEG_INFINITY, f64::INFINITY);
        #[allow(clippy::needless_range_loop)]
        for i in 0..self.alpha.len() {
            let edge = self.y[i] - sums[i];
            let at_zero = self.alpha[i] <= 0.0;
            // y=+1 at zero, or y=-1 at C, bounds b from below
            if at_zero == (self.y[i] > 0.0) {
                lower = lower.max(edge);
            } else {
                upper = upper.min(edge);
            }
        }
        match (lower.is_finite(), upper.is_finite()) {
            (true, true) => 0.5 * (lower + upper),
            (true, false) => lower,
            (false, true) => upper,
            (false, false) => 0.0,
        }
    }
}

fn check_inputs(x: &[Vec<f64>], y: &[f64], kernel: &KernelSpec) -> Result<(), SvmError> {
    kernel.validate()?;
    if x.len() != y.len() {
        return Err(SvmError::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.is_empty() {
        return Err(SvmError::EmptyInput);
    }
    let d = x[0].len();
    for (i, row) in x.iter().enumerate() {
        if row.len() != d {
            return Err(SvmError::DimensionMismatch {
                expected: d,
                found: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(SvmError::NonFiniteInput { row: i });
        }
    }
    if let Some(bad) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(SvmError::InvalidLabel(*bad));
    }
    if !(y.contains(&1.0) && y.contains(&-1.0)) {
        return Err(SvmError::SingleClassInput);
    }
    Ok(())
}

fn tol_ok(tol: f64) -> bool {
    tol > 0.0 && tol.is_finite()
}

pub(crate) fn solve_with_source(
    src: &KernelSource<'_>,
    y: &[f64],
    tol: f64,
    max_passes: usize,
) -> Result<SmoSolution, SvmError> {
    if !tol_ok(tol) {
        return Err(SvmError::InvalidKernel(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let n = y.len();
    let mut smo = Smo {
        src,
        y,
        c: src.kernel.c,
        alpha: vec![0.0; n],
        err: y.iter().map(|v| -v).collect(),
    };
    let budget = max_passes.saturating_mul(n);
    let mut steps = 0usize;
    loop {
        let round_start = steps;
        let mut stalled = false;
        while steps < budget {
            match smo.violating_pair() {
                Some((i, j, gap)) if gap > tol => {
                    if !smo.take_step(i, j) {
                        stalled = true;
                        break;
                    }
                    steps += 1;
                }
                _ => break,
            }
        }

        let sums = smo.fresh_sums();
        let bias = smo.final_bias(&sums);
        let margins: Vec<f64> = (0..n).map(|i| y[i] * (sums[i] + bias)).collect();
        let violation = kkt_violation(&smo.alpha, &margins, smo.c);
        if violation <= tol || stalled || steps >= budget || steps == round_start {
            let dual_objective = smo.alpha.iter().sum::<f64>()
                - 0.5 * (0..n).map(|i| smo.alpha[i] * y[i] * sums[i]).sum::<f64>();
            return Ok(SmoSolution {
                alpha: smo.alpha,
                bias,
                dual_objective,
                kkt_violation: violation,
                passes: steps.div_ceil(n.max(1)),
                converged: violation <= tol,
            });
        }
        // cached errors drifted from the exact sums; resynchronize and continue
        for i in 0..n {
            smo.err[i] = sums[i] - y[i];
        }
    }
}

/// Solves the dual and returns every multiplier, whether or not it converged.
pub fn solve_dual(
    x: &[Vec<f64>],
    y: &[f64],
    kernel: &KernelSpec,
    tol: f64,
    max_passes: usize,
) -> Result<SmoSolution, SvmError> {
    check_inputs(x, y, kernel)?;
    solve_with_source(&KernelSource::new(x, *kernel), y, tol, max_passes)
}

pub(crate) fn to_machine(
    x: &[Vec<f64>],
    y: &[f64],
    kernel: KernelSpec,
    sol: &SmoSolution,
) -> BinarySvm {
    let mut support_vectors = Vec::new();
    let mut dual_coef = Vec::new();
    for i in (0..x.len()).filter(|&i| sol.alpha[i] > 0.0) {
        support_vectors.push(x[i].clone());
        dual_coef.push(sol.alpha[i] * y[i]);
    }
    BinarySvm {
        support_vectors,
        dual_coef,
        bias: sol.bias,
        kernel,
    }
}

/// Trains a binary machine on labels in `{-1, +1}`. Fails with
/// [`SvmError::NonConvergence`] when `max_passes` runs out first.
pub fn train_binary_smo(
    x: &[Vec<f64>],
    y: &[f64],
    kernel: &KernelSpec,
    tol: f64,
    max_passes: usize,
) -> Result<BinarySvm, SvmError> {
    let sol = solve_dual(x, y, kernel, tol, max_passes)?;
    if !sol.converged {
        return Err(SvmError::NonConvergence {
            passes: sol.passes,
            violation: sol.kkt_violation,
        });
    }
    Ok(to_machine(x, y, *kernel, &sol))
}
