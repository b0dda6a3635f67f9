//! One-vs-one multiclass SVM: `k(k-1)/2` binary machines over a shared
//! support-vector pool, combined by majority vote.

use std::collections::BTreeSet;

use rayon::prelude::*;

use super::kernel::dot;
use super::smo::{solve_with_source, KernelSource, SmoSolution};
use super::{KernelSpec, SolverOptions, SvmError};

/// Binary machine for `pos` (+1) against `neg` (-1). `support` indexes the
/// shared pool of the owning [`MulticlassSvm`].
#[derive(Debug, Clone, PartialEq)]
pub struct PairMachine {
    pub pos: u32,
    pub neg: u32,
    pub support: Vec<usize>,
    pub dual_coef: Vec<f64>,
    pub bias: f64,
}

impl PairMachine {
    fn decision(&self, kernel_row: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.dual_coef)
            .map(|(&s, d)| d * kernel_row[s])
            .sum::<f64>()
            + self.bias
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassSvm {
    pub kernel: KernelSpec,
    /// Sorted ascending.
    pub classes: Vec<u32>,
    pub support_vectors: Vec<Vec<f64>>,
    /// In [`class_pairs`] order.
    pub pairs: Vec<PairMachine>,
}

/// All `(classes[i], classes[j])` with `i < j`, lexicographic.
pub fn class_pairs(classes: &[u32]) -> Vec<(u32, u32)> {
    let mut out = Vec::with_capacity(classes.len() * classes.len().saturating_sub(1) / 2);
    for (i, &a) in classes.iter().enumerate() {
        for &b in &classes[i + 1..] {
            out.push((a, b));
        }
    }
    out
}

/// Majority vote: `decisions[p] > 0` is a vote for `pairs[p].0`, otherwise
/// for `pairs[p].1`. Ties go to the larger summed `|f|` over the votes a class
/// won, then to the lowest label. `classes` must be sorted.
pub fn vote(classes: &[u32], pairs: &[(u32, u32)], decisions: &[f64]) -> u32 {
    let mut wins = vec![0usize; classes.len()];
    let mut strength = vec![0.0f64; classes.len()];
    for (&(a, b), &f) in pairs.iter().zip(decisions) {
        let winner = if f > 0.0 { a } else { b };
        let idx = classes
            .binary_search(&winner)
            .expect("pair label outside class list");
        wins[idx] += 1;
        strength[idx] += f.abs();
    }
    let mut best = 0;
    for i in 1..classes.len() {
        if wins[i] > wins[best] || (wins[i] == wins[best] && strength[i] > strength[best]) {
            best = i;
        }
    }
    classes[best]
}

pub(crate) fn validate_samples(x: &[Vec<f64>], labels_len: usize) -> Result<usize, SvmError> {
    if x.len() != labels_len {
        return Err(SvmError::DimensionMismatch {
            expected: x.len(),
            found: labels_len,
        });
    }
    let d = x.first().ok_or(SvmError::EmptyInput)?.len();
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
    Ok(d)
}

/// Samples of one pair problem.
pub(crate) struct PairData {
    pub pos: u32,
    pub neg: u32,
    /// Indices into the full training set.
    pub index: Vec<usize>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

pub(crate) fn pair_data(x: &[Vec<f64>], labels: &[u32], pos: u32, neg: u32) -> PairData {
    let index: Vec<usize> = (0..labels.len())
        .filter(|&i| labels[i] == pos || labels[i] == neg)
        .collect();
    PairData {
        pos,
        neg,
        x: index.iter().map(|&i| x[i].clone()).collect(),
        y: index
            .iter()
            .map(|&i| if labels[i] == pos { 1.0 } else { -1.0 })
            .collect(),
        index,
    }
}

pub(crate) fn finish_pair(
    p: &PairData,
    sol: Result<SmoSolution, SvmError>,
) -> Result<SmoSolution, SvmError> {
    let wrap = |e: SvmError| SvmError::Pair {
        pos: p.pos,
        neg: p.neg,
        source: Box::new(e),
    };
    let sol = sol.map_err(wrap)?;
    if !sol.converged {
        return Err(wrap(SvmError::NonConvergence {
            passes: sol.passes,
            violation: sol.kkt_violation,
        }));
    }
    Ok(sol)
}

/// Pair machines in global training indices: `(pos, neg, [(global, dual)], bias)`.
pub(crate) type IndexedPair = (u32, u32, Vec<(usize, f64)>, f64);

pub(crate) fn indexed_pair(p: &PairData, sol: &SmoSolution) -> IndexedPair {
    let sv = (0..p.index.len())
        .filter(|&i| sol.alpha[i] > 0.0)
        .map(|i| (p.index[i], sol.alpha[i] * p.y[i]))
        .collect();
    (p.pos, p.neg, sv, sol.bias)
}

/// Collapses per-pair support sets into one pool ordered by training index.
pub(crate) fn pool_pairs(indexed: Vec<IndexedPair>) -> (Vec<usize>, Vec<PairMachine>) {
    let pool: Vec<usize> = indexed
        .iter()
        .flat_map(|(_, _, sv, _)| sv.iter().map(|&(g, _)| g))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let pairs = indexed
        .into_iter()
        .map(|(pos, neg, sv, bias)| PairMachine {
            pos,
            neg,
            support: sv
                .iter()
                .map(|(g, _)| pool.binary_search(g).unwrap())
                .collect(),
            dual_coef: sv.iter().map(|&(_, d)| d).collect(),
            bias,
        })
        .collect();
    (pool, pairs)
}

impl MulticlassSvm {
    /// Trains every pair machine; any pair failing to converge fails the fit.
    pub fn train(
        x: &[Vec<f64>],
        labels: &[u32],
        kernel: &KernelSpec,
        opts: SolverOptions,
    ) -> Result<Self, SvmError> {
        kernel.validate()?;
        validate_samples(x, labels.len())?;
        let classes: Vec<u32> = labels
            .iter()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if classes.len() < 2 {
            return Err(SvmError::SingleClassInput);
        }
        let indexed = class_pairs(&classes)
            .into_par_iter()
            .map(|(pos, neg)| {
                let p = pair_data(x, labels, pos, neg);
                let src = KernelSource::new(&p.x, *kernel);
                let sol =
                    finish_pair(&p, solve_with_source(&src, &p.y, opts.tol, opts.max_passes))?;
                Ok(indexed_pair(&p, &sol))
            })
            .collect::<Result<Vec<_>, SvmError>>()?;
        let (pool, pairs) = pool_pairs(indexed);
        Ok(Self {
            kernel: *kernel,
            classes,
            support_vectors: pool.iter().map(|&g| x[g].clone()).collect(),
            pairs,
        })
    }

    pub fn dim(&self) -> usize {
        self.support_vectors.first().map_or(0, Vec::len)
    }

    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn pair_labels(&self) -> Vec<(u32, u32)> {
        self.pairs.iter().map(|p| (p.pos, p.neg)).collect()
    }

    /// Standalone binary machine for pair `p`.
    pub fn binary(&self, p: usize) -> super::BinarySvm {
        let m = &self.pairs[p];
        super::BinarySvm {
            support_vectors: m
                .support
                .iter()
                .map(|&s| self.support_vectors[s].clone())
                .collect(),
            dual_coef: m.dual_coef.clone(),
            bias: m.bias,
            kernel: self.kernel,
        }
    }

    /// One decision value per pair, in [`class_pairs`] order.
    pub fn decision_values(&self, x: &[f64]) -> Result<Vec<f64>, SvmError> {
        if x.len() != self.dim() {
            return Err(SvmError::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let xx = dot(x, x);
        let row: Vec<f64> = self
            .support_vectors
            .iter()
            .map(|sv| self.kernel.from_dots(dot(sv, x), dot(sv, sv), xx))
            .collect();
        Ok(self.pairs.iter().map(|p| p.decision(&row)).collect())
    }

    pub fn predict(&self, x: &[f64]) -> Result<u32, SvmError> {
        let f = self.decision_values(x)?;
        Ok(vote(&self.classes, &self.pair_labels(), &f))
    }

    pub fn predict_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<u32>, SvmError> {
        xs.par_iter().map(|x| self.predict(x)).collect()
    }
}
