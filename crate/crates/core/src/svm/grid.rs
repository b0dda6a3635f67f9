//! Hyperparameter grid over kernel family, C, gamma and degree.
//!
//! Pair problems are assembled once and dot products between test samples and
//! support vectors are cached across cells.

use std::cell::OnceCell;
use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use super::kernel::dot;
use super::multiclass::{
    class_pairs, finish_pair, indexed_pair, pair_data, pool_pairs, validate_samples, vote, PairData,
};
use super::smo::{solve_with_source, KernelSource};
use super::{KernelKind, KernelSpec, SolverOptions, SvmError};

#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrid {
    pub cells: Vec<KernelSpec>,
}

impl ParamGrid {
    pub fn new(cells: Vec<KernelSpec>) -> Self {
        Self { cells }
    }

    /// Cartesian product per kind. Linear ignores `gammas` and `degrees`,
    /// rbf ignores `degrees`.
    pub fn product(
        kinds: &[KernelKind],
        cs: &[f64],
        gammas: &[f64],
        degrees: &[u32],
        coef0: f64,
    ) -> Self {
        let mut cells = Vec::new();
        for &kind in kinds {
            for &c in cs {
                match kind {
                    KernelKind::Linear => cells.push(KernelSpec::linear(c)),
                    KernelKind::Rbf => cells.extend(gammas.iter().map(|&g| KernelSpec::rbf(c, g))),
                    KernelKind::Polynomial => {
                        for &d in degrees {
                            cells.extend(
                                gammas
                                    .iter()
                                    .map(|&g| KernelSpec::polynomial(c, g, d, coef0)),
                            );
                        }
                    }
                }
            }
        }
        Self { cells }
    }

    /// Linear C ∈ {0.1, 1, 10, 100}; polynomial C = 1, coef0 = 0, degree ∈ {2, 3, 4},
    /// gamma ∈ {0.1, 0.01, 0.001}; rbf C ∈ {1, 10, 100}, gamma ∈ {0.1, 0.01, 0.001}.
    pub fn default_ladder() -> Self {
        let mut g = Self::product(
            &[KernelKind::Linear],
            &[0.1, 1.0, 10.0, 100.0],
            &[],
            &[],
            0.0,
        );
        g.cells.extend(
            Self::product(
                &[KernelKind::Polynomial],
                &[1.0],
                &[0.1, 0.01, 0.001],
                &[2, 3, 4],
                0.0,
            )
            .cells,
        );
        g.cells.extend(
            Self::product(
                &[KernelKind::Rbf],
                &[1.0, 10.0, 100.0],
                &[0.1, 0.01, 0.001],
                &[],
                0.0,
            )
            .cells,
        );
        g
    }

    pub fn only(&self, kinds: &[KernelKind]) -> Self {
        Self {
            cells: self
                .cells
                .iter()
                .filter(|k| kinds.contains(&k.kind))
                .copied()
                .collect(),
        }
    }
}

/// Outcome of one cell: held-out accuracy, or why training failed.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub kernel: KernelSpec,
    pub accuracy: Result<f64, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridReport {
    /// Grid order.
    pub rows: Vec<GridRow>,
}

impl GridReport {
    /// Successful rows by descending accuracy; equal accuracies keep grid order.
    pub fn ranked(&self) -> Vec<&GridRow> {
        let mut ok: Vec<&GridRow> = self.rows.iter().filter(|r| r.accuracy.is_ok()).collect();
        ok.sort_by(|a, b| {
            b.accuracy
                .as_ref()
                .unwrap()
                .total_cmp(a.accuracy.as_ref().unwrap())
        });
        ok
    }

    pub fn best(&self) -> Option<&GridRow> {
        self.ranked().into_iter().next()
    }

    pub fn best_of(&self, kind: KernelKind) -> Option<&GridRow> {
        self.ranked().into_iter().find(|r| r.kernel.kind == kind)
    }
}

/// Columns `kernel,c,gamma,degree,coef0,accuracy,error`; unused parameters are blank.
pub fn write_grid_csv(path: impl AsRef<Path>, report: &GridReport) -> Result<(), SvmError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "kernel,c,gamma,degree,coef0,accuracy,error")?;
    for r in &report.rows {
        let k = &r.kernel;
        let (gamma, degree, coef0) = match k.kind {
            KernelKind::Linear => (String::new(), String::new(), String::new()),
            KernelKind::Rbf => (k.gamma.to_string(), String::new(), String::new()),
            KernelKind::Polynomial => (
                k.gamma.to_string(),
                k.degree.to_string(),
                k.coef0.to_string(),
            ),
        };
        let (acc, err) = match &r.accuracy {
            Ok(a) => (a.to_string(), String::new()),
            Err(e) => (String::new(), format!("\"{}\"", e.replace('"', "'"))),
        };
        writeln!(
            out,
            "{},{},{gamma},{degree},{coef0},{acc},{err}",
            k.kind.name(),
            k.c
        )?;
    }
    out.flush()?;
    Ok(())
}

struct CrossDots<'a> {
    train: &'a [Vec<f64>],
    test: &'a [Vec<f64>],
    /// Per training sample, its dot products with every test sample.
    columns: Vec<OnceCell<Vec<f64>>>,
}

impl CrossDots<'_> {
    fn column(&self, g: usize) -> &[f64] {
        self.columns[g].get_or_init(|| self.test.iter().map(|t| dot(&self.train[g], t)).collect())
    }
}

#[allow(clippy::too_many_arguments)]
fn evaluate_cell(
    kernel: KernelSpec,
    pairs: &[PairData],
    cross: &CrossDots<'_>,
    train_norms: &[f64],
    test_norms: &[f64],
    classes: &[u32],
    test_y: &[u32],
    opts: SolverOptions,
) -> Result<f64, SvmError> {
    kernel.validate()?;
    let indexed = pairs
        .par_iter()
        .map(|p| {
            let src = KernelSource::new(&p.x, kernel);
            let sol = finish_pair(p, solve_with_source(&src, &p.y, opts.tol, opts.max_passes))?;
            Ok(indexed_pair(p, &sol))
        })
        .collect::<Result<Vec<_>, SvmError>>()?;
    let (pool, machines) = pool_pairs(indexed);
    // kernel values, pool-major
    let kv: Vec<Vec<f64>> = pool
        .iter()
        .map(|&g| {
            let col = cross.column(g);
            (0..test_norms.len())
                .map(|t| kernel.from_dots(col[t], train_norms[g], test_norms[t]))
                .collect()
        })
        .collect();
    let labels: Vec<(u32, u32)> = machines.iter().map(|m| (m.pos, m.neg)).collect();
    let correct = (0..test_norms.len())
        .filter(|&t| {
            let f: Vec<f64> = machines
                .iter()
                .map(|m| {
                    m.support
                        .iter()
                        .zip(&m.dual_coef)
                        .map(|(&s, d)| d * kv[s][t])
                        .sum::<f64>()
                        + m.bias
                })
                .collect();
            vote(classes, &labels, &f) == test_y[t]
        })
        .count();
    Ok(correct as f64 / test_y.len() as f64)
}

/// Trains every cell on the training split and scores it on the test split.
/// A cell whose training fails is reported with its error instead of aborting.
pub fn grid_search(
    train_x: &[Vec<f64>],
    train_y: &[u32],
    test_x: &[Vec<f64>],
    test_y: &[u32],
    grid: &ParamGrid,
    opts: SolverOptions,
) -> Result<GridReport, SvmError> {
    if grid.cells.is_empty() {
        return Err(SvmError::EmptyGrid);
    }
    let d = validate_samples(train_x, train_y.len())?;
    let dt = validate_samples(test_x, test_y.len())?;
    if d != dt {
        return Err(SvmError::DimensionMismatch {
            expected: d,
            found: dt,
        });
    }
    let classes: Vec<u32> = train_y
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if classes.len() < 2 {
        return Err(SvmError::SingleClassInput);
    }
    let pairs: Vec<PairData> = class_pairs(&classes)
        .into_iter()
        .map(|(a, b)| pair_data(train_x, train_y, a, b))
        .collect();
    let cross = CrossDots {
        train: train_x,
        test: test_x,
        columns: (0..train_x.len()).map(|_| OnceCell::new()).collect(),
    };
    let train_norms: Vec<f64> = train_x.iter().map(|r| dot(r, r)).collect();
    let test_norms: Vec<f64> = test_x.iter().map(|r| dot(r, r)).collect();

    let rows = grid
        .cells
        .iter()
        .map(|&kernel| GridRow {
            kernel,
            accuracy: evaluate_cell(
                kernel,
                &pairs,
                &cross,
                &train_norms,
                &test_norms,
                &classes,
                test_y,
                opts,
            )
            .map_err(|e| e.to_string()),
        })
        .collect();
    Ok(GridReport { rows })
}
