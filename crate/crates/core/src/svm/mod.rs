//! Kernel support vector machines: binary SMO training, one-vs-one
//! multiclass voting and a hyperparameter grid.

mod grid;
mod kernel;
mod multiclass;
mod smo;

use thiserror::Error;

pub use grid::{grid_search, write_grid_csv, GridReport, GridRow, ParamGrid};
pub use kernel::{kernel_eval, KernelKind, KernelSpec};
pub use multiclass::{class_pairs, vote, MulticlassSvm, PairMachine};
pub use smo::{
    kkt_violation, solve_dual, train_binary_smo, BinarySvm, SmoSolution, DEFAULT_MAX_PASSES,
    DEFAULT_TOL, KERNEL_CACHE_LIMIT,
};

#[derive(Debug, Error)]
pub enum SvmError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("training data contains a single class")]
    SingleClassInput,
    #[error("SMO did not converge after {passes} passes (KKT violation {violation:.3e})")]
    NonConvergence { passes: usize, violation: f64 },
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("binary labels must be -1 or +1, got {0}")]
    InvalidLabel(f64),
    #[error("no training samples")]
    EmptyInput,
    #[error("non-finite value in sample {row}")]
    NonFiniteInput { row: usize },
    #[error("pair ({pos} vs {neg}): {source}")]
    Pair {
        pos: u32,
        neg: u32,
        #[source]
        source: Box<SvmError>,
    },
    #[error("parameter grid is empty")]
    EmptyGrid,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Options shared by every binary problem of a multiclass fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_passes: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_passes: DEFAULT_MAX_PASSES,
        }
    }
}
