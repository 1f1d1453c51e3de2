//! Synthetic instances, dual labels and on-disk formats.

mod generators;
mod io;
mod labels;

pub use generators::{
    gen_block, gen_dense, instance_rng, sparsify, BlockParams, DEFAULT_LEVELS, DEFAULT_LEVEL_PROBS,
};
pub use io::{
    read_csv, read_dataset, read_matrix, write_dataset, write_matrix, Dataset, DATASET_MAGIC,
    MATRIX_MAGIC,
};
pub use labels::{gen_labels, gen_labels_with, interior_duals};

use crate::lap::LapError;
use crate::matrix::MatrixError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot mask {requested} of {available} maskable edges")]
    InfeasibleMask { requested: usize, available: usize },
    #[error("mask fraction {0} outside [0, 0.9]")]
    BadMaskFraction(f64),
    #[error("invalid generator parameters: {0}")]
    BadParams(String),
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported format version {0}")]
    BadVersion(u8),
    #[error("file truncated")]
    TruncatedFile,
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("csv parse error at line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error("invalid labels: {0}")]
    InvalidLabels(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Solver(#[from] LapError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
