//! Error taxonomy shared across the crate.
//!
//! The CLI maps these onto exit codes, so the split mirrors the failure
//! surfaces a caller can react to: bad input data, bad configuration,
//! numerical degeneracy, unseen cells at prediction time, and I/O.

use thiserror::Error;

use crate::criterion::VariableSet;

#[derive(Error, Debug)]
pub enum Error {
    /// Input data violates the schema or an invariant; `row` is 1-based
    /// (header excluded) when the offense is tied to a record.
    #[error("invalid data{}: {msg}", fmt_row(.row))]
    Validation { row: Option<usize>, msg: String },

    /// Configuration outside the admissible ranges (α, β, λ, grids, specs).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// The criterion needs the K×K submatrix of a cell covariance inverted,
    /// and that submatrix is singular or ill-conditioned.
    #[error("singular covariance submatrix in cell {cell} on variables {subset}")]
    SingularSubmatrix { cell: usize, subset: VariableSet },

    /// A non-cell numerical failure (pooled covariance, factorization, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Classification hit a cell with no usable training probability mass.
    #[error("cell {cell} has no trained probability mass for any admissible group")]
    UndefinedCell { cell: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

fn fmt_row(row: &Option<usize>) -> String {
    match row {
        Some(r) => format!(" at row {r}"),
        None => String::new(),
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation { row: None, msg: msg.into() }
    }

    pub fn validation_at(row: usize, msg: impl Into<String>) -> Self {
        Error::Validation { row: Some(row), msg: msg.into() }
    }
}
