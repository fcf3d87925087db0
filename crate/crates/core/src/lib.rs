//! Variable selection and classification for discriminant analysis with
//! mixed continuous and binary variables, any number of groups.
//!
//! The pipeline: encode the binary pattern of each observation into one of
//! `M = 2^d` cells, estimate per-cell moments ([`estimators`]), score
//! variable subsets with the projector-residual criterion ([`criterion`]),
//! order variables and pick a dimension with penalized drop-one /
//! nested-set scores ([`selection`]), then classify with location-model
//! rules restricted to the selected variables ([`classifier`]).
//! [`tuning`] chooses the penalty exponents and smoothing level by
//! leave-one-out cross-validation, and [`simulation`] reproduces the
//! synthetic benchmarks end to end.
//!
//! All numerical modules are generic over the scalar ([`scalar::Real`],
//! `f32` or `f64`); the `*64` aliases below fix the common instantiation.

// index-based loops are the house style for the small dense kernels here
#![allow(clippy::needless_range_loop)]

pub mod classifier;
pub mod criterion;
pub mod data;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod scalar;
pub mod selection;
pub mod simulation;
pub mod tuning;

pub use error::{Error, Result};

/// `f64` instantiations of the core types.
pub type Dataset64 = data::Dataset<f64>;
pub type Observation64 = data::MixedObservation<f64>;
pub type CellEstimates64 = estimators::CellEstimates<f64>;
pub type PopulationSpec64 = criterion::PopulationSpec<f64>;
pub type SelectionConfig64 = selection::SelectionConfig<f64>;
pub type SelectionResult64 = selection::SelectionResult<f64>;
pub type ClassifierModel64 = classifier::ClassifierModel<f64>;
pub type Matrix64 = linalg::Matrix<f64>;
