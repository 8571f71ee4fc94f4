//! Estimation of unitary quantum processes from eigenanalysis of structured
//! input and output states, with the simulation and benchmarking pipeline
//! used to evaluate the estimators.

// Negated comparisons are used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod qst;
pub mod states;
pub mod svg;

pub use error::{EqptError, Result};
