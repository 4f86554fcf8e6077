//! Finite-element eigenvalue lab for -div(A(X2) grad u) on cylinders,
//! half-cylinders and their cross-sections, with an experiment harness for
//! the behaviour of the first eigenvalues as the cylinder grows or shrinks.

pub mod analysis;
pub mod assemble;
pub mod cli;
pub mod coeff;
pub mod config;
pub mod eig;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod output;
pub mod plot;
pub mod sparse;

pub use error::{Error, Result};
