//! Bermudan basket put pricing by a bubbled dynamic program on Smolyak
//! sparse grids in tanh-transformed coordinates.

// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod engine;
pub mod error;
pub mod market;
pub mod oracles;
pub mod quadrature;
pub mod report;
pub mod sparse_grid;
pub mod transform;

pub use error::{Error, ErrorCategory, Result};
