//! Polynomial-chaos surrogates of a shallow-water tsunami model and Bayesian
//! inversion of fault slip from gauge records.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod config;
pub mod design;
pub mod diagnostics;
pub mod error;
pub mod fit;
pub mod infer;
pub mod io;
pub mod pipeline;
pub mod swe;

pub use error::{Error, Result};
