//! The cosparse analysis signal model.
//!
//! Analysis operators (cyclic 2D finite differences and Gaussian), the
//! signal families living in unions of their null spaces, analysis ℓ1 / ℓ0
//! recovery, random packing constructions with the minimax lower bounds
//! they imply, and a seeded phase-transition harness.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod config;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod mc;
pub mod operator;
pub mod packing;
pub mod seed;
pub mod sensing;
pub mod signal;
pub mod solvers;
pub mod textfmt;

pub use error::{Error, Result};
