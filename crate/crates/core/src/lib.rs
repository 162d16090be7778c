//! Stochastic first-order methods for convex problems whose gradients may grow
//! with the optimality gap, together with the benchmark problems, online
//! learners and numeric checkers used to evaluate them.

// Negated float comparisons are deliberate: they treat NaN as out of range.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod framework;
pub mod harness;
pub mod numerics;
pub mod online;
pub mod optimizers;
pub mod problems;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
