//! Hybrid dead-beat observers for nonlinear systems that are linear in the
//! unmeasured state, with tools to measure their robustness to measurement
//! noise.

// Comparisons such as `!(x > 0.0)` are written that way on purpose: they
// also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod numerics;
pub mod observer;
pub mod plot;
pub mod report;

pub use error::{Error, Result};
