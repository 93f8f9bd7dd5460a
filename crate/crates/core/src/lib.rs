//! Full counting statistics of the heat dissipated while erasing a qubit in
//! finite time.

// `!(x > 0.0)` is used deliberately so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod lindblad;
pub mod ode;
pub mod operator;
pub mod protocol;
pub mod quadrature;
pub mod rng;
pub mod slowdrive;
pub mod stats;
pub mod trajectories;

pub use error::{Error, Result};
