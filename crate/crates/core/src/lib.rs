//! Binary-tree expansion of the incompressible Navier–Stokes equation on the
//! periodic torus, together with the reference solvers and checks used to
//! validate it.

// `!(x > 0.0)` style guards are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod expand;
pub mod field;
pub mod freqkernel;
pub mod hierarchy;
pub mod interact;
pub mod refsolver;
pub mod report;
pub mod treecomb;
pub mod verify;
pub use error::{Error, Result};
