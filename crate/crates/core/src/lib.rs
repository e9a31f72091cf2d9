//! Sparse solvers for P1-bubble/P1 generalized Stokes saddle-point systems.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod fem;
pub mod global;
pub mod krylov;
pub mod precond;
pub mod sparse;
pub mod verify;

pub use error::{Error, Result};
