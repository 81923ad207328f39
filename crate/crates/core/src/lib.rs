//! Numerical toolkit for Tonelli Hamiltonian flows on `T*T^d` and their
//! invariant submanifolds.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod conjugate;
pub mod error;
pub mod fixtures;
pub mod genfun;
pub mod green;
pub mod hamiltonian;
pub mod homology;
pub mod integrate;
pub mod report;
pub mod run;
pub mod submanifold;
pub mod symplectic;
pub mod variational;

pub use error::{Error, Result};
