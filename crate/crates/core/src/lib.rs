//! Simulation of protective measurements on single quantum systems.
//!
//! A weakly coupled von Neumann pointer reads out expectation values of a
//! system whose state is kept in place either by frequent Zeno verification
//! or by a gapped Hamiltonian. Postselected runs are analysed with the
//! two-state-vector machinery in [`tsvf`].

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod hilbert;
pub mod nonlocal;
pub mod pointer;
pub mod protection;
pub mod scenario;
pub mod tsvf;
pub mod weak;

pub use error::{Error, Result};
