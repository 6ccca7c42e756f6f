//! Desk-scale laboratory for classical and quantum Peierls bottlenecks on 2D Ising models.
//!
//! The modules follow the dependency order geometry → classical energies → barrier
//! certificates → Gibbs/Markov checks → exact diagonalization → real-time dynamics,
//! with [`runner`] wiring them into reproducible experiments.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classical;
pub mod dynamics;
pub mod error;
pub mod gibbs;
pub mod lattice;
pub mod linalg;
pub mod peierls;
pub mod quantum;
pub mod runner;
pub mod spin;

pub use error::{Error, Result};
pub use spin::SpinConfig;
