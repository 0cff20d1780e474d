//! Critical temperatures of the one-dimensional BCS model with contact
//! interaction, on the line and on the half-line with Dirichlet or Neumann
//! boundary conditions.
//!
//! The half-line problem is reduced to the top of the spectrum of a
//! Birman–Schwinger type operator in momentum space, discretized by a
//! Nyström scheme on composite Gauss–Legendre grids.

pub mod bs_operator;
pub mod critical_temperature;
pub mod error;
pub mod kernels;
pub mod lemma_suite;
pub mod quadrature;
pub mod variational;

pub use error::{Error, Result};
