//! Exact few-body dynamics of driven Bose-Hubbard chains.
//!
//! The crate enumerates fixed-particle-number Fock sectors, assembles the
//! Bose-Hubbard operator from optical-lattice parameters, finds ground and
//! thermal states, integrates the driven Schrödinger equation, postselects
//! balanced left/right particle splits and measures their entanglement.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod entanglement;
pub mod error;
pub mod fock;
pub mod krylov;
pub mod lattice;
pub mod propagator;
pub mod protocol;
pub mod quadrature;
pub mod robustness;
pub mod spectral;

pub use error::{Error, Result};
