//! Numerical toolkit for nonholonomic G-Chaplygin systems.
//!
//! The crate computes the gyroscopic tensor of a Chaplygin system from its
//! geometric data (kinetic metric, horizontal frame, shape chart), integrates
//! the reduced almost-Hamiltonian equations on `T*S`, tests for basic
//! invariant measures and phi-simplicity, and performs Chaplygin
//! Hamiltonisation by momentum rescaling and time reparametrisation.

pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod numkit;
pub mod systems;

pub use error::{Error, Result};
