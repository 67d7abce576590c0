//! Numerical engine for contact Hamiltonian systems with nonholonomic constraints.

pub mod brackets;
pub mod calculus;
pub mod constrained;
pub mod contact;
pub mod error;
pub mod expr;
pub mod integrator;
pub mod lagrangian;
pub mod linalg;
pub mod sampling;
pub mod systems;

pub use error::{DomainKind, Error, Result};
