//! Counterdiabatic QAOA for budget-constrained portfolio selection.
//!
//! - [`pauli`]: symbolic Pauli-string algebra (products, commutators, trace inner products)
//! - [`portfolio`]: instances, Ising compilation, exhaustive feasible-subspace oracles
//! - [`statevector`]: exact amplitude simulation of the ansatz gate families
//! - [`agp`]: gauge-potential operator pools and the variational action system
//! - [`qaoa`]: ansatz programs for the four methods, optimization loop, metrics, gate costs

pub mod agp;
pub mod dense;
pub mod error;
pub mod optimizer;
pub mod pauli;
pub mod portfolio;
pub mod qaoa;
pub mod statevector;

pub use error::{Error, Result};
