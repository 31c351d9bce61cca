//! Numerical laboratory for the pinned homopolymer `Delta + beta delta_0`
//! on `Z^d` at and around its critical coupling.

pub mod bessel;
pub mod error;
pub mod field;
pub mod kernel;
pub mod laplace;
pub mod montecarlo;
pub mod lattice;
pub mod quadrature;
pub mod spectral;

pub use error::{Error, Result};

/// Crate version, recorded in emitted artifacts.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
