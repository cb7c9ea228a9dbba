//! Numerical laboratory for multi-parameter commutators of Fourier
//! multipliers, product BMO and the cone multipliers used to test them.
//!
//! Everything lives on a product of periodic lattices
//! `T^{d_1} x ... x T^{d_t}`, discretizing the unit torus.

mod error;

pub mod bmo;
pub mod commutator;
pub mod czl;
pub mod dyadic;
pub mod experiments;
pub mod lattice;
pub mod multipliers;
pub mod sphere;
pub mod symbol_family;

pub use error::{Error, Result};
pub use lattice::{GridFunction, ProductLattice};
pub use num_complex::Complex64;
