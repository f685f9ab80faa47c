//! Ramsey visibility of a small ion Coulomb crystal after a quench that
//! depends on the internal state of the central ion.
//!
//! Pipeline: [`params`] fixes the trap, [`crystal`] finds both equilibrium
//! structures and their normal modes, [`structure_map`] relates the two
//! phonon bases, [`visibility`] evaluates the thermal overlap in closed form
//! and [`spectrum`] analyses ln 𝒱. [`fock_oracle`] is a brute-force check of
//! the closed form on few-mode systems.

pub mod crystal;
pub mod error;
pub mod fock_oracle;
pub mod model;
pub mod params;
pub mod spectrum;
pub mod structure_map;
pub mod synthetic;
pub mod tables;
pub mod visibility;

pub use error::{ErrorClass, QuenchError, Result};
pub use model::QuenchModel;
pub use num_complex::Complex64;
