//! Heating and non-heating dynamics of 1+1d CFTs under structured drives.
//!
//! Each drive step is a 2×2 Möbius matrix ([`mobius`]); sequences come from
//! Thue-Morse, random-multipolar, random or periodic laws ([`drive`],
//! [`registry`]); the trace map classifies Thue-Morse drives ([`tracemap`]);
//! entropies and Lyapunov exponents follow from overflow-safe products
//! ([`entropy`]); [`rmd`] and [`nonhermitian`] hold the ensemble and
//! non-unitary analyses; [`fermion`] is the lattice cross-check.

pub mod drive;
pub mod entropy;
pub mod error;
pub mod fermion;
pub mod mobius;
pub mod nonhermitian;
pub mod registry;
pub mod rmd;
pub mod rng;
pub mod tracemap;

pub use error::{Error, Result};
pub use num_complex::Complex64;
