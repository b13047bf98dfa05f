//! Weighted pseudorandom generators, error-reduction polynomials and
//! derandomized walks for read-once branching programs, with exhaustive
//! oracles for checking every construction at small sizes.

pub mod error;
pub mod error_reduction;
pub mod generators;
pub mod harness;
pub mod matrix;
pub mod perm;
pub mod randomness;
pub mod regular;
pub mod robp;
pub mod verify;
pub mod wpr;

pub use error::{Error, Result};
