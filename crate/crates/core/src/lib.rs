//! Transition densities of symmetric Lévy-type processes by the parametrix method.

pub mod error;
pub mod exponent;
pub mod freekernel;
pub mod hexfloat;
pub mod parametrix;
pub mod presets;
pub mod quadrature;
pub mod simulate;
pub mod spectral;
pub mod validate;

pub use error::{Error, Result};
