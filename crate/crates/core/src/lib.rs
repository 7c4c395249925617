//! Numerical Bergman-space laboratory: truncated Bergman kernels and
//! projections, proper holomorphic covering maps, and the rank of the
//! Friedrichs operator on circular domains and their proper images.

pub mod bergman;
pub mod cli;
pub mod domains;
pub mod error;
pub mod maps;
pub mod numerics;
pub mod quadrature;
pub mod verify;

pub use error::{Error, Result};
