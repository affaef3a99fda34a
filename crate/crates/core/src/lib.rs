//! Resonances of a two-dimensional thin-neck Helmholtz resonator.
//!
//! The resonator is a rectangular cavity `[-a, 0] x [-b/2, b/2]` joined by a
//! straight neck `[0, L] x (-eps, eps)` to the half-plane `x > L`, with
//! Dirichlet walls everywhere. Resonances near a cavity eigenvalue are found
//! by modal matching, with exponentially small quantities carried in log
//! form.

pub mod cavity;
pub mod error;
pub mod exterior;
pub mod fdoracle;
pub mod linalg;
pub mod modes;
pub mod paperlab;
pub mod scalar;
pub mod solver;
pub mod specfun;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type LogComplex64 = specfun::LogComplex<f64>;
pub type LogComplex32 = specfun::LogComplex<f32>;
pub type QuadratureSpec64 = specfun::QuadratureSpec<f64>;
