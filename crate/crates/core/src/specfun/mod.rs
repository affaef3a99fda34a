//! Special functions, log-domain complex numbers and quadrature.

mod hankel;
mod logcomplex;
mod quadrature;
mod si;
mod sqrt;

pub use hankel::{hankel1, hankel1_log, hankel1_seq};
pub use logcomplex::{overflow_threshold, LogComplex};
pub use quadrature::{gauss_legendre, integrate, integrate_real, Domain, QuadResult, QuadratureSpec};
pub use si::si;
pub use sqrt::principal_sqrt;
