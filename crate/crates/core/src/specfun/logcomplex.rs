use std::ops::{Div, Mul, Neg};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

/// A complex number stored as `exp(log_mag) * exp(i * phase)`.
///
/// Zero is `log_mag == -inf`. Phases are kept in `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogComplex<T> {
    pub log_mag: T,
    pub phase: T,
}

/// Largest `log_mag` that converts back to a finite value.
pub fn overflow_threshold<T: Scalar>() -> T {
    T::max_value().ln()
}

pub(crate) fn wrap_phase<T: Scalar>(p: T) -> T {
    let pi = T::PI();
    let two_pi = pi + pi;
    if p > -pi && p <= pi {
        return p;
    }
    let mut q = p - two_pi * ((p + pi) / two_pi).floor();
    // q now in [-pi, pi); move the left end onto the right end
    if q <= -pi {
        q = q + two_pi;
    }
    q
}

impl<T: Scalar> LogComplex<T> {
    pub fn new(log_mag: T, phase: T) -> Self {
        Self {
            log_mag,
            phase: wrap_phase(phase),
        }
    }

    pub fn zero() -> Self {
        Self {
            log_mag: T::neg_infinity(),
            phase: T::zero(),
        }
    }

    pub fn one() -> Self {
        Self {
            log_mag: T::zero(),
            phase: T::zero(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.log_mag == T::neg_infinity()
    }

    pub fn from_complex(z: Complex<T>) -> Self {
        if z.re == T::zero() && z.im == T::zero() {
            return Self::zero();
        }
        Self::new(z.norm().ln(), z.im.atan2(z.re))
    }

    /// `exp(w)` for a complex exponent, never overflowing.
    pub fn exp(w: Complex<T>) -> Self {
        Self::new(w.re, w.im)
    }

    pub fn from_real(x: T) -> Self {
        Self::from_complex(Complex::new(x, T::zero()))
    }

    pub fn to_complex(&self) -> Result<Complex<T>> {
        if self.log_mag > overflow_threshold::<T>() {
            return Err(Error::Overflow(self.log_mag.to_f64().unwrap_or(f64::INFINITY)));
        }
        Ok(Complex::from_polar(self.log_mag.exp(), self.phase))
    }

    pub fn conj(&self) -> Self {
        Self::new(self.log_mag, -self.phase)
    }

    pub fn powi(&self, n: i32) -> Self {
        if self.is_zero() {
            return if n == 0 { Self::one() } else { Self::zero() };
        }
        let nn = lit::<T>(n as f64);
        Self::new(self.log_mag * nn, self.phase * nn)
    }

    pub fn sqrt(&self) -> Self {
        let h = lit::<T>(0.5);
        Self::new(self.log_mag * h, self.phase * h)
    }

    /// Sum of two log-domain values, exact up to rounding of the smaller term.
    pub fn add(&self, other: &Self) -> Self {
        if self.is_zero() {
            return *other;
        }
        if other.is_zero() {
            return *self;
        }
        let (big, small) = if self.log_mag >= other.log_mag {
            (self, other)
        } else {
            (other, self)
        };
        let rel = Complex::from_polar((small.log_mag - big.log_mag).exp(), small.phase - big.phase);
        let s = Complex::new(T::one(), T::zero()) + rel;
        let ls = Self::from_complex(s);
        if ls.is_zero() {
            return Self::zero();
        }
        Self::new(big.log_mag + ls.log_mag, big.phase + ls.phase)
    }

    /// Scaled value `self / exp(log_scale)` as an ordinary complex number.
    pub fn scaled(&self, log_scale: T) -> Complex<T> {
        if self.is_zero() {
            return Complex::new(T::zero(), T::zero());
        }
        Complex::from_polar((self.log_mag - log_scale).exp(), self.phase)
    }
}

impl<T: Scalar> Mul for LogComplex<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        if self.is_zero() || rhs.is_zero() {
            return Self::zero();
        }
        Self::new(self.log_mag + rhs.log_mag, self.phase + rhs.phase)
    }
}

impl<T: Scalar> Div for LogComplex<T> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        Self::new(self.log_mag - rhs.log_mag, self.phase - rhs.phase)
    }
}

impl<T: Scalar> Neg for LogComplex<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(self.log_mag, self.phase + T::PI())
    }
}
