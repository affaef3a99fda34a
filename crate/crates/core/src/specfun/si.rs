use num_complex::Complex;

use crate::scalar::{from_usize, lit, Scalar};

/// Sine integral `Si(x) = int_0^x sin(t)/t dt` for `x >= 0`.
///
/// Power series up to `x = 6`, otherwise the continued fraction for
/// `E1(i x)`.
pub fn si<T: Scalar>(x: T) -> T {
    if x < T::zero() {
        return -si(-x);
    }
    if x == T::zero() {
        return T::zero();
    }
    let eps = T::epsilon();
    if x <= lit(6.0) {
        let x2 = x * x;
        let mut term = x;
        let mut sum = x;
        let mut n = 1usize;
        loop {
            let k = from_usize::<T>(2 * n);
            term = -term * x2 / (k * (k + T::one()));
            let add = term / (k + T::one());
            sum = sum + add;
            if add.abs() < eps * sum.abs() * lit(0.25) || n > 200 {
                break;
            }
            n += 1;
        }
        return sum;
    }
    // modified Lentz on E1(ix)
    let one = Complex::new(T::one(), T::zero());
    let tiny = lit::<T>(1e-300).max(T::min_positive_value());
    let mut b = Complex::new(T::one(), x);
    let mut c = Complex::new(T::one() / tiny, T::zero());
    let mut d = one / b;
    let mut h = d;
    for i in 2..100_000usize {
        let a = -from_usize::<T>((i - 1) * (i - 1));
        b = b + Complex::new(lit(2.0), T::zero());
        d = one / (d * a + b);
        c = b + Complex::new(a, T::zero()) / c;
        let del = c * d;
        h = h * del;
        if (del - one).norm() < eps {
            break;
        }
    }
    let h = Complex::new(x.cos(), -x.sin()) * h;
    T::FRAC_PI_2() + h.im
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        assert_eq!(si(0.0f64), 0.0);
        assert!((si(std::f64::consts::PI) - 1.85193705198246617).abs() < 1e-14);
        assert!((si(1e4f64) - 1.57089154538596192).abs() < 1e-13);
        assert!((si(1e4f64) - std::f64::consts::FRAC_PI_2).abs() < 1e-3);
    }

    #[test]
    fn continuous_across_switch() {
        let lo = si(6.0f64 - 1e-12);
        let hi = si(6.0f64 + 1e-12);
        assert!((lo - hi).abs() < 1e-13);
        // Si(4) and Si(10) from an independent high-precision evaluation
        assert!((si(4.0f64) - 1.75820313894905306).abs() < 1e-14);
        assert!((si(10.0f64) - 1.65834759421887404).abs() < 1e-14);
    }

    #[test]
    fn single_precision() {
        assert!((si(std::f32::consts::PI) - 1.851937).abs() < 1e-5);
    }
}
