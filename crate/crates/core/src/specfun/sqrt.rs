use num_complex::Complex;

use crate::scalar::{lit, Scalar};

/// Principal square root: `Re w >= 0`, and `Im w >= 0` when `Re w == 0`.
///
/// The branch cut lies on the negative real axis; points on the cut (with
/// either sign of zero imaginary part) map to the upper imaginary axis.
pub fn principal_sqrt<T: Scalar>(z: Complex<T>) -> Complex<T> {
    let zero = T::zero();
    if z.re == zero && z.im == zero {
        return Complex::new(zero, zero);
    }
    if z.im == zero {
        return if z.re > zero {
            Complex::new(z.re.sqrt(), zero)
        } else {
            Complex::new(zero, (-z.re).sqrt())
        };
    }
    let half = lit::<T>(0.5);
    let t = ((z.re.abs() + z.re.hypot(z.im)) * half).sqrt();
    if z.re >= zero {
        Complex::new(t, z.im / (t + t))
    } else {
        Complex::new(z.im.abs() / (t + t), t.copysign(z.im))
    }
}
