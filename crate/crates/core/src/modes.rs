//! Dirichlet duct modes, propagation exponents and cross-duct overlaps.
//!
//! Modes on `(-h, h)` are indexed from 1: odd `k` is `cos(alpha_k y / h)`,
//! even `k` is `sin(alpha_k y / h)`, both scaled by `1/sqrt(h)`, with
//! `alpha_k = k pi / 2`.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{from_usize, lit, Scalar};
use crate::specfun::principal_sqrt;

/// Removable-point window for `nu_j`.
const NU_TAYLOR_WINDOW: f64 = 1e-6;

pub fn alpha<T: Scalar>(k: usize) -> T {
    from_usize::<T>(k) * T::FRAC_PI_2()
}

/// `theta_k = sqrt(alpha_k^2 - eps^2 rho)`, principal branch.
pub fn theta<T: Scalar>(k: usize, rho: Complex<T>, eps: T) -> Complex<T> {
    let a = alpha::<T>(k);
    principal_sqrt(Complex::new(a * a, T::zero()) - rho * (eps * eps))
}

/// `beta_j = alpha_j^2 / eps1^2 - rho`.
pub fn beta<T: Scalar>(j: usize, rho: Complex<T>, eps1: T) -> Complex<T> {
    let a = alpha::<T>(j) / eps1;
    Complex::new(a * a, T::zero()) - rho
}

fn check_widths<T: Scalar>(eps: T, eps1: T) -> Result<()> {
    if !(eps > T::zero()) || !(eps1 > eps) {
        return Err(Error::InvalidInput(format!("need 0 < eps < eps1, got eps={eps}, eps1={eps1}")));
    }
    Ok(())
}

/// `mu_k = int psi_k phi_1` over the neck, `psi` on `(-eps, eps)` and `phi`
/// on `(-eps1, eps1)`.
pub fn overlap_mu<T: Scalar>(k: usize, eps: T, eps1: T) -> Result<T> {
    check_widths(eps, eps1)?;
    if k == 0 {
        return Err(Error::InvalidInput("mode indices start at 1".into()));
    }
    if k % 2 == 0 {
        return Ok(T::zero());
    }
    let r = eps / eps1;
    let kf = from_usize::<T>(k);
    let sign = if (k - 1) / 2 % 2 == 0 { T::one() } else { -T::one() };
    let four = lit::<T>(4.0);
    Ok(sign * four * kf * r.sqrt() * (T::FRAC_PI_2() * r).cos() / (T::PI() * (kf * kf - r * r)))
}

/// `nu_j = int phi_j psi_1` over the neck.
pub fn overlap_nu<T: Scalar>(j: usize, eps: T, eps1: T) -> Result<T> {
    check_widths(eps, eps1)?;
    if j == 0 {
        return Err(Error::InvalidInput("mode indices start at 1".into()));
    }
    if j % 2 == 0 {
        return Ok(T::zero());
    }
    let r = eps / eps1;
    let s = r * from_usize::<T>(j);
    let d = s - T::one();
    let four = lit::<T>(4.0);
    // 4 sqrt(r)/pi * g(s) with g(s) = cos(pi s/2)/(1 - s^2) = sin(pi d/2)/(d (2 + d))
    let g = if d.abs() < lit(NU_TAYLOR_WINDOW) {
        T::FRAC_PI_4() - T::PI() / lit::<T>(8.0) * d
    } else {
        (T::FRAC_PI_2() * d).sin() / (d * (lit::<T>(2.0) + d))
    };
    Ok(four * r.sqrt() / T::PI() * g)
}

/// Transverse Dirichlet mode family on `(-half_width, half_width)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DuctModeSet<T> {
    pub half_width: T,
    pub count: usize,
}

impl<T: Scalar> DuctModeSet<T> {
    pub fn new(half_width: T, count: usize) -> Result<Self> {
        if !(half_width > T::zero()) || count == 0 {
            return Err(Error::InvalidInput("mode set needs positive width and count".into()));
        }
        Ok(Self { half_width, count })
    }

    /// Reference duct of half-width `eps1`, checked against the cavity
    /// eigenvalue so that every `beta_j` has positive real part near it.
    pub fn reference(eps1: T, count: usize, lambda0: T) -> Result<Self> {
        let floor = T::PI() * T::PI() / (lit::<T>(4.0) * eps1 * eps1);
        if !(floor > lambda0) {
            return Err(Error::InvalidInput(format!(
                "eps1 = {eps1} too wide: pi^2/(4 eps1^2) = {floor} must exceed lambda0 = {lambda0}"
            )));
        }
        Self::new(eps1, count)
    }

    pub fn alpha(&self, k: usize) -> T {
        alpha(k)
    }

    pub fn is_cosine(&self, k: usize) -> bool {
        k % 2 == 1
    }

    pub fn profile(&self, k: usize, y: T) -> T {
        let h = self.half_width;
        if y.abs() > h {
            return T::zero();
        }
        let arg = alpha::<T>(k) * y / h;
        let f = if self.is_cosine(k) { arg.cos() } else { arg.sin() };
        f / h.sqrt()
    }

    pub fn profile_derivative(&self, k: usize, y: T) -> T {
        let h = self.half_width;
        if y.abs() > h {
            return T::zero();
        }
        let a = alpha::<T>(k) / h;
        let arg = a * y;
        let f = if self.is_cosine(k) { -arg.sin() } else { arg.cos() };
        a * f / h.sqrt()
    }

    pub fn theta(&self, k: usize, rho: Complex<T>) -> Complex<T> {
        theta(k, rho, self.half_width)
    }

    pub fn thetas(&self, rho: Complex<T>) -> Vec<Complex<T>> {
        (1..=self.count).map(|k| self.theta(k, rho)).collect()
    }
}

/// Multi-index `(k_2, ..., k_n)` with entries at least 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    components: Vec<usize>,
}

impl MultiIndex {
    pub fn new(components: Vec<usize>) -> Result<Self> {
        if components.is_empty() || components.len() > 12 {
            return Err(Error::InvalidInput("multi-index length must be in 1..=12".into()));
        }
        if components.iter().any(|&k| k == 0) {
            return Err(Error::InvalidInput("multi-index entries start at 1".into()));
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[usize] {
        &self.components
    }

    /// Ambient dimension `n`.
    pub fn dimension(&self) -> usize {
        self.components.len() + 1
    }

    pub fn norm(&self) -> f64 {
        self.components.iter().map(|&k| (k * k) as f64).sum::<f64>().sqrt()
    }
}

/// Product of the one-dimensional `mu` overlaps.
pub fn tensor_overlap<T: Scalar>(indices: &MultiIndex, eps: T, eps1: T) -> Result<T> {
    indices
        .components()
        .iter()
        .try_fold(T::one(), |acc, &k| Ok(acc * overlap_mu(k, eps, eps1)?))
}

/// Product of the one-dimensional `nu` overlaps.
pub fn tensor_overlap_nu<T: Scalar>(indices: &MultiIndex, eps: T, eps1: T) -> Result<T> {
    indices
        .components()
        .iter()
        .try_fold(T::one(), |acc, &j| Ok(acc * overlap_nu(j, eps, eps1)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::{integrate_real, Domain, QuadratureSpec};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn quad(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let spec = QuadratureSpec::default().with_tolerances(1e-15, 1e-14).with_panel((b - a) / 16.0);
        integrate_real(f, Domain::Finite(a, b), &spec).unwrap().0
    }

    #[test]
    fn theta_examples() {
        let t = theta::<f64>(1, Complex::new(0.0, 0.0), 0.37);
        assert!((t.re - PI / 2.0).abs() < 1e-15 && t.im == 0.0);
        let t = theta::<f64>(1, Complex::new(10.0, 0.0), 0.1);
        assert!((t.re - 1.53863611691404789).abs() < 1e-14);
        let t = theta::<f64>(4001, Complex::new(20.0, -0.01), 0.2);
        assert!((t.re / alpha::<f64>(4001) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn beta_examples() {
        let b = beta(1, Complex::new(0.0, 0.0), 1.0);
        assert!((b.re - PI * PI / 4.0).abs() < 1e-14);
        let b = beta(2, Complex::new(5.0, 0.0), 0.5);
        assert!((b.re - (4.0 * PI * PI - 5.0)).abs() < 1e-12);
        assert!((b.re - 34.478).abs() < 1e-3);
        let j = 5001;
        let sb = principal_sqrt(beta(j, Complex::new(20.0, -0.1), 0.5));
        assert!((sb.re / (j as f64 * PI / 1.0) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn mu_examples() {
        assert_eq!(overlap_mu::<f64>(2, 0.5, 1.0).unwrap(), 0.0);
        let m1 = overlap_mu::<f64>(1, 0.5, 1.0).unwrap();
        assert!((m1 - 0.84883).abs() < 1e-5);
        for r in [0.1, 0.25, 0.5, 0.9] {
            for k in (3..60).step_by(2) {
                let q = (overlap_mu::<f64>(k, r, 1.0).unwrap() / overlap_mu::<f64>(1, r, 1.0).unwrap()).abs();
                assert!(q <= 1.0 / (k as f64 - r * r));
            }
        }
    }

    #[test]
    fn nu_removable_point() {
        for (r, j) in [(1.0 / 3.0, 3usize), (0.2, 5), (1.0 / 7.0, 7)] {
            let v = overlap_nu::<f64>(j, r, 1.0).unwrap();
            assert!((v - r.sqrt()).abs() < 1e-12, "r={r}");
            let q = quad(|y| ((j as f64) * PI / 2.0 * y).cos() * (PI / 2.0 * y / r).cos() / r.sqrt(), -r, r);
            assert!((v - q).abs() < 1e-12);
        }
        // just off the removable point the Taylor branch and the exact form agree
        let r = 1.0 / 3.0;
        let a = overlap_nu::<f64>(3, r * (1.0 + 0.99e-6), 1.0).unwrap();
        let b = overlap_nu::<f64>(3, r * (1.0 + 1.01e-6), 1.0).unwrap();
        assert!((a - b).abs() < 1e-11);
    }

    #[test]
    fn closed_forms_match_quadrature() {
        for r in [0.1, 0.25, 0.5, 0.9] {
            let eps1 = 1.0;
            let neck = DuctModeSet::new(r, 60).unwrap();
            let wide = DuctModeSet::new(eps1, 60).unwrap();
            for k in 1..=50 {
                let q = quad(|y| neck.profile(k, y) * wide.profile(1, y), -r, r);
                let c = overlap_mu::<f64>(k, r, eps1).unwrap();
                assert!((q - c).abs() < 1e-12, "mu_{k}, r={r}: {q} vs {c}");
                let q = quad(|y| wide.profile(k, y) * neck.profile(1, y), -r, r);
                let c = overlap_nu::<f64>(k, r, eps1).unwrap();
                assert!((q - c).abs() < 1e-12, "nu_{k}, r={r}: {q} vs {c}");
            }
        }
    }

    #[test]
    fn orthonormal_up_to_forty_modes() {
        let m = DuctModeSet::new(0.3, 40).unwrap();
        for k in 1..=40 {
            for l in k..=40 {
                let g = quad(|y| m.profile(k, y) * m.profile(l, y), -0.3, 0.3);
                let want = if k == l { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-10, "({k},{l}) = {g}");
            }
        }
    }

    #[test]
    fn bessel_inequality_and_completeness_rate() {
        for r in [0.1, 0.25, 0.5, 0.9] {
            let norm = quad(|y| (PI / 2.0 * y).cos().powi(2), -r, r);
            let mut sum = 0.0;
            for k in 1..=200 {
                sum += overlap_mu::<f64>(k, r, 1.0).unwrap().powi(2);
                assert!(sum <= norm + 1e-14);
            }
            // the Dirichlet expansion of phi_1 restricted to the neck converges
            // like 1/K because phi_1 does not vanish on the neck walls
            let deficit = norm - sum;
            let tail = 8.0 * r * (PI / 2.0 * r).cos().powi(2) / (PI * PI * 200.0);
            assert!((deficit / tail - 1.0).abs() < 0.02, "r={r}: {deficit} vs {tail}");
        }
    }

    #[test]
    fn reference_duct_width_check() {
        assert!(DuctModeSet::reference(0.3, 10, 2.0 * PI * PI).is_ok());
        assert!(DuctModeSet::reference(0.4, 10, 2.0 * PI * PI).is_err());
    }

    #[test]
    fn tensor_examples() {
        let r = 0.5;
        let k = MultiIndex::new(vec![2, 4]).unwrap();
        assert_eq!(tensor_overlap::<f64>(&k, r, 1.0).unwrap(), 0.0);
        let k = MultiIndex::new(vec![1, 1]).unwrap();
        assert!((tensor_overlap::<f64>(&k, r, 1.0).unwrap() - overlap_mu::<f64>(1, r, 1.0).unwrap().powi(2)).abs() < 1e-15);
        assert!(k.norm() >= ((k.dimension() - 1) as f64).sqrt());
        // two-dimensional quadrature of psi_(1,3) phi_(1,1) over the square neck
        let k = MultiIndex::new(vec![1, 3]).unwrap();
        let neck = DuctModeSet::new(r, 4).unwrap();
        let wide = DuctModeSet::new(1.0, 4).unwrap();
        let (x, w) = crate::specfun::gauss_legendre(40);
        let mut q = 0.0;
        for (xi, wi) in x.iter().zip(&w) {
            for (xj, wj) in x.iter().zip(&w) {
                let (y2, y3) = (r * xi, r * xj);
                q += wi * wj * r * r * neck.profile(1, y2) * neck.profile(3, y3) * wide.profile(1, y2) * wide.profile(1, y3);
            }
        }
        let t = tensor_overlap::<f64>(&k, r, 1.0).unwrap();
        assert!((q - t).abs() < 1e-10, "{q} vs {t}");
        assert!(MultiIndex::new(vec![0, 1]).is_err());
    }

    #[test]
    fn single_precision_overlaps() {
        let a = overlap_mu(1, 0.5f32, 1.0f32).unwrap();
        assert!((a - 0.84883).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn theta_is_lipschitz_in_rho(k in 1usize..20, re in 0.0f64..60.0, im in -1.0f64..0.0, eps in 0.05f64..0.4, dr in -1.0f64..1.0, di in -1.0f64..1.0) {
            let rho = Complex::new(re, im);
            let t0 = theta::<f64>(k, rho, eps);
            prop_assume!(t0.re > 0.1);
            let h = 1e-6;
            let d = Complex::new(dr, di) * h;
            let t1 = theta::<f64>(k, rho + d, eps);
            let bound = d.norm() * eps * eps / (2.0 * t0.re);
            prop_assert!((t1 - t0).norm() <= bound * (1.0 + 1e-3) + 1e-15);
            prop_assert!(t0.re >= 0.0);
        }

        #[test]
        fn theta_has_positive_real_part_below_cutoff(k in 1usize..30, eps in 0.05f64..0.5, frac in 0.0f64..0.999, im in -5.0f64..5.0) {
            let cutoff = (k as f64 * PI / (2.0 * eps)).powi(2);
            let t = theta::<f64>(k, Complex::new(frac * cutoff, im), eps);
            prop_assert!(t.re > 0.0);
        }
    }
}
