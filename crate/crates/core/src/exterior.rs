//! Outgoing half-plane `x > L` seen from the neck aperture.
//!
//! In the scaled Fourier variable `s = eps xi` the DtN matrix is
//! `Lambda_E[k,l] = (1/(pi eps)) int_0^inf i eta(s) F_k(s) F_l(s) ds` with
//! `eta = sqrt(kappa^2 - s^2)`, `kappa = eps sqrt(rho)`, and `F_k` the real
//! sinc-type transforms of the neck modes. The path dips below the branch
//! point `kappa`, which makes the result analytic in `rho` across the real
//! axis. Beyond `T = N pi` the integrand is split into a smooth part and a
//! `cos 2s` part; the latter is summed by parts.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::specfun::{gauss_legendre, principal_sqrt, LogComplex};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Largest `|Im rho| / Re rho` the contour construction is meant for.
pub const MAX_RELATIVE_IM: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq)]
pub struct ExteriorDtN {
    pub rho: Complex64,
    pub eps: f64,
    pub matrix: CMatrix,
    /// Always "outgoing": `Im eta >= 0` in the real-`rho` limit.
    pub branch: &'static str,
}

/// Quadrature budget for the aperture integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExteriorRule {
    /// Gauss points per unit-length panel on the real axis.
    pub points_per_panel: usize,
    /// Cut-off `T` is at least `base_cutoff + 4 alpha_K`.
    pub base_cutoff: f64,
}

impl Default for ExteriorRule {
    fn default() -> Self {
        Self {
            points_per_panel: 16,
            base_cutoff: 400.0,
        }
    }
}

impl ExteriorRule {
    pub fn refined(&self) -> Self {
        Self {
            points_per_panel: self.points_per_panel * 2,
            base_cutoff: self.base_cutoff * 2.0,
        }
    }
}

fn csinc(z: Complex64) -> Complex64 {
    if z.norm() < 1e-3 {
        let z2 = z * z;
        1.0 - z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sin() / z
    }
}

/// Real-analytic aperture transform of neck mode `k` (1-based).
pub fn mode_transform(k: usize, s: Complex64) -> Complex64 {
    let a = k as f64 * PI / 2.0;
    let (m, p) = (csinc(a - s), csinc(a + s));
    if k % 2 == 1 {
        m + p
    } else {
        m - p
    }
}

/// `sqrt(z)` with the cut along the positive imaginary direction.
fn sqrt_cut_up(z: Complex64) -> Complex64 {
    let r = z.norm();
    if r == 0.0 {
        return z;
    }
    let mut phi = z.im.atan2(z.re);
    if phi > PI / 2.0 {
        phi -= 2.0 * PI;
    }
    Complex64::from_polar(r.sqrt(), phi / 2.0)
}

/// Outgoing `eta(s) = sqrt(kappa^2 - s^2)` valid on and below the real axis
/// for `Re s >= 0`.
pub fn eta(s: Complex64, kappa: Complex64) -> Complex64 {
    I * sqrt_cut_up(s - kappa) * principal_sqrt(s + kappa)
}

pub(crate) fn kappa_of(rho: Complex64, eps: f64) -> Complex64 {
    principal_sqrt(rho * (eps * eps))
}

fn check_rho(rho: Complex64, eps: f64, kk: usize) -> Result<()> {
    if !(rho.re > 0.0) || !(eps > 0.0) || kk == 0 {
        return Err(Error::InvalidInput(format!("exterior DtN needs Re rho > 0, eps > 0, K >= 1 (rho={rho}, eps={eps}, K={kk})")));
    }
    if rho.im.abs() > MAX_RELATIVE_IM * rho.re {
        return Err(Error::InvalidInput(format!("|Im rho| too large for the outgoing contour: {rho}")));
    }
    Ok(())
}

/// Nodes and weights of the path from 0 to `T`: a sine-shaped dip under the
/// branch point on `[0, 2 Re kappa]`, then the real axis.
fn path_nodes(kappa: Complex64, cutoff: f64, ppp: usize) -> Vec<(Complex64, Complex64)> {
    let (x, w) = gauss_legendre(ppp);
    let mut out = Vec::new();
    let kr = kappa.re;
    let t1 = 2.0 * kr;
    let depth = 0.5 * kr.min(1.0);
    let dip_panels = ((t1 / (0.5 * depth)).ceil() as usize).max(4);
    let hw = t1 / dip_panels as f64;
    for p in 0..dip_panels {
        let c = (p as f64 + 0.5) * hw;
        for (xi, wi) in x.iter().zip(&w) {
            let t = c + 0.5 * hw * xi;
            let arg = PI * t / t1;
            let s = Complex64::new(t, -depth * arg.sin());
            let ds = Complex64::new(1.0, -depth * PI / t1 * arg.cos());
            out.push((s, ds * (0.5 * hw * wi)));
        }
    }
    let panels = ((cutoff - t1).ceil() as usize).max(1);
    let pw = (cutoff - t1) / panels as f64;
    for p in 0..panels {
        let c = t1 + (p as f64 + 0.5) * pw;
        for (xi, wi) in x.iter().zip(&w) {
            out.push((Complex64::new(c + 0.5 * pw * xi, 0.0), Complex64::new(0.5 * pw * wi, 0.0)));
        }
    }
    out
}

/// Cut-off, a multiple of pi so that `sin 2T = 0` and `cos 2T = 1`.
fn cutoff_for(kk: usize, kappa: Complex64, rule: &ExteriorRule) -> f64 {
    let alpha_k = kk as f64 * PI / 2.0;
    let want = rule.base_cutoff + 4.0 * alpha_k + 4.0 * kappa.re;
    (want / PI).ceil() * PI
}

/// `n`-th derivative at `t` of an analytic function by the Cauchy integral
/// on a circle of radius `r`.
fn cauchy_derivative(f: &dyn Fn(Complex64) -> Complex64, t: f64, r: f64, n: u32) -> Complex64 {
    let m = 64;
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..m {
        let th = 2.0 * PI * j as f64 / m as f64;
        let e = Complex64::from_polar(1.0, th);
        acc += f(t + r * e) * Complex64::from_polar(1.0, -(n as f64) * th);
    }
    let fact: f64 = (1..=n).map(|v| v as f64).product();
    acc * fact / (m as f64 * r.powi(n as i32))
}

/// Tail `int_T^inf i eta F_k F_l ds` for same-parity `k, l`.
fn tail_entry(k: usize, l: usize, kappa: Complex64, t: f64, gl: &(Vec<f64>, Vec<f64>)) -> Complex64 {
    let ak = k as f64 * PI / 2.0;
    let al = l as f64 * PI / 2.0;
    let sign = |k: usize| -> f64 {
        if k % 2 == 1 {
            if (k - 1) / 2 % 2 == 0 { 1.0 } else { -1.0 }
        } else if (k / 2) % 2 == 0 {
            -1.0
        } else {
            1.0
        }
    };
    // F_k = sign_k * 2 alpha_k * (cos s | sin s) / (alpha_k^2 - s^2)
    let c = 4.0 * ak * al * sign(k) * sign(l);
    let g = |s: Complex64| -> Complex64 {
        let ie = I * eta(s, kappa);
        ie / ((ak * ak - s * s) * (al * al - s * s))
    };
    // smooth part through s = T/u
    let mut smooth = Complex64::new(0.0, 0.0);
    for (x, w) in gl.0.iter().zip(&gl.1) {
        let u = 0.5 * (x + 1.0);
        smooth += g(Complex64::new(t / u, 0.0)) * (t / (u * u)) * (0.5 * w);
    }
    let r = t / 4.0;
    let d1 = cauchy_derivative(&g, t, r, 1);
    let d3 = cauchy_derivative(&g, t, r, 3);
    let osc = -d1 / 4.0 + d3 / 16.0;
    let pm = if k % 2 == 1 { 1.0 } else { -1.0 };
    (smooth + osc * pm) * (c / 2.0)
}

pub fn exterior_dtn(rho: Complex64, eps: f64, kk: usize, rule: &ExteriorRule) -> Result<ExteriorDtN> {
    check_rho(rho, eps, kk)?;
    let kappa = kappa_of(rho, eps);
    let cutoff = cutoff_for(kk, kappa, rule);
    let nodes = path_nodes(kappa, cutoff, rule.points_per_panel);
    let mut m = CMatrix::zeros(kk, kk);
    let mut f = vec![Complex64::new(0.0, 0.0); kk];
    for (s, w) in &nodes {
        let ie = I * eta(*s, kappa) * *w;
        for (k, fk) in f.iter_mut().enumerate() {
            *fk = mode_transform(k + 1, *s);
        }
        for k in 0..kk {
            let a = ie * f[k];
            for l in (k..kk).step_by(2) {
                m[(k, l)] += a * f[l];
            }
        }
    }
    let gl = gauss_legendre(48);
    for k in 0..kk {
        for l in (k..kk).step_by(2) {
            m[(k, l)] += tail_entry(k + 1, l + 1, kappa, cutoff, &gl);
        }
    }
    let scale = 1.0 / (PI * eps);
    for k in 0..kk {
        for l in k..kk {
            let v = m[(k, l)] * scale;
            m[(k, l)] = v;
            m[(l, k)] = v;
        }
    }
    if m.max_abs().is_nan() {
        return Err(Error::NoConvergence("non-finite exterior DtN entry".into()));
    }
    Ok(ExteriorDtN {
        rho,
        eps,
        matrix: m,
        branch: "outgoing",
    })
}

/// Sign and natural log of a real quantity that may be far outside the
/// floating-point range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLog {
    pub sign: i8,
    pub log_mag: f64,
}

impl SignedLog {
    pub fn value(&self) -> f64 {
        self.sign as f64 * self.log_mag.exp()
    }
}

/// Radiated power `Im <Lambda_E g, g>` for log-scaled aperture coefficients.
pub fn radiated_flux(dtn: &ExteriorDtN, g: &[LogComplex<f64>]) -> Result<SignedLog> {
    let kk = dtn.matrix.rows();
    if g.len() != kk {
        return Err(Error::InvalidInput(format!("coefficient vector has length {}, DtN has {kk}", g.len())));
    }
    let top = g.iter().map(|v| v.log_mag).fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::DegenerateInput("all aperture coefficients vanish".into()));
    }
    let gh: Vec<Complex64> = g.iter().map(|v| v.scaled(top)).collect();
    let lg = dtn.matrix.matvec(&gh);
    let q: Complex64 = lg.iter().zip(&gh).map(|(a, b)| a * b.conj()).sum();
    let p = q.im;
    if p == 0.0 {
        return Ok(SignedLog {
            sign: 0,
            log_mag: f64::NEG_INFINITY,
        });
    }
    Ok(SignedLog {
        sign: if p > 0.0 { 1 } else { -1 },
        log_mag: p.abs().ln() + 2.0 * top,
    })
}

/// Exterior field from aperture coefficients on a fixed quadrature rule, so
/// that the discrete field is an exact superposition of Helmholtz solutions.
#[derive(Debug, Clone)]
pub struct ExteriorField {
    eps: f64,
    neck_length: f64,
    g: Vec<Complex64>,
    // per node: s, weight, eta, sum of g_k F_k over odd k, over even k
    nodes: Vec<(f64, f64, Complex64, Complex64, Complex64)>,
}

impl ExteriorField {
    /// Rule resolving the field for `x - L >= min_offset`.
    pub fn new(rho: Complex64, eps: f64, neck_length: f64, g: &[Complex64], min_offset: f64) -> Result<Self> {
        check_rho(rho, eps, g.len())?;
        if !(min_offset > 0.0) {
            return Err(Error::InvalidInput("field rule needs a positive offset from the aperture".into()));
        }
        let kappa = kappa_of(rho, eps);
        let kr = kappa.re;
        let s_max = kr + 45.0 * eps / min_offset + 2.0;
        let (x, w) = gauss_legendre(24);
        let mut nodes = Vec::new();
        let mut push = |s: f64, wt: f64| {
            let et = eta(Complex64::new(s, 0.0), kappa);
            let mut odd = Complex64::new(0.0, 0.0);
            let mut even = Complex64::new(0.0, 0.0);
            for (k, gk) in g.iter().enumerate() {
                let f = mode_transform(k + 1, Complex64::new(s, 0.0));
                if k % 2 == 0 {
                    odd += gk * f;
                } else {
                    even += gk * f;
                }
            }
            nodes.push((s, wt, et, odd, even));
        };
        // s = kr - tau^2 on [0, kr] and s = kr + tau^2 beyond, removing the
        // square-root kink at the branch point
        let tau0 = kr.sqrt();
        let np = ((tau0 * 8.0).ceil() as usize).max(2);
        for p in 0..np {
            let (a, b) = (tau0 * p as f64 / np as f64, tau0 * (p + 1) as f64 / np as f64);
            for (xi, wi) in x.iter().zip(&w) {
                let tau = 0.5 * (a + b) + 0.5 * (b - a) * xi;
                push(kr - tau * tau, 2.0 * tau * 0.5 * (b - a) * wi);
            }
        }
        let tau1 = (s_max - kr).sqrt();
        let osc = 1.0 + (neck_length.abs() + 200.0 * eps) / eps;
        let np = ((tau1 * tau1 / 0.5 + tau1 * osc.min(400.0)).ceil() as usize).max(8);
        for p in 0..np {
            let (a, b) = (tau1 * p as f64 / np as f64, tau1 * (p + 1) as f64 / np as f64);
            for (xi, wi) in x.iter().zip(&w) {
                let tau = 0.5 * (a + b) + 0.5 * (b - a) * xi;
                push(kr + tau * tau, 2.0 * tau * 0.5 * (b - a) * wi);
            }
        }
        Ok(Self {
            eps,
            neck_length,
            g: g.to_vec(),
            nodes,
        })
    }

    /// Field at `(x, y)` with `x >= L`; on `x = L` this is the aperture trace.
    pub fn value(&self, x: f64, y: f64) -> Result<Complex64> {
        let d = x - self.neck_length;
        if d < 0.0 {
            return Err(Error::InvalidInput("field point must satisfy x >= L".into()));
        }
        if d == 0.0 {
            let neck = crate::modes::DuctModeSet::new(self.eps, self.g.len())?;
            return Ok(self.g.iter().enumerate().map(|(k, gk)| gk * neck.profile(k + 1, y)).sum());
        }
        let e = self.eps;
        let mut acc = Complex64::new(0.0, 0.0);
        for &(s, w, et, odd, even) in &self.nodes {
            let prop = (I * et * (d / e)).exp();
            let arg = s * y / e;
            // odd-k transforms are even in s, even-k ones odd; the 1/sqrt(eps)
            // of the modes and the eps of the scaled transform combine
            acc += prop * (odd * arg.cos() + even * arg.sin()) * w;
        }
        Ok(acc / (PI * e.sqrt()))
    }
}

/// Single-point convenience wrapper around [`ExteriorField`].
pub fn exterior_field(rho: Complex64, eps: f64, neck_length: f64, g: &[Complex64], x: f64, y: f64) -> Result<Complex64> {
    let d = x - neck_length;
    if d <= 0.0 {
        return ExteriorField::new(rho, eps, neck_length, g, eps)?.value(x, y);
    }
    ExteriorField::new(rho, eps, neck_length, g, d)?.value(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transform_matches_tail_form() {
        for k in 1..6 {
            let s: f64 = 37.3;
            let a = k as f64 * PI / 2.0;
            let sg = |k: usize| if k % 2 == 1 { if (k - 1) / 2 % 2 == 0 { 1.0 } else { -1.0 } } else if (k / 2) % 2 == 0 { -1.0 } else { 1.0 };
            let trig = if k % 2 == 1 { s.cos() } else { s.sin() };
            let want = sg(k) * 2.0 * a * trig / (a * a - s * s);
            assert!((mode_transform(k, Complex64::new(s, 0.0)).re - want).abs() < 1e-14);
        }
    }

    #[test]
    fn eta_branch_on_real_axis() {
        let kappa = Complex64::new(1.0, 0.0);
        let e = eta(Complex64::new(0.5, 0.0), kappa);
        assert!((e - Complex64::new(0.75f64.sqrt(), 0.0)).norm() < 1e-15);
        let e = eta(Complex64::new(2.0, 0.0), kappa);
        assert!((e - Complex64::new(0.0, 3f64.sqrt())).norm() < 1e-15);
    }

    use crate::modes::DuctModeSet;
    use crate::specfun::{hankel1, integrate, Domain, QuadratureSpec};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Aperture boundary-integral form of the same operator:
    /// `int int (i/2) H_0(sqrt(rho)|y - y'|) [rho psi_k psi_l - psi_k' psi_l']`.
    fn boundary_integral_entry(k: usize, l: usize, rho: f64, eps: f64) -> Complex64 {
        let m = DuctModeSet::new(eps, k.max(l)).unwrap();
        let (x, w) = gauss_legendre(40);
        let inner = |u: f64| -> f64 {
            let lo = (-eps).max(u - eps);
            let hi = eps.min(u + eps);
            if hi <= lo {
                return 0.0;
            }
            let mut acc = 0.0;
            for (xi, wi) in x.iter().zip(&w) {
                let y = 0.5 * (lo + hi) + 0.5 * (hi - lo) * xi;
                let v = rho * m.profile(k, y) * m.profile(l, y - u) - m.profile_derivative(k, y) * m.profile_derivative(l, y - u);
                acc += 0.5 * (hi - lo) * wi * v;
            }
            acc
        };
        let kr = rho.sqrt();
        let spec = QuadratureSpec::default().with_tolerances(1e-13, 1e-11);
        let f = |u: f64| hankel1(0, c(kr * u.abs(), 0.0)).unwrap() * c(0.0, 0.5) * inner(u);
        let a = integrate(f, Domain::Finite(-2.0 * eps, 0.0), &spec).unwrap().value;
        let b = integrate(f, Domain::Finite(0.0, 2.0 * eps), &spec).unwrap().value;
        a + b
    }

    #[test]
    fn matches_boundary_integral_oracle() {
        let (rho, eps, kk) = (20.0, 0.2, 8);
        let d = exterior_dtn(c(rho, 0.0), eps, kk, &ExteriorRule::default()).unwrap();
        let scale = d.matrix.max_abs();
        for k in 1..=kk {
            for l in (k..=kk).step_by(2) {
                let want = boundary_integral_entry(k, l, rho, eps);
                let got = d.matrix[(k - 1, l - 1)];
                assert!((got - want).norm() <= 1e-6 * scale.max(want.norm()), "({k},{l}): {got} vs {want}");
            }
        }
    }

    #[test]
    fn parity_symmetry_and_positive_power() {
        let d = exterior_dtn(c(20.0, 0.0), 0.2, 8, &ExteriorRule::default()).unwrap();
        assert_eq!(d.matrix[(0, 1)], c(0.0, 0.0));
        assert!(d.matrix[(0, 0)].im > 0.0);
        let t = d.matrix.transpose();
        assert!(d.matrix.sub(&t).max_abs() <= 1e-10 * d.matrix.max_abs());
        assert_eq!(d.branch, "outgoing");
    }

    /// Straight real-axis evaluation for real `rho`, with the square-root
    /// kink removed by `s = kappa -/+ tau^2`.
    fn real_axis_entry(k: usize, l: usize, rho: f64, eps: f64) -> Complex64 {
        let kappa = eps * rho.sqrt();
        let spec = QuadratureSpec::default().with_tolerances(1e-14, 1e-12);
        let f = |s: f64| -> Complex64 {
            let e = eta(c(s, 0.0), c(kappa, 0.0));
            c(0.0, 1.0) * e * mode_transform(k, c(s, 0.0)) * mode_transform(l, c(s, 0.0))
        };
        let a = integrate(|t: f64| f(kappa - t * t) * (2.0 * t), Domain::Finite(0.0, kappa.sqrt()), &spec).unwrap().value;
        let b = integrate(|t: f64| f(kappa + t * t) * (2.0 * t), Domain::Finite(0.0, 6.0), &spec).unwrap().value;
        let tail_spec = QuadratureSpec::default().with_tolerances(1e-11, 1e-9).with_panel(1.0);
        let rest = integrate(f, Domain::SemiInfinite(kappa + 36.0), &tail_spec).unwrap().value;
        (a + b + rest) / (PI * eps)
    }

    #[test]
    fn deformed_path_agrees_with_real_axis_at_real_rho() {
        let d = exterior_dtn(c(20.0, 0.0), 0.2, 4, &ExteriorRule::default()).unwrap();
        for (k, l) in [(1, 1), (1, 3), (2, 2), (4, 4), (3, 3)] {
            let want = real_axis_entry(k, l, 20.0, 0.2);
            let got = d.matrix[(k - 1, l - 1)];
            assert!((got - want).norm() < 1e-9 * d.matrix.max_abs(), "({k},{l}): {got} vs {want}");
        }
    }

    #[test]
    fn continuous_across_the_real_axis() {
        let rule = ExteriorRule::default();
        let base = exterior_dtn(c(20.0, 0.0), 0.2, 6, &rule).unwrap().matrix;
        let mut last = f64::INFINITY;
        for dl in [1e-2, 1e-4, 1e-6, 1e-8] {
            let m = exterior_dtn(c(20.0, -dl), 0.2, 6, &rule).unwrap().matrix;
            let jump = m.sub(&base).max_abs();
            assert!(jump < last);
            last = jump;
        }
        assert!(last < 1e-7 * base.max_abs());
    }

    #[test]
    fn refinement_and_truncation_drift() {
        let rule = ExteriorRule::default();
        let a = exterior_dtn(c(19.7, -1e-3), 0.2, 8, &rule).unwrap().matrix;
        let b = exterior_dtn(c(19.7, -1e-3), 0.2, 16, &rule.refined()).unwrap().matrix.leading(8);
        assert!(a.sub(&b).max_abs() < 1e-8 * a.max_abs(), "{}", a.sub(&b).max_abs());
    }

    #[test]
    fn rejects_bad_arguments() {
        let r = ExteriorRule::default();
        assert!(exterior_dtn(c(-1.0, 0.0), 0.2, 4, &r).is_err());
        assert!(exterior_dtn(c(20.0, -1.0), 0.2, 4, &r).is_err());
    }

    #[test]
    fn flux_examples() {
        let d = exterior_dtn(c(20.0, 0.0), 0.2, 4, &ExteriorRule::default()).unwrap();
        let zero = vec![LogComplex::zero(); 4];
        assert!(matches!(radiated_flux(&d, &zero), Err(Error::DegenerateInput(_))));
        let mut e1 = zero.clone();
        e1[0] = LogComplex::one();
        let p = radiated_flux(&d, &e1).unwrap();
        assert_eq!(p.sign, 1);
        assert!((p.value() - d.matrix[(0, 0)].im).abs() < 1e-14 * p.value());
        // far below double precision range
        let tiny: Vec<LogComplex<f64>> = e1.iter().map(|v| LogComplex::new(v.log_mag - 2000.0, v.phase)).collect();
        let pt = radiated_flux(&d, &tiny).unwrap();
        assert!((pt.log_mag - (p.log_mag - 4000.0)).abs() < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn radiated_power_is_positive_and_quadratic(
            re in proptest::collection::vec(-1.0f64..1.0, 6),
            im in proptest::collection::vec(-1.0f64..1.0, 6),
            lc in -50.0f64..50.0,
            ph in -3.0f64..3.0,
        ) {
            let d = exterior_dtn(c(20.0, 0.0), 0.2, 6, &ExteriorRule::default()).unwrap();
            let g: Vec<LogComplex<f64>> = re.iter().zip(&im).map(|(a, b)| LogComplex::from_complex(c(*a, *b))).collect();
            prop_assume!(g.iter().any(|v| !v.is_zero()));
            let p = radiated_flux(&d, &g).unwrap();
            prop_assert_eq!(p.sign, 1);
            let cg: Vec<LogComplex<f64>> = g.iter().map(|v| *v * LogComplex::new(lc, ph)).collect();
            let q = radiated_flux(&d, &cg).unwrap();
            prop_assert_eq!(q.sign, 1);
            prop_assert!((q.log_mag - p.log_mag - 2.0 * lc).abs() < 1e-9);
        }
    }

    #[test]
    fn field_parity_and_aperture_trace() {
        let rho = c(20.0, 0.0);
        let g = vec![c(0.0, 0.0), c(1.0, 0.5), c(0.0, 0.0), c(-0.3, 0.2)];
        let f = ExteriorField::new(rho, 0.2, 1.0, &g, 0.05).unwrap();
        for (x, y) in [(1.1, 0.05), (1.3, 0.4), (2.0, 1.0)] {
            let a = f.value(x, y).unwrap();
            let b = f.value(x, -y).unwrap();
            assert!((a + b).norm() <= 1e-12 * a.norm().max(1e-300));
        }
        let g1 = vec![c(1.0, 0.0), c(0.3, 0.0), c(0.2, -0.1), c(0.0, 0.0)];
        let f = ExteriorField::new(rho, 0.2, 1.0, &g1, 0.05).unwrap();
        let amp = g1.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for y in [0.2, 0.25, 0.5, 1.0, 3.0, -0.2, -0.7] {
            assert!(f.value(1.0, y).unwrap().norm() <= 1e-8 * amp);
        }
    }

    #[test]
    fn field_satisfies_helmholtz() {
        let rho = c(20.0, 0.0);
        let g = vec![c(1.0, 0.0), c(0.0, 0.0), c(0.4, 0.1)];
        let (eps, l) = (0.2, 1.0);
        let f = ExteriorField::new(rho, eps, l, &g, 0.1).unwrap();
        // 5-point stencils at h and 2h, combined to cancel the h^2 term
        let lap = |x: f64, y: f64, h: f64| -> Complex64 {
            let u = f.value(x, y).unwrap();
            (f.value(x + h, y).unwrap() + f.value(x - h, y).unwrap() + f.value(x, y + h).unwrap() + f.value(x, y - h).unwrap() - u * 4.0) / (h * h)
        };
        let h = 2e-4;
        for (x, y) in [(1.15, 0.0), (1.3, 0.3), (1.6, -0.5), (2.0, 0.9)] {
            let u = f.value(x, y).unwrap();
            let l4 = (lap(x, y, h) * 4.0 - lap(x, y, 2.0 * h)) / 3.0;
            let res = (l4 + rho * u).norm();
            assert!(res <= 1e-6 * (rho.norm() * u.norm()), "({x},{y}): residual {res}, |u| {}", u.norm());
        }
    }

    #[test]
    fn far_field_decays_like_inverse_square_root() {
        let rho = c(20.0, 0.0);
        let (eps, l) = (0.2, 1.0);
        let g = vec![c(1.0, 0.0)];
        let f = ExteriorField::new(rho, eps, l, &g, 10.0 * eps).unwrap();
        // least-squares slope of ln|u| against ln r along a ray at 30 degrees
        let (th_c, th_s) = (PI / 6.0f64).sin_cos();
        let pts: Vec<(f64, f64)> = (0..40)
            .map(|i| {
                let r = eps * 10.0 * (10f64).powf(i as f64 / 39.0);
                let u = f.value(l + r * th_s, r * th_c).unwrap();
                (r.ln(), u.norm().ln())
            })
            .collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let slope = sxy / sxx;
        assert!((slope + 0.5).abs() <= 0.05, "slope {slope}");
    }
}
