//! Rectangular cavity `[-a, 0] x [-b/2, b/2]` with the neck attached at the
//! midpoint of its right wall.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::modes::DuctModeSet;
use crate::specfun::principal_sqrt;

/// Relative gap below which two eigenvalues are reported as one cluster.
const CLUSTER_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectCavity {
    pub a: f64,
    pub b: f64,
}

impl RectCavity {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0) || !(b > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidInput(format!("cavity sides must be positive, got a={a}, b={b}")));
        }
        Ok(Self { a, b })
    }

    pub fn eigenvalue(&self, m: usize, n: usize) -> f64 {
        let (mf, nf) = (m as f64, n as f64);
        PI * PI * (mf * mf / (self.a * self.a) + nf * nf / (self.b * self.b))
    }

    /// Width-`b` Dirichlet mode `chi_j(y)`.
    pub fn y_mode(&self, j: usize, y: f64) -> f64 {
        (2.0 / self.b).sqrt() * (j as f64 * PI * (y + self.b / 2.0) / self.b).sin()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { a: self.a * s, b: self.b * s }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityEigenpair {
    pub m: usize,
    pub n: usize,
    pub lambda: f64,
    /// `u = norm * sin(m pi (x + a)/a) * sin(n pi (y + b/2)/b)`.
    pub norm: f64,
    /// Index of the cluster of numerically equal eigenvalues.
    pub cluster: usize,
    pub cluster_size: usize,
}

impl CavityEigenpair {
    pub fn value(&self, cavity: &RectCavity, x: f64, y: f64) -> f64 {
        self.norm
            * (self.m as f64 * PI * (x + cavity.a) / cavity.a).sin()
            * (self.n as f64 * PI * (y + cavity.b / 2.0) / cavity.b).sin()
    }

    pub fn is_degenerate(&self) -> bool {
        self.cluster_size > 1
    }
}

/// First `count` eigenpairs in ascending order.
pub fn eigen_list(cavity: &RectCavity, count: usize) -> Vec<CavityEigenpair> {
    if count == 0 {
        return Vec::new();
    }
    // every eigenvalue up to the count-th has m, n <= count
    let mut all = Vec::with_capacity(count * count);
    for m in 1..=count + 1 {
        for n in 1..=count + 1 {
            all.push((cavity.eigenvalue(m, n), m, n));
        }
    }
    all.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap().then(p.1.cmp(&q.1)));
    let mut out: Vec<CavityEigenpair> = Vec::with_capacity(count);
    let mut cluster = 0;
    for (i, &(lambda, m, n)) in all.iter().enumerate() {
        if i > 0 && (lambda - all[i - 1].0).abs() > CLUSTER_TOL * lambda {
            cluster += 1;
        }
        if out.len() == count {
            // finish the open cluster so its size is right, then stop
            if out.last().map(|p| p.cluster) != Some(cluster) {
                break;
            }
            let c = cluster;
            out.iter_mut().filter(|p| p.cluster == c).for_each(|p| p.cluster_size += 1);
            continue;
        }
        let size = out.iter().filter(|p| p.cluster == cluster).count();
        out.iter_mut().filter(|p| p.cluster == cluster).for_each(|p| p.cluster_size = size + 1);
        out.push(CavityEigenpair {
            m,
            n,
            lambda,
            norm: 2.0 / (cavity.a * cavity.b).sqrt(),
            cluster,
            cluster_size: size + 1,
        });
    }
    out
}

/// Look up a specific `(m, n)` eigenpair.
pub fn eigenpair(cavity: &RectCavity, m: usize, n: usize) -> Result<CavityEigenpair> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidInput("eigenpair indices start at 1".into()));
    }
    let lambda = cavity.eigenvalue(m, n);
    let mut size = 0;
    let mmax = ((lambda * 1.01).sqrt() * cavity.a / PI).ceil() as usize + 1;
    let nmax = ((lambda * 1.01).sqrt() * cavity.b / PI).ceil() as usize + 1;
    for p in 1..=mmax {
        for q in 1..=nmax {
            if (cavity.eigenvalue(p, q) - lambda).abs() <= CLUSTER_TOL * lambda {
                size += 1;
            }
        }
    }
    Ok(CavityEigenpair {
        m,
        n,
        lambda,
        norm: 2.0 / (cavity.a * cavity.b).sqrt(),
        cluster: 0,
        cluster_size: size,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub holds: bool,
    pub simple: bool,
    pub junction_nonzero: bool,
    /// Relative distance to the nearest other eigenvalue.
    pub relative_gap: f64,
    pub diagnostic: String,
}

/// Simplicity of the eigenvalue and non-vanishing of the eigenfunction at
/// the junction `(0, 0)`.
pub fn assumption_h(cavity: &RectCavity, pair: &CavityEigenpair, tol: f64) -> AssumptionReport {
    let lambda = pair.lambda;
    let mmax = ((lambda * (1.0 + tol) * 4.0).sqrt() * cavity.a / PI).ceil() as usize + 2;
    let nmax = ((lambda * (1.0 + tol) * 4.0).sqrt() * cavity.b / PI).ceil() as usize + 2;
    let mut gap = f64::INFINITY;
    for m in 1..=mmax {
        for n in 1..=nmax {
            if (m, n) == (pair.m, pair.n) {
                continue;
            }
            gap = gap.min((cavity.eigenvalue(m, n) - lambda).abs() / lambda);
        }
    }
    let simple = gap > tol;
    let junction_nonzero = pair.n % 2 == 1;
    let mut diagnostic = String::new();
    if !simple {
        diagnostic.push_str(&format!("eigenvalue {lambda} not simple (relative gap {gap:e}); "));
    }
    if !junction_nonzero {
        diagnostic.push_str(&format!("nodal line through the junction (n = {} even); ", pair.n));
    }
    if diagnostic.is_empty() {
        diagnostic.push_str("ok");
    }
    AssumptionReport {
        holds: simple && junction_nonzero,
        simple,
        junction_nonzero,
        relative_gap: gap,
        diagnostic,
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `<psi_k, chi_j>` for the neck mode `psi_k` of half-width `eps` and the
/// cavity y-mode `chi_j` of width `b`.
pub fn neck_overlap(j: usize, k: usize, eps: f64, b: f64) -> f64 {
    let s = j as f64 * PI * eps / b;
    let al = k as f64 * PI / 2.0;
    let pre = (2.0 * eps / b).sqrt();
    if k % 2 == 1 {
        let sj = match j % 4 {
            1 => 1.0,
            3 => -1.0,
            _ => return 0.0,
        };
        pre * sj * (sinc(al - s) + sinc(al + s))
    } else {
        let cj = match j % 4 {
            0 => 1.0,
            2 => -1.0,
            _ => return 0.0,
        };
        pre * cj * (sinc(al - s) - sinc(al + s))
    }
}

/// `gamma cot(gamma a)` without overflow for strongly evanescent `gamma`.
pub fn gamma_cot(gamma: Complex64, a: f64) -> Complex64 {
    let z = gamma * a;
    let i = Complex64::new(0.0, 1.0);
    let cot = if z.im > 0.0 {
        let e = (2.0 * i * z).exp();
        i * (e + 1.0) / (e - 1.0)
    } else {
        let e = (-2.0 * i * z).exp();
        i * (1.0 + e) / (1.0 - e)
    };
    gamma * cot
}

pub fn cavity_gamma(cavity: &RectCavity, j: usize, rho: Complex64) -> Complex64 {
    let q = j as f64 * PI / cavity.b;
    principal_sqrt(rho - q * q)
}

/// Default number of cavity y-modes: the overlaps decay like `j^-2`, so the
/// sum needs enough terms to resolve the neck scale `b/(pi eps)`.
pub fn default_m_count(cavity: &RectCavity, rho_max: f64, eps: f64) -> usize {
    let threshold = (2.0 * rho_max.max(0.0).sqrt() * cavity.b / PI).ceil() as usize;
    (threshold + 30).max((3000.0 * cavity.b / (PI * eps)).ceil() as usize)
}

fn check_pole(cavity: &RectCavity, gamma: Complex64, j: usize) -> Result<()> {
    let s = (gamma * cavity.a).sin();
    if s.norm() < 1e-12 {
        return Err(Error::PoleProximity(format!(
            "cavity mode j={j}: |sin(gamma a)| = {:e}",
            s.norm()
        )));
    }
    Ok(())
}

/// Cavity Dirichlet-to-Neumann matrix on the neck modes at `x = 0`.
pub fn cavity_dtn(cavity: &RectCavity, rho: Complex64, neck: &DuctModeSet<f64>, m_count: usize) -> Result<CMatrix> {
    Ok(cavity_dtn_split(cavity, rho, neck, m_count, None)?.full())
}

/// Cavity DtN with one y-mode's pole term split off as a rank-one part:
/// `Lambda_C = regular + gamma0 cot(gamma0 a) v v^T`.
#[derive(Debug, Clone)]
pub struct CavityDtnSplit {
    pub regular: CMatrix,
    pub v: Vec<Complex64>,
    pub gamma0: Complex64,
    pub a: f64,
}

impl CavityDtnSplit {
    pub fn full(&self) -> CMatrix {
        let k = self.regular.rows();
        let c = gamma_cot(self.gamma0, self.a);
        CMatrix::from_fn(k, k, |i, j| self.regular[(i, j)] + c * self.v[i] * self.v[j])
    }
}

pub fn cavity_dtn_split(
    cavity: &RectCavity,
    rho: Complex64,
    neck: &DuctModeSet<f64>,
    m_count: usize,
    split: Option<usize>,
) -> Result<CavityDtnSplit> {
    if m_count == 0 {
        return Err(Error::InvalidInput("m_count must be at least 1".into()));
    }
    if 2.0 * neck.half_width >= cavity.b {
        return Err(Error::InvalidInput("neck must be narrower than the cavity wall".into()));
    }
    let kk = neck.count;
    let eps = neck.half_width;
    let mut reg = CMatrix::zeros(kk, kk);
    let mut v = vec![Complex64::new(0.0, 0.0); kk];
    let mut w = vec![0.0; kk];
    for j in 1..=m_count {
        let gamma = cavity_gamma(cavity, j, rho);
        for (k, wk) in w.iter_mut().enumerate() {
            *wk = neck_overlap(j, k + 1, eps, cavity.b);
        }
        if Some(j) == split {
            for k in 0..kk {
                v[k] = Complex64::new(w[k], 0.0);
            }
            continue;
        }
        check_pole(cavity, gamma, j)?;
        let c = gamma_cot(gamma, cavity.a);
        // only one parity class couples to a given j
        let start = if j % 2 == 1 { 0 } else { 1 };
        for k in (start..kk).step_by(2) {
            let ck = c * w[k];
            for l in (start..kk).step_by(2) {
                reg[(k, l)] += ck * w[l];
            }
        }
    }
    let gamma0 = match split {
        Some(j) => {
            if j > m_count {
                return Err(Error::InvalidInput("split mode beyond m_count".into()));
            }
            cavity_gamma(cavity, j, rho)
        }
        None => Complex64::new(1.0, 0.0),
    };
    Ok(CavityDtnSplit {
        regular: reg,
        v,
        gamma0,
        a: cavity.a,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::symmetric_eigenvalues;
    use crate::specfun::{integrate_real, Domain, QuadratureSpec};
    use proptest::prelude::*;

    fn unit() -> RectCavity {
        RectCavity::new(1.0, 1.0).unwrap()
    }

    #[test]
    fn eigen_list_examples() {
        let l = eigen_list(&unit(), 4);
        assert!((l[0].lambda - 2.0 * PI * PI).abs() < 1e-12);
        assert!((l[0].lambda - 19.7392).abs() < 1e-4);
        assert!(!l[0].is_degenerate());
        assert!(l[1].is_degenerate() && l[2].is_degenerate());
        assert_eq!(l[1].cluster, l[2].cluster);
        assert!((l[1].lambda - 5.0 * PI * PI).abs() < 1e-12);
        let c = RectCavity::new(1.0, 0.8).unwrap();
        assert!((eigen_list(&c, 1)[0].lambda - PI * PI * (1.0 + 1.0 / 0.64)).abs() < 1e-12);
        assert!((eigen_list(&c, 1)[0].lambda - 25.29).abs() < 1e-3);
        for w in l.windows(2) {
            assert!(w[0].lambda <= w[1].lambda);
        }
        // a tie cut by the count is still flagged
        let l1 = eigen_list(&unit(), 2);
        assert_eq!(l1.len(), 2);
        assert_eq!(l1[1].cluster_size, 2);
    }

    #[test]
    fn eigenfunctions_vanish_on_the_boundary() {
        let c = RectCavity::new(1.3, 0.7).unwrap();
        for p in eigen_list(&c, 10) {
            for i in 0..=20 {
                let t = i as f64 / 20.0;
                let x = -c.a + t * c.a;
                let y = -c.b / 2.0 + t * c.b;
                for v in [p.value(&c, x, -c.b / 2.0), p.value(&c, x, c.b / 2.0), p.value(&c, -c.a, y), p.value(&c, 0.0, y)] {
                    assert!(v.abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn eigenpair_normalisation() {
        let c = RectCavity::new(1.3, 0.7).unwrap();
        let p = eigenpair(&c, 2, 3).unwrap();
        let spec = QuadratureSpec::default();
        let (ix, _) = integrate_real(|x| (2.0 * PI * (x + c.a) / c.a).sin().powi(2), Domain::Finite(-c.a, 0.0), &spec).unwrap();
        let (iy, _) = integrate_real(|y| (3.0 * PI * (y + c.b / 2.0) / c.b).sin().powi(2), Domain::Finite(-c.b / 2.0, c.b / 2.0), &spec).unwrap();
        assert!((p.norm * p.norm * ix * iy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn assumption_h_examples() {
        let c = RectCavity::new(1.0, 0.8).unwrap();
        let g = eigenpair(&c, 1, 1).unwrap();
        assert!(assumption_h(&c, &g, 1e-9).holds);
        let p = eigenpair(&c, 1, 2).unwrap();
        let r = assumption_h(&c, &p, 1e-9);
        assert!(!r.holds && !r.junction_nonzero && r.simple);
        let p = eigenpair(&unit(), 1, 2).unwrap();
        let r = assumption_h(&unit(), &p, 1e-9);
        assert!(!r.holds && !r.simple && !r.junction_nonzero);
        assert!(assumption_h(&unit(), &eigenpair(&unit(), 1, 1).unwrap(), 1e-9).holds);
    }

    #[test]
    fn overlaps_match_quadrature() {
        let (eps, b) = (0.2, 1.0);
        let neck = DuctModeSet::new(eps, 6).unwrap();
        let c = RectCavity::new(1.0, b).unwrap();
        let spec = QuadratureSpec::default().with_tolerances(1e-15, 1e-14);
        for j in 1..=12 {
            for k in 1..=6 {
                let (q, _) = integrate_real(|y| neck.profile(k, y) * c.y_mode(j, y), Domain::Finite(-eps, eps), &spec).unwrap();
                assert!((q - neck_overlap(j, k, eps, b)).abs() < 1e-13, "j={j} k={k}");
            }
        }
    }

    #[test]
    fn gamma_cot_matches_direct_formula() {
        for g in [Complex64::new(2.3, 0.0), Complex64::new(0.0, 3.0), Complex64::new(1.2, -0.01), Complex64::new(0.01, 40.0)] {
            let direct = g * (g * 0.9).cos() / (g * 0.9).sin();
            assert!((gamma_cot(g, 0.9) - direct).norm() < 1e-12 * direct.norm());
        }
        let huge = gamma_cot(Complex64::new(0.0, 2000.0), 1.0);
        assert!((huge.re - 2000.0).abs() < 1e-9);
    }

    fn dtn(rho: Complex64, m: usize) -> CMatrix {
        let neck = DuctModeSet::new(0.2, 8).unwrap();
        cavity_dtn(&unit(), rho, &neck, m).unwrap()
    }

    #[test]
    fn dtn_is_symmetric_and_real_below_cutoffs() {
        let l = dtn(Complex64::new(15.0, -0.3), 400);
        let lt = l.transpose();
        assert!(l.sub(&lt).max_abs() <= 1e-12 * l.max_abs());
        let r = dtn(Complex64::new(15.0, 0.0), 400);
        for i in 0..8 {
            for j in 0..8 {
                assert!(r[(i, j)].im.abs() <= 1e-14 * r.max_abs());
            }
        }
        // parity decoupling
        assert_eq!(r[(0, 1)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn split_reassembles_the_full_matrix() {
        let neck = DuctModeSet::new(0.2, 8).unwrap();
        let rho = Complex64::new(18.0, -0.01);
        let full = cavity_dtn(&unit(), rho, &neck, 600).unwrap();
        let split = cavity_dtn_split(&unit(), rho, &neck, 600, Some(1)).unwrap().full();
        assert!(full.sub(&split).max_abs() < 1e-12 * full.max_abs());
    }

    #[test]
    fn pole_proximity_is_reported() {
        let neck = DuctModeSet::new(0.2, 4).unwrap();
        let r = cavity_dtn(&unit(), Complex64::new(2.0 * PI * PI, 0.0), &neck, 50);
        assert!(matches!(r, Err(Error::PoleProximity(_))));
    }

    #[test]
    fn smallest_eigenvalue_changes_sign_across_lambda11() {
        let l11 = 2.0 * PI * PI;
        let neck = DuctModeSet::new(0.2, 6).unwrap();
        let mut signs = Vec::new();
        for i in -5..=5 {
            if i == 0 {
                continue;
            }
            let rho = l11 + i as f64 * 1e-3;
            let m = cavity_dtn(&unit(), Complex64::new(rho, 0.0), &neck, 800).unwrap();
            let re: Vec<Vec<f64>> = (0..6).map(|p| (0..6).map(|q| m[(p, q)].re).collect()).collect();
            signs.push(symmetric_eigenvalues(&re)[0] > 0.0);
        }
        assert!(signs[..5].iter().all(|s| !s));
        assert!(signs[5..].iter().all(|s| *s));
    }

    #[test]
    fn simple_pole_with_positive_residue() {
        let neck = DuctModeSet::new(0.2, 4).unwrap();
        for (m, n) in [(1usize, 1usize), (2, 1), (1, 3)] {
            let lam = unit().eigenvalue(m, n);
            if !assumption_h(&unit(), &eigenpair(&unit(), m, n).unwrap(), 1e-9).holds {
                continue;
            }
            // Laurent fit r/(rho - lam) + c0 + c1 (rho - lam) from three offsets
            let f = |d: f64| cavity_dtn(&unit(), Complex64::new(lam + d, 0.0), &neck, 800).unwrap()[(0, 0)].re;
            let hs = [1e-4, -1e-4, 2e-4];
            let a: Vec<[f64; 3]> = hs.iter().map(|&h| [1.0 / h, 1.0, h]).collect();
            let y: Vec<f64> = hs.iter().map(|&h| f(h)).collect();
            let det = |m: [[f64; 3]; 3]| m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
            let mm = [a[0], a[1], a[2]];
            let d0 = det(mm);
            let rr = det([[y[0], a[0][1], a[0][2]], [y[1], a[1][1], a[1][2]], [y[2], a[2][1], a[2][2]]]) / d0;
            let gamma2 = lam - (n as f64 * PI).powi(2);
            let want = 2.0 * gamma2 / unit().a * neck_overlap(n, 1, 0.2, 1.0).powi(2);
            assert!(rr > 0.0);
            assert!((rr / want - 1.0).abs() < 1e-3, "({m},{n}): {rr} vs {want}");
        }
    }

    #[test]
    fn truncation_doubling_is_stable() {
        let eps = 0.2;
        let m0 = default_m_count(&unit(), 25.0, eps);
        let neck = DuctModeSet::new(eps, 8).unwrap();
        let rho = Complex64::new(19.0, -1e-4);
        let a = cavity_dtn(&unit(), rho, &neck, m0).unwrap();
        let b = cavity_dtn(&unit(), rho, &neck, 2 * m0).unwrap();
        assert!(a.sub(&b).frobenius() / b.frobenius() < 1e-6);
    }

    proptest! {
        #[test]
        fn assumption_h_is_scale_invariant(a in 0.5f64..2.0, b in 0.5f64..2.0, m in 1usize..4, n in 1usize..4, s in 0.1f64..10.0) {
            let c = RectCavity::new(a, b).unwrap();
            let p = eigenpair(&c, m, n).unwrap();
            let cs = c.scaled(s);
            let ps = eigenpair(&cs, m, n).unwrap();
            prop_assert_eq!(assumption_h(&c, &p, 1e-9).holds, assumption_h(&cs, &ps, 1e-9).holds);
        }
    }
}
