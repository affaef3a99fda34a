//! Cavity, neck and exterior matched in the neck-mode basis.
//!
//! On the neck the field is `sum_k (P_k e^{theta_k (x-L)/eps} + M_k e^{-theta_k x/eps}) psi_k(y)`,
//! so `P_k = A_{k,+}` and `M_k = a_{k,-}`; every column carries its dominant
//! exponential already and the remaining factors `E_k = e^{-theta_k L/eps}`
//! are bounded by one. The cavity pole of the target mode is split off as a
//! bordering unknown `q`, which keeps the determinant analytic at `lambda_0`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::cavity::{
    assumption_h, cavity_dtn_split, cavity_gamma, default_m_count, eigen_list, eigenpair, neck_overlap, RectCavity,
};
use crate::error::{Error, Result};
use crate::exterior::{exterior_dtn, radiated_flux, ExteriorDtN, ExteriorRule};
use crate::linalg::CMatrix;
use crate::modes::DuctModeSet;
use crate::specfun::LogComplex;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExteriorKind {
    FlatHalfPlane,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonatorGeometry {
    pub cavity: RectCavity,
    pub neck_length: f64,
    pub eps: f64,
    pub exterior: ExteriorKind,
}

impl ResonatorGeometry {
    pub fn new(cavity: RectCavity, neck_length: f64, eps: f64) -> Result<Self> {
        if !(neck_length > 0.0) || !(eps > 0.0) {
            return Err(Error::InvalidInput(format!("need L > 0 and eps > 0 (L={neck_length}, eps={eps})")));
        }
        if eps >= cavity.b / 2.0 || eps >= neck_length {
            return Err(Error::InvalidInput(format!(
                "neck half-width {eps} must be below b/2 = {} and L = {neck_length}",
                cavity.b / 2.0
            )));
        }
        Ok(Self {
            cavity,
            neck_length,
            eps,
            exterior: ExteriorKind::FlatHalfPlane,
        })
    }

    /// Effective neck length at the exterior junction; exact for a flat wall.
    pub fn effective_length(&self) -> f64 {
        self.neck_length
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            cavity: self.cavity.scaled(s),
            neck_length: self.neck_length * s,
            eps: self.eps * s,
            exterior: self.exterior,
        }
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        Self::new(self.cavity, self.neck_length, eps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeTruncation {
    pub k_neck: usize,
    pub m_cavity: usize,
    pub exterior: ExteriorRule,
}

impl ModeTruncation {
    pub fn new(k_neck: usize, m_cavity: usize, exterior: ExteriorRule) -> Result<Self> {
        if k_neck < 4 || m_cavity == 0 {
            return Err(Error::InvalidInput(format!("need K_neck >= 4 and M_cavity >= 1 (got {k_neck}, {m_cavity})")));
        }
        Ok(Self {
            k_neck,
            m_cavity,
            exterior,
        })
    }

    /// Default cavity mode count for the geometry around `lambda0`.
    pub fn for_geometry(geom: &ResonatorGeometry, k_neck: usize, lambda0: f64) -> Result<Self> {
        Self::new(k_neck, default_m_count(&geom.cavity, 2.0 * lambda0, geom.eps), ExteriorRule::default())
    }

    pub fn doubled(&self) -> Self {
        Self {
            k_neck: self.k_neck * 2,
            m_cavity: self.m_cavity * 2,
            exterior: self.exterior.refined(),
        }
    }
}

/// Target cavity eigenpair and the real search window around it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchWindow {
    pub m: usize,
    pub n: usize,
    /// Preferred real root; `lambda_0` when absent.
    pub hint: Option<f64>,
    /// Half-width of the real scan; half the gap to the nearest other
    /// cavity eigenvalue when absent.
    pub half_width: Option<f64>,
}

impl SearchWindow {
    pub fn new(m: usize, n: usize) -> Self {
        Self {
            m,
            n,
            hint: None,
            half_width: None,
        }
    }

    pub fn with_hint(mut self, hint: f64) -> Self {
        self.hint = Some(hint);
        self
    }
}

/// Matching matrix in the unknowns `(P, M, q)` with the column scalings that
/// relate them to the raw amplitudes.
#[derive(Debug, Clone)]
pub struct Assembled {
    pub matrix: CMatrix,
    /// `a_col = stored_col * exp(column_log_scale)`; `-theta_k L/eps` for the
    /// `P` columns and zero otherwise.
    pub column_log_scale: Vec<Complex64>,
}

/// Neck amplitudes in log form. `a_plus = A_plus e^{-theta L/eps}`,
/// `A_minus = a_minus e^{-theta L/eps}`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeckCoefficients {
    pub a_plus: Vec<LogComplex<f64>>,
    pub a_minus: Vec<LogComplex<f64>>,
    pub big_a_plus: Vec<LogComplex<f64>>,
    pub big_a_minus: Vec<LogComplex<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    Newton,
    Flux,
}

impl Estimator {
    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Newton => "newton",
            Estimator::Flux => "flux",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResonanceResult {
    pub rho_re: f64,
    pub im_sign: i8,
    /// Natural log of `|Im rho|`.
    pub im_log: f64,
    pub estimator: Estimator,
    /// Relative distance-to-root indicator of the accepted estimate.
    pub residual: f64,
    pub k_neck: usize,
    pub m_cavity: usize,
    pub flux_im_log: f64,
    pub newton_im_log: Option<f64>,
    /// Neck amplitudes of the quasimode normalized to unit mass on cavity and neck.
    pub coefficients: NeckCoefficients,
}

impl ResonanceResult {
    /// `Im rho` as a plain number; zero when below the floating-point range.
    pub fn im(&self) -> f64 {
        self.im_sign as f64 * self.im_log.exp()
    }

    /// `s = -eps ln|Im rho| / (pi L)`.
    pub fn normalized_exponent(&self, geom: &ResonatorGeometry) -> f64 {
        -geom.eps * self.im_log / (PI * geom.effective_length())
    }
}

/// Everything needed at one `rho` after eliminating the exterior block.
struct Reduced {
    eps: f64,
    theta: Vec<Complex64>,
    log_e: Vec<Complex64>,
    e: Vec<Complex64>,
    lam_r: CMatrix,
    v: Vec<Complex64>,
    gamma0: Complex64,
    cos0: Complex64,
    sinc0: Complex64,
    dtn: ExteriorDtN,
    r_l: CMatrix,
    bordered: CMatrix,
}

fn reduce(rho: Complex64, geom: &ResonatorGeometry, trunc: &ModeTruncation, j0: usize) -> Result<Reduced> {
    let kk = trunc.k_neck;
    let eps = geom.eps;
    let ll = geom.effective_length();
    let neck = DuctModeSet::new(eps, kk)?;
    let split = cavity_dtn_split(&geom.cavity, rho, &neck, trunc.m_cavity, Some(j0))?;
    let theta = neck.thetas(rho);
    let log_e: Vec<Complex64> = theta.iter().map(|t| -t * ll / eps).collect();
    let e: Vec<Complex64> = log_e.iter().map(|z| z.exp()).collect();
    let dtn = exterior_dtn(rho, eps, kk, &trunc.exterior)?;
    let te = |k: usize| theta[k] / eps;
    let minus = CMatrix::from_fn(kk, kk, |k, l| if k == l { te(k) } else { ZERO } - dtn.matrix[(k, l)]);
    let plus = CMatrix::from_fn(kk, kk, |k, l| if k == l { te(k) } else { ZERO } + dtn.matrix[(k, l)]);
    let r_l = minus.lu()?.inverse()?.matmul(&plus);
    let ere = CMatrix::from_fn(kk, kk, |k, l| e[k] * r_l[(k, l)] * e[l]);
    let lam_r = split.regular;
    let gamma0 = split.gamma0;
    let a = geom.cavity.a;
    let cos0 = (gamma0 * a).cos();
    let sinc0 = if (gamma0 * a).norm() < 1e-8 { Complex64::new(a, 0.0) } else { (gamma0 * a).sin() / gamma0 };
    let v = split.v;
    let mut b = CMatrix::zeros(kk + 1, kk + 1);
    for k in 0..kk {
        for l in 0..kk {
            let mut g = ZERO;
            for m in 0..kk {
                let d = if k == m { te(k) } else { ZERO };
                g += (d - lam_r[(k, m)]) * ere[(m, l)];
            }
            if k == l {
                g -= te(k);
            }
            g -= lam_r[(k, l)];
            b[(k, l)] = g;
        }
        b[(k, kk)] = -v[k];
    }
    for l in 0..kk {
        let mut s = v[l];
        for m in 0..kk {
            s += v[m] * ere[(m, l)];
        }
        b[(kk, l)] = cos0 * s;
    }
    b[(kk, kk)] = -sinc0;
    Ok(Reduced {
        eps,
        theta,
        log_e,
        e,
        lam_r,
        v,
        gamma0,
        cos0,
        sinc0,
        dtn,
        r_l,
        bordered: b,
    })
}

/// Full matching matrix for unknowns `(P_1..P_K, M_1..M_K, q)`.
///
/// Rows `0..K` match flux at `x = 0` through the cavity DtN, rows `K..2K`
/// match flux at `x = L` through the exterior DtN, and the last row ties `q`
/// to the pole mode of the target eigenpair.
pub fn assemble(rho: Complex64, geom: &ResonatorGeometry, trunc: &ModeTruncation, window: &SearchWindow) -> Result<Assembled> {
    let r = reduce(rho, geom, trunc, window.n)?;
    let kk = trunc.k_neck;
    let eps = r.eps;
    let mut m = CMatrix::zeros(2 * kk + 1, 2 * kk + 1);
    for k in 0..kk {
        let te = r.theta[k] / eps;
        m[(k, k)] += te * r.e[k];
        m[(k, kk + k)] -= te;
        m[(kk + k, k)] += te;
        m[(kk + k, kk + k)] -= te * r.e[k];
        for l in 0..kk {
            m[(k, l)] -= r.lam_r[(k, l)] * r.e[l];
            m[(k, kk + l)] -= r.lam_r[(k, l)];
            m[(kk + k, l)] -= r.dtn.matrix[(k, l)];
            m[(kk + k, kk + l)] -= r.dtn.matrix[(k, l)] * r.e[l];
        }
        m[(k, 2 * kk)] = -r.v[k];
        m[(2 * kk, k)] = r.cos0 * r.v[k] * r.e[k];
        m[(2 * kk, kk + k)] = r.cos0 * r.v[k];
    }
    m[(2 * kk, 2 * kk)] = -r.sinc0;
    let mut column_log_scale = vec![ZERO; 2 * kk + 1];
    column_log_scale[..kk].copy_from_slice(&r.log_e);
    Ok(Assembled {
        matrix: m,
        column_log_scale,
    })
}

/// Log of the bordered cavity-side determinant
/// `det [[G, -v], [cos(gamma a) v^T (I + E R E), -sin(gamma a)/gamma]]`,
/// which equals the full matching determinant divided by the nonvanishing
/// exterior factor `det(Theta/eps - Lambda_E)`.
pub fn det_log(rho: Complex64, geom: &ResonatorGeometry, trunc: &ModeTruncation, window: &SearchWindow) -> Result<LogComplex<f64>> {
    Ok(reduce(rho, geom, trunc, window.n)?.bordered.lu()?.det_log())
}

/// `ln det(Theta/eps - Lambda_E)`, the factor removed by [`det_log`].
pub fn exterior_factor_log(rho: Complex64, geom: &ResonatorGeometry, trunc: &ModeTruncation) -> Result<LogComplex<f64>> {
    let kk = trunc.k_neck;
    let neck = DuctModeSet::new(geom.eps, kk)?;
    let theta = neck.thetas(rho);
    let dtn = exterior_dtn(rho, geom.eps, kk, &trunc.exterior)?;
    let m = CMatrix::from_fn(kk, kk, |k, l| if k == l { theta[k] / geom.eps } else { ZERO } - dtn.matrix[(k, l)]);
    Ok(m.lu()?.det_log())
}

/// Bordered determinant with the neck closed at `x = L` (`E = 0`); a real
/// analytic function of `rho`.
pub fn cavity_factor_log(rho: Complex64, geom: &ResonatorGeometry, trunc: &ModeTruncation, window: &SearchWindow) -> Result<LogComplex<f64>> {
    let kk = trunc.k_neck;
    let neck = DuctModeSet::new(geom.eps, kk)?;
    let split = cavity_dtn_split(&geom.cavity, rho, &neck, trunc.m_cavity, Some(window.n))?;
    let theta = neck.thetas(rho);
    let a = geom.cavity.a;
    let g0 = split.gamma0;
    let mut b = CMatrix::zeros(kk + 1, kk + 1);
    for k in 0..kk {
        for l in 0..kk {
            b[(k, l)] = -split.regular[(k, l)];
        }
        b[(k, k)] -= theta[k] / geom.eps;
        b[(k, kk)] = -split.v[k];
        b[(kk, k)] = (g0 * a).cos() * split.v[k];
    }
    b[(kk, kk)] = -(g0 * a).sin() / g0;
    Ok(b.lu()?.det_log())
}

fn target_lambda(geom: &ResonatorGeometry, window: &SearchWindow) -> Result<f64> {
    let pair = eigenpair(&geom.cavity, window.m, window.n)?;
    let report = assumption_h(&geom.cavity, &pair, 1e-9);
    if !report.holds {
        return Err(Error::InvalidInput(format!("assumption (H) fails: {}", report.diagnostic)));
    }
    Ok(pair.lambda)
}

fn window_half_width(geom: &ResonatorGeometry, window: &SearchWindow, lambda0: f64) -> f64 {
    if let Some(w) = window.half_width {
        return w;
    }
    let list = eigen_list(&geom.cavity, 64);
    let gap = list
        .iter()
        .map(|p| (p.lambda - lambda0).abs())
        .filter(|d| *d > 1e-9 * lambda0)
        .fold(f64::INFINITY, f64::min);
    0.5 * gap
}

/// `Re D` on the real axis, scaled by `exp(-shift)` to stay finite.
fn re_det(rho: f64, shift: f64, geom: &ResonatorGeometry, trunc: &ModeTruncation, window: &SearchWindow) -> Result<f64> {
    let d = det_log(Complex64::new(rho, 0.0), geom, trunc, window)?;
    Ok((d.log_mag - shift).exp() * d.phase.cos())
}

/// Real roots of `Re D` in the search window, sorted by distance to the hint.
pub fn real_roots(geom: &ResonatorGeometry, trunc: &ModeTruncation, window: &SearchWindow) -> Result<Vec<f64>> {
    let lambda0 = target_lambda(geom, window)?;
    let hw = window_half_width(geom, window, lambda0);
    let hint = window.hint.unwrap_or(lambda0);
    let n = 48;
    let xs: Vec<f64> = (0..=n).map(|i| lambda0 - hw + 2.0 * hw * i as f64 / n as f64).collect();
    let logs: Vec<LogComplex<f64>> = xs
        .iter()
        .map(|x| det_log(Complex64::new(*x, 0.0), geom, trunc, window))
        .collect::<Result<_>>()?;
    let shift = logs.iter().map(|d| d.log_mag).fold(f64::NEG_INFINITY, f64::max);
    let vals: Vec<f64> = logs.iter().map(|d| (d.log_mag - shift).exp() * d.phase.cos()).collect();
    let mut roots = Vec::new();
    for i in 0..n {
        if vals[i] == 0.0 {
            roots.push(xs[i]);
        } else if vals[i] * vals[i + 1] < 0.0 {
            roots.push(illinois(xs[i], xs[i + 1], vals[i], vals[i + 1], shift, geom, trunc, window)?);
        }
    }
    if roots.is_empty() {
        return Err(Error::NoRoot(format!("Re D has no sign change in [{}, {}]", lambda0 - hw, lambda0 + hw)));
    }
    roots.sort_by(|a, b| (a - hint).abs().total_cmp(&(b - hint).abs()));
    Ok(roots)
}

#[allow(clippy::too_many_arguments)]
fn illinois(
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
    shift: f64,
    geom: &ResonatorGeometry,
    trunc: &ModeTruncation,
    window: &SearchWindow,
) -> Result<f64> {
    let mut side = 0;
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        if (b - a).abs() <= 4.0 * f64::EPSILON * c.abs() {
            return Ok(c);
        }
        let fc = re_det(c, shift, geom, trunc, window)?;
        if fc == 0.0 {
            return Ok(c);
        }
        if fc * fb < 0.0 {
            a = b;
            fa = fb;
            side = 0;
        } else {
            fa *= 0.5;
            side += 1;
            if side > 2 {
                // fall back to a bisection step
                let m = 0.5 * (a + c);
                let fm = re_det(m, shift, geom, trunc, window)?;
                if fm * fc < 0.0 {
                    a = m;
                    fa = fm;
                } else {
                    fa *= 0.5;
                }
                side = 0;
            }
        }
        b = c;
        fb = fc;
    }
    Ok(b)
}

/// `D'(rho) / D(rho)` from a central difference of `D` itself, which stays
/// accurate next to a zero where `ln D` does not.
fn dlog_det(rho: Complex64, geom: &ResonatorGeometry, trunc: &ModeTruncation, window: &SearchWindow) -> Result<Complex64> {
    let h = 1e-5 * rho.norm();
    let d = det_log(rho, geom, trunc, window)?;
    let p = (det_log(rho + h, geom, trunc, window)? / d).to_complex()?;
    let m = (det_log(rho - h, geom, trunc, window)? / d).to_complex()?;
    Ok((p - m) / (2.0 * h))
}

/// Complex Newton iteration on the bordered determinant.
pub fn newton_resonance(start: Complex64, geom: &ResonatorGeometry, trunc: &ModeTruncation, window: &SearchWindow) -> Result<(Complex64, f64)> {
    let mut rho = start;
    let mut last = f64::INFINITY;
    for _ in 0..40 {
        let d = det_log(rho, geom, trunc, window)?;
        if d.is_zero() {
            return Ok((rho, 0.0));
        }
        let dl = dlog_det(rho, geom, trunc, window)?;
        let step = 1.0 / dl;
        rho -= step;
        let rel = step.norm() / rho.norm();
        if !rel.is_finite() {
            return Err(Error::IterationDivergence(format!("Newton step not finite at {rho}")));
        }
        if rel < 1e-15 || (rel < 1e-12 && rel >= 0.5 * last) {
            return Ok((rho, rel));
        }
        last = rel;
    }
    Err(Error::NoConvergence(format!("Newton did not settle near {rho}")))
}

/// Quasimode at real `rho` with the pole amplitude fixed, its flux width
/// and its neck amplitudes normalized to unit mass.
pub struct Quasimode {
    pub im_sign: i8,
    pub im_log: f64,
    pub coefficients: NeckCoefficients,
    pub log_norm_sq: f64,
}

fn cavity_mode_mass(gamma: Complex64, a: f64) -> f64 {
    // int_0^a |sin(gamma t)|^2 dt / |sin(gamma a)|^2 for real rho
    if gamma.re.abs() >= gamma.im.abs() {
        let g = gamma.re;
        if g.abs() * a < 1e-6 {
            return a / 3.0;
        }
        let s = (g * a).sin();
        (a / 2.0 - (2.0 * g * a).sin() / (4.0 * g)) / (s * s)
    } else {
        let g = gamma.im.abs();
        if g * a < 1e-6 {
            return a / 3.0;
        }
        let sh = (g * a).sinh();
        1.0 / (2.0 * g * (g * a).tanh()) - a / (2.0 * sh * sh)
    }
}

fn int_exp(z: Complex64, len: f64) -> Complex64 {
    // int_0^len e^{z x} dx
    let zl = z * len;
    if zl.norm() < 1e-6 {
        Complex64::new(len, 0.0) * (1.0 + zl / 2.0 + zl * zl / 6.0)
    } else {
        (zl.exp() - 1.0) / z
    }
}

/// Flux estimate of the width at real `rho_re`: `Im rho = -P_rad / |u|^2`.
pub fn flux_width(rho_re: f64, geom: &ResonatorGeometry, trunc: &ModeTruncation, window: &SearchWindow) -> Result<Quasimode> {
    let rho = Complex64::new(rho_re, 0.0);
    let r = reduce(rho, geom, trunc, window.n)?;
    let kk = trunc.k_neck;
    let eps = r.eps;
    let ll = geom.effective_length();
    // G M = v q with q = 1
    let g = r.bordered.leading(kk);
    let m_coef = g.lu()?.solve(&r.v)?;
    let em: Vec<LogComplex<f64>> = (0..kk)
        .map(|l| LogComplex::exp(r.log_e[l]) * LogComplex::from_complex(m_coef[l]))
        .collect();
    let mut p = vec![LogComplex::zero(); kk];
    for (k, pk) in p.iter_mut().enumerate() {
        for l in 0..kk {
            *pk = pk.add(&(LogComplex::from_complex(r.r_l[(k, l)]) * em[l]));
        }
    }
    let trace_l: Vec<LogComplex<f64>> = p.iter().zip(&em).map(|(a, b)| a.add(b)).collect();
    let flux = radiated_flux(&r.dtn, &trace_l)?;

    // mass on the cavity
    let cav = &geom.cavity;
    let t0: Vec<Complex64> = (0..kk)
        .map(|k| {
            let pk = p[k].to_complex().unwrap_or(ZERO);
            r.e[k] * pk + m_coef[k]
        })
        .collect();
    let mut mass = 0.0;
    let pole_amp = 1.0 / (r.gamma0 * r.cos0);
    let a = cav.a;
    let g0 = r.gamma0.re;
    mass += pole_amp.norm_sqr() * (a / 2.0 - (2.0 * g0 * a).sin() / (4.0 * g0));
    for j in 1..=trunc.m_cavity {
        if j == window.n {
            continue;
        }
        let start = if j % 2 == 1 { 0 } else { 1 };
        let mut c = ZERO;
        for k in (start..kk).step_by(2) {
            c += neck_overlap(j, k + 1, eps, cav.b) * t0[k];
        }
        if c == ZERO {
            continue;
        }
        let gamma = cavity_gamma(cav, j, rho);
        mass += c.norm_sqr() * cavity_mode_mass(gamma, a);
    }
    // mass on the neck
    for k in 0..kk {
        let th = r.theta[k] / eps;
        let pk = p[k].to_complex().unwrap_or(ZERO);
        let mk = m_coef[k];
        mass += pk.norm_sqr() * int_exp(Complex64::new(-2.0 * th.re, 0.0), ll).re;
        mass += mk.norm_sqr() * int_exp(Complex64::new(-2.0 * th.re, 0.0), ll).re;
        let cross = pk * mk.conj() * r.e[k] * int_exp(th - th.conj(), ll);
        mass += 2.0 * cross.re;
    }
    if !(mass > 0.0) {
        return Err(Error::DegenerateInput(format!("quasimode mass {mass} is not positive")));
    }
    let ln_mass = mass.ln();
    let norm = LogComplex::new(-0.5 * ln_mass, 0.0);
    let coefficients = NeckCoefficients {
        a_plus: p.iter().zip(&r.log_e).map(|(v, le)| *v * LogComplex::exp(*le) * norm).collect(),
        a_minus: m_coef.iter().map(|v| LogComplex::from_complex(*v) * norm).collect(),
        big_a_plus: p.iter().map(|v| *v * norm).collect(),
        big_a_minus: em.iter().map(|v| *v * norm).collect(),
    };
    Ok(Quasimode {
        im_sign: -flux.sign,
        im_log: flux.log_mag - ln_mass,
        coefficients,
        log_norm_sq: ln_mass,
    })
}

/// Ratio of double-precision epsilon times `|rho|` above which Newton runs.
pub const NEWTON_HANDOVER: f64 = 1e3;

/// Locate the resonance continuing from the real root closest to the hint.
pub fn find_resonance(geom: &ResonatorGeometry, trunc: &ModeTruncation, window: &SearchWindow) -> Result<ResonanceResult> {
    let roots = real_roots(geom, trunc, window)?;
    resonance_from_root(roots[0], geom, trunc, window)
}

/// Stage two of [`find_resonance`] from a known real root of `Re D`.
pub fn resonance_from_root(rho_re: f64, geom: &ResonatorGeometry, trunc: &ModeTruncation, window: &SearchWindow) -> Result<ResonanceResult> {
    let q = flux_width(rho_re, geom, trunc, window)?;
    let dl = dlog_det(Complex64::new(rho_re, 0.0), geom, trunc, window)?;
    let d = det_log(Complex64::new(rho_re, 0.0), geom, trunc, window)?;
    // distance to the root of Re D along the real axis, relative
    let flux_residual = (d.phase.cos() / dl.norm() / rho_re).abs();
    let mut result = ResonanceResult {
        rho_re,
        im_sign: q.im_sign,
        im_log: q.im_log,
        estimator: Estimator::Flux,
        residual: flux_residual,
        k_neck: trunc.k_neck,
        m_cavity: trunc.m_cavity,
        flux_im_log: q.im_log,
        newton_im_log: None,
        coefficients: q.coefficients,
    };
    let threshold = (NEWTON_HANDOVER * f64::EPSILON * rho_re).ln();
    if q.im_sign != 0 && q.im_log >= threshold {
        let start = Complex64::new(rho_re, q.im_sign as f64 * q.im_log.exp());
        let (rho, step) = newton_resonance(start, geom, trunc, window)?;
        if rho.im.abs() >= threshold.exp() {
            let newton_log = rho.im.abs().ln();
            if (newton_log - q.im_log).abs() > std::f64::consts::LN_2 {
                return Err(Error::EstimatorDisagreement {
                    newton: newton_log,
                    flux: q.im_log,
                });
            }
            result.rho_re = rho.re;
            result.im_sign = if rho.im < 0.0 { -1 } else if rho.im > 0.0 { 1 } else { 0 };
            result.im_log = newton_log;
            result.estimator = Estimator::Newton;
            result.residual = step;
            result.newton_im_log = Some(newton_log);
        }
    }
    Ok(result)
}

/// One point of an `eps` sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub eps: f64,
    pub result: std::result::Result<ResonanceResult, Error>,
    /// `-eps ln|Im rho| / (pi L)`.
    pub s_norm: Option<f64>,
    /// `ln sum_k k |A_{k,+}|^2`.
    pub plus_energy_log: Option<f64>,
    /// `ln |A_{1,-}|`.
    pub a1_minus_log: Option<f64>,
    /// `ln sum_{k>=2} k |A_{k,-}|^2`.
    pub tail_log: Option<f64>,
}

fn weighted_log_sum(v: &[LogComplex<f64>], from: usize) -> f64 {
    v.iter()
        .enumerate()
        .skip(from)
        .map(|(i, a)| LogComplex::new(2.0 * a.log_mag + ((i + 1) as f64).ln(), 0.0))
        .fold(LogComplex::zero(), |acc, t| acc.add(&t))
        .log_mag
}

fn record(geom: &ResonatorGeometry, eps: f64, result: Result<ResonanceResult>) -> SweepRecord {
    match result {
        Ok(r) => {
            let c = &r.coefficients;
            SweepRecord {
                eps,
                s_norm: Some(-eps * r.im_log / (PI * geom.effective_length())),
                plus_energy_log: Some(weighted_log_sum(&c.big_a_plus, 0)),
                a1_minus_log: Some(c.big_a_minus[0].log_mag),
                tail_log: Some(weighted_log_sum(&c.big_a_minus, 1)),
                result: Ok(r),
            }
        }
        Err(e) => SweepRecord {
            eps,
            result: Err(e),
            s_norm: None,
            plus_energy_log: None,
            a1_minus_log: None,
            tail_log: None,
        },
    }
}

/// Resonance for every `eps`, points solved concurrently.
///
/// Real roots are collected for all points first; the root at each point is
/// then chosen closest to the previous (larger) `eps` point's root, starting
/// from the hint or `lambda_0`.
pub fn sweep(template: &ResonatorGeometry, k_neck: usize, window: &SearchWindow, eps_list: &[f64]) -> Vec<SweepRecord> {
    let mut order: Vec<usize> = (0..eps_list.len()).collect();
    order.sort_by(|a, b| eps_list[*b].total_cmp(&eps_list[*a]));
    let setup = |eps: f64| -> Result<(ResonatorGeometry, ModeTruncation)> {
        let g = template.with_eps(eps)?;
        let lambda0 = target_lambda(&g, window)?;
        let t = ModeTruncation::for_geometry(&g, k_neck, lambda0)?;
        Ok((g, t))
    };
    let roots: Vec<Result<Vec<f64>>> = eps_list
        .par_iter()
        .map(|&eps| {
            let (g, t) = setup(eps)?;
            real_roots(&g, &t, window)
        })
        .collect();
    let mut chosen: Vec<Option<f64>> = vec![None; eps_list.len()];
    let mut prev = window.hint;
    for &i in &order {
        if let Ok(rs) = &roots[i] {
            let pick = match prev {
                Some(h) => *rs.iter().min_by(|a, b| (*a - h).abs().total_cmp(&(*b - h).abs())).unwrap(),
                None => rs[0],
            };
            chosen[i] = Some(pick);
            prev = Some(pick);
        }
    }
    (0..eps_list.len())
        .into_par_iter()
        .map(|i| {
            let eps = eps_list[i];
            let res = match (&roots[i], chosen[i]) {
                (Err(e), _) => Err(e.clone()),
                (Ok(_), Some(root)) => setup(eps).and_then(|(g, t)| resonance_from_root(root, &g, &t, window)),
                (Ok(_), None) => Err(Error::NoRoot("no root chosen".into())),
            };
            record(template, eps, res)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct WidthFit {
    pub slope: f64,
    pub intercept: f64,
    /// `slope / (-pi L)`.
    pub normalized_slope: f64,
    pub deviations: Vec<f64>,
}

/// Least-squares fit `ln|Im rho| = slope / eps + intercept`.
pub fn fit_width_law(records: &[SweepRecord], neck_length: f64) -> Result<WidthFit> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter_map(|r| r.result.as_ref().ok().map(|v| (1.0 / r.eps, v.im_log)))
        .collect();
    fit_inverse_eps(&pts, neck_length)
}

/// Same fit on `(1/eps, ln|Im rho|)` pairs.
pub fn fit_inverse_eps(pts: &[(f64, f64)], neck_length: f64) -> Result<WidthFit> {
    if pts.len() < 4 {
        return Err(Error::InsufficientData(format!("{} usable points, need 4", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all points share one eps".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    Ok(WidthFit {
        slope,
        intercept,
        normalized_slope: slope / (-PI * neck_length),
        deviations: pts.iter().map(|p| p.1 - (slope * p.0 + intercept)).collect(),
    })
}

/// Smallest `ln C` with `C^-1 e^{-(1+delta) pi L/eps} <= |Im rho| <= C e^{-(1-delta) pi L/eps}`
/// at every solved point.
pub fn bracket_log_constant(records: &[SweepRecord], neck_length: f64, delta: f64) -> Option<f64> {
    records
        .iter()
        .filter_map(|r| r.result.as_ref().ok().map(|v| (r.eps, v.im_log)))
        .map(|(eps, l)| {
            let rate = PI * neck_length / eps;
            (-(1.0 + delta) * rate - l).max(l + (1.0 - delta) * rate)
        })
        .reduce(f64::max)
}

/// Least-squares fit `y = c + p ln eps + q / eps` on `(eps, y)` pairs; returns `[c, p, q]`.
pub fn fit_prefactor(pts: &[(f64, f64)]) -> Result<[f64; 3]> {
    if pts.len() < 4 {
        return Err(Error::InsufficientData(format!("{} usable points, need 4", pts.len())));
    }
    let a = nalgebra::DMatrix::from_fn(pts.len(), 3, |i, j| match j {
        0 => 1.0,
        1 => pts[i].0.ln(),
        _ => 1.0 / pts[i].0,
    });
    let y = nalgebra::DVector::from_iterator(pts.len(), pts.iter().map(|p| p.1));
    let sol = a
        .svd(true, true)
        .solve(&y, 1e-12)
        .map_err(|e| Error::InsufficientData(e.to_string()))?;
    Ok([sol[0], sol[1], sol[2]])
}
