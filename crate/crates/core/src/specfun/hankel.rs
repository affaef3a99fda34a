//! Integer-order outgoing Hankel functions `H_k^{(1)}` for `Re z > 0`.
//!
//! `J_0, J_1, Y_0, Y_1` come from the ascending series for `|z| <= 8`, from
//! the Laplace-type integral
//! `H_nu(z) = sqrt(2/(pi z)) e^{i w} / Gamma(nu+1/2) int_0^inf e^{-s} s^{nu-1/2} (1 + i s/(2z))^{nu-1/2} ds`
//! for `8 < |z| < 25`, and from the Hankel asymptotic series beyond.
//! Higher orders use Miller's backward recurrence for `J_k` and forward
//! recurrence for `Y_k`.
//!
//! The log-domain variant integrates the Sommerfeld contour
//! `H_k(z) = (1/(i pi)) int e^{z sinh t - k t} dt` from `-inf` to `0`, up to
//! `i pi`, then out to `+inf + i pi`, with the dominant real exponent
//! factored out so that large orders never overflow.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64;

use super::logcomplex::LogComplex;
use super::quadrature::{integrate, Domain, QuadratureSpec};
use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const I: Complex64 = Complex64::new(0.0, 1.0);

fn check_arg(z: Complex64) -> Result<()> {
    if !(z.re > 0.0) || !z.im.is_finite() || !z.re.is_finite() {
        return Err(Error::InvalidInput(format!("Hankel argument needs Re z > 0, got {z}")));
    }
    Ok(())
}

/// Ascending series for (J0, J1, Y0, Y1).
fn series01(z: Complex64) -> [Complex64; 4] {
    let q = -z * z / 4.0;
    let half = z / 2.0;
    let lnh = half.ln();
    let mut j0 = Complex64::new(0.0, 0.0);
    let mut j1 = Complex64::new(0.0, 0.0);
    let mut s0 = Complex64::new(0.0, 0.0);
    let mut s1 = Complex64::new(0.0, 0.0);
    // term0 = q^m/(m!)^2, term1 = q^m/(m!(m+1)!)
    let mut t0 = Complex64::new(1.0, 0.0);
    let mut t1 = Complex64::new(1.0, 0.0);
    let mut harm = 0.0; // H_m
    for m in 0..200usize {
        if m > 0 {
            let mf = m as f64;
            t0 = t0 * q / (mf * mf);
            t1 = t1 * q / (mf * (mf + 1.0));
            harm += 1.0 / mf;
        }
        let psi1 = -EULER_GAMMA + harm;
        let psi2 = psi1 + 1.0 / (m as f64 + 1.0);
        j0 += t0;
        j1 += t1;
        s0 += t0 * (2.0 * psi1);
        s1 += t1 * (psi1 + psi2);
        if m > 4 && t0.norm() < 1e-18 * j0.norm().max(1e-300) && t0.norm() < 1e-18 {
            break;
        }
    }
    let j1v = half * j1;
    let y0 = (2.0 / PI) * lnh * j0 - s0 / PI;
    let y1 = -2.0 / (PI * z) + (2.0 / PI) * lnh * j1v - half * s1 / PI;
    [j0, j1v, y0, y1]
}

/// Hankel asymptotic series for H_nu, nu in {0, 1}.
fn asymptotic01(nu: u32, z: Complex64) -> Complex64 {
    let mu = 4.0 * (nu * nu) as f64;
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    let mut prev = f64::INFINITY;
    for k in 1..200usize {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        let next = term * I * (mu - odd * odd) / (kf * 8.0 * z);
        let n = next.norm();
        if n > prev {
            break;
        }
        prev = n;
        term = next;
        sum += term;
        if n < 1e-17 * sum.norm() {
            break;
        }
    }
    let w = z - nu as f64 * FRAC_PI_2 - FRAC_PI_4;
    (2.0 / (PI * z)).sqrt() * (I * w).exp() * sum
}

/// Laplace-type integral for H_nu, nu in {0, 1}.
fn integral01(nu: u32, z: Complex64) -> Result<Complex64> {
    let p = nu as f64 - 0.5;
    // s = u^2, ds = 2u du; weight s^{p} * 2u = 2 u^{2p+1}
    let spec = QuadratureSpec {
        abs_tol: 1e-17,
        rel_tol: 1e-15,
        max_subdivisions: 4000,
        semi_infinite_decay_hint: 0.0,
        max_panel_width: 1.0,
    };
    let r = integrate(
        |u: f64| {
            let s = u * u;
            let w = 2.0 * u.powf(2.0 * p + 1.0) * (-s).exp();
            (Complex64::new(1.0, 0.0) + I * s / (2.0 * z)).powf(p) * w
        },
        Domain::Finite(0.0, 9.0),
        &spec,
    )?;
    let gamma = if nu == 0 { PI.sqrt() } else { PI.sqrt() / 2.0 };
    let w = z - nu as f64 * FRAC_PI_2 - FRAC_PI_4;
    Ok((2.0 / (PI * z)).sqrt() * (I * w).exp() * r.value / gamma)
}

fn h01(nu: u32, z: Complex64) -> Result<Complex64> {
    if z.norm() >= 25.0 {
        Ok(asymptotic01(nu, z))
    } else {
        integral01(nu, z)
    }
}

/// (J0, J1, Y0, Y1) at `z` with `Re z > 0`.
fn base_pair(z: Complex64) -> Result<[Complex64; 4]> {
    if z.norm() <= 8.0 {
        return Ok(series01(z));
    }
    let zc = z.conj();
    let h0 = h01(0, z)?;
    let h1 = h01(1, z)?;
    // second-kind Hankel via H2(z) = conj(H1(conj z)) for integer order
    let g0 = h01(0, zc)?.conj();
    let g1 = h01(1, zc)?.conj();
    Ok([
        (h0 + g0) / 2.0,
        (h1 + g1) / 2.0,
        (h0 - g0) / (2.0 * I),
        (h1 - g1) / (2.0 * I),
    ])
}

/// `J_0 .. J_n` by Miller's backward recurrence, normalised against the
/// larger of the directly computed `J_0`, `J_1`.
fn bessel_j_seq(n: usize, z: Complex64, j0: Complex64, j1: Complex64) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n + 1];
    out[0] = j0;
    if n >= 1 {
        out[1] = j1;
    }
    if n <= 1 {
        return out;
    }
    let az = z.norm();
    let top = (n as f64).max(az);
    let start = (top + 30.0 + (50.0 * top).sqrt()).ceil() as usize;
    let mut jp1 = Complex64::new(0.0, 0.0);
    let mut jk = Complex64::new(1e-100, 0.0);
    let mut raw = vec![Complex64::new(0.0, 0.0); n + 1];
    for k in (1..=start).rev() {
        let jm1 = (2.0 * k as f64) / z * jk - jp1;
        jp1 = jk;
        jk = jm1;
        if k - 1 <= n {
            raw[k - 1] = jk;
        }
        if k <= n {
            raw[k] = jp1;
        }
        // keep magnitudes where complex division cannot underflow
        if jk.norm() > 1e100 {
            let s = 1e-100;
            jk *= s;
            jp1 *= s;
            for r in raw.iter_mut() {
                *r *= s;
            }
        }
    }
    let scale = if j0.norm() >= j1.norm() { j0 / raw[0] } else { j1 / raw[1] };
    for k in 2..=n {
        out[k] = raw[k] * scale;
    }
    out
}

/// `H_0 .. H_n` at `z`.
pub fn hankel1_seq(n: usize, z: Complex64) -> Result<Vec<Complex64>> {
    check_arg(z)?;
    let [j0, j1, y0, y1] = base_pair(z)?;
    let js = bessel_j_seq(n, z, j0, j1);
    let mut ys = Vec::with_capacity(n + 1);
    ys.push(y0);
    if n >= 1 {
        ys.push(y1);
    }
    for k in 1..n {
        let next = (2.0 * k as f64) / z * ys[k] - ys[k - 1];
        ys.push(next);
    }
    let out: Vec<Complex64> = js.iter().zip(&ys).map(|(j, y)| j + I * y).collect();
    if let Some(bad) = out.iter().position(|h| !h.re.is_finite() || !h.im.is_finite()) {
        return Err(Error::Overflow(bad as f64));
    }
    Ok(out)
}

/// Outgoing Hankel function `H_k^{(1)}(z)`, `Re z > 0`.
pub fn hankel1(k: usize, z: Complex64) -> Result<Complex64> {
    let seq = hankel1_seq(k, z)?;
    let h = seq[k];
    if h.norm() == 0.0 {
        return Err(Error::LossOfPrecision(format!("H_{k}({z}) underflowed")));
    }
    Ok(h)
}

fn contour_spec(panel: f64) -> QuadratureSpec<f64> {
    QuadratureSpec {
        abs_tol: 1e-15,
        rel_tol: 1e-13,
        max_subdivisions: 20_000,
        semi_infinite_decay_hint: 0.0,
        max_panel_width: panel,
    }
}

/// `H_k^{(1)}(z)` in log-magnitude/phase form from the Sommerfeld contour.
pub fn hankel1_log(k: usize, z: Complex64) -> Result<LogComplex<f64>> {
    check_arg(z)?;
    let kf = k as f64;
    let x = z.re;
    // dominant exponent on the left ray
    let (t_star, m) = if kf > x {
        let t = -(kf / x).acosh();
        (t, x * t.sinh() - kf * t)
    } else {
        (0.0, 0.0)
    };
    let fail = |what: &str, e: Error| Error::ContourFailure(format!("{what} piece for k={k}, z={z}: {e}"));
    // left ray: find where the scaled integrand is below e^{-50}
    let mut t_lo = t_star - 1.0;
    while x * t_lo.sinh() - kf * t_lo - m > -50.0 {
        t_lo -= 0.5;
        if t_lo < -800.0 {
            return Err(Error::ContourFailure("left ray truncation not found".into()));
        }
    }
    let width = 0.5 / (1.0 + z.im.abs() * t_lo.abs().cosh()).min(1e6).sqrt().max(1.0);
    let f1 = |t: f64| (z * t.sinh() - kf * t - m).exp();
    let i1 = integrate(f1, Domain::Finite(t_lo, 0.0), &contour_spec(width.max(1e-3)))
        .map_err(|e| fail("left", e))?
        .value;
    let em = (-m).exp();
    let (i2, i3) = if em > 0.0 {
        let freq = kf + z.norm() + 1.0;
        let f2 = |th: f64| (I * (z * th.sin() - kf * th)).exp() * em;
        let i2 = integrate(f2, Domain::Finite(0.0, PI), &contour_spec(PI / freq.ceil()))
            .map_err(|e| fail("vertical", e))?
            .value;
        let mut s_hi: f64 = 1.0;
        while x * s_hi.sinh() + kf * s_hi < 60.0 {
            s_hi += 0.5;
        }
        let f3 = |s: f64| (-z * s.sinh() - kf * s).exp() * em;
        let i3 = integrate(f3, Domain::Finite(0.0, s_hi), &contour_spec(0.25))
            .map_err(|e| fail("right", e))?
            .value;
        (i2, i3)
    } else {
        (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0))
    };
    // e^{-i k pi} = (-1)^k
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    let total = (i1 + i3 * sign) / (I * PI) + i2 / PI;
    if !total.re.is_finite() || !total.im.is_finite() || total.norm() == 0.0 {
        return Err(Error::ContourFailure(format!("degenerate contour sum for k={k}, z={z}")));
    }
    let l = LogComplex::from_complex(total);
    Ok(LogComplex::new(l.log_mag + m, l.phase))
}
