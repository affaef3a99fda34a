//! Adaptive Gauss–Kronrod quadrature over finite intervals and rays.
//!
//! Rays are handled two ways. With a positive decay hint the integrand is
//! assumed to fall off like `exp(-hint * x)` and the ray is truncated where
//! that envelope drops below the absolute tolerance. With a zero hint the
//! integrand is assumed to decay algebraically: partial integrals over
//! doubling cutoffs are accelerated with Aitken's delta-squared process.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{from_usize, lit, Scalar};

const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.0,
];
const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077600525204214,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec<T> {
    pub abs_tol: T,
    pub rel_tol: T,
    pub max_subdivisions: usize,
    /// Exponential decay rate of the integrand on rays; zero selects the
    /// algebraic-tail path.
    pub semi_infinite_decay_hint: T,
    /// Initial subdivision width; intervals longer than this are pre-split so
    /// oscillatory integrands are resolved before adaptivity starts.
    pub max_panel_width: T,
}

impl<T: Scalar> Default for QuadratureSpec<T> {
    fn default() -> Self {
        Self {
            abs_tol: lit(1e-13),
            rel_tol: lit(1e-12),
            max_subdivisions: 20_000,
            semi_infinite_decay_hint: T::zero(),
            max_panel_width: T::infinity(),
        }
    }
}

impl<T: Scalar> QuadratureSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > T::zero()) || !(self.rel_tol > T::zero()) {
            return Err(Error::InvalidInput("quadrature tolerances must be positive".into()));
        }
        if self.max_subdivisions < 1 {
            return Err(Error::InvalidInput("max_subdivisions must be at least 1".into()));
        }
        if self.semi_infinite_decay_hint < T::zero() {
            return Err(Error::InvalidInput("decay hint must be non-negative".into()));
        }
        if !(self.max_panel_width > T::zero()) {
            return Err(Error::InvalidInput("max_panel_width must be positive".into()));
        }
        Ok(())
    }

    pub fn with_panel(mut self, width: T) -> Self {
        self.max_panel_width = width;
        self
    }

    pub fn with_tolerances(mut self, abs_tol: T, rel_tol: T) -> Self {
        self.abs_tol = abs_tol;
        self.rel_tol = rel_tol;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain<T> {
    Finite(T, T),
    SemiInfinite(T),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult<T> {
    pub value: Complex<T>,
    pub err_est: T,
    pub evaluations: usize,
}

/// One 21-point Kronrod panel: (kronrod value, |kronrod - gauss|).
fn gk21<T: Scalar, F>(f: &F, a: T, b: T) -> (Complex<T>, T)
where
    F: Fn(T) -> Complex<T>,
{
    let half = lit::<T>(0.5);
    let c = (a + b) * half;
    let h = (b - a) * half;
    let fc = f(c);
    let mut rk = fc * lit::<T>(WGK[10]);
    let mut rg = Complex::new(T::zero(), T::zero());
    for j in 0..10 {
        let dx = h * lit::<T>(XGK[j]);
        let s = f(c - dx) + f(c + dx);
        rk = rk + s * lit::<T>(WGK[j]);
        if j % 2 == 1 {
            rg = rg + s * lit::<T>(WG[j / 2]);
        }
    }
    let val = rk * h;
    let err = ((rk - rg) * h).norm();
    (val, err)
}

struct Panel<T> {
    a: T,
    b: T,
    val: Complex<T>,
    err: T,
}

impl<T: Scalar> PartialEq for Panel<T> {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl<T: Scalar> Eq for Panel<T> {}
impl<T: Scalar> PartialOrd for Panel<T> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl<T: Scalar> Ord for Panel<T> {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.partial_cmp(&o.err).unwrap_or(Ordering::Equal)
    }
}

fn adaptive_finite<T: Scalar, F>(f: &F, a: T, b: T, spec: &QuadratureSpec<T>) -> Result<QuadResult<T>>
where
    F: Fn(T) -> Complex<T>,
{
    if a == b {
        return Ok(QuadResult {
            value: Complex::new(T::zero(), T::zero()),
            err_est: T::zero(),
            evaluations: 0,
        });
    }
    let len = (b - a).abs();
    let n0 = if spec.max_panel_width.is_finite() {
        (len / spec.max_panel_width).ceil().to_usize().unwrap_or(1).max(1)
    } else {
        1
    };
    let n0 = n0.min(spec.max_subdivisions.max(1));
    let mut heap = BinaryHeap::with_capacity(n0 * 2);
    let mut total = Complex::new(T::zero(), T::zero());
    let mut total_err = T::zero();
    let step = (b - a) / from_usize::<T>(n0);
    for i in 0..n0 {
        let lo = a + step * from_usize::<T>(i);
        let hi = if i + 1 == n0 { b } else { a + step * from_usize::<T>(i + 1) };
        let (v, e) = gk21(f, lo, hi);
        total = total + v;
        total_err = total_err + e;
        heap.push(Panel { a: lo, b: hi, val: v, err: e });
    }
    let mut evaluations = 21 * n0;
    let mut panels = n0;
    loop {
        if !total.re.is_finite() || !total.im.is_finite() {
            return Err(Error::NoConvergence("non-finite integrand value".into()));
        }
        let target = spec.abs_tol.max(spec.rel_tol * total.norm());
        if total_err <= target {
            break;
        }
        if panels >= spec.max_subdivisions {
            return Err(Error::NoConvergence(format!(
                "subdivision budget {} exhausted (error estimate {:e}, target {:e})",
                spec.max_subdivisions,
                total_err.to_f64().unwrap_or(f64::NAN),
                target.to_f64().unwrap_or(f64::NAN)
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = (worst.a + worst.b) * lit::<T>(0.5);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            // interval can no longer be split in this precision
            return Err(Error::NoConvergence("interval underflow".into()));
        }
        let (v1, e1) = gk21(f, worst.a, mid);
        let (v2, e2) = gk21(f, mid, worst.b);
        evaluations += 42;
        total = total - worst.val + v1 + v2;
        total_err = total_err - worst.err + e1 + e2;
        heap.push(Panel { a: worst.a, b: mid, val: v1, err: e1 });
        heap.push(Panel { a: mid, b: worst.b, val: v2, err: e2 });
        panels += 1;
    }
    // re-sum to shed accumulated cancellation in the running totals
    let mut value = Complex::new(T::zero(), T::zero());
    let mut err = T::zero();
    for p in heap.iter() {
        value = value + p.val;
        err = err + p.err;
    }
    Ok(QuadResult {
        value,
        err_est: err,
        evaluations,
    })
}

/// Integrate a complex-valued integrand over a finite interval or a ray.
pub fn integrate<T: Scalar, F>(f: F, domain: Domain<T>, spec: &QuadratureSpec<T>) -> Result<QuadResult<T>>
where
    F: Fn(T) -> Complex<T>,
{
    spec.validate()?;
    match domain {
        Domain::Finite(a, b) => adaptive_finite(&f, a, b, spec),
        Domain::SemiInfinite(a) => {
            if spec.semi_infinite_decay_hint > T::zero() {
                let span = (-spec.abs_tol.ln() + lit(10.0)) / spec.semi_infinite_decay_hint;
                adaptive_finite(&f, a, a + span, spec)
            } else {
                algebraic_ray(&f, a, spec)
            }
        }
    }
}

/// Real-valued convenience wrapper.
pub fn integrate_real<T: Scalar, F>(f: F, domain: Domain<T>, spec: &QuadratureSpec<T>) -> Result<(T, T)>
where
    F: Fn(T) -> T,
{
    let r = integrate(|x| Complex::new(f(x), T::zero()), domain, spec)?;
    Ok((r.value.re, r.err_est))
}

fn algebraic_ray<T: Scalar, F>(f: &F, a: T, spec: &QuadratureSpec<T>) -> Result<QuadResult<T>>
where
    F: Fn(T) -> Complex<T>,
{
    const LEVELS: usize = 11;
    let x0 = lit::<T>(64.0);
    let mut piece_spec = *spec;
    piece_spec.abs_tol = spec.abs_tol * lit(0.05);
    piece_spec.rel_tol = spec.rel_tol * lit(0.05);
    if !piece_spec.max_panel_width.is_finite() {
        piece_spec.max_panel_width = T::one();
    }
    // the ray pieces are long; budget scales with the pre-split panel count
    piece_spec.max_subdivisions = spec.max_subdivisions.max(
        (x0 * lit::<T>((1u64 << LEVELS) as f64) / piece_spec.max_panel_width)
            .to_usize()
            .unwrap_or(usize::MAX / 4)
            * 2,
    );
    let first = adaptive_finite(f, a, a + x0, &piece_spec)?;
    let mut sums = vec![first.value];
    let mut quad_err = first.err_est;
    let mut evaluations = first.evaluations;
    let mut lo = a + x0;
    let mut width = x0;
    let mut best: Option<(Complex<T>, T)> = None;
    for _ in 0..LEVELS {
        let piece = adaptive_finite(f, lo, lo + width, &piece_spec)?;
        evaluations += piece.evaluations;
        quad_err = quad_err + piece.err_est;
        let last = *sums.last().unwrap();
        sums.push(last + piece.value);
        lo = lo + width;
        width = width + width;
        if let Some((value, diff)) = iterated_aitken(&sums) {
            let err = diff + quad_err;
            best = Some((value, err));
            if err <= spec.abs_tol.max(spec.rel_tol * value.norm()) {
                break;
            }
        }
    }
    match best {
        Some((value, err_est)) if err_est <= spec.abs_tol.max(spec.rel_tol * value.norm()) => Ok(QuadResult {
            value,
            err_est,
            evaluations,
        }),
        Some((value, err_est)) => Err(Error::NoConvergence(format!(
            "algebraic tail extrapolation stalled at {:?} with error {:e}",
            value,
            err_est.to_f64().unwrap_or(f64::NAN)
        ))),
        None => Err(Error::NoConvergence("ray extrapolation produced no estimate".into())),
    }
}

/// Repeated Aitken delta-squared on a sequence of partial sums. Returns the
/// entry with the smallest difference to its predecessor over all columns.
fn iterated_aitken<T: Scalar>(sums: &[Complex<T>]) -> Option<(Complex<T>, T)> {
    let mut col = sums.to_vec();
    let mut best: Option<(Complex<T>, T)> = None;
    loop {
        let n = col.len();
        if n >= 2 {
            let diff = (col[n - 1] - col[n - 2]).norm();
            if best.map_or(true, |(_, e)| diff < e) {
                best = Some((col[n - 1], diff));
            }
        }
        if n < 3 {
            break;
        }
        let mut next = Vec::with_capacity(n - 2);
        for i in 0..n - 2 {
            let d1 = col[i + 1] - col[i];
            let d2 = col[i + 2] - col[i + 1];
            let denom = d2 - d1;
            if denom.norm() > T::epsilon() * d1.norm() && denom.norm() > T::min_positive_value() {
                next.push(col[i + 2] - d2 * d2 / denom);
            } else {
                next.push(col[i + 2]);
            }
        }
        col = next;
    }
    // a single difference from the raw sums is no evidence of convergence
    if sums.len() < 3 {
        return None;
    }
    best
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}
