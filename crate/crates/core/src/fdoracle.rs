//! Finite-difference cross-check on the truncated resonator.
//!
//! Five-point stencil on a grid aligned with every wall, the exterior box
//! closed by a layer with the quadratic stretch `s(t) = 1 + i sigma (t/d)^2`,
//! and the symmetric form `K u = rho M u` with `M = s_x s_y`. Eigenvalues near
//! the shift come from Arnoldi on `(K - shift M)^{-1} M`; the one whose vector
//! lives mostly in the cavity is polished by inverse iteration.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::BandMatrix;
use crate::solver::ResonatorGeometry;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub h: f64,
    /// Unstretched exterior extent in `x` beyond the aperture.
    pub exterior_length: f64,
    /// Unstretched exterior half-height.
    pub exterior_half_height: f64,
    pub layer_thickness: f64,
    pub sigma: f64,
    pub shift: f64,
    /// Wall at `x = 0` instead of the neck opening.
    pub closed_neck: bool,
    /// Parity in `y` of the target mode; only `y >= 0` is discretized.
    pub parity: Parity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    /// Parity of the cavity mode with `n` half-waves across `b`.
    pub fn of_mode(n: usize) -> Self {
        if n % 2 == 1 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

impl GridSpec {
    /// Layer starting `5/k` past the aperture, `k = sqrt(shift)`.
    pub fn for_shift(h: f64, shift: f64) -> Self {
        let k = shift.sqrt();
        // half-unit multiples keep the box aligned with h = 1/20, 1/30, 1/40
        let start = ((5.0 / k).max(1.0) * 2.0).ceil() / 2.0;
        Self {
            h,
            exterior_length: start,
            exterior_half_height: start + 0.5,
            layer_thickness: 1.0,
            sigma: 12.0,
            shift,
            closed_neck: false,
            parity: Parity::Even,
        }
    }

    pub fn with_h(&self, h: f64) -> Self {
        Self { h, ..*self }
    }
}

/// Aligned grid over cavity, neck and exterior box.
#[derive(Debug, Clone)]
pub struct Grid {
    pub h: f64,
    /// `x` index of the cavity back wall (always 0) and of the junctions.
    pub i_junction: i64,
    pub i_aperture: i64,
    /// Per column `i`: `(x index, j_lo, j_hi, first unknown)`; `y = j h`,
    /// `j_lo` is 0 for even and 1 for odd parity.
    columns: Vec<(i64, i64, i64, usize)>,
    n: usize,
    spec: GridSpec,
    x_layer: f64,
    y_layer: f64,
}

fn steps(len: f64, h: f64) -> Result<i64> {
    let r = len / h;
    let n = r.round();
    if (r - n).abs() > 1e-9 * r.max(1.0) || n < 1.0 {
        return Err(Error::InvalidInput(format!("length {len} is not a multiple of h = {h}")));
    }
    Ok(n as i64)
}

impl Grid {
    pub fn new(geom: &ResonatorGeometry, spec: &GridSpec) -> Result<Self> {
        let h = spec.h;
        if !(h > 0.0) || h > geom.eps / 6.0 + 1e-12 {
            return Err(Error::InvalidInput(format!("need 0 < h <= eps/6, got h = {h}")));
        }
        let na = steps(geom.cavity.a, h)?;
        let nb2 = steps(geom.cavity.b / 2.0, h)?;
        let ne = steps(geom.eps, h)?;
        let nl = steps(geom.neck_length, h)?;
        let nx = steps(spec.exterior_length + spec.layer_thickness, h)?;
        let ny = steps(spec.exterior_half_height + spec.layer_thickness, h)?;
        steps(spec.layer_thickness, h)?;
        let mut columns = Vec::new();
        let mut n = 0usize;
        let last = if spec.closed_neck { na - 1 } else { na + nl + nx - 1 };
        for i in 1..=last {
            let half = if i < na {
                nb2 - 1
            } else if i <= na + nl {
                ne - 1
            } else {
                ny - 1
            };
            let lo = if spec.parity == Parity::Even { 0 } else { 1 };
            columns.push((i, lo, half, n));
            n += (half - lo + 1).max(0) as usize;
        }
        Ok(Self {
            h,
            i_junction: na,
            i_aperture: na + nl,
            columns,
            n,
            spec: *spec,
            x_layer: geom.neck_length + spec.exterior_length,
            y_layer: spec.exterior_half_height,
        })
    }

    pub fn unknowns(&self) -> usize {
        self.n
    }

    fn x_of(&self, i: i64) -> f64 {
        (i - self.i_junction) as f64 * self.h
    }

    fn index(&self, c: usize, j: i64) -> Option<usize> {
        let (_, lo, hi, first) = *self.columns.get(c)?;
        if j < lo || j > hi {
            None
        } else {
            Some(first + (j - lo) as usize)
        }
    }

    fn stretch(&self, t: f64, start: f64) -> Complex64 {
        let d = t.abs() - start;
        if d <= 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            let r = d / self.spec.layer_thickness;
            Complex64::new(1.0, self.spec.sigma * r * r)
        }
    }

    fn sx(&self, x: f64) -> Complex64 {
        if x <= self.x_layer {
            Complex64::new(1.0, 0.0)
        } else {
            self.stretch(x - self.x_layer, 0.0)
        }
    }

    fn sy(&self, x: f64, y: f64) -> Complex64 {
        // the layer in y only exists in the exterior box
        if x <= self.x_of(self.i_aperture) + 0.5 * self.h {
            Complex64::new(1.0, 0.0)
        } else {
            self.stretch(y, self.y_layer)
        }
    }

    fn bandwidth(&self) -> usize {
        self.columns
            .windows(2)
            .map(|w| (w[0].2 - w[0].1 + 1).max(w[1].2 - w[1].1 + 1) as usize)
            .max()
            .unwrap_or(1)
            + 1
    }

    /// Stiffness and diagonal mass of the stretched operator.
    fn matrices(&self) -> (BandMatrix, Vec<Complex64>) {
        let bw = self.bandwidth();
        let mut k = BandMatrix::zeros(self.n, bw, bw);
        let mut m = vec![ZERO; self.n];
        let h2 = self.h * self.h;
        for (c, &(i, lo, hi, _)) in self.columns.iter().enumerate() {
            let x = self.x_of(i);
            let sx = self.sx(x);
            let sxm = self.sx(x - 0.5 * self.h);
            let sxp = self.sx(x + 0.5 * self.h);
            for j in lo..=hi {
                let y = j as f64 * self.h;
                let sy = self.sy(x, y);
                let sym = self.sy(x, y - 0.5 * self.h);
                let syp = self.sy(x, y + 0.5 * self.h);
                let row = self.index(c, j).unwrap();
                // the even row on the symmetry line is halved to keep K symmetric
                let wt = if j == 0 { 0.5 } else { 1.0 };
                m[row] = sx * sy * wt;
                let cxm = sy / sxm / h2 * wt;
                let cxp = sy / sxp / h2 * wt;
                let cym = sx / sym / h2 * wt;
                let cyp = sx / syp / h2 * wt;
                k.add_to(row, row, cxm + cxp + cym + cyp);
                let below = if j == 0 { None } else { self.index(c, j - 1) };
                let nb = [
                    (c.checked_sub(1).and_then(|cc| self.index(cc, j)), cxm),
                    (self.index(c + 1, j), cxp),
                    (below, cym),
                    (self.index(c, j + 1), if j == 0 { 2.0 * cyp } else { cyp }),
                ];
                for (col, w) in nb {
                    if let Some(col) = col {
                        k.add_to(row, col, -w);
                    }
                }
            }
        }
        (k, m)
    }

    /// Sums of `|u|^2 h^2` over the cavity, the neck, and the unstretched exterior.
    pub fn masses(&self, u: &[Complex64]) -> (f64, f64, f64) {
        let (mut cav, mut neck, mut ext) = (0.0, 0.0, 0.0);
        for (c, &(i, lo, hi, _)) in self.columns.iter().enumerate() {
            let x = self.x_of(i);
            for j in lo..=hi {
                let wt = if j == 0 { 1.0 } else { 2.0 };
                let v = wt * u[self.index(c, j).unwrap()].norm_sqr() * self.h * self.h;
                if i < self.i_junction {
                    cav += v;
                } else if i <= self.i_aperture {
                    neck += v;
                } else if x <= self.x_layer && (j as f64 * self.h).abs() <= self.y_layer {
                    ext += v;
                }
            }
        }
        (cav, neck, ext)
    }
}

/// One grid's eigenvalue and eigenvector diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct GridEigen {
    pub h: f64,
    pub rho: Complex64,
    /// Exterior (unstretched part) over cavity mass.
    pub exterior_ratio: f64,
    pub cavity_fraction: f64,
    pub iterations: usize,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigenvalue nearest the shift whose eigenvector is cavity-dominated.
pub fn grid_eigen(geom: &ResonatorGeometry, spec: &GridSpec) -> Result<GridEigen> {
    let grid = Grid::new(geom, spec)?;
    let n = grid.unknowns();
    let (k, m) = grid.matrices();
    let shifted = |s: Complex64| -> Result<crate::linalg::BandLu> {
        let mut a = k.clone();
        for (i, mi) in m.iter().enumerate() {
            a.add_to(i, i, -s * mi);
        }
        a.factor()
    };
    let sigma0 = Complex64::new(spec.shift, 0.0);
    let lu = shifted(sigma0)?;
    let op = |v: &[Complex64]| -> Vec<Complex64> {
        let mv: Vec<Complex64> = v.iter().zip(&m).map(|(a, b)| a * b).collect();
        lu.solve(&mv)
    };

    // Arnoldi
    let steps = 60.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut v0: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.gen::<f64>() - 0.5, 0.0)).collect();
    let nv = norm(&v0);
    v0.iter_mut().for_each(|x| *x /= nv);
    let mut basis = vec![v0];
    let mut hess = nalgebra::DMatrix::<Complex64>::zeros(steps + 1, steps);
    let mut used = steps;
    for j in 0..steps {
        let mut w = op(&basis[j]);
        for _ in 0..2 {
            for (i, b) in basis.iter().enumerate() {
                let c = dot(b, &w);
                hess[(i, j)] += c;
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let nw = norm(&w);
        hess[(j + 1, j)] = Complex64::new(nw, 0.0);
        if nw < 1e-300 {
            used = j + 1;
            break;
        }
        w.iter_mut().for_each(|x| *x /= nw);
        basis.push(w);
    }
    let hm = hess.view((0, 0), (used, used)).into_owned();
    let (q, t) = nalgebra::linalg::Schur::new(hm).unpack();

    let mut best: Option<(f64, Complex64, Vec<Complex64>)> = None;
    for idx in 0..used {
        let mu = t[(idx, idx)];
        if mu.norm() < 1e-14 {
            continue;
        }
        // eigenvector of the triangular factor by back substitution
        let mut z = vec![ZERO; used];
        z[idx] = Complex64::new(1.0, 0.0);
        for r in (0..idx).rev() {
            let mut s = ZERO;
            for c in r + 1..=idx {
                s += t[(r, c)] * z[c];
            }
            let d = mu - t[(r, r)];
            z[r] = if d.norm() < 1e-14 * mu.norm() { ZERO } else { s / d };
        }
        let y: Vec<Complex64> = (0..used).map(|r| (0..used).map(|c| q[(r, c)] * z[c]).sum()).collect();
        let ny = norm(&y);
        let resid = hess[(used.min(steps), used - 1)].norm() * (y[used - 1] / ny).norm() / mu.norm();
        if resid > 1e-4 {
            continue;
        }
        let mut vec = vec![ZERO; n];
        for (c, b) in basis.iter().take(used).enumerate() {
            let yc = y[c];
            vec.iter_mut().zip(b).for_each(|(a, bb)| *a += yc * bb);
        }
        let (cav, neck, ext) = grid.masses(&vec);
        let frac = cav / (cav + neck + ext + 1e-300);
        // only modes that live in the cavity count
        if frac < 0.5 {
            continue;
        }
        let rho = sigma0 + 1.0 / mu;
        let better = match &best {
            None => true,
            Some((_, r0, _)) => (rho - sigma0).norm() < (*r0 - sigma0).norm(),
        };
        if better {
            best = Some((frac, rho, vec));
        }
    }
    let (_, mut rho, mut u) = best.ok_or_else(|| Error::NoRoot("no cavity-dominated eigenvalue near the shift".into()))?;

    // inverse iteration at the Ritz value
    let lu2 = shifted(rho)?;
    let mut iterations = 0;
    let mut converged = false;
    for it in 0..40 {
        iterations = it + 1;
        let mv: Vec<Complex64> = u.iter().zip(&m).map(|(a, b)| a * b).collect();
        let mut w = lu2.solve(&mv);
        let nw = norm(&w);
        if !nw.is_finite() {
            return Err(Error::IterationDivergence("inverse iteration produced a non-finite vector".into()));
        }
        w.iter_mut().for_each(|x| *x /= nw);
        let kw = k.matvec(&w);
        let num: Complex64 = w.iter().zip(&kw).map(|(a, b)| a * b).sum();
        let den: Complex64 = w.iter().zip(&m).map(|(a, b)| a * a * b).sum();
        let new = num / den;
        let change = (new - rho).norm();
        rho = new;
        u = w;
        if change <= 1e-13 * rho.norm() {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::IterationDivergence(format!("inverse iteration did not settle near {rho}")));
    }
    let (cav, neck, ext) = grid.masses(&u);
    Ok(GridEigen {
        h: spec.h,
        rho,
        exterior_ratio: ext / cav,
        cavity_fraction: cav / (cav + neck + ext),
        iterations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Extrapolated to `h = 0`.
    pub rho: Complex64,
    pub grids: Vec<GridEigen>,
    pub observed_order: f64,
    /// `|rho(h_last) - rho(h_prev)|`.
    pub drift: f64,
    pub sigma: f64,
}

impl OracleResult {
    pub fn im_log(&self) -> f64 {
        self.rho.im.abs().ln()
    }

    /// The width, or `UnresolvedWidth` when it is below the grid drift.
    pub fn resolved_width(&self) -> Result<f64> {
        if self.rho.im.abs() <= self.drift.min(1e-8 * self.rho.norm()) || self.rho.im >= 0.0 {
            Err(Error::UnresolvedWidth(self.rho.im.abs()))
        } else {
            Ok(-self.rho.im)
        }
    }
}

/// Relative width below which the discrete eigenvalue cannot carry it.
pub const WIDTH_FLOOR: f64 = 1e-10;

/// Rejects geometries whose width `~ lambda_0 e^{-pi L/eps}` is below the
/// floating-point floor of the grid eigenvalue, before any grid is built.
pub fn check_resolvable(geom: &ResonatorGeometry, lambda0: f64) -> Result<()> {
    let predicted = lambda0 * (-std::f64::consts::PI * geom.neck_length / geom.eps).exp();
    if predicted < WIDTH_FLOOR * lambda0 {
        return Err(Error::UnresolvedWidth(predicted));
    }
    Ok(())
}

/// Order `p` with `(h1^p - h2^p)/(h2^p - h3^p) = r` for `h1 > h2 > h3`.
pub fn observed_order(h: [f64; 3], r: f64) -> Option<f64> {
    let f = |p: f64| (h[0].powf(p) - h[1].powf(p)) / (h[1].powf(p) - h[2].powf(p)) - r;
    let (mut lo, mut hi) = (0.05, 8.0);
    if f(lo) * f(hi) > 0.0 {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(lo) * f(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Leading error exponents of the five-point eigenvalue: `h^{4/3}` from the
/// re-entrant corners at the neck ends, then the smooth `h^2`.
pub const ERROR_EXPONENTS: [f64; 2] = [4.0 / 3.0, 2.0];

/// Eigenvalues on three grids (`h`, `2h/3`, `h/2`), extrapolated to `h = 0`
/// with the error model `rho + c1 h^{4/3} + c2 h^2`.
pub fn oracle_resonance(geom: &ResonatorGeometry, spec: &GridSpec) -> Result<OracleResult> {
    let hs = [spec.h, spec.h * 2.0 / 3.0, spec.h / 2.0];
    let grids: Vec<GridEigen> = hs.iter().map(|h| grid_eigen(geom, &spec.with_h(*h))).collect::<Result<_>>()?;
    let r = [grids[0].rho, grids[1].rho, grids[2].rho];
    let ratio = (r[0].re - r[1].re) / (r[1].re - r[2].re);
    let p = observed_order(hs, ratio).unwrap_or(f64::NAN);
    let rho = extrapolate(hs, r);
    Ok(OracleResult {
        rho,
        drift: (r[2] - r[1]).norm(),
        grids,
        observed_order: p,
        sigma: spec.sigma,
    })
}

/// Value at `h = 0` of `rho + c1 h^{e1} + c2 h^{e2}` through three points.
pub fn extrapolate(h: [f64; 3], r: [Complex64; 3]) -> Complex64 {
    let [e1, e2] = ERROR_EXPONENTS;
    let a = nalgebra::Matrix3::from_fn(|i, j| match j {
        0 => 1.0,
        1 => h[i].powf(e1),
        _ => h[i].powf(e2),
    });
    let inv = a.try_inverse().expect("distinct grid spacings");
    (0..3).map(|k| r[k] * inv[(0, k)]).sum()
}
