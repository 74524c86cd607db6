//! Gamov vectors, the Dirac-type pairing, Hardy projections on sampled
//! functions, the pole-sum identity for `Q₊ S₋ g` and the Toeplitz decay
//! semigroup `T₊(t) = P₊ Q₊ e^{-itλ} P₊⁻¹`.
//!
//! Sampled functions live on grids `μ_k = φ(u_k)` that are smooth images of
//! a uniform grid, symmetric about 0. Boundary values of `Q₊` on such a grid
//! use the Plemelj formula with the principal value taken by the odd–even
//! rule `PV ∫ F/(μ-λ_j) ≈ 2 Σ_{k-j odd} w_k F_k/(μ_k-λ_j)`, `w_k = φ'(u_k)Δu`.
//! Slowly decaying tails are handled by subtracting `c/(μ - w_ref)`, whose
//! projection is known in closed form.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;
use num_complex::Complex64;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::linalg::{inner, vnorm, CMat};
use crate::model::ModelSpec;
use crate::quadrature::{integrate_from_neg_infinity, integrate_to_infinity, integrate_with_breaks, QuadOptions};
use crate::resonances::Resonance;
use crate::scattering::{s_k, ScatteringResidue, Side};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Pole of the subtracted tail model `c/(μ - w_ref)`.
pub const TAIL_REFERENCE_POLE: Complex64 = Complex64::new(0.0, -1.0);
/// Largest relative residual accepted when extending positive-axis data.
pub const EXTENSION_RESIDUAL: f64 = 1e-6;
/// Largest share of a result that may come from the estimated tail.
pub const TAIL_SHARE: f64 = 1e-2;

#[derive(Clone, Debug, PartialEq)]
pub struct GamovVector {
    pub zeta: Complex64,
    /// Unit vector in `ker L₊(ζ)`.
    pub e0: Vec<Complex64>,
    /// `M(ζ) e0`.
    pub k0: Vec<Complex64>,
}

impl GamovVector {
    /// The function `λ ↦ k0/(ζ - λ)` at one point.
    pub fn eval(&self, lambda: f64) -> Vec<Complex64> {
        let d = (self.zeta - lambda).inv();
        self.k0.iter().map(|k| k * d).collect()
    }
}

pub fn gamov(spec: &ModelSpec, res: &Resonance, column: usize) -> Result<GamovVector> {
    if column >= res.geometric_multiplicity {
        return Err(Error::invalid("kernel column out of range"));
    }
    let e0 = res.kernel_basis.col(column);
    let k0 = spec.eval_m(res.zeta)?.mul_vec(&e0);
    if vnorm(&k0) == 0.0 {
        return Err(Error::invalid("M(zeta) annihilates the kernel vector"));
    }
    Ok(GamovVector { zeta: res.zeta, e0, k0 })
}

/// `M(ζ) · ker L₊(ζ)` as the columns of an n×d matrix.
pub fn gamov_space(spec: &ModelSpec, res: &Resonance) -> Result<CMat> {
    Ok(spec.eval_m(res.zeta)?.mul(&res.kernel_basis))
}

/// Test function `λ ↦ k/(λ - w)`; for `w` in the lower half plane it is the
/// boundary value of an upper-half-plane Hardy function.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalTest {
    pub w: Complex64,
    pub k: Vec<Complex64>,
}

impl RationalTest {
    pub fn eval(&self, z: Complex64) -> Vec<Complex64> {
        let d = (z - self.w).inv();
        self.k.iter().map(|k| k * d).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiracPairing {
    /// `2πi (s(ζ̄), k0)`.
    pub lhs: Complex64,
    /// `∫ (s(λ), k0/(ζ - λ)) dλ`.
    pub rhs: Complex64,
    /// `±1` when `rhs = sign · lhs` to 1e-8, 0 if neither sign fits.
    pub sign: i32,
    pub relative_error: f64,
}

/// Both sides of the pairing of a Gamov vector with an upper Hardy test
/// function. The integral runs over `[-Λ, Λ]` adaptively; the two tails are
/// added in closed form. The inner product is antilinear in its second slot.
pub fn dirac_pairing_check(g: &GamovVector, s: &RationalTest, cutoff: f64) -> Result<DiracPairing> {
    if !(s.w.im < 0.0) {
        return Err(Error::invalid("test function pole must lie in the lower half plane"));
    }
    let kk = inner(&s.k, &g.k0);
    let lhs = 2.0 * PI * I * inner(&s.eval(g.zeta.conj()), &g.k0);
    if kk == Complex64::zero() {
        return Ok(DiracPairing { lhs, rhs: Complex64::zero(), sign: 0, relative_error: 0.0 });
    }
    // (s(λ), k0/(ζ-λ)) = (k, k0) / ((λ - w)(ζ̄ - λ))
    let a = g.zeta.conj();
    let w = s.w;
    let mut breaks = vec![a.re, w.re];
    breaks.retain(|x| x.abs() < cutoff);
    let body = integrate_with_breaks(
        |l| Ok(vec![kk / ((l - w) * (a - l))]),
        -cutoff,
        cutoff,
        &breaks,
        QuadOptions::new(1e-15, 1e-13),
    )?
    .value[0];
    // ∫_Λ^∞ dλ/((λ-w)(a-λ)) = Log((Λ-a)/(Λ-w))/(a-w), and the mirror image
    let upper = ((cutoff - a) / (cutoff - w)).ln() / (a - w);
    let lower = ((-cutoff - w) / (-cutoff - a)).ln() / (a - w);
    let tail = kk * (upper + lower);
    let rhs = body + tail;
    if tail.norm() > TAIL_SHARE * rhs.norm() {
        return Err(Error::TailTooFat { ratio: tail.norm() / rhs.norm() });
    }
    let scale = lhs.norm().max(rhs.norm());
    let mut sign = 0;
    let mut relative_error = f64::INFINITY;
    for sg in [1, -1] {
        let e = (rhs - lhs * sg as f64).norm() / scale;
        if e < relative_error {
            relative_error = e;
            if e <= 1e-8 {
                sign = sg;
            }
        }
    }
    Ok(DiracPairing { lhs, rhs, sign, relative_error })
}

/// Real-line grid `μ_k = φ(u_k)` with weights `w_k = φ'(u_k)Δu`, symmetric
/// about 0 and containing 0.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl Grid {
    /// Equispaced grid `k·h`, `|k| ≤ K`, with `h = Λ/K`.
    pub fn uniform(cutoff: f64, half_points: usize) -> Result<Self> {
        if !(cutoff > 0.0) || half_points == 0 {
            return Err(Error::invalid("grid needs a positive cutoff and at least one point per side"));
        }
        let h = cutoff / half_points as f64;
        let k = half_points as i64;
        let points = (-k..=k).map(|j| j as f64 * h).collect();
        Ok(Self { points, weights: vec![h; 2 * half_points + 1] })
    }

    /// Graded grid whose spacing is `coarse` far out and dips to `fine`
    /// within about `width` of each of `±centers`. Points solve
    /// `dμ/du = s(μ)` by RK4 with unit step from 0 outwards.
    pub fn graded(cutoff: f64, centers: &[f64], fine: f64, coarse: f64, width: f64) -> Result<Self> {
        if !(cutoff > 0.0 && fine > 0.0 && coarse >= fine && width > 0.0) {
            return Err(Error::invalid("graded grid needs 0 < fine <= coarse and positive cutoff and width"));
        }
        let mut cs: Vec<f64> = Vec::new();
        for c in centers {
            cs.push(c.abs());
            cs.push(-c.abs());
        }
        let s = |mu: f64| {
            let mut v = 1.0;
            for c in &cs {
                let x = (mu - c) / width;
                v *= 1.0 - (-x * x).exp();
            }
            fine + (coarse - fine) * v
        };
        let mut half = vec![0.0];
        let mut mu = 0.0;
        while mu < cutoff {
            let k1 = s(mu);
            let k2 = s(mu + 0.5 * k1);
            let k3 = s(mu + 0.5 * k2);
            let k4 = s(mu + k3);
            mu += (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
            half.push(mu);
            if half.len() > 50_000_000 {
                return Err(Error::invalid("graded grid would be too large"));
            }
        }
        let mut points: Vec<f64> = half.iter().skip(1).rev().map(|x| -x).collect();
        points.extend(half.iter().copied());
        let weights = points.iter().map(|&m| s(m)).collect();
        Ok(Self { points, weights })
    }

    /// Graded grid resolving the given lower-half-plane points: spacing
    /// `min|Im ζ|/5` near `±Re ζ`, coarse spacing chosen so that the grid
    /// has at most `target_points` points.
    pub fn for_poles(cutoff: f64, poles: &[Complex64], target_points: usize) -> Result<Self> {
        let d = poles.iter().map(|p| p.im.abs()).fold(f64::INFINITY, f64::min);
        if !(d > 0.0 && d.is_finite()) {
            return Self::uniform(cutoff, target_points / 2);
        }
        let fine = d / 5.0;
        let width = (20.0 * d).max(0.5);
        let centers: Vec<f64> = poles.iter().map(|p| p.re).collect();
        let (mut lo, mut hi) = (fine, cutoff / 10.0);
        let mut best = Self::graded(cutoff, &centers, fine, hi, width)?;
        if best.len() > target_points {
            return Ok(best);
        }
        for _ in 0..40 {
            let mid = (lo * hi).sqrt();
            let g = Self::graded(cutoff, &centers, fine, mid, width)?;
            if g.len() <= target_points {
                best = g;
                hi = mid;
            } else {
                lo = mid;
            }
            if hi / lo < 1.01 {
                break;
            }
        }
        Ok(best)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn cutoff(&self) -> f64 {
        *self.points.last().unwrap_or(&0.0)
    }

    pub fn max_spacing(&self) -> f64 {
        self.points.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

/// How the values of a sampled function on `λ ≤ 0` relate to its values on
/// `λ > 0`.
#[derive(Clone, Debug, PartialEq)]
pub enum Extension {
    /// Exact representation `Σ k_j/(λ - w_j)` on the whole line.
    Rational(Vec<RationalTest>),
    /// The stored whole-line values are boundary values of an upper Hardy
    /// function (for example the output of a projection).
    Hardy,
    /// Only the values on `λ > 0` carry information.
    PositiveOnly,
}

/// Sampled `𝕂`-valued function on a grid; values are stored per point,
/// `n` components each.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    pub grid: Grid,
    pub dim: usize,
    pub values: Vec<Complex64>,
    /// Declared algebraic decay rate `p` in `|f(λ)| ~ |λ|^(-p)`.
    pub tail_decay_exponent: f64,
    pub extension: Extension,
}

impl GridFunction {
    pub fn from_fn(
        grid: &Grid,
        dim: usize,
        tail_decay_exponent: f64,
        mut f: impl FnMut(f64) -> Vec<Complex64>,
    ) -> Self {
        let mut values = Vec::with_capacity(grid.len() * dim);
        for &l in grid.points() {
            let v = f(l);
            debug_assert_eq!(v.len(), dim);
            values.extend(v);
        }
        Self { grid: grid.clone(), dim, values, tail_decay_exponent, extension: Extension::PositiveOnly }
    }

    /// Samples `Σ k_j/(λ - w_j)` and keeps the representation.
    pub fn rational(grid: &Grid, terms: Vec<RationalTest>) -> Result<Self> {
        let dim = terms.first().map(|t| t.k.len()).ok_or_else(|| Error::invalid("empty rational function"))?;
        if terms.iter().any(|t| t.k.len() != dim) {
            return Err(Error::invalid("rational terms of different dimension"));
        }
        let mut f = Self::from_fn(grid, dim, 1.0, |l| eval_rational(&terms, Complex64::new(l, 0.0), dim));
        f.extension = Extension::Rational(terms);
        Ok(f)
    }

    /// The Gamov function `λ ↦ k0/(ζ - λ)`.
    pub fn gamov(grid: &Grid, g: &GamovVector) -> Self {
        let k: Vec<Complex64> = g.k0.iter().map(|x| -x).collect();
        Self::rational(grid, vec![RationalTest { w: g.zeta, k }]).expect("non-empty")
    }

    pub fn value(&self, i: usize) -> &[Complex64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        if let Extension::Rational(ts) = &mut out.extension {
            for t in ts {
                t.k.iter_mut().for_each(|v| *v *= s);
            }
        }
        out
    }

    /// `L²` norm over the sampled part of `λ > 0`.
    pub fn positive_norm(&self) -> f64 {
        weighted_norm(&self.grid, self.dim, &self.values, |l| l > 0.0)
    }

    /// `L²(ℝ)` norm of the stored whole-line values with the `|λ|^(-2)`
    /// tails beyond the cutoff added analytically. For functions whose
    /// whole-line values are their Hardy extension this is the norm under
    /// which the decay semigroup is contractive.
    pub fn line_norm(&self) -> f64 {
        let body = weighted_norm(&self.grid, self.dim, &self.values, |_| true);
        let n = self.grid.len();
        let (lo, hi) = (self.grid.points()[0], self.grid.points()[n - 1]);
        let a: f64 = self.value(0).iter().map(|x| (x * lo).norm_sqr()).sum();
        let b: f64 = self.value(n - 1).iter().map(|x| (x * hi).norm_sqr()).sum();
        (body * body + a / lo.abs() + b / hi).sqrt()
    }
}

fn eval_rational(terms: &[RationalTest], z: Complex64, dim: usize) -> Vec<Complex64> {
    let mut v = vec![Complex64::zero(); dim];
    for t in terms {
        let d = (z - t.w).inv();
        for (a, k) in v.iter_mut().zip(&t.k) {
            *a += k * d;
        }
    }
    v
}

fn weighted_norm(grid: &Grid, dim: usize, values: &[Complex64], keep: impl Fn(f64) -> bool) -> f64 {
    let mut acc = 0.0;
    for (i, (&l, &w)) in grid.points().iter().zip(grid.weights()).enumerate() {
        if keep(l) {
            acc += w * values[i * dim..(i + 1) * dim].iter().map(|x| x.norm_sqr()).sum::<f64>();
        }
    }
    acc.sqrt()
}

/// Coefficients `(c1, c2)` of the tail model
/// `c1/(μ - w_ref) + c2/(μ - w_ref)²` matched at both ends of the grid.
fn tail_coefficients(grid: &Grid, dim: usize, values: &[Complex64]) -> Vec<(Complex64, Complex64)> {
    let n = grid.len();
    let (lo, hi) = (grid.points()[0], grid.points()[n - 1]);
    let (a, b) = ((lo - TAIL_REFERENCE_POLE).inv(), (hi - TAIL_REFERENCE_POLE).inv());
    // [a a²; b b²] (c1, c2) = (F(lo), F(hi))
    let det = a * b * b - b * a * a;
    (0..dim)
        .map(|k| {
            let (fa, fb) = (values[k], values[(n - 1) * dim + k]);
            ((fa * b * b - fb * a * a) / det, (a * fb - b * fa) / det)
        })
        .collect()
}

/// Boundary values `(Q₊F)(λ_j + i0)` at every grid point, by Plemelj with
/// the odd–even principal-value rule. No tail handling.
fn qplus_raw(grid: &Grid, dim: usize, values: &[Complex64]) -> Vec<Complex64> {
    let pts = grid.points();
    let wts = grid.weights();
    let n = pts.len();
    let coef = 2.0 / (2.0 * PI * I);
    let mut out = vec![Complex64::zero(); n * dim];
    let mut acc = vec![Complex64::zero(); dim];
    for j in 0..n {
        acc.iter_mut().for_each(|a| *a = Complex64::zero());
        let lj = pts[j];
        let mut k = if j % 2 == 0 { 1 } else { 0 };
        while k < n {
            let r = wts[k] / (pts[k] - lj);
            let vk = &values[k * dim..(k + 1) * dim];
            for (a, v) in acc.iter_mut().zip(vk) {
                *a += v * r;
            }
            k += 2;
        }
        for c in 0..dim {
            out[j * dim + c] = 0.5 * values[j * dim + c] + coef * acc[c];
        }
    }
    out
}

/// Splits whole-line values into the tail model plus a remainder decaying
/// like `μ^(-3)`.
fn split_tail(grid: &Grid, dim: usize, values: &[Complex64]) -> (Vec<(Complex64, Complex64)>, Vec<Complex64>) {
    let c = tail_coefficients(grid, dim, values);
    let mut rem = values.to_vec();
    for (i, &l) in grid.points().iter().enumerate() {
        let d = (l - TAIL_REFERENCE_POLE).inv();
        for k in 0..dim {
            rem[i * dim + k] -= c[k].0 * d + c[k].1 * d * d;
        }
    }
    (c, rem)
}

/// Boundary values of `Q₊(e^{-iμt} F)` on the grid, for whole-line values
/// `F` decaying like `1/μ` and `t ≥ 0`.
pub fn qplus_modulated(grid: &Grid, dim: usize, values: &[Complex64], t: f64) -> Vec<Complex64> {
    let (c, mut rem) = split_tail(grid, dim, values);
    for (i, &l) in grid.points().iter().enumerate() {
        let ph = Complex64::from_polar(1.0, -l * t);
        rem[i * dim..(i + 1) * dim].iter_mut().for_each(|v| *v *= ph);
    }
    let mut out = qplus_raw(grid, dim, &rem);
    // for Im w < 0, t ≥ 0:
    // Q₊(e^{-iμt}/(μ - w)) = e^{-iwt}/(μ - w)
    // Q₊(e^{-iμt}/(μ - w)²) = e^{-iwt}(1/(μ - w)² - it/(μ - w))
    let ew = (-I * TAIL_REFERENCE_POLE * t).exp();
    for (i, &l) in grid.points().iter().enumerate() {
        let d = (l - TAIL_REFERENCE_POLE).inv();
        for k in 0..dim {
            out[i * dim + k] += ew * (c[k].0 * d + c[k].1 * (d * d - I * t * d));
        }
    }
    out
}

/// `Q₊` applied on the grid; the result is flagged as a Hardy function.
pub fn project_plus_on_grid(f: &GridFunction) -> GridFunction {
    let values = qplus_modulated(&f.grid, f.dim, &f.values, 0.0);
    GridFunction {
        grid: f.grid.clone(),
        dim: f.dim,
        values,
        tail_decay_exponent: f.tail_decay_exponent,
        extension: Extension::Hardy,
    }
}

/// `(Q₊f)(z) = (1/2πi) ∫ f(λ)/(λ - z) dλ` for `z` in the upper half plane.
pub fn project_plus(f: &GridFunction, z: Complex64) -> Result<Vec<Complex64>> {
    if !(z.im > 0.0) {
        return Err(Error::invalid("project_plus needs Im z > 0"));
    }
    if z.im < 2.0 * f.grid.max_spacing() && z.re.abs() < f.grid.cutoff() {
        return Err(Error::invalid("evaluation point too close to the grid"));
    }
    if !(f.tail_decay_exponent > 0.5) {
        return Err(Error::TailTooFat { ratio: f64::INFINITY });
    }
    let dim = f.dim;
    let (c, rem) = split_tail(&f.grid, dim, &f.values);
    let mut acc = vec![Complex64::zero(); dim];
    for (i, (&l, &w)) in f.grid.points().iter().zip(f.grid.weights()).enumerate() {
        let r = w / (l - z);
        for k in 0..dim {
            acc[k] += rem[i * dim + k] * r;
        }
    }
    let d = (z - TAIL_REFERENCE_POLE).inv();
    let out: Vec<Complex64> = (0..dim).map(|k| acc[k] / (2.0 * PI * I) + c[k].0 * d + c[k].1 * d * d).collect();
    // truncation estimate for the remainder, taken to decay two powers faster
    let n = f.grid.len();
    let (lo, hi) = (f.grid.points()[0], f.grid.points()[n - 1]);
    let q = f.tail_decay_exponent.max(1.0) + 2.0;
    let edge =
        |i: usize, l: f64| vnorm(&rem[i * dim..(i + 1) * dim]) * l.abs() / (q - 1.0) / (l.abs() - z.norm()).max(1e-300);
    let tail = (edge(0, lo) + edge(n - 1, hi)) / (2.0 * PI);
    let scale = vnorm(&out) + c.iter().map(|x| (x.0 * d).norm()).fold(0.0, f64::max);
    if tail > TAIL_SHARE * scale {
        return Err(Error::TailTooFat { ratio: tail / scale });
    }
    Ok(out)
}

/// Basis poles for the least-squares extension of positive-axis data.
fn fit_poles(grid: &Grid) -> Vec<Complex64> {
    let cutoff = grid.cutoff();
    let hmin = grid.points().windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let mut out = Vec::new();
    let mut y = 4.0 * hmin;
    let mut ys = Vec::new();
    while y < cutoff {
        ys.push(y);
        y *= 2.0;
    }
    for &y in &ys {
        let mut x = 0.0;
        while x <= cutoff.min(8.0 * y) {
            out.push(Complex64::new(x, -y));
            x += y;
        }
    }
    out
}

/// Extends positive-axis data by least squares over `Σ c_j/(λ - w_j)` with
/// fixed poles `w_j` in the lower half plane.
fn extend_by_fit(f: &GridFunction) -> Result<Vec<Complex64>> {
    let poles = fit_poles(&f.grid);
    let idx: Vec<usize> = (0..f.grid.len()).filter(|&i| f.grid.points()[i] > 0.0).collect();
    let rows = idx.len();
    let a = CMat::from_fn(rows, poles.len(), |r, j| {
        let i = idx[r];
        let l = f.grid.points()[i];
        (l - poles[j]).inv() * f.grid.weights()[i].sqrt()
    });
    let svd = a.svd();
    let smax = svd.sigma.first().copied().unwrap_or(0.0);
    let mut values = f.values.clone();
    let mut resid2 = 0.0;
    let mut total2 = 0.0;
    for comp in 0..f.dim {
        let b: Vec<Complex64> = idx.iter().map(|&i| f.values[i * f.dim + comp] * f.grid.weights()[i].sqrt()).collect();
        // x = V Σ⁺ Uᴴ b
        let mut coeffs = vec![Complex64::zero(); poles.len()];
        for (s, &sig) in svd.sigma.iter().enumerate() {
            if sig <= 1e-13 * smax {
                continue;
            }
            let ub: Complex64 = (0..rows).map(|r| svd.u[(r, s)].conj() * b[r]).sum();
            let f_s = ub / sig;
            for (j, c) in coeffs.iter_mut().enumerate() {
                *c += svd.v[(j, s)] * f_s;
            }
        }
        for (r, &bi) in b.iter().enumerate() {
            let fit: Complex64 = (0..poles.len()).map(|j| a[(r, j)] * coeffs[j]).sum();
            resid2 += (fit - bi).norm_sqr();
            total2 += bi.norm_sqr();
        }
        for (i, &l) in f.grid.points().iter().enumerate() {
            if l <= 0.0 {
                values[i * f.dim + comp] = (0..poles.len()).map(|j| coeffs[j] / (l - poles[j])).sum();
            }
        }
    }
    let residual = if total2 > 0.0 { (resid2 / total2).sqrt() } else { 0.0 };
    if residual > EXTENSION_RESIDUAL {
        return Err(Error::ExtensionIllposed { residual });
    }
    Ok(values)
}

/// Whole-line values of the upper Hardy function whose restriction to
/// `λ > 0` is `f`.
pub fn hardy_extension(f: &GridFunction) -> Result<Vec<Complex64>> {
    match &f.extension {
        Extension::Rational(terms) => {
            let bad: f64 = terms.iter().filter(|t| t.w.im >= 0.0).map(|t| vnorm(&t.k)).sum();
            if bad > 0.0 {
                let total: f64 = terms.iter().map(|t| vnorm(&t.k)).sum();
                return Err(Error::ExtensionIllposed { residual: bad / total });
            }
            let mut values = f.values.clone();
            for (i, &l) in f.grid.points().iter().enumerate() {
                if l <= 0.0 {
                    let v = eval_rational(terms, Complex64::new(l, 0.0), f.dim);
                    values[i * f.dim..(i + 1) * f.dim].copy_from_slice(&v);
                }
            }
            Ok(values)
        }
        Extension::Hardy => {
            let q = qplus_modulated(&f.grid, f.dim, &f.values, 0.0);
            let diff: Vec<Complex64> = q.iter().zip(&f.values).map(|(a, b)| a - b).collect();
            let den = weighted_norm(&f.grid, f.dim, &f.values, |_| true);
            let residual = weighted_norm(&f.grid, f.dim, &diff, |_| true) / den.max(1e-300);
            if residual > EXTENSION_RESIDUAL {
                return Err(Error::ExtensionIllposed { residual });
            }
            Ok(f.values.clone())
        }
        Extension::PositiveOnly => extend_by_fit(f),
    }
}

/// `T₊(t) f = P₊ Q₊ e^{-iλt} P₊⁻¹ f`. The returned function stores the
/// whole-line values of `Q₊ e^{-iλt} P₊⁻¹ f`, i.e. its own extension; a
/// rational representation is carried along exactly.
pub fn semigroup_apply(f: &GridFunction, t: f64) -> Result<GridFunction> {
    if !(t >= 0.0) {
        return Err(Error::invalid("semigroup time must be non-negative"));
    }
    if t == 0.0 {
        return Ok(f.clone());
    }
    let ext = hardy_extension(f)?;
    let values = qplus_modulated(&f.grid, f.dim, &ext, t);
    let extension = match &f.extension {
        Extension::Rational(terms) => Extension::Rational(
            terms
                .iter()
                .map(|r| {
                    let ph = (-I * r.w * t).exp();
                    RationalTest { w: r.w, k: r.k.iter().map(|k| k * ph).collect() }
                })
                .collect(),
        ),
        _ => Extension::Hardy,
    };
    Ok(GridFunction { grid: f.grid.clone(), dim: f.dim, values, tail_decay_exponent: f.tail_decay_exponent, extension })
}

/// `‖T₊(t)f - e^{-iζt}f‖ / ‖f‖` for a Gamov function, in the whole-line
/// norm of the Hardy extensions.
pub fn eigenrelation_defect(f: &GridFunction, zeta: Complex64, t: f64) -> Result<f64> {
    let tf = semigroup_apply(f, t)?;
    let ext = hardy_extension(f)?;
    let ph = (-I * zeta * t).exp();
    let diff: Vec<Complex64> = tf.values.iter().zip(&ext).map(|(a, b)| a - b * ph).collect();
    let num = weighted_norm(&f.grid, f.dim, &diff, |_| true);
    let den = weighted_norm(&f.grid, f.dim, &ext, |_| true);
    Ok(num / den)
}

fn line_difference(a: &GridFunction, b: &GridFunction) -> f64 {
    let diff: Vec<Complex64> = a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect();
    weighted_norm(&a.grid, a.dim, &diff, |_| true) / weighted_norm(&a.grid, a.dim, &a.values, |_| true)
}

/// `‖T₊(t₁)T₊(t₂)f - T₊(t₁+t₂)f‖ / ‖T₊(t₁+t₂)f‖`, composing through the
/// numerically computed Hardy extension (the rational representation is
/// dropped before the second step).
pub fn semigroup_law_defect(f: &GridFunction, t1: f64, t2: f64) -> Result<f64> {
    let mut inner_step = semigroup_apply(f, t2)?;
    inner_step.extension = Extension::Hardy;
    let composed = semigroup_apply(&inner_step, t1)?;
    let direct = semigroup_apply(f, t1 + t2)?;
    Ok(line_difference(&direct, &composed))
}

/// Both sides of the pole-sum identity
/// `(Q₊(S₋ - I)g)(z) = Σ S₋₁,ζ g(ζ)/(z - ζ)` for `g(λ) = k/(λ - w)`, `w` in
/// the upper half plane. The left side is integrated adaptively over both
/// half lines, using the lower boundary value of `S_K` on `λ < 0`.
pub fn pole_sum_check(
    spec: &ModelSpec,
    residues: &[ScatteringResidue],
    w: Complex64,
    k: &[Complex64],
    z: Complex64,
    opts: QuadOptions,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    if !(w.im > 0.0) || !(z.im > 0.0) {
        return Err(Error::invalid("g must have its pole in the upper half plane and z must lie there"));
    }
    let n = spec.n();
    let g = |l: f64| -> Vec<Complex64> { k.iter().map(|x| x / (l - w)).collect() };
    let integrand = |l: f64| -> Result<Vec<Complex64>> {
        if l == 0.0 {
            return Ok(vec![Complex64::zero(); n]);
        }
        let side = if l > 0.0 { Side::OnAxis } else { Side::BoundaryMinus };
        let s = s_k(spec, Complex64::new(l, 0.0), side)?;
        let sg = s.sub(&CMat::identity(n)).mul_vec(&g(l));
        let d = (l - z).inv() / (2.0 * PI * I);
        Ok(sg.into_iter().map(|x| x * d).collect())
    };
    let mut pos_breaks: Vec<f64> = spec.a().iter().copied().filter(|x| *x > 0.0).collect();
    pos_breaks.extend(residues.iter().map(|r| r.zeta.re).filter(|x| *x > 0.0));
    pos_breaks.push(z.re.abs());
    pos_breaks.sort_by(f64::total_cmp);
    pos_breaks.dedup();
    let neg_breaks: Vec<f64> = residues.iter().map(|r| r.zeta.re).filter(|x| *x < 0.0).collect();
    let right = integrate_to_infinity(integrand, 0.0, 1.0, &pos_breaks, opts)?;
    let left = integrate_from_neg_infinity(integrand, 0.0, 1.0, &neg_breaks, opts)?;
    let lhs: Vec<Complex64> = right.value.iter().zip(&left.value).map(|(a, b)| a + b).collect();
    let mut rhs = vec![Complex64::zero(); n];
    for r in residues {
        let gz: Vec<Complex64> = k.iter().map(|x| x / (r.zeta - w)).collect();
        let v = r.s_minus1.mul_vec(&gz);
        let d = (z - r.zeta).inv();
        for (a, b) in rhs.iter_mut().zip(v) {
            *a += b * d;
        }
    }
    Ok((lhs, rhs))
}
