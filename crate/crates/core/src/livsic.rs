//! The Livšic matrix `L(z) = z - A - Φ(z)` on each sheet, its inverse (the
//! partial resolvent) and the spectral density on the positive half line.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{inner, CMat};
use crate::model::ModelSpec;
use crate::quadrature::{integrate_to_infinity, QuadOptions};
use crate::stieltjes::{phi, SheetTag};

/// Default lower bound on `σ_min(L)` for inversion.
pub const NEAR_SINGULAR_THRESHOLD: f64 = 1e-12;
/// Tolerance of the internal cross-checks of the spectral density.
pub const DENSITY_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct LivsicValue {
    pub z: Complex64,
    pub sheet: SheetTag,
    pub l: CMat,
    pub det: Complex64,
    pub sigma_min: f64,
}

/// `z - diag(a) - Φ_sheet(z)` without factorizations.
pub fn livsic_matrix(spec: &ModelSpec, z: Complex64, sheet: SheetTag) -> Result<CMat> {
    let mut l = phi(spec, z, sheet)?.scale_real(-1.0);
    for (j, &aj) in spec.a().iter().enumerate() {
        l[(j, j)] += z - aj;
    }
    Ok(l)
}

pub fn livsic(spec: &ModelSpec, z: Complex64, sheet: SheetTag) -> Result<LivsicValue> {
    let l = livsic_matrix(spec, z, sheet)?;
    let det = l.det();
    let sigma_min = l.sigma_min();
    Ok(LivsicValue { z, sheet, l, det, sigma_min })
}

/// `det L(z)` on the given sheet.
pub fn livsic_det(spec: &ModelSpec, z: Complex64, sheet: SheetTag) -> Result<Complex64> {
    Ok(livsic_matrix(spec, z, sheet)?.det())
}

/// The partial resolvent `L(z)^(-1)`.
pub fn l_inverse(spec: &ModelSpec, z: Complex64, sheet: SheetTag) -> Result<CMat> {
    l_inverse_with_threshold(spec, z, sheet, NEAR_SINGULAR_THRESHOLD)
}

pub fn l_inverse_with_threshold(spec: &ModelSpec, z: Complex64, sheet: SheetTag, threshold: f64) -> Result<CMat> {
    let l = livsic_matrix(spec, z, sheet)?;
    invert_checked(&l, threshold)
}

pub(crate) fn invert_checked(l: &CMat, threshold: f64) -> Result<CMat> {
    let sigma_min = l.sigma_min();
    if !(sigma_min > threshold) {
        return Err(Error::NearSingular { sigma_min });
    }
    let inv = l.inverse()?;
    let residual = l.mul(&inv).sub(&CMat::identity(l.rows())).max_abs();
    // backward-stable inversion leaves a residual of order κ·u; the fixed
    // bound is relaxed only once the condition number passes 1e6
    let kappa = l.op_norm() / sigma_min;
    let tol = 1e-10 * (kappa * 1e-6).max(1.0);
    if residual > tol {
        return Err(Error::IdentityViolation { what: "L * L^-1 = I", defect: residual, tolerance: tol });
    }
    Ok(inv)
}

/// The three expressions for the spectral density at `λ > 0`.
#[derive(Clone, Debug)]
pub struct DensityForms {
    /// `L₊⁻¹ G L₋⁻¹`
    pub sandwich: CMat,
    /// `L₋⁻¹ G L₊⁻¹`
    pub swapped: CMat,
    /// `(L₋⁻¹ - L₊⁻¹)/(2πi)`
    pub jump: CMat,
}

impl DensityForms {
    pub fn defect(&self) -> f64 {
        self.sandwich.sub(&self.jump).max_abs().max(self.sandwich.sub(&self.swapped).max_abs())
    }
}

pub fn density_forms(spec: &ModelSpec, lambda: f64) -> Result<DensityForms> {
    if !(lambda > 0.0) {
        return Err(Error::invalid("the spectral density lives on the positive half line"));
    }
    let z = Complex64::new(lambda, 0.0);
    let lp = l_inverse(spec, z, SheetTag::PlusContinued)?;
    let lm = l_inverse(spec, z, SheetTag::MinusContinued)?;
    let g = spec.eval_g(z)?;
    let sandwich = lp.mul(&g).mul(&lm);
    let swapped = lm.mul(&g).mul(&lp);
    let jump = lm.sub(&lp).scale(Complex64::new(0.0, -1.0 / (2.0 * PI)));
    Ok(DensityForms { sandwich, swapped, jump })
}

/// Density `D(λ)` of the spectral measure of the full Hamiltonian
/// compressed to the discrete block. All three forms are compared.
pub fn spectral_density(spec: &ModelSpec, lambda: f64) -> Result<CMat> {
    let f = density_forms(spec, lambda)?;
    let defect = f.defect();
    let tol = DENSITY_TOLERANCE * (1.0 + f.sandwich.max_abs());
    if defect > tol {
        return Err(Error::IdentityViolation { what: "spectral density forms", defect, tolerance: tol });
    }
    Ok(f.sandwich)
}

/// Points where the density may peak: the levels and the lower poles' real
/// parts, positive ones only.
fn density_breaks(spec: &ModelSpec) -> Vec<f64> {
    let mut b: Vec<f64> = spec.a().iter().copied().filter(|x| *x > 0.0).collect();
    b.extend(spec.lower_poles().iter().map(|p| p.re).filter(|x| *x > 0.0));
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

/// `∫₀^∞ λ^k D(λ) dλ` by adaptive quadrature.
pub fn spectral_moment(spec: &ModelSpec, k: i32, opts: QuadOptions) -> Result<CMat> {
    let n = spec.n();
    let breaks = density_breaks(spec);
    let scale = breaks.iter().copied().fold(1.0, f64::max);
    let r = integrate_to_infinity(
        |l| {
            if l <= 0.0 {
                return Ok(vec![Complex64::new(0.0, 0.0); n * n]);
            }
            let d = spectral_density(spec, l)?;
            Ok(d.as_slice().iter().map(|x| x * l.powi(k)).collect())
        },
        0.0,
        scale,
        &breaks,
        opts,
    )?;
    Ok(CMat::from_row_major(n, n, r.value))
}

/// Both sides of the wave-matrix isometry for the representer
/// `f(λ) = v/(λ+1)²`: `∫‖M f‖²` and `∫⟨g, D g⟩` with `g = L₊ f`.
pub fn wave_isometry_check(spec: &ModelSpec, v: &[Complex64], opts: QuadOptions) -> Result<(f64, f64)> {
    let breaks = density_breaks(spec);
    let r = integrate_to_infinity(
        |l| {
            if l <= 0.0 {
                return Ok(vec![Complex64::new(0.0, 0.0); 2]);
            }
            let z = Complex64::new(l, 0.0);
            let f: Vec<Complex64> = v.iter().map(|x| x / ((l + 1.0) * (l + 1.0))).collect();
            let mf = spec.eval_m(z)?.mul_vec(&f);
            let g = livsic_matrix(spec, z, SheetTag::PlusContinued)?.mul_vec(&f);
            let dg = spectral_density(spec, l)?.mul_vec(&g);
            Ok(vec![inner(&mf, &mf), inner(&dg, &g)])
        },
        0.0,
        1.0,
        &breaks,
        opts,
    )?;
    Ok((r.value[0].re, r.value[1].re))
}

/// `max |z| ‖L₊(z)⁻¹‖` and `min |z| ‖L₊(z)⁻¹‖` over `samples` points of the
/// circle of radius `r`, avoiding the positive half line.
pub fn inverse_decay_band(spec: &ModelSpec, r: f64, samples: usize) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = 0.0_f64;
    for j in 0..samples {
        let theta = 2.0 * PI * (j as f64 + 0.5) / samples as f64;
        let z = Complex64::from_polar(r, theta);
        let v = l_inverse(spec, z, SheetTag::FirstSheet)?.op_norm() * r;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok((lo, hi))
}

/// An eigenvalue of the full Hamiltonian below the continuum together with
/// its weight in the compressed spectral measure.
#[derive(Clone, Debug)]
pub struct BoundState {
    pub energy: f64,
    /// Residue of `L⁻¹` at the eigenvalue: the point mass of the compressed
    /// spectral measure.
    pub weight: CMat,
}

/// Smallest `|λ|` probed below the threshold. Bound states closer to 0 than
/// this are invisible in double precision.
pub const BOUND_STATE_FLOOR: f64 = 1e-300;

/// Number of positive eigenvalues of the Hermitian `L(λ)`, `λ < 0`.
fn inertia_above(spec: &ModelSpec, lambda: f64) -> Result<usize> {
    let l = livsic_matrix(spec, Complex64::new(lambda, 0.0), SheetTag::FirstSheet)?;
    let h = l.add(&l.adjoint()).scale_real(0.5);
    Ok(h.hermitian_eigenvalues().iter().filter(|x| **x > 0.0).count())
}

/// Eigenvalues of the full Hamiltonian on the negative half line, found as
/// the points where the monotone matrix `L(λ)` changes inertia.
pub fn bound_states(spec: &ModelSpec) -> Result<Vec<BoundState>> {
    if spec.form_factor().is_zero() {
        return Ok(Vec::new());
    }
    // λ ↦ L(λ) is operator-increasing on (-∞, 0); parametrize λ = -e^s
    let count = |s: f64| inertia_above(spec, -s.exp());
    let s_lo = BOUND_STATE_FLOOR.ln();
    let mut s_hi = (2.0 * (1.0 + spec.a().iter().copied().fold(0.0, f64::max))).ln();
    while count(s_hi)? > 0 {
        s_hi += 1.0;
        if s_hi > 700.0 {
            return Err(Error::NoConvergence { what: "bound-state bracket" });
        }
    }
    let total = count(s_lo)?;
    let mut energies = Vec::with_capacity(total);
    for k in 1..=total {
        // largest s with count(s) >= k
        let (mut lo, mut hi) = (s_lo, s_hi);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if count(mid)? >= k {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 * hi.abs().max(1.0) {
                break;
            }
        }
        energies.push(-(0.5 * (lo + hi)).exp());
    }
    energies.sort_by(f64::total_cmp);
    energies.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    let mut out = Vec::with_capacity(energies.len());
    for (i, &e) in energies.iter().enumerate() {
        let mut r: f64 = 0.5 * e.abs();
        for (j, &f) in energies.iter().enumerate() {
            if j != i {
                r = r.min(0.5 * (e - f).abs());
            }
        }
        let weight = crate::quadrature::circle_moment(Complex64::new(e, 0.0), r, 64, 0, |z| {
            livsic_matrix(spec, z, SheetTag::FirstSheet)?.inverse()
        })?;
        out.push(BoundState { energy: e, weight });
    }
    Ok(out)
}
