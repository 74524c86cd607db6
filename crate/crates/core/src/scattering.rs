//! Scattering matrices on the positive half line and their continuation,
//! residues at resonances, the Laurent split in the lower half plane and
//! checks on the negative half line.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{max_principal_angle, CMat};
use crate::livsic::{bound_states, invert_checked, livsic_matrix, BoundState, NEAR_SINGULAR_THRESHOLD};
use crate::model::ModelSpec;
use crate::quadrature::circle_moment;
use crate::resonances::{contour_radius, Resonance, RESIDUE_NODES};
use crate::stieltjes::SheetTag;

/// Agreement required between the two forms of `S_E`.
pub const SE_TOLERANCE: f64 = 1e-10;
/// Residues with norm at or below this are not poles.
pub const NO_POLE_THRESHOLD: f64 = 1e-10;
/// Relative size of the order-2 Laurent coefficient tolerated at a pole.
pub const SIMPLE_POLE_RATIO: f64 = 1e-8;

const TWO_PI_I: Complex64 = Complex64::new(0.0, 2.0 * PI);

/// Where `S_K` is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// `z = λ > 0`.
    OnAxis,
    /// `z` in the open lower half plane.
    ContinuedMinus,
    /// `z = λ < 0`, boundary value from above.
    BoundaryPlus,
    /// `z = λ < 0`, boundary value from below.
    BoundaryMinus,
    /// Anywhere off the cut `(-∞, 0]`, through the continued `L₊`.
    CutPlane,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoleSource {
    Resonance,
    FormFactorPole,
}

#[derive(Clone, Debug)]
pub struct ScatteringResidue {
    pub zeta: Complex64,
    /// Coefficient of `(z - ζ)^(-1)` in the Laurent expansion of `S_K`.
    pub s_minus1: CMat,
    /// Coefficient of `(z - ζ)^(-2)`; zero for a simple pole.
    pub s_minus2: CMat,
    pub radius: f64,
    pub source: PoleSource,
}

impl ScatteringResidue {
    pub fn order_two_ratio(&self) -> f64 {
        self.s_minus2.op_norm() / self.s_minus1.op_norm()
    }
}

/// `S_E(λ) = L₊(λ)⁻¹ L₋(λ)`, compared against `L₊(λ)⁻¹ L₊(λ)*`.
pub fn s_e(spec: &ModelSpec, lambda: f64) -> Result<CMat> {
    if !(lambda > 0.0) {
        return Err(Error::invalid("S_E is evaluated on the positive half line"));
    }
    let z = Complex64::new(lambda, 0.0);
    let lp = livsic_matrix(spec, z, SheetTag::PlusContinued)?;
    let lm = livsic_matrix(spec, z, SheetTag::MinusContinued)?;
    let inv = invert_checked(&lp, NEAR_SINGULAR_THRESHOLD)?;
    let a = inv.mul(&lm);
    let b = inv.mul(&lp.adjoint());
    let defect = a.sub(&b).max_abs();
    if defect > SE_TOLERANCE * (1.0 + a.max_abs()) {
        return Err(Error::IdentityViolation { what: "S_E forms", defect, tolerance: SE_TOLERANCE });
    }
    Ok(a)
}

/// `S_E(z) = L₊(z)⁻¹ L₋(z)` continued off the axis.
pub fn s_e_continued(spec: &ModelSpec, z: Complex64) -> Result<CMat> {
    let lp = livsic_matrix(spec, z, SheetTag::PlusContinued)?;
    let lm = livsic_matrix(spec, z, SheetTag::MinusContinued)?;
    Ok(invert_checked(&lp, NEAR_SINGULAR_THRESHOLD)?.mul(&lm))
}

fn side_sheet(z: Complex64, side: Side) -> Result<SheetTag> {
    let bad = |msg: &str| Err(Error::invalid(alloc::format!("{msg}: z = {z}")));
    match side {
        Side::OnAxis => {
            if z.im != 0.0 || !(z.re > 0.0) {
                return bad("on-axis evaluation needs z = λ > 0");
            }
            Ok(SheetTag::PlusContinued)
        }
        Side::ContinuedMinus => {
            if !(z.im < 0.0) {
                return bad("continued evaluation needs Im z < 0");
            }
            Ok(SheetTag::PlusContinued)
        }
        Side::BoundaryPlus | Side::BoundaryMinus => {
            if z.im != 0.0 || !(z.re < 0.0) {
                return bad("boundary evaluation needs z = λ < 0");
            }
            Ok(if side == Side::BoundaryPlus { SheetTag::FirstSheet } else { SheetTag::PlusContinued })
        }
        Side::CutPlane => {
            if z.im == 0.0 && z.re <= 0.0 {
                return bad("cut-plane evaluation excludes (-inf, 0]");
            }
            Ok(SheetTag::PlusContinued)
        }
    }
}

/// `S_K(z) = I - 2πi M(z) L₊(z)⁻¹ M(z̄)*` on the requested side.
pub fn s_k(spec: &ModelSpec, z: Complex64, side: Side) -> Result<CMat> {
    let sheet = side_sheet(z, side)?;
    let n = spec.n();
    if spec.form_factor().is_zero() {
        return Ok(CMat::identity(n));
    }
    let m = spec.eval_m(z)?;
    let ms = spec.eval_m_star(z)?;
    let l = livsic_matrix(spec, z, sheet)?;
    let inv = invert_checked(&l, NEAR_SINGULAR_THRESHOLD)?;
    let mut s = m.mul(&inv).mul(&ms).scale(-TWO_PI_I);
    for j in 0..n {
        s[(j, j)] += Complex64::new(1.0, 0.0);
    }
    Ok(s)
}

/// `‖S_K(λ) S_K(λ)* - I‖_F` at `λ > 0`.
pub fn unitarity_defect(spec: &ModelSpec, lambda: f64) -> Result<f64> {
    let s = s_k(spec, Complex64::new(lambda, 0.0), Side::OnAxis)?;
    Ok(s.mul(&s.adjoint()).sub(&CMat::identity(spec.n())).frobenius_norm())
}

/// `‖S_K(z)⁻¹ - S_K(z̄)*‖` for `z` in the lower half plane.
pub fn reflection_defect(spec: &ModelSpec, z: Complex64) -> Result<f64> {
    let s = s_k(spec, z, Side::ContinuedMinus)?;
    let t = s_k(spec, z.conj(), Side::CutPlane)?;
    Ok(s.inverse()?.sub(&t.adjoint()).max_abs())
}

/// `‖S_K(λ) M(λ) f - M(λ) S_E(λ) f‖` at `λ > 0`.
pub fn intertwining_defect(spec: &ModelSpec, lambda: f64, f: &[Complex64]) -> Result<f64> {
    let z = Complex64::new(lambda, 0.0);
    let m = spec.eval_m(z)?;
    let lhs = s_k(spec, z, Side::OnAxis)?.mul(&m).mul_vec(f);
    let rhs = m.mul(&s_e(spec, lambda)?).mul_vec(f);
    Ok(lhs.iter().zip(&rhs).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt())
}

fn is_pole_point(spec: &ModelSpec, zeta: Complex64) -> bool {
    spec.pole_set().iter().any(|p| (p - zeta).norm() <= 1e-12)
}

/// Laurent coefficients of `S_K` at an isolated point `ζ` of the lower half
/// plane, by trapezoidal quadrature on a circle of the given radius.
pub fn residue_sk_with_radius(spec: &ModelSpec, zeta: Complex64, radius: f64) -> Result<ScatteringResidue> {
    let f = |z: Complex64| s_k(spec, z, Side::CutPlane);
    let s_minus1 = circle_moment(zeta, radius, RESIDUE_NODES, 0, f)?;
    let s_minus2 = circle_moment(zeta, radius, RESIDUE_NODES, 1, f)?;
    let norm = s_minus1.op_norm();
    if !(norm > NO_POLE_THRESHOLD) {
        return Err(Error::NoPole { zeta, norm });
    }
    let source = if is_pole_point(spec, zeta) { PoleSource::FormFactorPole } else { PoleSource::Resonance };
    let r = ScatteringResidue { zeta, s_minus1, s_minus2, radius, source };
    let ratio = r.order_two_ratio();
    if ratio > SIMPLE_POLE_RATIO {
        return Err(Error::HigherOrderPole { zeta, ratio });
    }
    Ok(r)
}

/// Residue of `S_K` at `ζ` with the default contour radius, given the other
/// singular points to keep outside the circle.
pub fn residue_sk(spec: &ModelSpec, zeta: Complex64, others: &[Complex64]) -> Result<ScatteringResidue> {
    residue_sk_with_radius(spec, zeta, contour_radius(spec, zeta, others))
}

/// Residues of `S_K` at every supplied resonance and at every lower point of
/// the pole set where `S_K` actually has a pole.
pub fn all_residues(spec: &ModelSpec, resonances: &[Resonance]) -> Result<Vec<ScatteringResidue>> {
    let mut points: Vec<Complex64> = resonances.iter().map(|r| r.zeta).collect();
    points.extend(spec.lower_poles());
    let mut out = Vec::new();
    for (i, &z) in points.iter().enumerate() {
        let others: Vec<Complex64> = points.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, w)| *w).collect();
        match residue_sk(spec, z, &others) {
            Ok(r) => out.push(r),
            Err(Error::NoPole { .. }) if i >= resonances.len() => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// `(Σ S₋₁/(z - ζ), S_K(z) - Σ S₋₁/(z - ζ))`.
pub fn laurent_split(spec: &ModelSpec, residues: &[ScatteringResidue], z: Complex64) -> Result<(CMat, CMat)> {
    let n = spec.n();
    let mut main = CMat::zeros(n, n);
    for r in residues {
        main.axpy((z - r.zeta).inv(), &r.s_minus1);
    }
    let holo = s_k(spec, z, Side::CutPlane)?.sub(&main);
    Ok((main, holo))
}

/// `(1/2πi) ∮ H_K(z) dz` around `ζ` on a circle of radius `radius`.
pub fn holomorphic_part_contour(
    spec: &ModelSpec,
    residues: &[ScatteringResidue],
    zeta: Complex64,
    radius: f64,
) -> Result<CMat> {
    circle_moment(zeta, radius, RESIDUE_NODES, 0, |z| Ok(laurent_split(spec, residues, z)?.1))
}

/// Largest principal angle between `ker L₊(ζ)` and the range of the residue
/// of `S_E` at `ζ`.
pub fn kernel_residue_angle(spec: &ModelSpec, res: &Resonance) -> Result<f64> {
    let residue = circle_moment(res.zeta, res.residue_radius, RESIDUE_NODES, 0, |z| {
        let lp = livsic_matrix(spec, z, SheetTag::PlusContinued)?;
        let lm = livsic_matrix(spec, z, SheetTag::MinusContinued)?;
        Ok(lp.inverse()?.mul(&lm))
    })?;
    let range = residue.svd().range(1e-8);
    Ok(max_principal_angle(&range, &res.kernel_basis))
}

#[derive(Clone, Debug)]
pub struct NegativeAxisScan {
    /// `min σ_min(L₊(λ - i0))` over the sampled `λ`.
    pub min_sigma_lower: f64,
    pub argmin: f64,
    pub samples: usize,
    /// Eigenvalues of the full Hamiltonian below 0, i.e. points where
    /// `L₊(λ + i0)` is singular.
    pub bound_states: Vec<BoundState>,
}

/// Samples `λ ∈ [lo, hi] ⊂ (-∞, 0)` logarithmically in `|λ|` and reports the
/// smallest singular value of the lower boundary value of `L₊`, together
/// with the eigenvalues of the full Hamiltonian on the negative half line.
pub fn negative_axis_scan(spec: &ModelSpec, lo: f64, hi: f64, samples: usize) -> Result<NegativeAxisScan> {
    if !(lo < hi && hi < 0.0) || samples < 2 {
        return Err(Error::invalid("scan interval must satisfy lo < hi < 0"));
    }
    let (a, b) = ((-hi).ln(), (-lo).ln());
    let mut best = (f64::INFINITY, hi);
    for k in 0..samples {
        let l = -(a + (b - a) * k as f64 / (samples - 1) as f64).exp();
        let s = livsic_matrix(spec, Complex64::new(l, 0.0), SheetTag::PlusContinued)?.sigma_min();
        if s < best.0 {
            best = (s, l);
        }
    }
    Ok(NegativeAxisScan { min_sigma_lower: best.0, argmin: best.1, samples, bound_states: bound_states(spec)? })
}

/// `max ‖S_K(z) - I‖` over `samples` points of the lower semicircle of
/// radius `r`.
pub fn deviation_at_radius(spec: &ModelSpec, r: f64, samples: usize) -> Result<f64> {
    let mut worst = 0.0_f64;
    for k in 0..samples {
        let theta = -PI * (k as f64 + 0.5) / samples as f64;
        let z = Complex64::from_polar(r, theta);
        let s = s_k(spec, z, Side::ContinuedMinus)?;
        worst = worst.max(s.sub(&CMat::identity(spec.n())).op_norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets::{scalar, two_level};
    use crate::resonances::{find_resonances, Rect, SearchRegion};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn search(spec: &ModelSpec) -> Vec<Resonance> {
        find_resonances(spec, &SearchRegion::new(Rect::new(-3.0, 5.0, -3.0, -1e-6))).unwrap()
    }

    #[test]
    fn decoupled_is_identity() {
        let s = scalar(0.0);
        assert_eq!(s_e(&s, 2.0).unwrap(), CMat::identity(1));
        for (z, side) in [
            (c(1.0, 0.0), Side::OnAxis),
            (c(1.0, -1.0), Side::ContinuedMinus),
            (c(-1.0, 0.0), Side::BoundaryPlus),
            (c(-1.0, 0.0), Side::BoundaryMinus),
        ] {
            assert!(s_k(&s, z, side).unwrap().sub(&CMat::identity(1)).max_abs() <= 1e-14);
        }
        assert!(matches!(residue_sk(&s, c(1.0, -0.5), &[]), Err(Error::NoPole { .. })));
    }

    #[test]
    fn s_e_has_unimodular_determinant() {
        for spec in [scalar(0.5), two_level(0.5)] {
            for l in [0.3, 1.0, 2.5, 7.0] {
                let s = s_e(&spec, l).unwrap();
                assert!((s.det().norm() - 1.0).abs() <= 1e-10);
                let l_ = c(l, 0.0);
                let inv = livsic_matrix(&spec, l_, SheetTag::MinusContinued)
                    .unwrap()
                    .inverse()
                    .unwrap()
                    .mul(&livsic_matrix(&spec, l_, SheetTag::PlusContinued).unwrap());
                assert!(inv.is_finite());
                assert!(inv.mul(&s).sub(&CMat::identity(spec.n())).max_abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unitarity_on_the_half_line() {
        for spec in [scalar(0.5), scalar(0.05), two_level(0.5)] {
            for k in 0..200 {
                let l = 0.05 + (50.0 - 0.05) * k as f64 / 199.0;
                assert!(unitarity_defect(&spec, l).unwrap() <= 1e-9);
            }
        }
        let s = s_k(&scalar(0.5), c(1.0, 0.0), Side::OnAxis).unwrap();
        assert!((s[(0, 0)].norm() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn negative_axis_boundary_values() {
        for spec in [scalar(0.5), two_level(0.5)] {
            let up = s_k(&spec, c(-1.0, 0.0), Side::BoundaryPlus).unwrap();
            let down = s_k(&spec, c(-1.0, 0.0), Side::BoundaryMinus).unwrap();
            assert!(up.is_finite() && down.is_finite());
            assert!(up.inverse().unwrap().sub(&down.adjoint()).max_abs() <= 1e-10);
            // the boundary values are limits of the continued function
            let below = s_k(&spec, c(-1.0, -1e-9), Side::ContinuedMinus).unwrap();
            assert!(below.sub(&down).max_abs() < 1e-7);
            let above = s_k(&spec, c(-1.0, 1e-9), Side::CutPlane).unwrap();
            assert!(above.sub(&up).max_abs() < 1e-7);
        }
    }

    #[test]
    fn side_preconditions() {
        let s = scalar(0.5);
        assert!(s_k(&s, c(-1.0, 0.0), Side::OnAxis).is_err());
        assert!(s_k(&s, c(1.0, 0.5), Side::ContinuedMinus).is_err());
        assert!(s_k(&s, c(1.0, 0.0), Side::BoundaryPlus).is_err());
        assert!(s_k(&s, c(-1.0, 0.0), Side::CutPlane).is_err());
    }

    #[test]
    fn intertwining() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spec = two_level(0.5);
        for _ in 0..20 {
            let l = rng.gen_range(0.05..20.0);
            let f = [c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)), c(rng.gen_range(-1.0..1.0), 0.3)];
            assert!(intertwining_defect(&spec, l, &f).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn reflection_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for spec in [scalar(0.5), two_level(0.5)] {
            for _ in 0..20 {
                let z = c(rng.gen_range(0.1..4.0), rng.gen_range(-0.9..-0.05));
                assert!(reflection_defect(&spec, z).unwrap() <= 1e-9);
            }
        }
    }

    #[test]
    fn bounded_at_infinity() {
        let spec = scalar(0.5);
        let d1 = deviation_at_radius(&spec, 1e2, 64).unwrap();
        let d2 = deviation_at_radius(&spec, 1e3, 64).unwrap();
        assert!(d2 <= 1e-2 && d2 < d1, "{d1} {d2}");
    }

    #[test]
    fn resonance_residue_matches_chain_rule() {
        for spec in [scalar(0.5), two_level(0.5)] {
            let rs = search(&spec);
            let zs: Vec<Complex64> = rs.iter().map(|r| r.zeta).collect();
            for r in &rs {
                let others: Vec<Complex64> = zs.iter().copied().filter(|z| *z != r.zeta).collect();
                let res = residue_sk(&spec, r.zeta, &others).unwrap();
                assert_eq!(res.source, PoleSource::Resonance);
                let m = spec.eval_m(r.zeta).unwrap();
                let ms = spec.eval_m_star(r.zeta).unwrap();
                let chain = m.mul(&r.residue_linv).mul(&ms).scale(-TWO_PI_I);
                assert!(res.s_minus1.sub(&chain).max_abs() <= 1e-8 * (1.0 + chain.max_abs()));
                assert!(res.order_two_ratio() <= SIMPLE_POLE_RATIO);
                assert!(res.s_minus1.op_norm() > 1e-10);
            }
        }
    }

    #[test]
    fn holomorphic_part_has_no_residues() {
        for spec in [scalar(0.5), two_level(0.5)] {
            let rs = search(&spec);
            let residues = all_residues(&spec, &rs).unwrap();
            for r in &residues {
                let i = holomorphic_part_contour(&spec, &residues, r.zeta, r.radius).unwrap();
                assert!(i.max_abs() <= 1e-8, "{}: {:e}", r.zeta, i.max_abs());
            }
        }
    }

    #[test]
    fn holomorphic_part_stays_bounded_near_a_resonance() {
        let spec = scalar(0.5);
        let rs = search(&spec);
        let residues = all_residues(&spec, &rs).unwrap();
        let z0 = rs.iter().find(|r| r.zeta.re > 1.0).unwrap().zeta;
        let (_, h) = laurent_split(&spec, &residues, z0 - c(0.0, 0.1)).unwrap();
        assert!(h.is_finite());
        let d1 = 1e-3;
        let d2 = 1e-5;
        let s1 = s_k(&spec, z0 + c(0.0, -d1), Side::CutPlane).unwrap().op_norm();
        let s2 = s_k(&spec, z0 + c(0.0, -d2), Side::CutPlane).unwrap().op_norm();
        let slope = (s2.ln() - s1.ln()) / (d2.ln() - d1.ln());
        assert!((slope + 1.0).abs() <= 0.05, "{slope}");
        let (main, _) = laurent_split(&spec, &residues, c(0.0, -1e4)).unwrap();
        let (main2, _) = laurent_split(&spec, &residues, c(0.0, -1e5)).unwrap();
        assert!((main.op_norm() / main2.op_norm() - 10.0).abs() < 0.1);
    }

    #[test]
    fn proposition_one() {
        for spec in [scalar(0.5), two_level(0.5)] {
            for r in &search(&spec) {
                assert!(kernel_residue_angle(&spec, r).unwrap() <= 1e-8);
            }
        }
    }

    #[test]
    fn negative_axis_exclusion() {
        for spec in [scalar(0.5), scalar(0.05), two_level(0.5)] {
            let scan = negative_axis_scan(&spec, -50.0, -0.01, 400).unwrap();
            assert!(scan.min_sigma_lower > 1e-6, "{}", scan.min_sigma_lower);
            let strip = SearchRegion::new(Rect::new(-50.0, -0.01, -0.05, -1e-8));
            assert!(find_resonances(&spec, &strip).unwrap().is_empty());
        }
    }

    #[test]
    fn scan_reports_the_bound_state() {
        let scan = negative_axis_scan(&scalar(0.5), -50.0, -0.01, 100).unwrap();
        assert_eq!(scan.bound_states.len(), 1);
        let e = scan.bound_states[0].energy;
        // S_K(λ + i0) blows up there
        let s = s_k(&scalar(0.5), c(e * (1.0 + 1e-9), 0.0), Side::BoundaryPlus).unwrap();
        assert!(s.op_norm() > 1e3);
    }
}
