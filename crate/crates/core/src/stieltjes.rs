//! Closed-form Cauchy–Stieltjes transforms over `[0, ∞)` of products of
//! partial-fraction terms, and the matrix function `Φ` assembled from them.
//!
//! The integrand `1/((z-λ)(λ-p)^j (λ-q)^k)` is split into partial fractions
//! by Taylor expansion at each pole. Terms of order ≥ 2 integrate to powers;
//! the order-1 terms combine into `-Σ c_w Log(-w)`. Only `Log(-z)` depends
//! on the sheet, which makes the continuations explicit.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;
use num_complex::Complex64;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::model::{ModelSpec, POLE_TOLERANCE};

/// Separation below which two singular points of the kernel count as
/// confluent.
pub const CONFLUENCE_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SheetTag {
    /// `Φ` itself, holomorphic off `[0, ∞)`.
    FirstSheet,
    /// The function that equals `Φ` on the upper half plane, continued
    /// across the positive half line; cut along `(-∞, 0]`. At real `λ > 0`
    /// it gives `Φ(λ + i0)`, at real `λ < 0` the value reached from below.
    PlusContinued,
    /// Mirror image of `PlusContinued`: equals `Φ` on the lower half plane.
    MinusContinued,
}

/// `Log(-z)` on the requested sheet.
pub fn log_minus(z: Complex64, sheet: SheetTag) -> Result<Complex64> {
    let r = z.norm();
    if r == 0.0 {
        return Err(Error::OnBranchCut { z });
    }
    let on_negative_axis = z.im == 0.0 && z.re < 0.0;
    let theta = match sheet {
        SheetTag::FirstSheet => {
            if z.im == 0.0 && z.re > 0.0 {
                return Err(Error::OnBranchCut { z });
            }
            return Ok((-z).ln());
        }
        SheetTag::PlusContinued => {
            if on_negative_axis {
                -2.0 * PI
            } else {
                z.arg() - PI
            }
        }
        SheetTag::MinusContinued => {
            if on_negative_axis {
                2.0 * PI
            } else {
                z.arg() + PI
            }
        }
    };
    Ok(Complex64::new(r.ln(), theta))
}

/// Partial-fraction coefficients of `Π_i (λ - w_i)^(-m_i)` (distinct `w_i`):
/// entry `[i][r-1]` multiplies `(λ - w_i)^(-r)`.
fn partial_fractions(poles: &[(Complex64, u32)]) -> Vec<Vec<Complex64>> {
    let mut out = Vec::with_capacity(poles.len());
    for (i, &(wi, mi)) in poles.iter().enumerate() {
        let deg = mi as usize;
        // Taylor series at w_i of the product of the other factors.
        let mut series = vec![Complex64::zero(); deg];
        series[0] = Complex64::new(1.0, 0.0);
        for (l, &(wl, ml)) in poles.iter().enumerate() {
            if l == i {
                continue;
            }
            let d = wi - wl;
            let dinv = d.inv();
            // (d + t)^(-m) = Σ_s (-1)^s C(m+s-1, s) d^(-m-s) t^s
            let mut factor = vec![Complex64::zero(); deg];
            let mut binom = 1.0_f64;
            let mut pw = dinv.powi(ml as i32);
            for (s, slot) in factor.iter_mut().enumerate() {
                if s > 0 {
                    binom *= (ml as f64 + s as f64 - 1.0) / s as f64;
                    pw *= dinv;
                }
                let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
                *slot = pw * (sign * binom);
            }
            let mut prod = vec![Complex64::zero(); deg];
            for (a, &x) in series.iter().enumerate() {
                if x.is_zero() {
                    continue;
                }
                for (b, &y) in factor.iter().enumerate().take(deg - a) {
                    prod[a + b] += x * y;
                }
            }
            series = prod;
        }
        // coefficient of (λ - w_i)^(-r) is the Taylor coefficient of order m_i - r
        let coeffs: Vec<Complex64> = (1..=deg).map(|r| series[deg - r]).collect();
        out.push(coeffs);
    }
    out
}

/// `∫₀^∞ dλ / ((z-λ)(λ-p)^j (λ-q)^k)` on the first sheet.
pub fn cauchy_kernel(p: Complex64, j: u32, q: Complex64, k: u32, z: Complex64) -> Result<Complex64> {
    cauchy_kernel_on(p, j, q, k, z, SheetTag::FirstSheet)
}

/// The kernel with `Log(-z)` taken on `sheet`; analytic in `z` on that
/// sheet's domain.
pub fn cauchy_kernel_on(
    p: Complex64,
    j: u32,
    q: Complex64,
    k: u32,
    z: Complex64,
    sheet: SheetTag,
) -> Result<Complex64> {
    if j + k < 2 {
        return Err(Error::NonConvergent { order: j + k });
    }
    for w in [p, q] {
        if w.im == 0.0 && w.re >= 0.0 {
            return Err(Error::invalid("kernel pole lies on the integration range [0, inf)"));
        }
    }
    let sep = (z - p).norm().min((z - q).norm());
    if sep < CONFLUENCE_TOLERANCE {
        return Err(Error::DegenerateConfluence { separation: sep });
    }
    let lz = log_minus(z, sheet)?;

    // integrand: -(λ-z)^(-1) (λ-p)^(-j) (λ-q)^(-k); a coincident p = q is a
    // single pole of order j + k
    let mut poles: Vec<(Complex64, u32)> = vec![(z, 1)];
    let mut push = |w: Complex64, m: u32| {
        if m == 0 {
            return;
        }
        match poles.iter_mut().skip(1).find(|(x, _)| (*x - w).norm() < CONFLUENCE_TOLERANCE) {
            Some(e) => e.1 += m,
            None => poles.push((w, m)),
        }
    };
    push(p, j);
    push(q, k);
    let coeffs = partial_fractions(&poles);

    let mut acc = Complex64::zero();
    for (idx, (&(w, _), c)) in poles.iter().zip(&coeffs).enumerate() {
        let log_w = if idx == 0 { lz } else { (-w).ln() };
        acc -= c[0] * log_w;
        for (r0, &cr) in c.iter().enumerate().skip(1) {
            let r = r0 as i32 + 1;
            acc += cr * (-w).powi(1 - r) / (r - 1) as f64;
        }
    }
    Ok(-acc)
}

/// `Φ(z) = ∫₀^∞ M(λ)*M(λ)/(z-λ) dλ` on the requested sheet, from the
/// term-pair closed forms.
pub fn phi(spec: &ModelSpec, z: Complex64, sheet: SheetTag) -> Result<CMat> {
    check_off_poles(spec, z)?;
    let n = spec.n();
    let m = spec.form_factor();
    let ms = spec.form_factor_adjoint();
    let mut out = CMat::zeros(n, n);
    if m.is_zero() {
        // no coupling: Φ vanishes identically and has no cut
        return Ok(out);
    }
    for s in ms.terms() {
        for t in m.terms() {
            let kern = cauchy_kernel_on(s.pole, s.order, t.pole, t.order, z, sheet)?;
            out.axpy(kern, &s.coeff.mul(&t.coeff));
        }
    }
    Ok(out)
}

/// Principal value of the defining integral at `λ > 0`, i.e. the Hermitian
/// part of the boundary value: `Φ(λ ± i0) = PV(λ) ∓ iπ G(λ)`.
pub fn phi_principal_value(spec: &ModelSpec, lambda: f64) -> Result<CMat> {
    let z = Complex64::new(lambda, 0.0);
    let plus = phi(spec, z, SheetTag::PlusContinued)?;
    let minus = phi(spec, z, SheetTag::MinusContinued)?;
    Ok(plus.add(&minus).scale_real(0.5))
}

pub(crate) fn check_off_poles(spec: &ModelSpec, z: Complex64) -> Result<()> {
    for p in spec.pole_set() {
        let d = (z - p).norm();
        if d < POLE_TOLERANCE {
            return Err(Error::PoleHit { z, pole: p, distance: d });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets::{scalar, two_level};
    use crate::quadrature::{integrate_to_infinity, QuadOptions};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn kernel_by_quadrature(p: Complex64, j: u32, q: Complex64, k: u32, z: Complex64) -> Complex64 {
        let f = |l: f64| {
            let lam = c(l, 0.0);
            Ok(vec![((z - lam) * (lam - p).powi(j as i32) * (lam - q).powi(k as i32)).inv()])
        };
        integrate_to_infinity(f, 0.0, 1.0, &[1.0], QuadOptions::new(1e-15, 1e-13)).unwrap().value[0]
    }

    #[test]
    fn kernel_matches_quadrature() {
        let cases = [
            (c(0.0, -1.0), 1, c(0.0, 1.0), 1, c(-1.0, 1.0)),
            (c(0.0, -1.0), 2, c(0.0, 1.0), 2, c(-1.0, 0.0)),
            (c(0.5, -1.5), 3, c(-2.0, 0.3), 1, c(2.0, 0.7)),
            (c(0.0, 1.0), 2, c(0.0, 1.0), 2, c(1.0, -0.5)),
            (c(1.0, -0.2), 4, c(1.0, 0.2), 2, c(0.5, 0.5)),
        ];
        for (p, j, q, k, z) in cases {
            let closed = cauchy_kernel(p, j, q, k, z).unwrap();
            let quad = kernel_by_quadrature(p, j, q, k, z);
            let rel = (closed - quad).norm() / quad.norm();
            assert!(rel <= 1e-10, "{p} {j} {q} {k} {z}: {closed} vs {quad}");
        }
    }

    #[test]
    fn kernel_errors() {
        assert!(matches!(
            cauchy_kernel(c(0.0, -1.0), 1, c(0.0, 1.0), 0, c(-1.0, 0.0)),
            Err(Error::NonConvergent { order: 1 })
        ));
        assert!(matches!(
            cauchy_kernel(c(0.0, -1.0), 2, c(0.0, 1.0), 2, c(0.0, -1.0 + 1e-12)),
            Err(Error::DegenerateConfluence { .. })
        ));
        assert!(matches!(cauchy_kernel(c(0.0, -1.0), 2, c(0.0, 1.0), 2, c(2.0, 0.0)), Err(Error::OnBranchCut { .. })));
    }

    #[test]
    fn log_branches() {
        let w = c(-1.0, 0.001);
        let l = log_minus(w, SheetTag::FirstSheet).unwrap();
        assert!((l - c(1.0, -0.001).ln()).norm() < 1e-15);
        assert!((l - c(0.0, -0.001)).norm() < 1e-6);
        let lp = log_minus(c(2.0, 0.0), SheetTag::PlusContinued).unwrap();
        assert!((lp - c(2f64.ln(), -PI)).norm() < 1e-15);
        let lm = log_minus(c(2.0, 0.0), SheetTag::MinusContinued).unwrap();
        assert!((lm - c(2f64.ln(), PI)).norm() < 1e-15);
        // continuity of the continued sheets across the positive axis
        for (s, lo, hi) in [(SheetTag::PlusContinued, -1e-12, 1e-12), (SheetTag::MinusContinued, -1e-12, 1e-12)] {
            let a = log_minus(c(3.0, lo), s).unwrap();
            let b = log_minus(c(3.0, hi), s).unwrap();
            assert!((a - b).norm() < 1e-11);
        }
        // the lower-side value on the negative axis
        let ln = log_minus(c(-2.0, 0.0), SheetTag::PlusContinued).unwrap();
        let below = log_minus(c(-2.0, -1e-13), SheetTag::PlusContinued).unwrap();
        assert!((ln - below).norm() < 1e-12);
    }

    #[test]
    fn phi_at_minus_one() {
        let v = phi(&scalar(1.0), c(-1.0, 0.0), SheetTag::FirstSheet).unwrap()[(0, 0)];
        assert!((v - c(-(PI - 1.0) / 4.0, 0.0)).norm() <= 1e-14, "{v}");
    }

    #[test]
    fn boundary_value_at_one() {
        // Φ(1 + i0) = (π + 1)/4 - iπ/4, from an ε-limit Richardson oracle
        let v = phi(&scalar(1.0), c(1.0, 0.0), SheetTag::PlusContinued).unwrap()[(0, 0)];
        assert!((v - c((PI + 1.0) / 4.0, -PI / 4.0)).norm() <= 1e-14, "{v}");
        let w = phi(&scalar(1.0), c(1.0, 0.0), SheetTag::MinusContinued).unwrap()[(0, 0)];
        assert!((w - v - c(0.0, PI / 2.0)).norm() <= 1e-14);
    }

    #[test]
    fn sheets_agree_with_first_sheet_on_their_half_planes() {
        let spec = two_level(0.8);
        for z in [c(1.0, 0.5), c(-3.0, 2.0), c(10.0, 0.01)] {
            let f = phi(&spec, z, SheetTag::FirstSheet).unwrap();
            let p = phi(&spec, z, SheetTag::PlusContinued).unwrap();
            assert!(f.sub(&p).max_abs() < 1e-13);
            let fz = phi(&spec, z.conj(), SheetTag::FirstSheet).unwrap();
            let mz = phi(&spec, z.conj(), SheetTag::MinusContinued).unwrap();
            assert!(fz.sub(&mz).max_abs() < 1e-13);
        }
    }

    #[test]
    fn continued_sheet_differs_by_jump_density() {
        let spec = two_level(0.8);
        for z in [c(1.0, -0.5), c(-3.0, -2.0), c(0.2, -4.0)] {
            let f = phi(&spec, z, SheetTag::FirstSheet).unwrap();
            let p = phi(&spec, z, SheetTag::PlusContinued).unwrap();
            let g = spec.eval_g(z).unwrap();
            assert!(p.sub(&f).add(&g.scale(c(0.0, 2.0 * PI))).max_abs() < 1e-13);
        }
    }

    #[test]
    fn jump_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for spec in [scalar(1.0), two_level(1.0)] {
            for _ in 0..50 {
                let l = rng.gen_range(0.1..50.0);
                let z = c(l, 0.0);
                let plus = phi(&spec, z, SheetTag::PlusContinued).unwrap();
                let minus = phi(&spec, z, SheetTag::MinusContinued).unwrap();
                let g = spec.eval_g(z).unwrap();
                let defect = minus.sub(&plus).sub(&g.scale(c(0.0, 2.0 * PI))).max_abs();
                assert!(defect <= 1e-11, "λ = {l}: {defect:e}");
            }
        }
    }

    #[test]
    fn plemelj_imaginary_part() {
        let spec = scalar(1.0);
        for l in [0.5, 1.0, 3.0] {
            let z = c(l, 0.0);
            let plus = phi(&spec, z, SheetTag::PlusContinued).unwrap();
            let pv = phi_principal_value(&spec, l).unwrap();
            let g = spec.eval_g(z).unwrap();
            assert!(plus.sub(&pv).add(&g.scale(c(0.0, PI))).max_abs() < 1e-14);
            assert!(pv.hermitian_defect() < 1e-14);
        }
    }

    #[test]
    fn schwarz_reflection() {
        let spec = two_level(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let z = c(rng.gen_range(-20.0..20.0), rng.gen_range(0.05..20.0));
            let a = phi(&spec, z.conj(), SheetTag::FirstSheet).unwrap();
            let b = phi(&spec, z, SheetTag::FirstSheet).unwrap().adjoint();
            assert!(a.sub(&b).max_abs() <= 1e-12 * (1.0 + b.max_abs()));
        }
    }

    #[test]
    fn decay_like_inverse_distance() {
        let spec = scalar(1.0);
        let total = PI / 4.0; // ∫₀^∞ (1+λ²)^(-2) dλ
        for r in [1e3, 1e4, 1e6] {
            for th in [0.5, 1.5, 2.5, -0.5, -2.5] {
                let z = Complex64::from_polar(r, th);
                let v = phi(&spec, z, SheetTag::FirstSheet).unwrap().op_norm();
                assert!(v * r <= 2.0 * total, "|z| = {r}: {v}");
            }
        }
    }

    #[test]
    fn pole_hit() {
        assert!(matches!(phi(&scalar(1.0), c(0.0, 1.0), SheetTag::FirstSheet), Err(Error::PoleHit { .. })));
    }
}
