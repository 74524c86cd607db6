//! Brute-force cross-checks: `Φ` by adaptive quadrature of its defining
//! integral, boundary values as `δ → 0⁺` limits, and the partial resolvent
//! of a discretized Hamiltonian.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::model::ModelSpec;
use crate::quadrature::{integrate_to_infinity, QuadOptions};

/// Closest admissible distance of `z` from `[0, ∞)` for [`phi_quadrature`].
pub const MIN_CUT_DISTANCE: f64 = 1e-3;
/// Matrices up to this size are solved densely.
pub const DENSE_LIMIT: usize = 600;

fn cut_distance(z: Complex64) -> f64 {
    if z.re >= 0.0 {
        z.im.abs()
    } else {
        z.norm()
    }
}

/// `Φ(z) = ∫₀^∞ G(λ)/(z - λ) dλ` by adaptive Gauss–Kronrod quadrature.
pub fn phi_quadrature(spec: &ModelSpec, z: Complex64) -> Result<CMat> {
    phi_quadrature_with(spec, z, QuadOptions::new(1e-15, 1e-12))
}

pub fn phi_quadrature_with(spec: &ModelSpec, z: Complex64, opts: QuadOptions) -> Result<CMat> {
    if cut_distance(z) < MIN_CUT_DISTANCE {
        return Err(Error::invalid("phi_quadrature needs dist(z, [0, inf)) >= 1e-3"));
    }
    let n = spec.n();
    let mut breaks: Vec<f64> = spec.pole_set().iter().map(|p| p.re).filter(|x| *x > 0.0).collect();
    if z.re > 0.0 {
        breaks.push(z.re);
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let r = integrate_to_infinity(
        |l| {
            let g = spec.eval_g(Complex64::new(l, 0.0))?;
            let d = (z - l).inv();
            Ok(g.as_slice().iter().map(|x| x * d).collect())
        },
        0.0,
        1.0,
        &breaks,
        opts,
    )
    .map_err(|e| match e {
        Error::NoConvergence { .. } => Error::NoConvergence { what: "phi quadrature" },
        other => other,
    })?;
    Ok(CMat::from_row_major(n, n, r.value))
}

/// `Φ₊(λ) = lim_{δ↓0} Φ(λ + iδ)` from quadrature at `δ, δ/2, δ/4`,
/// Richardson-extrapolated.
pub fn phi_plus_limit(spec: &ModelSpec, lambda: f64, delta: f64) -> Result<CMat> {
    if !(delta >= 4.0 * MIN_CUT_DISTANCE) {
        return Err(Error::invalid("delta too small for the quadrature oracle"));
    }
    let opts = QuadOptions::new(1e-15, 1e-13);
    let f: Vec<CMat> = [delta, delta / 2.0, delta / 4.0]
        .iter()
        .map(|d| phi_quadrature_with(spec, Complex64::new(lambda, *d), opts))
        .collect::<Result<_>>()?;
    // two Richardson sweeps for an expansion in powers of δ
    let r1 = f[1].scale_real(2.0).sub(&f[0]);
    let r2 = f[2].scale_real(2.0).sub(&f[1]);
    Ok(r2.scale_real(4.0).sub(&r1).scale_real(1.0 / 3.0))
}

/// Midpoint nodes and weights on `[0, cutoff]`.
pub fn midpoint_nodes(count: usize, cutoff: f64) -> (Vec<f64>, f64) {
    let h = cutoff / count as f64;
    ((0..count).map(|i| (i as f64 + 0.5) * h).collect(), h)
}

/// The Hermitian matrix `diag(λ_i ⊗ I_n) ⊕ A + Γ_N + Γ_N*` on
/// `ℂ^{N·n} ⊕ ℂ^n`, with node `i` coupled to the discrete block by
/// `√w_i M(λ_i)`.
pub fn discretized_hamiltonian(spec: &ModelSpec, count: usize, cutoff: f64) -> Result<CMat> {
    let n = spec.n();
    let (nodes, h) = midpoint_nodes(count, cutoff);
    let size = count * n + n;
    let mut hm = CMat::zeros(size, size);
    let off = count * n;
    for (i, &l) in nodes.iter().enumerate() {
        let m = spec.eval_m(Complex64::new(l, 0.0))?.scale_real(h.sqrt());
        for r in 0..n {
            hm[(i * n + r, i * n + r)] = Complex64::new(l, 0.0);
            for c in 0..n {
                hm[(i * n + r, off + c)] = m[(r, c)];
                hm[(off + c, i * n + r)] = m[(r, c)].conj();
            }
        }
    }
    for (j, a) in spec.a().iter().enumerate() {
        hm[(off + j, off + j)] = Complex64::new(*a, 0.0);
    }
    Ok(hm)
}

/// Lower-right `n×n` block of `(z - H_N)⁻¹`. Small systems are solved
/// densely; larger ones through the Schur complement of the diagonal
/// continuum block.
pub fn discretized_partial_resolvent(spec: &ModelSpec, z: Complex64, count: usize, cutoff: f64) -> Result<CMat> {
    if z.im == 0.0 {
        return Err(Error::invalid("partial resolvent needs Im z != 0"));
    }
    if count < 100 || !(cutoff > 0.0) {
        return Err(Error::invalid("need at least 100 nodes and a positive cutoff"));
    }
    let n = spec.n();
    if count * n + n <= DENSE_LIMIT {
        let hm = discretized_hamiltonian(spec, count, cutoff)?;
        let size = hm.rows();
        let zh = CMat::identity(size).scale(z).sub(&hm);
        let lu = zh.lu();
        if lu.is_exactly_singular() {
            return Err(Error::NearSingular { sigma_min: 0.0 });
        }
        let off = count * n;
        let cols: Vec<Vec<Complex64>> = (0..n)
            .map(|c| {
                let mut e = vec![Complex64::new(0.0, 0.0); size];
                e[off + c] = Complex64::new(1.0, 0.0);
                lu.solve(&e)[off..].to_vec()
            })
            .collect();
        return Ok(CMat::from_columns(n, &cols));
    }
    // z - A - Σ_i w_i M(λ_i)* M(λ_i) / (z - λ_i)
    let (nodes, h) = midpoint_nodes(count, cutoff);
    let mut schur = CMat::identity(n).scale(z).sub(&CMat::from_real_diag(spec.a()));
    for &l in &nodes {
        let g = spec.eval_g(Complex64::new(l, 0.0))?;
        schur.axpy(-(h / (z - l)), &g);
    }
    schur.inverse()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::livsic::l_inverse;
    use crate::model::presets::{scalar, two_level};
    use crate::stieltjes::{phi, SheetTag};
    use core::f64::consts::PI;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rel(a: &CMat, b: &CMat) -> f64 {
        a.sub(b).frobenius_norm() / b.frobenius_norm()
    }

    #[test]
    fn phi_at_minus_one() {
        let v = phi_quadrature(&scalar(1.0), c(-1.0, 0.0)).unwrap()[(0, 0)];
        assert!((v.re + (PI - 1.0) / 4.0).abs() < 1e-10 && v.im.abs() < 1e-12, "{v}");
    }

    #[test]
    fn agrees_with_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for spec in [scalar(0.5), two_level(0.5)] {
            for _ in 0..20 {
                let z = loop {
                    let z = c(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
                    if cut_distance(z) > 0.05 && spec.distance_to_poles(z) > 0.05 {
                        break z;
                    }
                };
                let q = phi_quadrature(&spec, z).unwrap();
                let p = phi(&spec, z, SheetTag::FirstSheet).unwrap();
                assert!(rel(&q, &p) <= 1e-9, "z = {z}: {:e}", rel(&q, &p));
            }
        }
    }

    #[test]
    fn far_decay() {
        let spec = two_level(0.5);
        let z = c(0.0, 1e6);
        let q = phi_quadrature(&spec, z).unwrap();
        let g_int = integrate_to_infinity(
            |l| Ok(spec.eval_g(c(l, 0.0))?.as_slice().to_vec()),
            0.0,
            1.0,
            &[],
            QuadOptions::default(),
        )
        .unwrap();
        let gi = CMat::from_row_major(2, 2, g_int.value);
        assert!(q.op_norm() <= 2.0 * gi.op_norm() / 1e6);
    }

    #[test]
    fn near_cut_is_rejected() {
        assert!(phi_quadrature(&scalar(0.5), c(1.0, 1e-4)).is_err());
        assert!(phi_quadrature(&scalar(0.5), c(-1e-4, 0.0)).is_err());
    }

    #[test]
    fn boundary_limit_matches_plus_sheet() {
        let spec = scalar(1.0);
        let lim = phi_plus_limit(&spec, 1.0, 0.01).unwrap()[(0, 0)];
        let exact = c((PI + 1.0) / 4.0, -PI / 4.0);
        assert!((lim - exact).norm() < 1e-5, "{lim}");
        let closed = phi(&spec, c(1.0, 0.0), SheetTag::PlusContinued).unwrap()[(0, 0)];
        assert!((closed - exact).norm() < 1e-13);
    }

    #[test]
    fn decoupled_resolvent_is_exact() {
        let spec = two_level(0.0);
        let z = c(2.0, 1.0);
        let r = discretized_partial_resolvent(&spec, z, 200, 50.0).unwrap();
        let e = CMat::from_diag(&[(z - 1.0).inv(), (z - 3.0).inv()]);
        assert!(r.sub(&e).max_abs() < 1e-15);
    }

    #[test]
    fn hamiltonian_is_hermitian_and_resolvent_bounded() {
        let spec = two_level(0.5);
        let hm = discretized_hamiltonian(&spec, 120, 30.0).unwrap();
        assert_eq!(hm.hermitian_defect(), 0.0);
        for z in [c(2.0, 1.0), c(-1.0, -0.3), c(0.5, 0.01)] {
            let r = discretized_partial_resolvent(&spec, z, 120, 30.0).unwrap();
            assert!(r.op_norm() <= 1.0 / z.im.abs() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn dense_and_schur_routes_agree() {
        let spec = two_level(0.5);
        let z = c(2.0, 1.0);
        let dense = discretized_partial_resolvent(&spec, z, 200, 40.0).unwrap();
        let (nodes, h) = midpoint_nodes(200, 40.0);
        let mut s = CMat::identity(2).scale(z).sub(&CMat::from_real_diag(spec.a()));
        for l in nodes {
            s.axpy(-(h / (z - l)), &spec.eval_g(c(l, 0.0)).unwrap());
        }
        assert!(rel(&dense, &s.inverse().unwrap()) < 1e-12);
    }

    #[test]
    fn partial_resolvent_converges() {
        let spec = scalar(0.5);
        let z = c(2.0, 1.0);
        let exact = l_inverse(&spec, z, SheetTag::FirstSheet).unwrap();
        let e1 = rel(&discretized_partial_resolvent(&spec, z, 4000, 100.0).unwrap(), &exact);
        assert!(e1 <= 1e-2);
        // N → 2N at fixed cutoff: midpoint error falls by about 4
        let e2 = rel(&discretized_partial_resolvent(&spec, z, 8000, 100.0).unwrap(), &exact);
        assert!(e2 <= e1 / 2.0, "{e1:e} {e2:e}");
        let order = (e1 / e2).log2();
        assert!(order >= 1.0, "{order}");
    }
}
