//! Problem instances: the eigenvalues of the discrete block, the rational
//! form factor and the coupling constant, plus checks of the standing
//! assumptions on them.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::CMat;

/// Absolute distance below which an evaluation point counts as sitting on a
/// pole of the form factor.
pub const POLE_TOLERANCE: f64 = 1e-13;

/// One partial-fraction term `coeff · (z - pole)^(-order)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalTerm {
    pub pole: Complex64,
    pub order: u32,
    pub coeff: CMat,
}

impl RationalTerm {
    pub fn new(pole: Complex64, order: u32, coeff: CMat) -> Self {
        Self { pole, order, coeff }
    }
}

/// `z ↦ Σ_t coeff_t (z - pole_t)^(-order_t)`, an m×n matrix function that
/// vanishes at infinity.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalMatrixFunction {
    dim_out: usize,
    dim_in: usize,
    terms: Vec<RationalTerm>,
}

impl RationalMatrixFunction {
    /// Checks shapes and orders only; the analytic assumptions are left to
    /// [`validate_model`] so that invalid inputs can still be reported on.
    pub fn new(dim_out: usize, dim_in: usize, terms: Vec<RationalTerm>) -> Result<Self> {
        for (i, t) in terms.iter().enumerate() {
            if t.coeff.rows() != dim_out || t.coeff.cols() != dim_in {
                return Err(Error::invalid(format!(
                    "term {i}: coefficient is {}x{}, expected {dim_out}x{dim_in}",
                    t.coeff.rows(),
                    t.coeff.cols()
                )));
            }
            if t.order == 0 {
                return Err(Error::invalid(format!("term {i}: order must be at least 1")));
            }
            if !(t.pole.re.is_finite() && t.pole.im.is_finite()) || !t.coeff.is_finite() {
                return Err(Error::invalid(format!("term {i}: non-finite data")));
            }
        }
        Ok(Self { dim_out, dim_in, terms })
    }

    /// Scalar function `c (z - p)^(-k)`.
    pub fn scalar(pole: Complex64, order: u32, c: Complex64) -> Self {
        Self { dim_out: 1, dim_in: 1, terms: vec![RationalTerm::new(pole, order, CMat::from_diag(&[c]))] }
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn terms(&self) -> &[RationalTerm] {
        &self.terms
    }

    pub fn eval(&self, z: Complex64) -> Result<CMat> {
        let mut out = CMat::zeros(self.dim_out, self.dim_in);
        for t in &self.terms {
            let d = z - t.pole;
            let dist = d.norm();
            if dist < POLE_TOLERANCE {
                return Err(Error::PoleHit { z, pole: t.pole, distance: dist });
            }
            out.axpy(d.powi(-(t.order as i32)), &t.coeff);
        }
        Ok(out)
    }

    /// The function `z ↦ M(z̄)*`: each term `(p, k, C)` becomes `(p̄, k, C*)`.
    pub fn conj_adjoint(&self) -> Self {
        let terms = self.terms.iter().map(|t| RationalTerm::new(t.pole.conj(), t.order, t.coeff.adjoint())).collect();
        Self { dim_out: self.dim_in, dim_in: self.dim_out, terms }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let terms = self.terms.iter().map(|t| RationalTerm::new(t.pole, t.order, t.coeff.scale_real(s))).collect();
        Self { dim_out: self.dim_out, dim_in: self.dim_in, terms }
    }

    /// Distinct poles with the largest order attached to each.
    pub fn distinct_poles(&self) -> Vec<(Complex64, u32)> {
        let mut out: Vec<(Complex64, u32)> = Vec::new();
        for t in &self.terms {
            match out.iter_mut().find(|(p, _)| (*p - t.pole).norm() < POLE_TOLERANCE) {
                Some(entry) => entry.1 = entry.1.max(t.order),
                None => out.push((t.pole, t.order)),
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.coeff.max_abs() == 0.0)
    }
}

/// A complete problem instance. The coupling constant has already been
/// folded into the form factor (`M ← εM`), so downstream code never sees ε.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    a: Vec<f64>,
    m: RationalMatrixFunction,
    m_star: RationalMatrixFunction,
    epsilon: f64,
    unscaled: RationalMatrixFunction,
}

impl ModelSpec {
    /// `a` holds the eigenvalues of the discrete block in the basis where it
    /// is diagonal; `m` is the unscaled form factor.
    pub fn new(a: Vec<f64>, m: RationalMatrixFunction, epsilon: f64) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::invalid("the discrete block must have dimension at least 1"));
        }
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(Error::invalid("coupling constant must be a finite non-negative number"));
        }
        if a.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("eigenvalues must be finite"));
        }
        let scaled = m.scaled(epsilon);
        let m_star = scaled.conj_adjoint();
        Ok(Self { a, m: scaled, m_star, epsilon, unscaled: m })
    }

    /// The same instance at another coupling constant.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.a.clone(), self.unscaled.clone(), epsilon)
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Form factor with the coupling constant applied.
    pub fn form_factor(&self) -> &RationalMatrixFunction {
        &self.m
    }

    /// `z ↦ M(z̄)*` with the coupling constant applied.
    pub fn form_factor_adjoint(&self) -> &RationalMatrixFunction {
        &self.m_star
    }

    pub fn unscaled_form_factor(&self) -> &RationalMatrixFunction {
        &self.unscaled
    }

    /// The pole set of the pair `{M(z), M(z̄)*}`, closed under conjugation.
    pub fn pole_set(&self) -> Vec<Complex64> {
        let mut out: Vec<Complex64> = Vec::new();
        for (p, _) in self.unscaled.distinct_poles() {
            for q in [p, p.conj()] {
                if !out.iter().any(|x| (*x - q).norm() < POLE_TOLERANCE) {
                    out.push(q);
                }
            }
        }
        out
    }

    /// Poles of the pair in the open lower half plane.
    pub fn lower_poles(&self) -> Vec<Complex64> {
        self.pole_set().into_iter().filter(|p| p.im < 0.0).collect()
    }

    /// Distance from `z` to the nearest point of the pole set.
    pub fn distance_to_poles(&self, z: Complex64) -> f64 {
        self.pole_set().iter().map(|p| (z - p).norm()).fold(f64::INFINITY, f64::min)
    }

    pub fn eval_m(&self, z: Complex64) -> Result<CMat> {
        eval_m(&self.m, z)
    }

    pub fn eval_m_star(&self, z: Complex64) -> Result<CMat> {
        eval_m(&self.m_star, z)
    }

    /// `G(z) = M(z̄)* M(z)`; on the real axis this is the density of the
    /// sandwiched free spectral measure.
    pub fn eval_g(&self, z: Complex64) -> Result<CMat> {
        Ok(self.m_star.eval(z)?.mul(&self.m.eval(z)?))
    }
}

pub fn eval_m(m: &RationalMatrixFunction, z: Complex64) -> Result<CMat> {
    m.eval(z)
}

pub fn conj_adjoint_fn(m: &RationalMatrixFunction) -> RationalMatrixFunction {
    m.conj_adjoint()
}

pub fn eval_g(spec: &ModelSpec, z: Complex64) -> Result<CMat> {
    spec.eval_g(z)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationItem {
    pub name: &'static str,
    /// The condition on the model being checked.
    pub assumption: &'static str,
    pub passed: bool,
    /// Hard items make a model unusable; soft items are reported only.
    pub hard: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub items: Vec<ValidationItem>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.items.iter().all(|i| i.passed || !i.hard)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ValidationItem> {
        self.items.iter().filter(|i| !i.passed)
    }

    pub fn item(&self, name: &str) -> Option<&ValidationItem> {
        self.items.iter().find(|i| i.name == name)
    }
}

/// Largest acceptable condition number of `M(z)` at the sampled points.
const MAX_CONDITION: f64 = 1e12;
const INVERTIBILITY_SAMPLES: usize = 50;

/// Runs every checkable standing assumption and reports on each. Never
/// fails: an unusable model is a report with failing hard items. Absence of
/// real eigenvalues of the full Hamiltonian is not claimed here; the
/// negative-axis scan in `scattering` covers it.
pub fn validate_model(spec: &ModelSpec) -> ValidationReport {
    let mut items = Vec::new();
    let m = spec.unscaled_form_factor();
    let n = spec.n();

    let square = m.dim_out() == n && m.dim_in() == n;
    items.push(ValidationItem {
        name: "square-dimensions",
        assumption: "M maps E to E",
        passed: square,
        hard: true,
        detail: format!("dim E = {n}, M is {}x{}", m.dim_out(), m.dim_in()),
    });

    let min_a = spec.a().iter().copied().fold(f64::INFINITY, f64::min);
    items.push(ValidationItem {
        name: "positive-eigenvalues",
        assumption: "A > 0",
        passed: min_a > 0.0,
        hard: true,
        detail: format!("min eigenvalue {min_a}"),
    });

    let real_poles: Vec<Complex64> =
        m.distinct_poles().iter().filter(|(p, _)| p.im.abs() <= POLE_TOLERANCE).map(|(p, _)| *p).collect();
    items.push(ValidationItem {
        name: "no-real-poles",
        assumption: "poles of M off the real axis",
        passed: real_poles.is_empty(),
        hard: true,
        detail: if real_poles.is_empty() {
            String::from("all poles off the real axis")
        } else {
            format!("poles on the real axis: {real_poles:?}")
        },
    });

    let simple: Vec<Complex64> = m.distinct_poles().iter().filter(|(_, k)| *k < 2).map(|(p, _)| *p).collect();
    items.push(ValidationItem {
        name: "no-simple-poles",
        assumption: "M decays like |z|^-2",
        passed: simple.is_empty(),
        hard: true,
        detail: if simple.is_empty() {
            String::from("every pole has maximal order >= 2")
        } else {
            format!("poles of maximal order 1: {simple:?}")
        },
    });

    let nonzero = !m.terms().is_empty() && m.terms().iter().all(|t| t.coeff.max_abs() > 0.0);
    items.push(ValidationItem {
        name: "nonzero-coefficients",
        assumption: "M is a sum of nonzero principal parts",
        passed: nonzero,
        hard: true,
        detail: format!("{} terms", m.terms().len()),
    });

    if square {
        let (ok, worst, detail) = invertibility_sampling(spec);
        items.push(ValidationItem {
            name: "invertible-off-poles",
            assumption: "M(z) injective off its poles",
            passed: ok,
            hard: true,
            detail: format!("max condition number {worst:e} over {INVERTIBILITY_SAMPLES} samples{detail}"),
        });
    }

    let eps = spec.epsilon();
    items.push(ValidationItem {
        name: "coupling-range",
        assumption: "0 < eps <= 1",
        passed: eps > 0.0 && eps <= 1.0,
        hard: false,
        detail: format!("eps = {eps}"),
    });

    ValidationReport { items }
}

fn invertibility_sampling(spec: &ModelSpec) -> (bool, f64, String) {
    let m = spec.unscaled_form_factor();
    let poles = spec.pole_set();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_f00d);
    let mut worst = 0.0_f64;
    let mut taken = 0;
    while taken < INVERTIBILITY_SAMPLES {
        let z = Complex64::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
        if poles.iter().any(|p| (z - p).norm() < 1e-3) {
            continue;
        }
        taken += 1;
        let cond = match m.eval(z) {
            Ok(v) => {
                let s = v.singular_values();
                let (hi, lo) = (s[0], *s.last().unwrap_or(&0.0));
                if lo > 0.0 {
                    hi / lo
                } else {
                    f64::INFINITY
                }
            }
            Err(_) => f64::INFINITY,
        };
        worst = worst.max(cond);
        if !(cond < MAX_CONDITION) {
            return (false, worst, format!("; singular at z = {z}"));
        }
    }
    (true, worst, String::new())
}

/// Ready-made instances used by tests, documentation and the CLI.
pub mod presets {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// One level at `a = 1` coupled through `M(z) = (z + i)^(-2)`.
    pub fn scalar(epsilon: f64) -> ModelSpec {
        let m = RationalMatrixFunction::scalar(c(0.0, -1.0), 2, c(1.0, 0.0));
        ModelSpec::new(vec![1.0], m, epsilon).expect("valid preset")
    }

    /// Two levels `a = (1, 3)` coupled through
    /// `M(z) = diag((z + i)^(-2), (z - i)^(-2)) U` with a fixed invertible,
    /// non-normal `U`, so that both poles `±i` carry order 2 and the levels
    /// mix.
    pub fn two_level(epsilon: f64) -> ModelSpec {
        let c1 = CMat::from_row_major(2, 2, vec![c(1.0, 0.0), c(0.6, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let c2 = CMat::from_row_major(2, 2, vec![c(0.0, 0.0), c(0.0, 0.0), c(0.3, 0.0), c(1.0, 0.0)]);
        let m = RationalMatrixFunction::new(
            2,
            2,
            vec![RationalTerm::new(c(0.0, -1.0), 2, c1), RationalTerm::new(c(0.0, 1.0), 2, c2)],
        )
        .expect("valid preset");
        ModelSpec::new(vec![1.0, 3.0], m, epsilon).expect("valid preset")
    }
}

#[cfg(test)]
mod tests {
    use super::presets::*;
    use super::*;
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn scalar_form_factor_values() {
        let s = scalar(1.0);
        assert!((s.eval_m(c(0.0, 0.0)).unwrap()[(0, 0)] - c(-1.0, 0.0)).norm() < 1e-15);
        assert!((s.eval_m(c(0.0, 1.0)).unwrap()[(0, 0)] - c(-0.25, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn two_term_sum_matches_direct_summation() {
        let p = c(0.5, -1.5);
        let c1 = CMat::from_row_major(1, 2, vec![c(1.0, 2.0), c(-0.5, 0.0)]);
        let c2 = CMat::from_row_major(1, 2, vec![c(0.0, 1.0), c(3.0, -1.0)]);
        let m = RationalMatrixFunction::new(
            1,
            2,
            vec![RationalTerm::new(p, 2, c1.clone()), RationalTerm::new(p, 3, c2.clone())],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let z = c(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let direct = c1.scale((z - p).powi(-2)).add(&c2.scale((z - p).powi(-3)));
            assert!(m.eval(z).unwrap().sub(&direct).max_abs() < 1e-13);
        }
    }

    #[test]
    fn pole_hit_is_reported() {
        let s = scalar(1.0);
        assert!(matches!(s.eval_m(c(0.0, -1.0)), Err(Error::PoleHit { .. })));
        assert!(matches!(s.eval_m(c(1e-14, -1.0)), Err(Error::PoleHit { .. })));
    }

    #[test]
    fn conj_adjoint_of_scalar_example() {
        let m = scalar(1.0).unscaled_form_factor().clone();
        let ms = conj_adjoint_fn(&m);
        assert_eq!(ms.terms()[0].pole, c(0.0, 1.0));
        assert!((ms.eval(c(0.0, 0.0)).unwrap()[(0, 0)] - c(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn conj_adjoint_matches_pointwise_adjoint() {
        let spec = two_level(0.7);
        let m = spec.form_factor();
        let ms = m.conj_adjoint();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let z = c(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let lhs = ms.eval(z).unwrap();
            let rhs = m.eval(z.conj()).unwrap().adjoint();
            assert!(lhs.sub(&rhs).max_abs() <= 1e-13);
        }
    }

    #[test]
    fn g_of_scalar_example() {
        let s = scalar(1.0);
        let g = s.eval_g(c(1.0, 0.0)).unwrap();
        assert!((g[(0, 0)] - c(0.25, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn g_is_hermitian_psd_on_the_real_line() {
        for spec in [scalar(1.0), two_level(1.0)] {
            for lam in [0.5, 1.0, 10.0, -3.0, 0.0] {
                let g = spec.eval_g(c(lam, 0.0)).unwrap();
                assert!(g.hermitian_defect() <= 1e-13);
                assert!(g.hermitian_eigenvalues()[0] >= -1e-12);
            }
        }
    }

    #[test]
    fn g_decays_like_inverse_fourth_power_along_negative_imaginary_axis() {
        let s = scalar(1.0);
        // log-log slope between |z| = 1e3 and 1e4
        let g1 = s.eval_g(c(0.0, -1e3)).unwrap().op_norm();
        let g2 = s.eval_g(c(0.0, -1e4)).unwrap().op_norm();
        let slope = (g2.ln() - g1.ln()) / (10f64.ln());
        assert!((slope + 4.0).abs() < 1e-3, "slope {slope}");
    }

    #[test]
    fn coupling_scales_m_linearly_and_g_quadratically() {
        let z = c(0.3, 0.8);
        let base = two_level(1.0);
        let half = two_level(0.5);
        let m1 = base.eval_m(z).unwrap();
        let m2 = half.eval_m(z).unwrap();
        assert!(m1.scale_real(0.5).sub(&m2).max_abs() < 1e-15);
        let g1 = base.eval_g(z).unwrap();
        let g2 = half.eval_g(z).unwrap();
        assert!(g1.scale_real(0.25).sub(&g2).max_abs() < 1e-15);
    }

    #[test]
    fn presets_validate() {
        for spec in [scalar(1.0), scalar(0.05), two_level(0.5)] {
            let r = validate_model(&spec);
            assert!(r.passed(), "{r:?}");
            assert!(r.failures().next().is_none(), "{r:?}");
        }
    }

    #[test]
    fn order_one_pole_fails_no_simple_poles() {
        let m = RationalMatrixFunction::scalar(c(0.0, -1.0), 1, c(1.0, 0.0));
        let spec = ModelSpec::new(vec![1.0], m, 1.0).unwrap();
        let r = validate_model(&spec);
        assert!(!r.item("no-simple-poles").unwrap().passed);
        assert!(!r.passed());
    }

    #[test]
    fn order_one_term_next_to_higher_order_term_is_fine() {
        let m = RationalMatrixFunction::new(
            1,
            1,
            vec![
                RationalTerm::new(c(0.0, -1.0), 1, CMat::from_diag(&[c(0.2, 0.0)])),
                RationalTerm::new(c(0.0, -1.0), 2, CMat::from_diag(&[c(1.0, 0.0)])),
            ],
        )
        .unwrap();
        let spec = ModelSpec::new(vec![1.0], m, 1.0).unwrap();
        assert!(validate_model(&spec).item("no-simple-poles").unwrap().passed);
    }

    #[test]
    fn negative_eigenvalue_fails_positivity() {
        let m = RationalMatrixFunction::scalar(c(0.0, -1.0), 2, c(1.0, 0.0));
        let spec = ModelSpec::new(vec![-1.0], m, 1.0).unwrap();
        let r = validate_model(&spec);
        assert!(!r.item("positive-eigenvalues").unwrap().passed);
        assert!(!r.passed());
    }

    #[test]
    fn real_pole_fails() {
        let m = RationalMatrixFunction::scalar(c(2.0, 0.0), 2, c(1.0, 0.0));
        let spec = ModelSpec::new(vec![1.0], m, 1.0).unwrap();
        assert!(!validate_model(&spec).item("no-real-poles").unwrap().passed);
    }

    #[test]
    fn singular_form_factor_fails_invertibility() {
        // rank-one coefficient: M(z) singular everywhere
        let coeff = CMat::from_row_major(2, 2, vec![c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)]);
        let m = RationalMatrixFunction::new(2, 2, vec![RationalTerm::new(c(0.0, -1.0), 2, coeff)]).unwrap();
        let spec = ModelSpec::new(vec![1.0, 2.0], m, 1.0).unwrap();
        assert!(!validate_model(&spec).item("invertible-off-poles").unwrap().passed);
    }

    #[test]
    fn rectangular_form_factor_fails_square_check() {
        let coeff = CMat::from_row_major(1, 2, vec![c(1.0, 0.0), c(1.0, 0.0)]);
        let m = RationalMatrixFunction::new(1, 2, vec![RationalTerm::new(c(0.0, -1.0), 2, coeff)]).unwrap();
        let spec = ModelSpec::new(vec![1.0, 2.0], m, 1.0).unwrap();
        assert!(!validate_model(&spec).item("square-dimensions").unwrap().passed);
    }

    #[test]
    fn pole_set_is_conjugation_closed() {
        let spec = scalar(1.0);
        let ps = spec.pole_set();
        assert_eq!(ps.len(), 2);
        for p in &ps {
            assert!(ps.iter().any(|q| (q - p.conj()).norm() < 1e-15));
        }
        assert_eq!(spec.lower_poles(), vec![c(0.0, -1.0)]);
    }
}
