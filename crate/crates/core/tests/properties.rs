use friedrichs_core::livsic::density_forms;
use friedrichs_core::model::presets::{scalar, two_level};
use friedrichs_core::scattering::{reflection_defect, unitarity_defect};
use friedrichs_core::stieltjes::{cauchy_kernel, phi};
use friedrichs_core::{CMat, Complex64, ModelSpec, RationalMatrixFunction, RationalTerm, SheetTag};
use proptest::prelude::*;
use std::f64::consts::PI;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn spec(which: bool, eps: f64) -> ModelSpec {
    if which {
        two_level(eps)
    } else {
        scalar(eps)
    }
}

fn random_function() -> impl Strategy<Value = RationalMatrixFunction> {
    let term = (-3.0..3.0f64, 0.3..3.0f64, any::<bool>(), 1u32..4, prop::collection::vec(-1.0..1.0f64, 8));
    prop::collection::vec(term, 1..4).prop_map(|ts| {
        let terms = ts
            .into_iter()
            .map(|(re, im, up, order, v)| {
                let pole = c(re, if up { im } else { -im });
                let coeff = CMat::from_fn(2, 2, |i, j| c(v[2 * (i * 2 + j)], v[2 * (i * 2 + j) + 1]));
                RationalTerm { pole, order, coeff }
            })
            .collect();
        RationalMatrixFunction::new(2, 2, terms).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conj_adjoint_is_an_involution(m in random_function(), re in -5.0..5.0f64, im in -5.0..5.0f64) {
        let z = c(re, im);
        prop_assume!(m.terms().iter().all(|t| (t.pole - z).norm() > 1e-3 && (t.pole.conj() - z).norm() > 1e-3));
        let twice = m.conj_adjoint().conj_adjoint();
        prop_assert!(twice.eval(z).unwrap().sub(&m.eval(z).unwrap()).max_abs() == 0.0);
        // M*(z) = M(z̄)*
        let lhs = m.conj_adjoint().eval(z).unwrap();
        let rhs = m.eval(z.conj()).unwrap().adjoint();
        prop_assert!(lhs.sub(&rhs).max_abs() <= 1e-12 * (1.0 + rhs.max_abs()));
    }

    #[test]
    fn form_factor_product_is_hermitian_psd_on_the_axis(which in any::<bool>(), eps in 0.0..2.0f64, l in -20.0..20.0f64) {
        let g = spec(which, eps).eval_g(c(l, 0.0)).unwrap();
        prop_assert!(g.hermitian_defect() <= 1e-15 * (1.0 + g.max_abs()));
        prop_assert!(g.hermitian_eigenvalues().iter().all(|e| *e >= -1e-15 * (1.0 + g.max_abs())));
    }

    #[test]
    fn jump_across_the_positive_axis(which in any::<bool>(), eps in 0.05..2.0f64, l in 0.1..50.0f64) {
        let s = spec(which, eps);
        let z = c(l, 0.0);
        let jump = phi(&s, z, SheetTag::MinusContinued).unwrap().sub(&phi(&s, z, SheetTag::PlusContinued).unwrap());
        let g = s.eval_g(z).unwrap().scale(c(0.0, 2.0 * PI));
        prop_assert!(jump.sub(&g).max_abs() <= 1e-11);
    }

    #[test]
    fn first_sheet_reflection(which in any::<bool>(), eps in 0.05..2.0f64, re in -5.0..5.0f64, im in 0.01..5.0f64) {
        let s = spec(which, eps);
        let z = c(re, im);
        prop_assume!(s.distance_to_poles(z) > 1e-2);
        let a = phi(&s, z.conj(), SheetTag::FirstSheet).unwrap();
        let b = phi(&s, z, SheetTag::FirstSheet).unwrap().adjoint();
        prop_assert!(a.sub(&b).max_abs() <= 1e-12 * (1.0 + b.max_abs()));
    }

    #[test]
    fn continued_sheet_differs_by_the_jump(which in any::<bool>(), eps in 0.05..2.0f64, re in 0.01..5.0f64, im in -5.0..-0.01f64) {
        let s = spec(which, eps);
        let z = c(re, im);
        prop_assume!(s.distance_to_poles(z) > 1e-2);
        let cont = phi(&s, z, SheetTag::PlusContinued).unwrap();
        let first = phi(&s, z, SheetTag::FirstSheet).unwrap();
        let g = s.eval_g(z).unwrap().scale(c(0.0, 2.0 * PI));
        prop_assert!(cont.sub(&first.sub(&g)).max_abs() <= 1e-11 * (1.0 + first.max_abs()));
    }

    #[test]
    fn cauchy_kernel_is_symmetric_in_its_poles(pr in -3.0..3.0f64, pi in 0.2..3.0f64, qr in -3.0..3.0f64, qi in 0.2..3.0f64, j in 1u32..4, k in 1u32..4, zr in -4.0..4.0f64, zi in 0.5..4.0f64) {
        let p = c(pr, -pi);
        let q = c(qr, qi);
        prop_assume!((p - q).norm() > 1e-2);
        let z = c(zr, zi);
        prop_assume!((z - q).norm() > 1e-2);
        let a = cauchy_kernel(p, j, q, k, z).unwrap();
        let b = cauchy_kernel(q, k, p, j, z).unwrap();
        prop_assert!((a - b).norm() <= 1e-11 * (1.0 + a.norm()));
    }

    #[test]
    fn density_forms_agree(which in any::<bool>(), eps in 0.05..1.5f64, l in 0.05..40.0f64) {
        let f = density_forms(&spec(which, eps), l).unwrap();
        prop_assert!(f.defect() <= 1e-10 * (1.0 + f.sandwich.max_abs()));
    }

    #[test]
    fn scattering_matrix_is_unitary(which in any::<bool>(), eps in 0.0..1.5f64, l in 0.01..60.0f64) {
        prop_assert!(unitarity_defect(&spec(which, eps), l).unwrap() <= 1e-9);
    }

    #[test]
    fn scattering_reflection_symmetry(which in any::<bool>(), eps in 0.05..1.0f64, re in 0.2..5.0f64, im in -3.0..-0.05f64) {
        let s = spec(which, eps);
        let z = c(re, im);
        prop_assume!(s.distance_to_poles(z) > 5e-2);
        let d = reflection_defect(&s, z);
        prop_assume!(d.is_ok());
        prop_assert!(d.unwrap() <= 1e-9);
    }
}
