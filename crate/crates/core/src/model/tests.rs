use nalgebra::DMatrix;

use super::*;
use crate::poly::parse_polynomial;

fn suspension() -> (SystemModel, SafetySpec) {
    suspension_model(&SuspensionParams::default()).unwrap()
}

#[test]
fn suspension_equilibrium_and_input_column() {
    let (m, _) = suspension();
    assert!(m.f_at(&[0.0; 4]).iter().all(|v| *v == 0.0));
    for x in [[0.0; 4], [0.3, -2.0, 0.1, 7.0]] {
        let g = m.g_at(&x);
        assert_eq!(g.as_slice(), &[0.0, 1.0 / 300.0, 0.0, -1.0 / 60.0]);
    }
}

#[test]
fn suspension_body_acceleration() {
    let (m, _) = suspension();
    let dx = m.rhs(&[0.1, 0.0, 0.0, 0.0], &[0.0], &[0.0]);
    let expected = (-16000.0 * 0.1 - 1600.0 * 0.001) / 300.0;
    assert!((dx[1] - expected).abs() < 1e-12);
    assert_eq!(dx[0], 0.0);
}

#[test]
fn suspension_energy_balance() {
    // Total mechanical energy decays through the damper only.
    let (m, _) = suspension();
    let e = parse_polynomial(
        "150*x2^2 + 30*x4^2 + 8000*x1^2 - 16000*x1*x3 + 8000*x3^2 \
         + 400*x1^4 - 1600*x1^3*x3 + 2400*x1^2*x3^2 - 1600*x1*x3^3 + 400*x3^4 + 95000*x3^2",
        4,
    )
    .unwrap();
    let de = m.lie_f(&e);
    let expected = parse_polynomial("-1000*x2^2 + 2000*x2*x4 - 1000*x4^2", 4).unwrap();
    assert!(de.max_coeff_diff(&expected) < 1e-9, "{de}");
    let eg = &m.lie_g(&e)[0];
    let expected = parse_polynomial("x2 - x4", 4).unwrap();
    assert!(eg.max_coeff_diff(&expected) < 1e-12, "{eg}");
}

#[test]
fn as_printed_variant_keeps_typeset_terms() {
    let (m, _) = builtin("suspension_printed").unwrap();
    let (_, spec) = builtin("suspension").unwrap();
    assert!(spec.is_some());
    let dx = m.rhs(&[0.0, 0.0, 0.2, 0.0], &[0.0], &[0.0]);
    assert!((dx[2] - 0.2).abs() < 1e-15);
    let expected = (16000.0 * 0.2 + 1600.0 * 0.008 + 190000.0 * 0.2) / 60.0;
    assert!((dx[3] - expected).abs() < 1e-9);
}

#[test]
fn suspension_safety_sets() {
    let (_, spec) = suspension();
    assert!(spec.in_unsafe(&[0.0, 0.0, 0.0, 25.5]));
    assert!(spec.in_unsafe(&[0.0, 0.0, 0.0, -20.5]));
    assert!(!spec.in_unsafe(&[0.0, 0.0, 0.0, 24.0]));
    assert!(spec.in_initial(&[0.05, -1.0, 0.0, 9.0]));
}

#[test]
fn overlapping_sets_are_rejected() {
    let x = Polynomial::var(1, 0);
    let spec = SafetySpec::from_box(BoxRegion::symmetric(&[1.0]), vec![vec![x.clone()]]);
    assert!(spec.check_disjoint(&BoxRegion::symmetric(&[2.0]), 1000, 1).is_err());
}

#[test]
fn lq_toys_match_riccati() {
    let one = DMatrix::from_element(1, 1, 1.0);
    for (name, p) in [("lq_toy_scalar", 2f64.sqrt() - 1.0), ("lq_toy_integrator", 1.0)] {
        let (m, spec) = builtin(name).unwrap();
        assert!(spec.is_none());
        assert_eq!(m.disturbance_cost(), 0.0);
        let (a, b) = m.linearize();
        let pm = solve_care(&a, &b, &m.q_matrix(), &m.r).unwrap();
        assert!((pm[(0, 0)] - p).abs() < 1e-12, "{name}");
        let k = lqr_gain(&b, &one, &pm);
        assert!((a - &b * k)[(0, 0)] < 0.0);
    }
    let (m, _) = builtin("lq_toy_2state").unwrap();
    let (a, b) = m.linearize();
    let p = solve_care(&a, &b, &m.q_matrix(), &m.r).unwrap();
    let k = lqr_gain(&b, &m.r, &p);
    let closed = &a - &b * &k;
    assert!(closed.complex_eigenvalues().iter().all(|e| e.re < 0.0));
}

#[test]
fn unstabilizable_lq_is_a_config_error() {
    let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let r = lq_toy_model("bad", &a, &b, &DMatrix::identity(2, 2), &DMatrix::identity(1, 1));
    assert!(matches!(r, Err(ModelError::Unstabilizable(_))));
}

#[test]
fn invariants_are_enforced() {
    let x = Polynomial::var(1, 0);
    let unit = BoxRegion::symmetric(&[1.0]);
    let g = PolyMatrix::constant(1, 1, 1, &[1.0]);
    let r = DMatrix::from_element(1, 1, 1.0);
    let ok = |f: Polynomial, q: Polynomial, r: DMatrix<f64>| {
        SystemModel::new("t", vec![f], g.clone(), vec![0.0], q, r, unit.clone(), unit.clone())
    };
    assert!(ok(-&x, x.pow(2), r.clone()).is_ok());
    assert!(ok(x.add_constant(1.0), x.pow(2), r.clone()).is_err());
    assert!(ok(-&x, x.pow(2).add_constant(1.0), r.clone()).is_err());
    assert!(ok(-&x, -&x.pow(2), r.clone()).is_err());
    assert!(ok(-&x, x.pow(2), -r).is_err());
}

#[test]
fn model_files_round_trip() {
    for name in builtin_names() {
        let (m, spec) = builtin(name).unwrap();
        let text = model_to_toml(&m, spec.as_ref());
        let (back, back_spec) = model_from_toml(&text).unwrap();
        assert_eq!(back, m, "{name}");
        assert_eq!(back_spec, spec, "{name}");
    }
    assert!(matches!(model_from_toml("name = 3"), Err(ModelError::Config(_))));
}

#[test]
fn indices_for_a_stable_scalar_plant() {
    let x = Polynomial::var(1, 0);
    let unit = BoxRegion::symmetric(&[1.0]);
    let m = SystemModel::new(
        "t",
        vec![-&x],
        PolyMatrix::constant(1, 1, 1, &[0.0]),
        vec![0.0],
        x.pow(2),
        DMatrix::from_element(1, 1, 1.0),
        unit.clone(),
        unit,
    )
    .unwrap();
    let v = x.pow(2);
    let h = (-&x.pow(2)).add_constant(1.0);
    let z = Polynomial::zero(1);
    let u = [Polynomial::zero(1)];
    let (ps, pr) = satisficing_indices(&m, &v, &h, &z, &u, 0.0, &[0.5], 1.0);
    assert!((ps[0] - 0.5).abs() < 1e-15);
    assert!((ps[1] - 0.5).abs() < 1e-15);
    assert_eq!(pr, [0.25, 0.0]);
    let (ps, pr) = satisficing_indices(&m, &v, &h, &z, &u, 0.0, &[0.0], 1.0);
    assert_eq!(ps[0], 0.0);
    assert_eq!(pr[0], 0.0);
}
