use nalgebra::DMatrix;

use super::*;
use crate::model::{builtin, lq_toy_model, SafetySpec, SystemModel};
use crate::poly::{parse_polynomial, BoxRegion, PolyMatrix, Polynomial};

fn runner() -> SdpRunner {
    SdpRunner::default()
}

fn scalar_model(a: f64, b: f64, d_max: f64, half_width: f64) -> SystemModel {
    let x = Polynomial::var(1, 0);
    let region = BoxRegion::symmetric(&[half_width]);
    SystemModel::new(
        "scalar",
        vec![x.scale(a)],
        PolyMatrix::constant(1, 1, 1, &[b]),
        vec![d_max],
        x.pow(2),
        DMatrix::from_element(1, 1, 1.0),
        region.clone(),
        region,
    )
    .unwrap()
}

fn riccati_p() -> f64 {
    2f64.sqrt() - 1.0
}

#[test]
fn modified_reward_terms() {
    let x = Polynomial::var(1, 0);
    let m = scalar_model(-1.0, 1.0, 0.0, 1.0);
    assert_eq!(modified_reward(&m, &[Polynomial::zero(1)], 0.0), m.q);
    let md = scalar_model(-1.0, 1.0, 1.0, 1.0);
    assert_eq!(modified_reward(&md, &[Polynomial::zero(1)], 0.0), m.q.add_constant(1.0));
    let r = modified_reward(&md, &[x.clone()], 0.5);
    assert_eq!(r, (&m.q + &x.pow(2)).add_constant(1.5));
}

#[test]
fn riccati_pair_zeroes_bellman_and_hjb() {
    let m = scalar_model(-1.0, 1.0, 0.0, 1.0);
    let p = riccati_p();
    let v = Polynomial::var(1, 0).pow(2).scale(p);
    let u = extract_controller(&m, &v);
    assert!(u.u[0].max_coeff_diff(&Polynomial::var(1, 0).scale(-p)) < 1e-15);
    assert!(bellman_residual(&m, &v, &u.u, 0.0).max_abs_coeff() < 1e-9);
    assert!(hjb_operator(&m, &v, 0.0).max_abs_coeff() < 1e-9);
    let zero = Polynomial::zero(1);
    assert_eq!(bellman_residual(&m, &zero, &[zero.clone()], 0.0), -&m.q);
    assert_eq!(hjb_operator(&m, &zero, 0.25), m.q.add_constant(0.25));
}

#[test]
fn bellman_identity_on_the_suspension() {
    let (m, _) = builtin("suspension").unwrap();
    let m = m.with_disturbance(vec![0.0]).unwrap();
    let v = parse_polynomial(
        "3*x1^2 + 0.5*x1*x2 + 2*x2^2 - x2*x4 + 0.7*x3^2 + 0.1*x4^2 + 0.01*x1^4 - 0.2*x2*x3^3",
        4,
    )
    .unwrap();
    let u = extract_controller(&m, &v);
    let lhs = bellman_residual(&m, &v, &u.u, 0.3);
    let rhs = -&hjb_operator(&m, &v, 0.3);
    assert!(lhs.max_coeff_diff(&rhs) < 1e-10 * lhs.max_abs_coeff().max(1.0));
    // Doubling V doubles the drift term and quadruples the control term.
    let h1 = &hjb_operator(&m, &v, 0.0) - &m.q;
    let h2 = &hjb_operator(&m, &v.scale(2.0), 0.0) - &m.q;
    let drift = m.lie_f(&v);
    let quad = &drift - &h1;
    let expect = &drift.scale(2.0) - &quad.scale(4.0);
    assert!(h2.max_coeff_diff(&expect) < 1e-9);
}

#[test]
fn controller_extraction() {
    let m = scalar_model(-1.0, 1.0, 0.0, 1.0);
    let u = extract_controller(&m, &Polynomial::constant(1, 3.0));
    assert!(u.u[0].is_zero());
    let (s, _) = builtin("suspension").unwrap();
    let v = parse_polynomial("x1^2 + 2*x2^2 + x2*x4 + 3*x4^2", 4).unwrap();
    let u = extract_controller(&s, &v).u.remove(0);
    // -1/2 (dV/dx2 / M_b - dV/dx4 / M_w) with c = 1.
    let dv2 = v.derivative(1);
    let dv4 = v.derivative(3);
    let expect = (&dv2.scale(1.0 / 300.0) - &dv4.scale(1.0 / 60.0)).scale(-0.5);
    assert!(u.max_coeff_diff(&expect) < 1e-15);
    assert_eq!(u.degree(), 1);
}

#[test]
fn policy_decomposition_is_exact() {
    let x = Polynomial::var(2, 0);
    let y = Polynomial::var(2, 1);
    let p = Policy::new(vec![x.scale(-0.3)], vec![(&x * &y).scale(0.1)]);
    assert!(p.decomposition_error() <= 1e-10);
    assert_eq!(p.evaluate(&[1.0, 2.0]), vec![-0.3 + 0.2]);
}

#[test]
fn input_bounds() {
    let x = Polynomial::var(1, 0);
    let m = scalar_model(-1.0, 1.0, 0.0, 1.0);
    let mut r = runner();
    let g = bound_u_max(&m, &[x.clone()], BetaMode::Joint, 2, &mut r).unwrap();
    assert!((g - 1.0).abs() < 1e-4, "{g}");
    let g = bound_u_max(&m, &[Polynomial::zero(1)], BetaMode::Joint, 2, &mut r).unwrap();
    assert!(g.abs() < 1e-6);
    let (two, _) = builtin("lq_toy_2state").unwrap();
    let s = &Polynomial::var(2, 0) + &Polynomial::var(2, 1);
    let g = bound_u_max(&two, &[s.clone()], BetaMode::Joint, 2, &mut r).unwrap();
    // Grid oracle for max (x1 + x2)^2 on [-1, 1]^2.
    let mut best: f64 = 0.0;
    for i in 0..=100 {
        for j in 0..=100 {
            let p = [-1.0 + 0.02 * i as f64, -1.0 + 0.02 * j as f64];
            best = best.max(s.evaluate(&p).powi(2));
        }
    }
    assert!((g - best).abs() < 1e-3, "{g} vs {best}");
    let g = bound_u_max(&two, &[s], BetaMode::PerElement, 2, &mut r).unwrap();
    assert!((g - 4.0).abs() < 1e-3);
    assert_eq!(bound_u_max(&two, &[Polynomial::var(2, 0)], BetaMode::Zero, 2, &mut r).unwrap(), 0.0);
}

#[test]
fn separating_barriers() {
    let x = Polynomial::var(1, 0);
    let region = BoxRegion::symmetric(&[3.0]);
    let spec = SafetySpec::from_box(BoxRegion::symmetric(&[1.0]), vec![vec![x.add_constant(-2.0)]]);
    let mut r = runner();
    let b = find_barrier(&spec, &region, 1, 0, &mut r).unwrap();
    assert!(b.margin > 0.0);
    for k in 0..=100 {
        let v = -3.0 + 0.06 * k as f64;
        let h = b.h.evaluate(&[v]);
        if spec.in_initial(&[v]) {
            assert!(h >= b.margin - 1e-6);
        }
        if v >= 2.0 {
            assert!(h <= -b.margin + 1e-6);
        }
    }
    assert!(b.separation.iter().all(|c| c.is_valid(&Default::default())));

    let inside = (-&x.pow(2)).add_constant(1.0);
    let same = SafetySpec::from_box(BoxRegion::symmetric(&[1.0]), vec![vec![inside]]);
    assert!(matches!(
        find_barrier(&same, &region, 2, 2, &mut r),
        Err(SrpiError::Refused { .. })
    ));
}

#[test]
fn suspension_separation_barrier() {
    let (m, spec) = builtin("suspension").unwrap();
    let spec = SafetySpec {
        initial_box: Some(m.perf_region.clone()),
        initial: m.perf_region.inequalities(),
        ..spec.unwrap()
    };
    let scaling = Scaling::for_model(&m);
    let mut r = runner();
    let b = find_barrier(&scaling.spec(&spec), &scaling.region_to_z(&m.state_region), 2, 2, &mut r)
        .unwrap();
    let h = scaling.to_x(&b.h);
    assert!(b.margin > 0.0);
    for x4 in [-10.0, 0.0, 10.0] {
        assert!(h.evaluate(&[0.5, -10.0, -0.5, x4]) > 0.0);
    }
    for x4 in [-25.0, -20.0, 25.0, 30.0] {
        assert!(h.evaluate(&[0.0, 3.0, 0.2, x4]) < 0.0, "{h}");
    }
}

fn zcbf_model(a: f64) -> SystemModel {
    let x = Polynomial::var(1, 0);
    let region = BoxRegion::symmetric(&[2.0]);
    SystemModel::new(
        "zcbf",
        vec![x.scale(a)],
        PolyMatrix::constant(1, 1, 1, &[0.0]),
        vec![0.0],
        x.pow(2),
        DMatrix::from_element(1, 1, 1.0),
        region.clone(),
        region,
    )
    .unwrap()
}

#[test]
fn zcbf_verification() {
    let x = Polynomial::var(1, 0);
    let h = (-&x.pow(2)).add_constant(1.0);
    let u = [Polynomial::zero(1)];
    let mut r = runner();
    let cert = verify_zcbf(&zcbf_model(-1.0), &h, &u, 2, 2, &mut r).unwrap();
    assert!(cert.certificate.is_valid(&Default::default()));
    match verify_zcbf(&zcbf_model(1.0), &h, &u, 2, 2, &mut r) {
        Err(SrpiError::Refused { violation: Some(x), .. }) => {
            assert!((x[0].abs() - 1.0).abs() < 1e-6, "{x:?}");
        }
        other => panic!("expected refusal, got {other:?}"),
    }
}

#[test]
fn evaluation_of_known_policies() {
    let m = scalar_model(-1.0, 1.0, 0.0, 1.0);
    let p = riccati_p();
    let x = Polynomial::var(1, 0);
    let settings = EvaluationSettings {
        v_degree: 2,
        k_delta: 100.0,
        delta_mode: DeltaMode::Scalar,
        min_multiplier: 2,
        volume_scale: 1.0,
    };
    let mut r = runner();
    // With objective 2v/3 + k s^2 and the binding constraint
    // (2v(1 + k_u) - (1 + k_u^2)) x^2 + s >= 0 at |x| = 1, the optimum
    // trades s = 1 / (600 (1 + k_u)) against v.
    let vstar = x.pow(2).scale(p);
    let e = policy_evaluation(&m, &[x.scale(-p)], Some(&vstar.scale(2.0)), 0.0, &settings, &mut r)
        .unwrap();
    let s = 1.0 / (600.0 * (1.0 + p));
    let v = p - s / (2.0 * (1.0 + p));
    assert!((e.v.evaluate(&[1.0]) - p).abs() < 0.01 * p);
    assert!((e.v.evaluate(&[1.0]) - v).abs() < 1e-6, "{}", e.v);
    assert!((e.delta - s).abs() < 1e-6, "{}", e.delta);
    // Open-loop stable plant: the Lyapunov value is v = 1/2 before the trade-off.
    let e = policy_evaluation(&m, &[Polynomial::zero(1)], None, 0.0, &settings, &mut r).unwrap();
    assert!((e.v.evaluate(&[1.0]) - (0.5 - 1.0 / 1200.0)).abs() < 1e-6, "{}", e.v);
    assert!((e.delta - 1.0 / 600.0).abs() < 1e-6);
    // A zero previous value function forces V = 0, so the slack absorbs q.
    let e = policy_evaluation(&m, &[Polynomial::zero(1)], Some(&Polynomial::zero(1)), 0.0, &settings, &mut r)
        .unwrap();
    assert!(e.v.max_abs_coeff() < 1e-6);
    assert!((e.slack - 1.0).abs() < 1e-4, "{}", e.slack);
}

#[test]
fn improvement_without_conflict() {
    let m = scalar_model(-1.0, 1.0, 0.0, 1.0);
    let x = Polynomial::var(1, 0);
    let v = x.pow(2).scale(riccati_p());
    let mut r = runner();
    // Unsafe set far outside the region: the barrier is slack everywhere.
    let h = (-&x.pow(2)).add_constant(4.0);
    let imp = policy_improvement(&m, &v, Some(&h), 2, &u_safe_basis(1, 1, None), 2, &mut r).unwrap();
    assert!(imp.policy.u_safe[0].max_abs_coeff() < 1e-4, "{}", imp.policy.u_safe[0]);
    assert!(imp.policy.decomposition_error() < 1e-10);
    // g = 0: the correction has no effect and is driven to zero.
    let imp = policy_improvement(&zcbf_model(-1.0), &v, Some(&(-&x.pow(2)).add_constant(1.0)), 2, &u_safe_basis(1, 1, None), 2, &mut r)
        .unwrap();
    assert!(imp.policy.u_safe[0].max_abs_coeff() < 1e-4);
    let imp = policy_improvement(&m, &v, None, 2, &[], 2, &mut r).unwrap();
    assert!(imp.policy.u_safe[0].is_zero());
}

fn lq_config() -> SrpiConfig {
    SrpiConfig {
        beta_mode: BetaMode::Zero,
        ..SrpiConfig::default()
    }
}

#[test]
fn scalar_lq_run_converges_to_riccati() {
    let (m, _) = builtin("lq_toy_scalar").unwrap();
    let run = run_srpi(&m, None, &lq_config()).unwrap();
    assert!(run.failure.is_none());
    assert_eq!(run.init.inflation, 1.0);
    assert!(run.records.len() <= 6);
    assert_eq!(run.stop, StopReason::Threshold);
    let p = riccati_p();
    for k in 0..=10 {
        let x = -1.0 + 0.2 * k as f64;
        if x != 0.0 {
            let rel = (run.value.evaluate(&[x]) - p * x * x).abs() / (p * x * x);
            assert!(rel < 0.01, "x={x}: {rel}");
        }
    }
}

#[test]
fn zero_iterations_give_the_initial_record() {
    let (m, _) = builtin("lq_toy_integrator").unwrap();
    let cfg = SrpiConfig {
        max_iter: 0,
        ..lq_config()
    };
    let run = run_srpi(&m, None, &cfg).unwrap();
    assert_eq!(run.records.len(), 1);
    assert_eq!(run.records[0].index, 0);
}

#[test]
fn unstabilizable_initialization_fails() {
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let m = lq_toy_model("t", &a, &b, &DMatrix::identity(2, 2), &DMatrix::identity(1, 1)).unwrap();
    let mut bad = m.clone();
    bad.g = PolyMatrix::constant(2, 2, 1, &[0.0, 0.0]);
    let mut r = runner();
    assert!(init_policy(&bad, None, &lq_config(), &mut r).is_err());
}

#[test]
fn polynomial_files_round_trip() {
    let p = parse_polynomial("x1^2 - 0.5*x1*x2 + 1e-9*x2^3", 2).unwrap();
    let q = parse_polynomial("-x2", 2).unwrap();
    let text = polynomial_file(2, &[("u1".into(), &p), ("h".into(), &q)]);
    let (n, entries) = parse_polynomial_file(&text).unwrap();
    assert_eq!(n, 2);
    assert_eq!(entries, vec![("u1".to_string(), p), ("h".to_string(), q)]);
    assert!(parse_polynomial_file("u1 = x1").is_err());
}
