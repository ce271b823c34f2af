use nalgebra::DMatrix;

use super::*;
use crate::poly::{monomial_basis, parse_polynomial, BoxRegion, Monomial, Polynomial};
use crate::sdp::{dump_problem, SdpStatus, SolverOptions};

fn opts() -> SolverOptions {
    SolverOptions::default()
}

#[test]
fn declaration_sizes() {
    let mut p = SosProgram::new(2);
    let v = p.declare_poly("V", monomial_basis(2, 2, 4)).unwrap();
    assert_eq!(v.vars().len(), 12);
    let d = p.declare_scalar("delta").unwrap();
    assert_eq!(d, VarId(12));
    let mut q = SosProgram::new(1);
    let z = q.declare_poly("Z", monomial_basis(1, 0, 2)).unwrap();
    assert_eq!(z.vars().len(), 3);
    assert!(matches!(
        p.declare_scalar("V"),
        Err(SosError::DuplicateName(_))
    ));
    assert!(matches!(
        p.declare_poly("E", vec![]),
        Err(SosError::EmptyBasis(_))
    ));
}

#[test]
fn compile_structure() {
    let mut p = SosProgram::new(1);
    p.add_sos("c", parse_polynomial("x1^2 + 1", 1).unwrap().into())
        .unwrap();
    let sdp = p.compile();
    assert_eq!(sdp.block_dims, vec![2]);
    assert_eq!(sdp.num_constraints(), 3);

    let mut p = SosProgram::new(2);
    for k in 0..3 {
        let e = parse_polynomial("x1^2 + x2^4", 2).unwrap();
        p.add_sos(&format!("c{k}"), e.into()).unwrap();
    }
    assert_eq!(p.compile().block_dims.len(), 3);
    assert_eq!(dump_problem(&p.compile()), dump_problem(&p.compile()));
    assert_eq!(p.summary(), p.clone().summary());
}

#[test]
fn rejects_bilinear_and_odd_degree() {
    let mut p = SosProgram::new(1);
    let a = p.declare_poly("a", monomial_basis(1, 0, 1)).unwrap();
    let b = p.declare_poly("b", monomial_basis(1, 0, 1)).unwrap();
    let err = p.mul(&a.expr(), &b.expr()).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("a[1]") && msg.contains("b[1]"), "{msg}");
    assert!(matches!(
        p.add_sos("odd", a.expr().mul_poly(&Polynomial::var(1, 0).pow(2))),
        Err(SosError::OddDegree { degree: 3, .. })
    ));
}

#[test]
fn constant_expression_is_feasible() {
    let mut p = SosProgram::new(1);
    p.add_sos("sq", Polynomial::var(1, 0).pow(2).into()).unwrap();
    let s = p.solve(&opts()).unwrap();
    assert!(s.certified);
}

#[test]
fn gamma_bound_needs_region() {
    let x2 = Polynomial::var(1, 0).pow(2);
    let build = |region: Option<&BoxRegion>| {
        let mut p = SosProgram::new(1);
        let g = p.declare_scalar("gamma").unwrap();
        let e = PolyExpr::from_var(g, Polynomial::constant(1, 1.0)).add_poly(&(-&x2));
        match region {
            None => {
                p.add_sos("bound", e).unwrap();
            }
            Some(b) => {
                p.add_sos_on_box("bound", e, b, 2).unwrap();
            }
        }
        p.set_objective(AffineExpr::var(g));
        (p.solve(&opts()).unwrap(), g)
    };
    let (s, _) = build(None);
    assert!(!s.certified);
    assert!(matches!(s.status, SdpStatus::Infeasible | SdpStatus::Unbounded));
    let (s, g) = build(Some(&BoxRegion::symmetric(&[1.0])));
    assert!(s.certified);
    assert!((s.value(g) - 1.0).abs() < 1e-6);
}

#[test]
fn quadratic_decision_constrained_psd() {
    let mut p = SosProgram::new(2);
    let v = p.declare_poly("V", monomial_basis(2, 2, 2)).unwrap();
    p.add_sos("vpos", v.expr()).unwrap();
    // Fix x1^2 and x2^2 coefficients; minimize the cross term.
    p.add_equality("a", AffineExpr::var(v.vars()[0]), 1.0);
    p.add_equality("c", AffineExpr::var(v.vars()[2]), 4.0);
    p.set_objective(AffineExpr::var(v.vars()[1]));
    let s = p.solve(&opts()).unwrap();
    assert!(s.certified);
    assert!((s.value(v.vars()[1]) + 4.0).abs() < 1e-6);
}

#[test]
fn extracted_certificates_match_hand_values() {
    let mut p = SosProgram::new(1);
    p.add_sos("square", parse_polynomial("x1^2 + 2*x1 + 1", 1).unwrap().into())
        .unwrap();
    p.add_sos("plain", parse_polynomial("x1^2 + 1", 1).unwrap().into())
        .unwrap();
    let s = p.solve(&opts()).unwrap();
    assert!(s.certified);
    let sq = s.certificate("square").unwrap();
    assert_eq!(sq.basis, vec![Monomial::one(1), Monomial::var(1, 0)]);
    assert!((&sq.q - DMatrix::from_element(2, 2, 1.0)).amax() < 1e-6);
    assert!(sq.min_eig.abs() < 1e-6);
    let pl = s.certificate("plain").unwrap();
    assert!((&pl.q - DMatrix::<f64>::identity(2, 2)).amax() < 1e-6);
}

#[test]
fn check_sos_examples() {
    let p = parse_polynomial("x1^2 + x2^2", 2).unwrap();
    assert!(check_sos(&p, None, &opts()).unwrap().certified);
    let q = parse_polynomial("x1^2 - 1", 1).unwrap();
    assert!(!check_sos(&q, None, &opts()).unwrap().certified);
    let r = parse_polynomial("1 - x1^2", 1).unwrap();
    let b = BoxRegion::symmetric(&[1.0]);
    let c = check_sos(&r, Some((&b, 0)), &opts()).unwrap();
    assert!(c.certified, "{:?}", c.status);
    assert_eq!(c.multipliers.len(), 1);
    assert!((c.multipliers[0].q[(0, 0)] - 1.0).abs() < 1e-6);
}

#[test]
fn psd_device_and_inequality() {
    // min t  s.t. [[t, 2], [2, 1]] PSD, t <= 10  -> t = 4
    let mut p = SosProgram::new(1);
    let t = p.declare_scalar("t").unwrap();
    let m = vec![
        vec![AffineExpr::var(t), AffineExpr::constant(2.0)],
        vec![AffineExpr::constant(2.0), AffineExpr::constant(1.0)],
    ];
    p.add_psd("schur", &m).unwrap();
    p.add_inequality("cap", AffineExpr::constant(10.0).sub(&AffineExpr::var(t)))
        .unwrap();
    p.set_objective(AffineExpr::var(t));
    let s = p.solve(&opts()).unwrap();
    assert!(s.certified);
    assert!((s.value(t) - 4.0).abs() < 1e-6);
}
