use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{multiplier_degree, SdpRunner, SrpiError};
use crate::model::{BarrierFunction, SafetySpec, SystemModel};
use crate::poly::{dot, monomial_basis, BoxRegion, Polynomial};
use crate::sos::{AffineExpr, DecisionPoly, GramCertificate, PolyExpr, SosProgram};

/// Certificate of the zeroing condition
/// `grad h'(f + g u) + Z h - |grad h' g|^2 >= 0` on the state region.
#[derive(Debug, Clone)]
pub struct ZcbfCertificate {
    pub z: Polynomial,
    pub certificate: GramCertificate,
    pub multipliers: Vec<GramCertificate>,
}

/// `grad p' f` for a decision polynomial, affine in its coefficients.
pub(crate) fn lie_f_expr(model: &SystemModel, p: &DecisionPoly) -> PolyExpr {
    let mut e = PolyExpr::zero(model.n());
    for (m, &v) in p.basis().iter().zip(p.vars()) {
        e.add_var_term(v, &model.lie_f(&Polynomial::monomial(m.clone(), 1.0)));
    }
    e
}

/// `grad h'(f + g u) - |grad h' g|^2` for fixed `h` and `u`.
pub(crate) fn zcbf_base(model: &SystemModel, h: &Polynomial, u: &[Polynomial]) -> Polynomial {
    let hg = model.lie_g(h);
    let drive = &model.lie_f(h) + &dot(&hg, u).expect("input dimension");
    &drive - &dot(&hg, &hg).expect("input dimension")
}

fn certificates(sol: &crate::sos::SosSolution) -> Vec<GramCertificate> {
    sol.certificates.clone()
}

/// Gram certificates of SOS multipliers.
pub(crate) fn multiplier_certificates(
    sol: &crate::sos::SosSolution,
    mults: &[crate::sos::SosPoly],
) -> Vec<GramCertificate> {
    mults
        .iter()
        .map(|s| GramCertificate::new(s.name(), s.basis().to_vec(), sol.matrix(s.gram()), &sol.sos_poly(s)))
        .collect()
}

fn separation_program(
    n: usize,
    spec: &SafetySpec,
    region: &BoxRegion,
    degree: u32,
    min_multiplier: u32,
    flow: Option<&SystemModel>,
) -> Result<(SosProgram, DecisionPoly, crate::sos::VarId), SrpiError> {
    let mut prog = SosProgram::new(n);
    let h = prog.declare_poly("h", monomial_basis(n, 0, degree))?;
    let eps = prog.declare_scalar("eps")?;
    for (k, &c) in h.vars().iter().enumerate() {
        let mut up = AffineExpr::constant(1.0);
        up.add_term(c, -1.0);
        prog.add_inequality(&format!("h.hi{k}"), up)?;
        let mut lo = AffineExpr::constant(1.0);
        lo.add_term(c, 1.0);
        prog.add_inequality(&format!("h.lo{k}"), lo)?;
    }
    let one = Polynomial::constant(n, 1.0);
    let md = multiplier_degree(degree, min_multiplier);
    let inside = h.expr().sub(&PolyExpr::from_var(eps, one.clone()));
    prog.add_sos_on_set("initial", inside, &spec.initial, md)?;
    let region_ineqs = region.inequalities();
    for (k, piece) in spec.unsafe_sets.iter().enumerate() {
        let outside = h
            .expr()
            .scale(-1.0)
            .sub(&PolyExpr::from_var(eps, one.clone()));
        let mut ineqs = piece.clone();
        ineqs.extend(region_ineqs.iter().cloned());
        prog.add_sos_on_set(&format!("unsafe{k}"), outside, &ineqs, md)?;
    }
    if let Some(model) = flow {
        let lie = lie_f_expr(model, &h);
        let md = multiplier_degree(lie.degree(), min_multiplier);
        prog.add_sos_on_box("flow", lie, region, md)?;
    }
    prog.set_objective(AffineExpr::term(eps, -1.0));
    Ok((prog, h, eps))
}

fn solve_separation(
    prog: &SosProgram,
    h: &DecisionPoly,
    eps: crate::sos::VarId,
    runner: &mut SdpRunner,
    label: &str,
) -> Result<BarrierFunction, SrpiError> {
    let sol = runner.solve(prog, label)?;
    let margin = sol.value(eps);
    if !sol.certified || !(margin > 1e-6) {
        return Err(SrpiError::Refused {
            stage: label.to_string(),
            reason: format!(
                "no separating barrier of this degree (solver {}, best margin {margin:.3e})",
                sol.status
            ),
            violation: None,
        });
    }
    let hp = sol.poly(h);
    Ok(BarrierFunction {
        z: Polynomial::zero(hp.nvars()),
        h: hp,
        margin,
        separation: certificates(&sol),
        zcbf: None,
    })
}

/// Barrier `h` with `h >= eps` on the initial set and `h <= -eps` on each
/// unsafe piece within `region`, maximizing `eps` under `|coeff| <= 1`.
pub fn find_barrier(
    spec: &SafetySpec,
    region: &BoxRegion,
    degree: u32,
    min_multiplier: u32,
    runner: &mut SdpRunner,
) -> Result<BarrierFunction, SrpiError> {
    let (prog, h, eps) = separation_program(region.nvars(), spec, region, degree, min_multiplier, None)?;
    solve_separation(&prog, &h, eps, runner, "barrier")
}

/// As `find_barrier`, additionally requiring `grad h' f >= 0` on the state
/// region so that `{h >= 0}` is invariant for the uncontrolled plant.
pub fn find_barrier_with_flow(
    model: &SystemModel,
    spec: &SafetySpec,
    degree: u32,
    min_multiplier: u32,
    runner: &mut SdpRunner,
) -> Result<BarrierFunction, SrpiError> {
    let region = &model.state_region;
    let (prog, h, eps) =
        separation_program(model.n(), spec, region, degree, min_multiplier, Some(model))?;
    solve_separation(&prog, &h, eps, runner, "barrier_flow")
}

/// Searches an SOS multiplier `Z` certifying the zeroing condition for the
/// fixed pair `(h, u)`; refuses with a sampled violation when one exists.
pub fn verify_zcbf(
    model: &SystemModel,
    h: &Polynomial,
    u: &[Polynomial],
    z_degree: u32,
    min_multiplier: u32,
    runner: &mut SdpRunner,
) -> Result<ZcbfCertificate, SrpiError> {
    let n = model.n();
    let base = zcbf_base(model, h, u);
    let mut prog = SosProgram::new(n);
    let z = prog.declare_sos_poly("Z", monomial_basis(n, 0, z_degree / 2))?;
    let expr = PolyExpr::from_poly(base).add(&z.expr().mul_poly(h));
    let md = multiplier_degree(expr.degree(), min_multiplier);
    let (_, mults) = prog.add_sos_on_box("zcbf", expr, &model.state_region, md)?;
    let sol = runner.solve(&prog, "verify_zcbf")?;
    if !sol.certified {
        return Err(SrpiError::Refused {
            stage: "verify_zcbf".into(),
            reason: format!("no multiplier certifies the condition (solver {})", sol.status),
            violation: find_violation(model, h, u, 4000, 1),
        });
    }
    Ok(ZcbfCertificate {
        z: sol.sos_poly(&z),
        certificate: sol.certificate("zcbf").expect("declared").clone(),
        multipliers: multiplier_certificates(&sol, &mults),
    })
}

/// Point of `{h = 0}` in the state region where
/// `grad h'(f + g u) - |grad h' g|^2 < 0`, found by bisecting random
/// segments that cross the boundary. Such a point rules out every `Z`.
pub fn find_violation(
    model: &SystemModel,
    h: &Polynomial,
    u: &[Polynomial],
    segments: usize,
    seed: u64,
) -> Option<Vec<f64>> {
    let base = zcbf_base(model, h, u);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: Option<(f64, Vec<f64>)> = None;
    let scale = 1.0 + base.max_abs_coeff();
    for _ in 0..segments {
        let a = model.state_region.sample(&mut rng);
        let b = model.state_region.sample(&mut rng);
        let (ha, hb) = (h.evaluate(&a), h.evaluate(&b));
        if ha.signum() == hb.signum() {
            continue;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        let at = |t: f64| -> Vec<f64> { a.iter().zip(&b).map(|(x, y)| x + t * (y - x)).collect() };
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if h.evaluate(&at(mid)).signum() == ha.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let x = at(0.5 * (lo + hi));
        let v = base.evaluate(&x);
        if v < -1e-9 * scale && worst.as_ref().is_none_or(|(w, _)| v < *w) {
            worst = Some((v, x));
        }
    }
    worst.map(|(_, x)| x)
}
