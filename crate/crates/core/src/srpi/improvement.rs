use super::barrier::{multiplier_certificates, zcbf_base, ZcbfCertificate};
use super::{extract_controller, multiplier_degree, Policy, SdpRunner, SrpiError};
use crate::model::SystemModel;
use crate::poly::{monomial_basis, Monomial, Polynomial};
use crate::sos::{AffineExpr, GramCertificate, PolyExpr, SosProgram};

#[derive(Debug, Clone)]
pub struct Improvement {
    pub policy: Policy,
    pub zcbf: Option<ZcbfCertificate>,
    /// `trace W`, an upper bound on the coefficient energy of `u_safe`.
    pub trace: f64,
}

/// Monomials of degrees `1..=degree`, truncated to the first `limit`.
pub fn u_safe_basis(n: usize, degree: u32, limit: Option<usize>) -> Vec<Monomial> {
    let mut b = monomial_basis(n, 1, degree);
    if let Some(k) = limit {
        b.truncate(k.max(1));
    }
    b
}

/// `u = u_safe + u_opt(V)` with `u_safe = C m(x)` of least `trace W`,
/// `[[W, C'], [C, R^-1]] PSD`, subject to the zeroing condition for `h`
/// with an SOS multiplier `Z`. Without a barrier `u_safe = 0`.
pub fn policy_improvement(
    model: &SystemModel,
    v: &Polynomial,
    h: Option<&Polynomial>,
    z_degree: u32,
    basis: &[Monomial],
    min_multiplier: u32,
    runner: &mut SdpRunner,
) -> Result<Improvement, SrpiError> {
    let u_opt = extract_controller(model, v).u_opt;
    let Some(h) = h else {
        return Ok(Improvement {
            policy: Policy::unconstrained(u_opt),
            zcbf: None,
            trace: 0.0,
        });
    };
    let n = model.n();
    let m = model.m();
    let k = basis.len();
    let mut prog = SosProgram::new(n);
    let schur = prog.declare_psd("schur", k + m)?;
    let rinv = model.r_inv();
    for a in 0..m {
        for b in a..m {
            prog.add_equality(
                &format!("rinv[{a},{b}]"),
                AffineExpr::var(schur.get(k + a, k + b)),
                rinv[(a, b)],
            );
        }
    }
    let u_safe: Vec<PolyExpr> = (0..m)
        .map(|a| {
            let mut e = PolyExpr::zero(n);
            for (j, mono) in basis.iter().enumerate() {
                e.add_var_term(schur.get(k + a, j), &Polynomial::monomial(mono.clone(), 1.0));
            }
            e
        })
        .collect();

    let z = prog.declare_sos_poly("Z", monomial_basis(n, 0, z_degree / 2))?;
    let hg = model.lie_g(h);
    let mut expr = PolyExpr::from_poly(zcbf_base(model, h, &u_opt)).add(&z.expr().mul_poly(h));
    for (a, us) in u_safe.iter().enumerate() {
        expr = expr.add(&us.mul_poly(&hg[a]));
    }
    let md = multiplier_degree(expr.degree(), min_multiplier);
    let (_, mults) = prog.add_sos_on_box("zcbf", expr, &model.state_region, md)?;
    let mut trace = AffineExpr::default();
    for j in 0..k {
        trace.add_term(schur.get(j, j), 1.0);
    }
    prog.set_objective(trace.clone());
    let sol = runner.solve(&prog, "improvement")?;
    if !sol.certified {
        return Err(SrpiError::Refused {
            stage: "improvement".into(),
            reason: format!("no safe correction of this degree (solver {})", sol.status),
            violation: None,
        });
    }
    let u_safe: Vec<Polynomial> = u_safe.iter().map(|e| sol.expr(e)).collect();
    let mut multipliers: Vec<GramCertificate> = multiplier_certificates(&sol, &mults);
    multipliers.push(GramCertificate::new(
        "Z",
        z.basis().to_vec(),
        sol.matrix(z.gram()),
        &sol.sos_poly(&z),
    ));
    Ok(Improvement {
        policy: Policy::new(u_opt, u_safe),
        zcbf: Some(ZcbfCertificate {
            z: sol.sos_poly(&z),
            certificate: sol.certificate("zcbf").expect("declared").clone(),
            multipliers,
        }),
        trace: sol.affine(&trace),
    })
}
