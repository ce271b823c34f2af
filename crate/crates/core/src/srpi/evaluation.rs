use super::barrier::multiplier_certificates;
use super::{closed_loop_derivative, integral, multiplier_degree, DeltaMode, SdpRunner, SrpiError};
use crate::model::SystemModel;
use crate::poly::{monomial_basis, Monomial, Polynomial};
use crate::sos::{AffineExpr, GramCertificate, PolyExpr, SosProgram};

#[derive(Debug, Clone)]
pub struct EvaluationSettings {
    pub v_degree: u32,
    pub k_delta: f64,
    pub delta_mode: DeltaMode,
    pub min_multiplier: u32,
    /// Factor converting integrals over the model's coordinates into the
    /// reported ones.
    pub volume_scale: f64,
}

/// Result of one policy evaluation. The relaxation is reported as
/// `delta = beta_u + d_max'R d_max + slack`; the constant part is forced by
/// `L(V, u)(0) = -(beta_u + d_max'R d_max)` and only the slack is penalized.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub v: Polynomial,
    pub delta: f64,
    /// Scalar slack, or the mean of the polynomial slack over the
    /// performance region.
    pub slack: f64,
    pub slack_poly: Option<Polynomial>,
    /// `integral of V over the performance region`.
    pub integral: f64,
    /// `integral + k_delta * slack^2`.
    pub objective: f64,
    pub certificates: Vec<GramCertificate>,
    pub min_eig: f64,
}

/// `grad V'(f + g u)` with `V` a decision polynomial.
fn derivative_expr(model: &SystemModel, basis: &[Monomial], vars: &[crate::sos::VarId], u: &[Polynomial]) -> PolyExpr {
    let mut e = PolyExpr::zero(model.n());
    for (m, &v) in basis.iter().zip(vars) {
        let p = closed_loop_derivative(model, &Polynomial::monomial(m.clone(), 1.0), u);
        e.add_var_term(v, &p);
    }
    e
}

/// Minimizes `integral V + k_delta slack^2` subject to `V` SOS,
/// `L(V, u) + delta >= 0` and `V_prev - V >= 0` on the state region.
pub fn policy_evaluation(
    model: &SystemModel,
    u: &[Polynomial],
    v_prev: Option<&Polynomial>,
    beta_u: f64,
    settings: &EvaluationSettings,
    runner: &mut SdpRunner,
) -> Result<Evaluation, SrpiError> {
    let n = model.n();
    let mut prog = SosProgram::new(n);
    let vpoly = prog.declare_poly("V", monomial_basis(n, 2, settings.v_degree))?;
    let vexpr = vpoly.expr();
    prog.add_sos("V.psd", vexpr.clone())?;

    let (slack_expr, slack_mean, slack_sos) = match settings.delta_mode {
        DeltaMode::Scalar => {
            let blk = prog.declare_psd("delta", 1)?;
            let d = blk.get(0, 0);
            (
                PolyExpr::from_var(d, Polynomial::constant(n, 1.0)),
                AffineExpr::var(d),
                None,
            )
        }
        DeltaMode::Polynomial => {
            let s = prog.declare_sos_poly("delta", monomial_basis(n, 0, 1))?;
            let e = s.expr();
            let vol = model.perf_region.volume();
            let mean = integral(&e, &model.perf_region).scale(1.0 / vol);
            (e, mean, Some(s))
        }
    };
    let t = prog.declare_scalar("delta.epi.t")?;
    prog.add_psd(
        "delta.epi",
        &[
            vec![AffineExpr::var(t), slack_mean.clone()],
            vec![slack_mean.clone(), AffineExpr::constant(1.0)],
        ],
    )?;

    let bellman = derivative_expr(model, vpoly.basis(), vpoly.vars(), u)
        .scale(-1.0)
        .add_poly(&-&(&model.q + &model.control_cost(u)))
        .add(&slack_expr);
    let md = multiplier_degree(bellman.degree(), settings.min_multiplier);
    let (_, bellman_mults) = prog.add_sos_on_box("bellman", bellman, &model.state_region, md)?;

    let mut monotone_mults = Vec::new();
    if let Some(prev) = v_prev {
        let expr = PolyExpr::from_poly(prev.clone()).sub(&vexpr);
        let md = multiplier_degree(expr.degree(), settings.min_multiplier);
        monotone_mults = prog.add_sos_on_box("monotone", expr, &model.state_region, md)?.1;
    }

    let integral_v = integral(&vexpr, &model.perf_region).scale(settings.volume_scale);
    prog.set_objective(integral_v.add(&AffineExpr::term(t, settings.k_delta)));
    let sol = runner.solve_certified(&prog, "evaluation")?;

    let v = sol.poly(&vpoly);
    let slack = sol.affine(&slack_mean).max(0.0);
    let integral = sol.affine(&integral_v);
    let mut certificates = sol.certificates.clone();
    certificates.extend(multiplier_certificates(&sol, &bellman_mults));
    certificates.extend(multiplier_certificates(&sol, &monotone_mults));
    let min_eig = certificates
        .iter()
        .map(|c| c.min_eig)
        .fold(f64::INFINITY, f64::min);
    Ok(Evaluation {
        v,
        delta: beta_u + model.disturbance_cost() + slack,
        slack,
        slack_poly: slack_sos.map(|s| sol.sos_poly(&s)),
        integral,
        objective: integral + settings.k_delta * slack * slack,
        certificates,
        min_eig,
    })
}
