use super::{multiplier_degree, BetaMode, SdpRunner, SrpiError};
use crate::model::SystemModel;
use crate::poly::Polynomial;
use crate::sos::{AffineExpr, PolyExpr, SosProgram};

/// Smallest certified `gamma` with `gamma - p >= 0` on the state region,
/// escalating the multiplier degree once.
fn certified_max(
    model: &SystemModel,
    p: &Polynomial,
    min_multiplier: u32,
    runner: &mut SdpRunner,
    label: &str,
) -> Result<f64, SrpiError> {
    if p.is_zero() {
        return Ok(0.0);
    }
    let base = multiplier_degree(p.degree(), min_multiplier);
    let mut last = None;
    for md in [base, base + 2] {
        let mut prog = SosProgram::new(model.n());
        let gamma = prog.declare_scalar("gamma")?;
        let expr = PolyExpr::from_var(gamma, Polynomial::constant(model.n(), 1.0))
            .sub(&PolyExpr::from_poly(p.clone()));
        prog.add_sos_on_box("bound", expr, &model.state_region, md)?;
        prog.set_objective(AffineExpr::var(gamma));
        let sol = runner.solve(&prog, label)?;
        if sol.certified {
            return Ok(sol.value(gamma));
        }
        last = Some(sol.status);
    }
    Err(runner.failure(label, last.expect("two attempts")))
}

/// Upper bound `L_p >= max_{x in X} u'Ru`, certified through box
/// multipliers.
pub fn bound_u_max(
    model: &SystemModel,
    u: &[Polynomial],
    mode: BetaMode,
    min_multiplier: u32,
    runner: &mut SdpRunner,
) -> Result<f64, SrpiError> {
    match mode {
        BetaMode::Zero => Ok(0.0),
        BetaMode::Joint => certified_max(model, &model.control_cost(u), min_multiplier, runner, "bound_u"),
        BetaMode::PerElement => {
            let lmax = model.r.clone().symmetric_eigenvalues().max();
            let mut total = 0.0;
            for (k, uk) in u.iter().enumerate() {
                total += certified_max(model, &uk.pow(2), min_multiplier, runner, &format!("bound_u{k}"))?;
            }
            Ok(lmax * total)
        }
    }
}
