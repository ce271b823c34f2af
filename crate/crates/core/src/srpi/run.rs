use std::time::Instant;

use super::barrier::{multiplier_certificates, ZcbfCertificate};
use super::evaluation::{Evaluation, EvaluationSettings};
use super::improvement::Improvement;
use super::{
    bound_u_max, closed_loop_derivative, find_barrier, find_barrier_with_flow, multiplier_degree,
    policy_evaluation, policy_improvement, u_safe_basis, verify_zcbf, BarrierMode, Policy, Scaling,
    SdpRunner, SolveStats, SrpiConfig, SrpiError,
};
use crate::model::{solve_care, BarrierFunction, SafetySpec, SystemModel};
use crate::poly::{quadratic_form, Monomial, Polynomial};
use crate::sdp::SdpStatus;
use crate::sos::{AffineExpr, CertTolerance, GramCertificate, PolyExpr, SosProgram};

/// Certified test of `V_prev - V <= threshold` on the state region.
#[derive(Debug, Clone)]
pub struct StopCheck {
    pub threshold: f64,
    pub status: SdpStatus,
    pub certified: bool,
    /// Gram certificate of `threshold - (V_prev - V) - sum_j s_j g_j`, in
    /// scaled coordinates.
    pub certificate: Option<GramCertificate>,
    pub multipliers: Vec<GramCertificate>,
}

/// One evaluation/improvement round. Polynomials are in the model's
/// coordinates; certificates are in scaled coordinates.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub index: usize,
    pub v: Polynomial,
    pub delta: f64,
    pub slack: f64,
    pub beta_u: f64,
    pub objective: f64,
    /// Policy certified by `v`.
    pub policy: Policy,
    /// Improved policy handed to the next round.
    pub next_policy: Policy,
    pub certificates: Vec<GramCertificate>,
    pub min_eig: f64,
    pub stop: Option<StopCheck>,
    /// Least slack for the previous value function under this round's
    /// policy.
    pub chain_slack: Option<f64>,
    pub guard: bool,
    /// The evaluation SDP failed and `v` is the previous value function,
    /// certified with the least slack for this round's policy.
    pub held: bool,
    pub solves: Vec<SolveStats>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Threshold,
    MaxIterations,
    Failure,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::Threshold => "threshold",
            StopReason::MaxIterations => "max_iterations",
            StopReason::Failure => "failure",
        })
    }
}

#[derive(Debug, Clone)]
pub struct InitResult {
    pub v0: Polynomial,
    pub policy: Policy,
    pub inflation: f64,
    pub slack: f64,
    pub zcbf: Option<ZcbfCertificate>,
    /// `(inflation, least slack)` for every attempt.
    pub attempts: Vec<(f64, f64)>,
}

#[derive(Debug)]
pub struct SrpiRun {
    pub config: SrpiConfig,
    pub scaling: Scaling,
    /// The model in scaled coordinates, as used by every program.
    pub scaled_model: SystemModel,
    pub threshold: f64,
    pub init: InitResult,
    pub records: Vec<IterationRecord>,
    pub value: Polynomial,
    pub policy: Policy,
    pub barrier: Option<BarrierFunction>,
    pub stop: StopReason,
    pub failure: Option<SrpiError>,
    pub solves: Vec<SolveStats>,
}

/// Default stopping threshold: `1e-3` times the volume of the performance
/// region.
pub fn stop_threshold(model: &SystemModel, cfg: &SrpiConfig) -> f64 {
    cfg.stop_threshold
        .unwrap_or_else(|| 1e-3 * model.perf_region.volume())
}

/// Least `slack >= 0`, if certified, with `L(V, u) + beta + d'Rd + slack >= 0`
/// on the state region.
pub fn min_relaxation(
    model: &SystemModel,
    v: &Polynomial,
    u: &[Polynomial],
    min_multiplier: u32,
    runner: &mut SdpRunner,
) -> Result<Option<f64>, SrpiError> {
    Ok(relaxation(model, v, u, min_multiplier, runner)?.map(|(s, _)| s))
}

fn relaxation(
    model: &SystemModel,
    v: &Polynomial,
    u: &[Polynomial],
    min_multiplier: u32,
    runner: &mut SdpRunner,
) -> Result<Option<(f64, Vec<GramCertificate>)>, SrpiError> {
    let n = model.n();
    let mut prog = SosProgram::new(n);
    let slack = prog.declare_scalar("slack")?;
    let residual = -&(&(&closed_loop_derivative(model, v, u) + &model.q) + &model.control_cost(u));
    let expr = PolyExpr::from_poly(residual).add(&PolyExpr::from_var(slack, Polynomial::constant(n, 1.0)));
    let md = multiplier_degree(expr.degree(), min_multiplier);
    prog.add_sos_on_box("relaxation", expr, &model.state_region, md)?;
    prog.set_objective(AffineExpr::var(slack));
    let sol = runner.solve(&prog, "relaxation")?;
    Ok(sol
        .certified
        .then(|| (sol.value(slack).max(0.0), sol.certificates.clone())))
}

fn improve(
    model: &SystemModel,
    v: &Polynomial,
    h: Option<&Polynomial>,
    cfg: &SrpiConfig,
    basis: &[Monomial],
    runner: &mut SdpRunner,
) -> Result<Improvement, SrpiError> {
    match policy_improvement(model, v, h, cfg.z_degree, basis, cfg.multiplier_degree, runner) {
        Err(SrpiError::Refused { .. }) => {
            log::info!("improvement refused; raising the Z degree once");
            policy_improvement(model, v, h, cfg.z_degree + 2, basis, cfg.multiplier_degree, runner)
        }
        other => other,
    }
}

fn relaxation_tolerance(model: &SystemModel, cfg: &SrpiConfig) -> f64 {
    cfg.init_tolerance * model.q.max_abs_coeff().max(1.0)
}

/// `V^0 = s x'Px` from the Riccati equation of the linearization, with
/// `s = 2^k` doubled until the relaxation slack of `L(V^0, u^1)` is within
/// the tolerance or stops improving; the least-slack attempt wins. `u^1`
/// comes from policy improvement on `V^0`.
pub fn init_policy(
    model: &SystemModel,
    h: Option<&Polynomial>,
    cfg: &SrpiConfig,
    runner: &mut SdpRunner,
) -> Result<InitResult, SrpiError> {
    let n = model.n();
    let (a, b) = model.linearize();
    let p = solve_care(&a, &b, &model.q_matrix(), &model.r)?;
    let x: Vec<Polynomial> = (0..n).map(|i| Polynomial::var(n, i)).collect();
    let base = quadratic_form(&x, p.transpose().as_slice());
    let basis = u_safe_basis(n, cfg.u_safe_degree(), None);
    let tol = relaxation_tolerance(model, cfg);
    let mut attempts = Vec::new();
    let mut best: Option<InitResult> = None;
    let mut rising = 0;
    for k in 0..=cfg.init_doublings {
        let s = f64::powi(2.0, k as i32);
        let v0 = base.scale(s);
        let imp = match improve(model, &v0, h, cfg, &basis, runner) {
            Ok(imp) => imp,
            Err(SrpiError::Refused { reason, .. }) => {
                log::info!("init s={s}: improvement refused ({reason})");
                attempts.push((s, f64::INFINITY));
                continue;
            }
            Err(e) => return Err(e),
        };
        let slack = min_relaxation(model, &v0, &imp.policy.u, cfg.multiplier_degree, runner)?
            .unwrap_or(f64::INFINITY);
        log::info!("init s={s}: least slack {slack:.3e}");
        attempts.push((s, slack));
        if !slack.is_finite() {
            continue;
        }
        let best_slack = best.as_ref().map_or(f64::INFINITY, |b| b.slack);
        if slack < best_slack {
            rising = 0;
            best = Some(InitResult {
                v0,
                policy: imp.policy,
                inflation: s,
                slack,
                zcbf: imp.zcbf,
                attempts: Vec::new(),
            });
        } else {
            rising += 1;
        }
        if slack <= tol || rising >= 2 {
            break;
        }
    }
    match best {
        Some(mut b) => {
            b.attempts = attempts;
            if b.slack > tol {
                log::info!(
                    "init: no inflation zeroes the relaxation; using s={} with slack {:.3e}",
                    b.inflation,
                    b.slack
                );
            }
            Ok(b)
        }
        None => Err(SrpiError::Init(format!(
            "no inflation up to 2^{} gives a certified initial pair; attempts (s, slack): {}",
            cfg.init_doublings,
            attempts
                .iter()
                .map(|(s, d)| format!("({s}, {d:.3e})"))
                .collect::<Vec<_>>()
                .join(" ")
        ))),
    }
}

fn check_stop(
    model: &SystemModel,
    v_prev: &Polynomial,
    v: &Polynomial,
    threshold: f64,
    min_multiplier: u32,
    runner: &mut SdpRunner,
) -> Result<StopCheck, SrpiError> {
    let n = model.n();
    let mut prog = SosProgram::new(n);
    let expr = PolyExpr::from_poly((v - v_prev).add_constant(threshold));
    let md = multiplier_degree(expr.degree(), min_multiplier);
    let (_, mults) = prog.add_sos_on_box("stop", expr, &model.state_region, md)?;
    let sol = runner.solve(&prog, "stop")?;
    Ok(StopCheck {
        threshold,
        status: sol.status,
        certified: sol.certified,
        certificate: sol.certificate("stop").cloned(),
        multipliers: multiplier_certificates(&sol, &mults),
    })
}

/// Re-checks a stopping certificate from the two value functions alone:
/// rebuilds `threshold - (V_prev - V) - sum_j s_j g_j` in scaled
/// coordinates and tests reconstruction and eigenvalues of every Gram
/// matrix.
pub fn validate_stop(
    stop: &StopCheck,
    v_prev: &Polynomial,
    v: &Polynomial,
    run: &SrpiRun,
    tol: &CertTolerance,
) -> bool {
    let Some(cert) = &stop.certificate else {
        return false;
    };
    let model = &run.scaled_model;
    let n = model.n();
    let vp = run.scaling.to_z(v_prev);
    let vz = run.scaling.to_z(v);
    let mut target = (&vz - &vp).add_constant(stop.threshold);
    let ineqs = model.state_region.inequalities();
    if stop.multipliers.len() != ineqs.len() {
        return false;
    }
    for (s, g) in stop.multipliers.iter().zip(&ineqs) {
        if s.min_eig < -tol.eigenvalue {
            return false;
        }
        target = &target - &(&s.polynomial(n) * g);
    }
    cert.validate(&target, tol)
}

fn synthesize_barrier(
    model: &SystemModel,
    spec: &SafetySpec,
    cfg: &SrpiConfig,
    runner: &mut SdpRunner,
) -> Result<BarrierFunction, SrpiError> {
    if cfg.barrier_mode == BarrierMode::Flow {
        for degree in [cfg.barrier_degree, cfg.barrier_degree + 2] {
            match find_barrier_with_flow(model, spec, degree, cfg.multiplier_degree, runner) {
                Ok(b) => return Ok(b),
                Err(SrpiError::Refused { reason, .. }) => {
                    log::info!("flow barrier of degree {degree} refused: {reason}");
                }
                Err(e) => return Err(e),
            }
        }
        log::warn!("no flow-compatible barrier; using separation only");
    }
    find_barrier(spec, &model.state_region, cfg.barrier_degree, cfg.multiplier_degree, runner)
}

/// Controller built from the barrier alone: the least-energy `u_safe`
/// satisfying the zeroing condition, with no optimal part.
#[derive(Debug, Clone)]
pub struct SafeOnly {
    pub policy: Policy,
    pub barrier: BarrierFunction,
    pub solves: Vec<SolveStats>,
}

pub fn synthesize_safe_only(
    model: &SystemModel,
    spec: &SafetySpec,
    cfg: &SrpiConfig,
) -> Result<SafeOnly, SrpiError> {
    cfg.validate()?;
    let scaling = Scaling::for_model(model);
    let zm = scaling.model(model)?;
    let mut runner = SdpRunner::new(cfg.solver, cfg.dump_dir.clone());
    let b = synthesize_barrier(&zm, &scaling.spec(spec), cfg, &mut runner)?;
    let basis = u_safe_basis(zm.n(), cfg.u_safe_degree(), None);
    let zero = Polynomial::zero(zm.n());
    let imp = improve(&zm, &zero, Some(&b.h), cfg, &basis, &mut runner)?;
    let cert = match verify_zcbf(&zm, &b.h, &imp.policy.u, cfg.z_degree, cfg.multiplier_degree, &mut runner) {
        Err(SrpiError::Refused { .. }) => {
            verify_zcbf(&zm, &b.h, &imp.policy.u, cfg.z_degree + 2, cfg.multiplier_degree, &mut runner)?
        }
        other => other?,
    };
    let to_x = |p: &Polynomial| scaling.to_x(p);
    let inv: Vec<f64> = scaling.d.iter().map(|d| 1.0 / d).collect();
    Ok(SafeOnly {
        policy: imp.policy.scale_vars(&inv),
        barrier: BarrierFunction {
            h: to_x(&b.h),
            z: to_x(&cert.z),
            margin: b.margin,
            separation: b.separation,
            zcbf: Some(cert.certificate),
        },
        solves: runner.log,
    })
}

struct Current {
    v: Polynomial,
    slack: f64,
    integral: f64,
    objective: f64,
    policy: Policy,
    zcbf: Option<ZcbfCertificate>,
}

/// Runs initialization and up to `max_iter` evaluation/improvement rounds.
/// Initialization failures are errors; later failures end the run with the
/// records produced so far and `failure` set.
pub fn run_srpi(
    model: &SystemModel,
    spec: Option<&SafetySpec>,
    cfg: &SrpiConfig,
) -> Result<SrpiRun, SrpiError> {
    cfg.validate()?;
    let scaling = Scaling::for_model(model);
    let zm = scaling.model(model)?;
    let mut runner = SdpRunner::new(cfg.solver, cfg.dump_dir.clone());
    let threshold = stop_threshold(model, cfg);
    let to_x = |p: &Polynomial| scaling.to_x(p);
    let inv: Vec<f64> = scaling.d.iter().map(|d| 1.0 / d).collect();

    let barrier_z = match spec {
        Some(s) => Some(synthesize_barrier(&zm, &scaling.spec(s), cfg, &mut runner)?),
        None => None,
    };
    let h = barrier_z.as_ref().map(|b| b.h.clone());
    let start = Instant::now();
    let init = init_policy(&zm, h.as_ref(), cfg, &mut runner)?;
    let settings = EvaluationSettings {
        v_degree: cfg.v_degree,
        k_delta: cfg.k_delta,
        delta_mode: cfg.delta_mode,
        min_multiplier: cfg.multiplier_degree,
        volume_scale: scaling.jacobian(),
    };
    let integral0 = init.v0.integrate_box(&zm.perf_region).map_err(crate::model::ModelError::from)? * scaling.jacobian();
    let beta0 = bound_u_max(&zm, &init.policy.u, cfg.beta_mode, cfg.multiplier_degree, &mut runner)?;
    let mut records = vec![IterationRecord {
        index: 0,
        v: to_x(&init.v0),
        delta: beta0 + zm.disturbance_cost() + init.slack,
        slack: init.slack,
        beta_u: beta0,
        objective: integral0 + cfg.k_delta * init.slack * init.slack,
        policy: init.policy.scale_vars(&inv),
        next_policy: init.policy.scale_vars(&inv),
        certificates: Vec::new(),
        min_eig: f64::NAN,
        stop: None,
        chain_slack: None,
        guard: false,
        held: false,
        solves: runner.log.clone(),
        seconds: start.elapsed().as_secs_f64(),
    }];
    let mut solves_seen = runner.log.len();

    let mut cur = Current {
        v: init.v0.clone(),
        slack: init.slack,
        integral: integral0,
        objective: records[0].objective,
        policy: init.policy.clone(),
        zcbf: init.zcbf.clone(),
    };
    let mut next = (init.policy.clone(), init.zcbf.clone());
    let mut basis_limit: Option<usize> = None;
    let mut stop = StopReason::MaxIterations;
    let mut failure = None;
    let tol = relaxation_tolerance(&zm, cfg);

    for i in 1..=cfg.max_iter {
        let t0 = Instant::now();
        let step = (|| -> Result<(IterationRecord, Current, (Policy, Option<ZcbfCertificate>)), SrpiError> {
            let mut guard = false;
            let (mut policy, mut zcbf) = next.clone();
            let mut chain_slack = None;
            if i > 1 {
                let s = min_relaxation(&zm, &cur.v, &policy.u, cfg.multiplier_degree, &mut runner)?;
                chain_slack = Some(s.unwrap_or(f64::INFINITY));
                if !s.is_some_and(|s| s <= cur.slack + tol + 1e-6 * cur.slack) {
                    log::info!("iteration {i}: previous value function infeasible for the new policy; keeping the old one");
                    guard = true;
                    policy = cur.policy.clone();
                    zcbf = cur.zcbf.clone();
                }
            }
            let held = std::cell::Cell::new(false);
            let evaluate = |policy: &Policy, runner: &mut SdpRunner| -> Result<(f64, Evaluation), SrpiError> {
                let beta = bound_u_max(&zm, &policy.u, cfg.beta_mode, cfg.multiplier_degree, runner)?;
                match policy_evaluation(&zm, &policy.u, Some(&cur.v), beta, &settings, runner) {
                    Err(e @ SrpiError::Solver { .. }) => {
                        let Some((slack, certificates)) =
                            relaxation(&zm, &cur.v, &policy.u, cfg.multiplier_degree, runner)?
                        else {
                            return Err(e);
                        };
                        log::info!("iteration {i}: {e}; holding the previous value function");
                        held.set(true);
                        let min_eig = certificates.iter().map(|c| c.min_eig).fold(f64::INFINITY, f64::min);
                        Ok((
                            beta,
                            Evaluation {
                                v: cur.v.clone(),
                                delta: beta + zm.disturbance_cost() + slack,
                                slack,
                                slack_poly: None,
                                integral: cur.integral,
                                objective: cur.integral + cfg.k_delta * slack * slack,
                                certificates,
                                min_eig,
                            },
                        ))
                    }
                    other => other.map(|e| (beta, e)),
                }
            };
            let (mut beta, mut eval) = evaluate(&policy, &mut runner)?;
            // A held value function must not cost more than the round it repeats.
            let slop = if held.get() { 0.0 } else { 1e-6 * cur.objective.abs().max(1.0) };
            if eval.objective > cur.objective + slop && !guard {
                log::info!("iteration {i}: objective increased; re-evaluating the previous policy");
                guard = true;
                policy = cur.policy.clone();
                zcbf = cur.zcbf.clone();
                (beta, eval) = evaluate(&policy, &mut runner)?;
            }
            if guard {
                let len = basis_limit.unwrap_or_else(|| u_safe_basis(zm.n(), cfg.u_safe_degree(), None).len());
                basis_limit = Some((len / 2).max(1));
            }
            let stop_check = check_stop(&zm, &cur.v, &eval.v, threshold, cfg.multiplier_degree, &mut runner)?;
            let basis = u_safe_basis(zm.n(), cfg.u_safe_degree(), basis_limit);
            let imp = improve(&zm, &eval.v, h.as_ref(), cfg, &basis, &mut runner)?;
            let record = IterationRecord {
                index: i,
                v: to_x(&eval.v),
                delta: eval.delta,
                slack: eval.slack,
                beta_u: beta,
                objective: eval.objective,
                policy: policy.scale_vars(&inv),
                next_policy: imp.policy.scale_vars(&inv),
                certificates: eval.certificates.clone(),
                min_eig: eval.min_eig,
                stop: Some(stop_check),
                chain_slack,
                guard,
                held: held.get(),
                solves: Vec::new(),
                seconds: 0.0,
            };
            let current = Current {
                v: eval.v,
                slack: eval.slack,
                integral: eval.integral,
                objective: eval.objective,
                policy,
                zcbf,
            };
            Ok((record, current, (imp.policy, imp.zcbf)))
        })();
        match step {
            Ok((mut record, current, upcoming)) => {
                record.solves = runner.log[solves_seen..].to_vec();
                solves_seen = runner.log.len();
                record.seconds = t0.elapsed().as_secs_f64();
                log::info!(
                    "iteration {i}: objective {:.6e} delta {:.3e} stop {}",
                    record.objective,
                    record.delta,
                    record.stop.as_ref().is_some_and(|s| s.certified)
                );
                let done = record.stop.as_ref().is_some_and(|s| s.certified);
                records.push(record);
                cur = current;
                next = upcoming;
                if done && cfg.stop_early {
                    stop = StopReason::Threshold;
                    break;
                }
            }
            Err(e) => {
                log::warn!("iteration {i} failed: {e}");
                stop = StopReason::Failure;
                failure = Some(e);
                break;
            }
        }
    }
    if stop == StopReason::MaxIterations
        && records
            .last()
            .and_then(|r| r.stop.as_ref())
            .is_some_and(|s| s.certified)
    {
        stop = StopReason::Threshold;
    }

    let barrier = barrier_z.map(|b| BarrierFunction {
        h: to_x(&b.h),
        z: cur.zcbf.as_ref().map(|c| to_x(&c.z)).unwrap_or_else(|| Polynomial::zero(model.n())),
        margin: b.margin,
        separation: b.separation,
        zcbf: cur.zcbf.as_ref().map(|c| c.certificate.clone()),
    });
    Ok(SrpiRun {
        config: cfg.clone(),
        value: to_x(&cur.v),
        policy: cur.policy.scale_vars(&inv),
        scaling,
        scaled_model: zm,
        threshold,
        init,
        records,
        barrier,
        stop,
        failure,
        solves: runner.log,
    })
}
