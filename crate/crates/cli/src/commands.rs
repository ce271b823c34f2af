use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use satisfice::model::{SafetySpec, SystemModel};
use satisfice::poly::Polynomial;
use satisfice::sim::{
    accumulate_cost, check_safety, integrate, sig12, simulate_many, trajectory_csv, SafetyCheck, Trajectory,
    BARRIER_TOL,
};
use satisfice::srpi::{
    find_barrier, find_barrier_with_flow, iteration_csv, manifest, parse_polynomial_file, polynomial_file,
    run_srpi, synthesize_safe_only, verify_zcbf, write_atomic, BarrierMode, Scaling, SdpRunner, SrpiError,
    ZcbfCertificate,
};

use crate::config::{read, Mode, RunConfig};
use crate::{CliError, CompareArgs, SimulateArgs, SynthesizeArgs, VerifyArgs};

/// Tolerance on the unsafe-set inequalities when scanning trajectories.
pub const SAFETY_TOL: f64 = 1e-2;
/// Relative slack of the printed `J <= V(x0)` check.
pub const COST_BOUND_TOL: f64 = 1e-2;

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    write_atomic(&dir.join(name), contents).map_err(CliError::from)
}

/// Controller artifact: `u1..um`, optionally the value function `V`.
#[derive(Debug, Clone)]
pub struct ControllerFile {
    pub u: Vec<Polynomial>,
    pub v: Option<Polynomial>,
}

pub fn load_controller(path: &Path, model: &SystemModel) -> Result<ControllerFile, CliError> {
    let (n, entries) = parse_polynomial_file(&read(path)?)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if n != model.n() {
        return Err(CliError::Config(format!(
            "{}: {n} variables, model has {}",
            path.display(),
            model.n()
        )));
    }
    let get = |name: &str| entries.iter().find(|(k, _)| k == name).map(|(_, p)| p.clone());
    let u = (1..=model.m())
        .map(|i| get(&format!("u{i}")).ok_or_else(|| CliError::Config(format!("{}: missing u{i}", path.display()))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ControllerFile { u, v: get("V") })
}

pub fn load_barrier(path: &Path, model: &SystemModel) -> Result<Polynomial, CliError> {
    let (n, entries) = parse_polynomial_file(&read(path)?)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if n != model.n() {
        return Err(CliError::Config(format!("{}: {n} variables, model has {}", path.display(), model.n())));
    }
    entries
        .into_iter()
        .find(|(k, _)| k == "h")
        .map(|(_, p)| p)
        .ok_or_else(|| CliError::Config(format!("{}: missing h", path.display())))
}

fn controller_text(u: &[Polynomial], v: Option<&Polynomial>) -> String {
    let n = u[0].nvars();
    let mut entries: Vec<(String, &Polynomial)> =
        u.iter().enumerate().map(|(i, p)| (format!("u{}", i + 1), p)).collect();
    if let Some(v) = v {
        entries.push(("V".into(), v));
    }
    polynomial_file(n, &entries)
}

fn barrier_text(h: &Polynomial, z: &Polynomial) -> String {
    polynomial_file(h.nvars(), &[("h".into(), h), ("Z".into(), z)])
}

pub fn synthesize(args: &SynthesizeArgs) -> Result<(), CliError> {
    let mut cfg = args.common.resolve()?;
    if let Some(n) = args.iters {
        cfg.srpi.max_iter = n;
        cfg.srpi.stop_early = false;
    }
    if let Some(d) = args.degree {
        cfg.srpi.v_degree = d;
    }
    if let Some(k) = args.kdelta {
        cfg.srpi.k_delta = k;
    }
    if let Some(m) = args.mode {
        cfg.mode = m;
    }
    let (model, spec) = cfg.load_model()?;
    let out = cfg.out.clone();
    let echo = cfg.echo();
    write(&out, "config.toml", &echo)?;

    if cfg.mode == Mode::SafeOnly {
        let spec = spec.ok_or_else(|| CliError::Config("safe-only synthesis needs a safety spec".into()))?;
        let safe = synthesize_safe_only(&model, &spec, &cfg.srpi)?;
        let z = &safe.barrier.z;
        write(&out, "controller.txt", &controller_text(&safe.policy.u, None))?;
        write(&out, "barrier.txt", &barrier_text(&safe.barrier.h, z))?;
        let mut m = format!(
            "[run]\nmodel = {}\nmode = safe-only\nbarrier_margin = {:e}\nbarrier_zcbf_certified = true\nsolves = {}\n",
            model.name,
            safe.barrier.margin,
            safe.solves.len()
        );
        m.push_str("\n[config]\n");
        m.push_str(echo.trim_end());
        m.push('\n');
        write(&out, "manifest.txt", &m)?;
        println!("safe-only controller written to {}", out.display());
        return Ok(());
    }

    let spec = if cfg.mode == Mode::OptimalOnly { None } else { spec };
    if cfg.mode == Mode::Satisficing && spec.is_none() {
        log::warn!("model has no safety spec; synthesizing without a barrier");
    }
    let run = run_srpi(&model, spec.as_ref(), &cfg.srpi)?;
    write(&out, "manifest.txt", &manifest(&run, &model.name, &echo))?;
    write(&out, "iterations.csv", &iteration_csv(&run))?;
    write(&out, "controller.txt", &controller_text(&run.policy.u, Some(&run.value)))?;
    if let Some(b) = &run.barrier {
        write(&out, "barrier.txt", &barrier_text(&b.h, &b.z))?;
    }
    let last = run.records.last().expect("initialization record");
    println!(
        "{}: stop={} iterations={} objective={} -> {}",
        model.name,
        run.stop,
        run.records.len() - 1,
        sig12(run.records[0].objective),
        sig12(last.objective)
    );
    println!("artifacts in {}", out.display());
    match run.failure {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn zcbf_with_escalation(
    model: &SystemModel,
    h: &Polynomial,
    u: &[Polynomial],
    cfg: &RunConfig,
    runner: &mut SdpRunner,
) -> Result<ZcbfCertificate, SrpiError> {
    let z = cfg.srpi.z_degree;
    match verify_zcbf(model, h, u, z, cfg.srpi.multiplier_degree, runner) {
        Err(SrpiError::Refused { .. }) => verify_zcbf(model, h, u, z + 2, cfg.srpi.multiplier_degree, runner),
        other => other,
    }
}

pub fn verify(args: &VerifyArgs) -> Result<(), CliError> {
    let cfg = args.common.resolve()?;
    let (model, spec) = cfg.load_model()?;
    let ctrl = load_controller(&args.controller, &model)?;
    let scaling = Scaling::for_model(&model);
    let zm = scaling.model(&model).map_err(SrpiError::from)?;
    let mut runner = SdpRunner::new(cfg.srpi.solver, cfg.srpi.dump_dir.clone());
    let hz = match &args.barrier {
        Some(p) => scaling.to_z(&load_barrier(p, &model)?),
        None => {
            let spec = spec
                .as_ref()
                .ok_or_else(|| CliError::Config("no barrier file and no safety spec to search one".into()))?;
            let zs = scaling.spec(spec);
            let b = match cfg.srpi.barrier_mode {
                BarrierMode::Flow => find_barrier_with_flow(&zm, &zs, cfg.srpi.barrier_degree, cfg.srpi.multiplier_degree, &mut runner)
                    .or_else(|_| find_barrier(&zs, &zm.state_region, cfg.srpi.barrier_degree, cfg.srpi.multiplier_degree, &mut runner))?,
                BarrierMode::Separation => {
                    find_barrier(&zs, &zm.state_region, cfg.srpi.barrier_degree, cfg.srpi.multiplier_degree, &mut runner)?
                }
            };
            println!("separation certified: margin {:e}", b.margin);
            for c in &b.separation {
                println!(
                    "  {}: min_eig {:e} reconstruction {:e}",
                    c.name, c.min_eig, c.reconstruction_error
                );
            }
            println!("h = {}", scaling.to_x(&b.h));
            b.h
        }
    };
    let uz: Vec<Polynomial> = ctrl.u.iter().map(|p| scaling.to_z(p)).collect();
    match zcbf_with_escalation(&zm, &hz, &uz, &cfg, &mut runner) {
        Ok(cert) => {
            println!("zeroing condition certified");
            println!(
                "  {}: min_eig {:e} reconstruction {:e}",
                cert.certificate.name, cert.certificate.min_eig, cert.certificate.reconstruction_error
            );
            for c in &cert.multipliers {
                println!("  {}: min_eig {:e}", c.name, c.min_eig);
            }
            println!("Z = {}", scaling.to_x(&cert.z));
            Ok(())
        }
        Err(SrpiError::Refused { stage, reason, violation }) => {
            println!("refused: {reason}");
            if let Some(z) = violation {
                let x: Vec<f64> = z.iter().zip(&scaling.d).map(|(zi, d)| zi * d).collect();
                println!("violation at x = {}", join(&x));
            }
            Err(CliError::Refused { stage, message: reason })
        }
        Err(e) => Err(e.into()),
    }
}

fn join(x: &[f64]) -> String {
    x.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(",")
}

/// Seeded initial states in the initial set (or the performance region when
/// the model has none) with `h > 0` for every given barrier.
pub fn initial_states(
    model: &SystemModel,
    spec: Option<&SafetySpec>,
    barriers: &[Polynomial],
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>, CliError> {
    let region = spec
        .and_then(|s| s.initial_box.clone())
        .unwrap_or_else(|| model.perf_region.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count.max(1) * 1000 {
        if out.len() == count {
            break;
        }
        let x = region.sample(&mut rng);
        if spec.is_some_and(|s| !s.in_initial(&x)) || barriers.iter().any(|h| h.evaluate(&x) <= 0.0) {
            continue;
        }
        out.push(x);
    }
    if out.len() < count {
        return Err(CliError::Config("could not sample initial states with h > 0".into()));
    }
    Ok(out)
}

/// Verdict text and safety flag: divergence, unsafe-set entry, or leaving
/// the barrier's positive set when no spec is given.
pub fn verdict(traj: &Trajectory, spec: Option<&SafetySpec>, barrier: Option<&Polynomial>) -> (bool, String) {
    if let Some(t) = traj.diverged_at {
        return (false, format!("diverged at t={t}"));
    }
    let v = match (spec, barrier) {
        (Some(s), _) => check_safety(traj, SafetyCheck::Unsafe(s), SAFETY_TOL),
        (None, Some(h)) => check_safety(traj, SafetyCheck::Barrier(h), BARRIER_TOL),
        (None, None) => return (true, "safe (no safety spec)".into()),
    };
    match v.first_violation {
        None => (true, "safe".into()),
        Some(w) => (false, format!("violation at t={} x={}", w.t, join(&w.x))),
    }
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let mut cfg = args.common.resolve()?;
    args.sim.apply(&mut cfg);
    if let Some(x0) = &args.x0 {
        cfg.sim.x0 = Some(x0.clone());
    }
    let (model, spec) = cfg.load_model()?;
    let ctrl = load_controller(&args.controller, &model)?;
    let h = args.barrier.as_deref().map(|p| load_barrier(p, &model)).transpose()?;
    let profiles = cfg.disturbances(model.m(), ctrl.v.as_ref())?;
    let [profile] = profiles.as_slice() else {
        return Err(CliError::Config("simulate takes a single disturbance profile".into()));
    };
    let x0 = match &cfg.sim.x0 {
        Some(x) => x.clone(),
        None => initial_states(&model, spec.as_ref(), h.as_slice(), 1, cfg.seed)?.remove(0),
    };
    let settings = cfg.sim.settings();
    let traj = integrate(&model, &ctrl.u, &x0, profile, &settings).map_err(|e| CliError::Config(e.to_string()))?;
    let (j, jbar) = accumulate_cost(&traj, &model, settings.beta_u);
    let (safe, text) = verdict(&traj, spec.as_ref(), h.as_ref());
    let mut summary = format!(
        "x0 = {}\ndisturbance = {}\nsteps = {}\nverdict = {text}\nJ = {}\nJbar = {}\n",
        join(&x0),
        profile.label(),
        traj.len(),
        sig12(j),
        sig12(jbar)
    );
    if let Some(tail) = traj.tail_bound {
        summary.push_str(&format!("tail_bound = {tail:e}\n"));
    }
    if let Some(h) = &h {
        let b = check_safety(&traj, SafetyCheck::Barrier(h), BARRIER_TOL);
        summary.push_str(&format!("barrier_invariant = {}\n", b.safe));
    }
    if let Some(v) = &ctrl.v {
        if matches!(profile, satisfice::sim::DisturbanceProfile::Zero) && traj.diverged_at.is_none() {
            let bound = v.evaluate(&x0);
            let ok = j <= bound * (1.0 + COST_BOUND_TOL);
            summary.push_str(&format!(
                "cost_bound = {} (J {} <= V(x0) {} * (1 + {COST_BOUND_TOL:e}))\n",
                if ok { "pass" } else { "fail" },
                sig12(j),
                sig12(bound)
            ));
        }
    }
    write(&cfg.out, "trajectory.csv", &trajectory_csv(&traj))?;
    write(&cfg.out, "summary.txt", &summary)?;
    print!("{summary}");
    if safe {
        Ok(())
    } else {
        Err(CliError::Unsafe(text))
    }
}

/// One compare row.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub index: usize,
    pub controller: String,
    pub disturbance: String,
    pub x0_index: usize,
    pub safe: bool,
    pub j: f64,
    pub jbar: f64,
}

pub fn compare(args: &CompareArgs) -> Result<(), CliError> {
    if args.controller.len() < 2 {
        return Err(CliError::Config("compare needs at least two controllers".into()));
    }
    let mut cfg = args.common.resolve()?;
    args.sim.apply(&mut cfg);
    if let Some(s) = args.samples {
        cfg.sim.samples = s;
    }
    let (model, spec) = cfg.load_model()?;
    let ctrls = args
        .controller
        .iter()
        .map(|p| load_controller(p, &model))
        .collect::<Result<Vec<_>, _>>()?;
    let h = args.barrier.as_deref().map(|p| load_barrier(p, &model)).transpose()?;
    let x0s = match &cfg.sim.x0 {
        Some(x) => vec![x.clone()],
        None => initial_states(&model, spec.as_ref(), h.as_slice(), cfg.sim.samples, cfg.seed)?,
    };
    let settings = cfg.sim.settings();
    let mut jobs = Vec::new();
    for (k, c) in ctrls.iter().enumerate() {
        for p in cfg.disturbances(model.m(), c.v.as_ref())? {
            jobs.push((k, p));
        }
    }
    let results: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|(k, p)| {
                let (model, x0s, u) = (&model, &x0s, &ctrls[*k].u);
                s.spawn(move || simulate_many(model, u, x0s, p, &settings))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("simulation thread")).collect()
    });
    let mut rows = Vec::new();
    for ((k, p), trajs) in jobs.iter().zip(results) {
        for (i, t) in trajs.into_iter().enumerate() {
            let t = t.map_err(|e| CliError::Config(e.to_string()))?;
            let (j, jbar) = accumulate_cost(&t, &model, settings.beta_u);
            let (safe, _) = verdict(&t, spec.as_ref(), h.as_ref());
            rows.push(CompareRow {
                index: *k,
                controller: args.controller[*k].display().to_string(),
                disturbance: p.label(),
                x0_index: i,
                safe,
                j,
                jbar,
            });
        }
    }
    let mut csv = String::from("index,controller,disturbance,x0_index,safe,J,Jbar\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.index,
            r.controller,
            r.disturbance,
            r.x0_index,
            r.safe,
            sig12(r.j),
            sig12(r.jbar)
        ));
    }
    let mut x0_csv = String::new();
    for x in &x0s {
        x0_csv.push_str(&x.iter().map(|v| sig12(*v)).collect::<Vec<_>>().join(","));
        x0_csv.push('\n');
    }
    write(&cfg.out, "compare.csv", &csv)?;
    write(&cfg.out, "x0.csv", &x0_csv)?;
    println!("{:<40} {:>8} {:>18} {:>18}", "controller", "safe", "total J", "total Jbar");
    for (k, path) in args.controller.iter().enumerate() {
        let name = path.display().to_string();
        let mine: Vec<&CompareRow> = rows.iter().filter(|r| r.index == k).collect();
        let safe = mine.iter().filter(|r| r.safe).count();
        println!(
            "{:<40} {:>8} {:>18} {:>18}",
            name,
            format!("{safe}/{}", mine.len()),
            sig12(mine.iter().map(|r| r.j).sum()),
            sig12(mine.iter().map(|r| r.jbar).sum())
        );
    }
    Ok(())
}
