//! Closed-loop simulation: RK4 integration under polynomial feedback and
//! bounded matched disturbances, running costs, and safety monitoring.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{SafetySpec, SystemModel};
use crate::poly::{BoxRegion, Polynomial};


#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid simulation settings: {0}")]
    Settings(String),
    #[error("initial state {0:?} lies outside the state region")]
    InitialState(Vec<f64>),
    #[error("controller has {found} inputs, model expects {expected}")]
    Controller { expected: usize, found: usize },
}

/// Disturbance `d(t)`, clipped per input to `[-d_max, d_max]`.
#[derive(Debug, Clone, PartialEq)]
pub enum DisturbanceProfile {
    Zero,
    Constant(Vec<f64>),
    Sinusoid {
        amplitude: f64,
        frequency: f64,
        phase: f64,
    },
    /// Independent uniform samples, one per step.
    UniformRandom { seed: u64 },
    /// Synthetic stress test: `d = d_max * sign(grad(V)' g)`.
    Adversarial { value: Polynomial },
}

impl DisturbanceProfile {
    /// Sinusoid at full amplitude `d_max`.
    pub fn sinusoid(frequency: f64) -> Self {
        DisturbanceProfile::Sinusoid {
            amplitude: f64::INFINITY,
            frequency,
            phase: 0.0,
        }
    }

    /// Short label used in reports.
    pub fn label(&self) -> String {
        match self {
            DisturbanceProfile::Zero => "zero".into(),
            DisturbanceProfile::Constant(_) => "constant".into(),
            DisturbanceProfile::Sinusoid { .. } => "sinusoid".into(),
            DisturbanceProfile::UniformRandom { seed } => format!("random-{seed}"),
            DisturbanceProfile::Adversarial { .. } => "adversarial".into(),
        }
    }
}

struct Source<'a> {
    profile: &'a DisturbanceProfile,
    d_max: &'a [f64],
    rng: Option<ChaCha8Rng>,
    lie_g: Vec<Polynomial>,
}

impl<'a> Source<'a> {
    fn new(profile: &'a DisturbanceProfile, model: &'a SystemModel) -> Self {
        let rng = match profile {
            DisturbanceProfile::UniformRandom { seed } => Some(ChaCha8Rng::seed_from_u64(*seed)),
            _ => None,
        };
        let lie_g = match profile {
            DisturbanceProfile::Adversarial { value } => model.lie_g(value),
            _ => Vec::new(),
        };
        Source {
            profile,
            d_max: &model.d_max,
            rng,
            lie_g,
        }
    }

    fn sample(&mut self, t: f64, x: &[f64]) -> Vec<f64> {
        let m = self.d_max.len();
        let raw: Vec<f64> = match self.profile {
            DisturbanceProfile::Zero => vec![0.0; m],
            DisturbanceProfile::Constant(c) => c.clone(),
            DisturbanceProfile::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => {
                let s = (2.0 * PI * frequency * t + phase).sin();
                self.d_max.iter().map(|dm| amplitude.min(*dm) * s).collect()
            }
            DisturbanceProfile::UniformRandom { .. } => {
                let rng = self.rng.as_mut().expect("seeded");
                self.d_max
                    .iter()
                    .map(|&dm| if dm > 0.0 { rng.gen_range(-dm..=dm) } else { 0.0 })
                    .collect()
            }
            DisturbanceProfile::Adversarial { .. } => self
                .lie_g
                .iter()
                .zip(self.d_max)
                .map(|(p, dm)| {
                    let v = p.evaluate(x);
                    if v == 0.0 {
                        0.0
                    } else {
                        dm * v.signum()
                    }
                })
                .collect(),
        };
        raw.iter()
            .zip(self.d_max)
            .map(|(v, dm)| v.clamp(-dm, *dm))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSettings {
    pub dt: f64,
    pub horizon: f64,
    /// Input bound entering the modified reward.
    pub beta_u: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            dt: 1e-3,
            horizon: 20.0,
            beta_u: 0.0,
        }
    }
}

/// Uniformly sampled closed-loop run with running costs `J` (reward
/// `q + u'Ru`) and `Jbar` (adds `d_max'R d_max + beta_u`).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub t: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub d: Vec<Vec<f64>>,
    pub j: Vec<f64>,
    pub jbar: Vec<f64>,
    /// Time at which the state left ten times the state region.
    pub diverged_at: Option<f64>,
    /// Set when the reward has not decayed below 1e-6 at the final time:
    /// `|r(x(T), u(T))| * 10 * dt`.
    pub tail_bound: Option<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn final_state(&self) -> &[f64] {
        self.x.last().expect("trajectory has at least the initial sample")
    }

    /// Final `(J, Jbar)`.
    pub fn costs(&self) -> (f64, f64) {
        (
            self.j.last().copied().unwrap_or(0.0),
            self.jbar.last().copied().unwrap_or(0.0),
        )
    }
}

fn eval_all(ps: &[Polynomial], x: &[f64]) -> Vec<f64> {
    ps.iter().map(|p| p.evaluate(x)).collect()
}

fn axpy(x: &[f64], h: f64, k: &[f64]) -> Vec<f64> {
    x.iter().zip(k).map(|(a, b)| a + h * b).collect()
}

/// Classical RK4 with the disturbance held constant over each step.
pub fn integrate(
    model: &SystemModel,
    controller: &[Polynomial],
    x0: &[f64],
    profile: &DisturbanceProfile,
    settings: &SimSettings,
) -> Result<Trajectory, SimError> {
    let SimSettings { dt, horizon, beta_u } = *settings;
    if !(dt > 0.0 && dt.is_finite()) || !(horizon >= dt && horizon.is_finite()) {
        return Err(SimError::Settings(format!(
            "need dt > 0 and horizon >= dt, got dt={dt}, horizon={horizon}"
        )));
    }
    if controller.len() != model.m() {
        return Err(SimError::Controller {
            expected: model.m(),
            found: controller.len(),
        });
    }
    if !model.state_region.contains(x0) {
        return Err(SimError::InitialState(x0.to_vec()));
    }
    let steps = (horizon / dt).round() as usize;
    let limit = model.state_region.scaled(10.0);
    let mut src = Source::new(profile, model);
    let f = |x: &[f64], d: &[f64]| model.rhs(x, &eval_all(controller, x), d);

    let mut traj = Trajectory {
        dt,
        t: Vec::with_capacity(steps + 1),
        x: Vec::with_capacity(steps + 1),
        u: Vec::with_capacity(steps + 1),
        d: Vec::with_capacity(steps + 1),
        j: Vec::new(),
        jbar: Vec::new(),
        diverged_at: None,
        tail_bound: None,
    };
    let mut x = x0.to_vec();
    for k in 0..=steps {
        let t = k as f64 * dt;
        let d = src.sample(t, &x);
        traj.t.push(t);
        traj.u.push(eval_all(controller, &x));
        traj.x.push(x.clone());
        traj.d.push(d.clone());
        if k == steps {
            break;
        }
        let k1 = f(&x, &d);
        let k2 = f(&axpy(&x, 0.5 * dt, &k1), &d);
        let k3 = f(&axpy(&x, 0.5 * dt, &k2), &d);
        let k4 = f(&axpy(&x, dt, &k3), &d);
        for i in 0..x.len() {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if !limit.contains(&x) || x.iter().any(|v| !v.is_finite()) {
            traj.diverged_at = Some(t + dt);
            break;
        }
    }
    let (j, jbar) = running_costs(&traj, model, beta_u);
    traj.j = j;
    traj.jbar = jbar;
    let last = traj.len() - 1;
    let r_end = reward(model, &traj.x[last], &traj.u[last]);
    if r_end.abs() >= 1e-6 {
        traj.tail_bound = Some(r_end.abs() * 10.0 * dt);
    }
    Ok(traj)
}

fn reward(model: &SystemModel, x: &[f64], u: &[f64]) -> f64 {
    let mut r = model.q.evaluate(x);
    for a in 0..u.len() {
        for b in 0..u.len() {
            r += u[a] * model.r[(a, b)] * u[b];
        }
    }
    r
}

fn running_costs(traj: &Trajectory, model: &SystemModel, beta_u: f64) -> (Vec<f64>, Vec<f64>) {
    let extra = model.disturbance_cost() + beta_u;
    let r: Vec<f64> = traj
        .x
        .iter()
        .zip(&traj.u)
        .map(|(x, u)| reward(model, x, u))
        .collect();
    let mut j = Vec::with_capacity(r.len());
    let mut jbar = Vec::with_capacity(r.len());
    let (mut acc, mut accbar) = (0.0, 0.0);
    for k in 0..r.len() {
        if k > 0 {
            let h = traj.t[k] - traj.t[k - 1];
            acc += 0.5 * h * (r[k - 1] + r[k]);
            accbar += 0.5 * h * (r[k - 1] + r[k] + 2.0 * extra);
        }
        j.push(acc);
        jbar.push(accbar);
    }
    (j, jbar)
}

/// Trapezoidal `(J, Jbar)` over the whole trajectory.
pub fn accumulate_cost(traj: &Trajectory, model: &SystemModel, beta_u: f64) -> (f64, f64) {
    let (j, jbar) = running_costs(traj, model, beta_u);
    (j.last().copied().unwrap_or(0.0), jbar.last().copied().unwrap_or(0.0))
}

/// What a trajectory must respect.
#[derive(Debug, Clone, Copy)]
pub enum SafetyCheck<'a> {
    /// `h(x) >= -tol`.
    Barrier(&'a Polynomial),
    /// Outside every unsafe piece, each piece widened by `tol`.
    Unsafe(&'a SafetySpec),
    /// Inside the box widened by `tol`.
    Box(&'a BoxRegion),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub step: usize,
    pub t: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SafetyVerdict {
    pub safe: bool,
    pub first_violation: Option<Violation>,
}

/// Tolerance for barrier checks.
pub const BARRIER_TOL: f64 = 1e-3;

pub fn check_safety(traj: &Trajectory, check: SafetyCheck<'_>, tol: f64) -> SafetyVerdict {
    let bad = |x: &[f64]| match check {
        SafetyCheck::Barrier(h) => h.evaluate(x) < -tol,
        SafetyCheck::Unsafe(spec) => spec
            .unsafe_sets
            .iter()
            .any(|piece| piece.iter().all(|p| p.evaluate(x) > tol)),
        SafetyCheck::Box(b) => x
            .iter()
            .zip(b.lo().iter().zip(b.hi()))
            .any(|(v, (l, h))| *v < l - tol || *v > h + tol),
    };
    let first_violation = traj.x.iter().enumerate().find(|(_, x)| bad(x)).map(|(k, x)| Violation {
        step: k,
        t: traj.t[k],
        x: x.clone(),
    });
    SafetyVerdict {
        safe: first_violation.is_none(),
        first_violation,
    }
}

/// Runs one simulation per initial state on scoped threads; results keep
/// the input order.
pub fn simulate_many(
    model: &SystemModel,
    controller: &[Polynomial],
    x0s: &[Vec<f64>],
    profile: &DisturbanceProfile,
    settings: &SimSettings,
) -> Vec<Result<Trajectory, SimError>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = x0s
            .iter()
            .map(|x0| s.spawn(move || integrate(model, controller, x0, profile, settings)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    })
}

/// Trajectory table: `t, x1..xn, u1..um, d1..dm, J, Jbar`, twelve
/// significant digits.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let n = traj.x.first().map_or(0, Vec::len);
    let m = traj.u.first().map_or(0, Vec::len);
    let mut head = vec!["t".to_string()];
    head.extend((1..=n).map(|i| format!("x{i}")));
    head.extend((1..=m).map(|i| format!("u{i}")));
    head.extend((1..=m).map(|i| format!("d{i}")));
    head.push("J".into());
    head.push("Jbar".into());
    let mut out = head.join(",");
    out.push('\n');
    for k in 0..traj.len() {
        let mut row = vec![sig12(traj.t[k])];
        row.extend(traj.x[k].iter().map(|v| sig12(*v)));
        row.extend(traj.u[k].iter().map(|v| sig12(*v)));
        row.extend(traj.d[k].iter().map(|v| sig12(*v)));
        row.push(sig12(traj.j[k]));
        row.push(sig12(traj.jbar[k]));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Twelve significant digits in scientific notation.
pub fn sig12(v: f64) -> String {
    format!("{:.11e}", v + 0.0)
}
