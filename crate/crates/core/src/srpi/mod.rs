//! Safe robust policy iteration: alternating SOS policy evaluation and
//! safety-certified policy improvement, with barrier search, input bounds
//! and a certified stopping test.

mod barrier;
mod bound;
mod evaluation;
mod improvement;
mod operators;
mod report;
mod run;
mod scaling;

use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::model::ModelError;
use crate::poly::BoxRegion;
use crate::sdp::{dump_problem, SdpStatus, SolverOptions};
use crate::sos::{SosError, SosProgram, SosSolution};

pub use barrier::{find_barrier, find_barrier_with_flow, find_violation, verify_zcbf, ZcbfCertificate};
pub use bound::bound_u_max;
pub use evaluation::{policy_evaluation, Evaluation, EvaluationSettings};
pub use improvement::{policy_improvement, u_safe_basis, Improvement};
pub use operators::{
    bellman_residual, closed_loop_derivative, extract_controller, hjb_operator, modified_reward,
    Policy,
};
pub use report::{iteration_csv, manifest, polynomial_file, parse_polynomial_file};
pub use run::{
    init_policy, min_relaxation, run_srpi, stop_threshold, synthesize_safe_only, validate_stop,
    InitResult, IterationRecord, SafeOnly, SrpiRun, StopCheck, StopReason,
};
pub use scaling::Scaling;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaMode {
    /// One scalar relaxation.
    Scalar,
    /// Nonnegative quadratic relaxation `delta(x)`, penalized through its
    /// mean over the performance region.
    Polynomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaMode {
    /// One bound on `u'Ru` over the state region.
    Joint,
    /// Per-input bounds on `u_k^2`, combined through the largest
    /// eigenvalue of `R`.
    PerElement,
    /// `beta_u = 0`.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierMode {
    /// Separation of the initial and unsafe sets only.
    Separation,
    /// Separation plus nondecrease of `h` along the uncontrolled flow on the
    /// state region; falls back to separation when infeasible.
    Flow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SrpiConfig {
    /// Degree `2r` of the value function.
    pub v_degree: u32,
    pub k_delta: f64,
    /// Stopping threshold; `None` means `1e-3` times the volume of the
    /// performance region.
    pub stop_threshold: Option<f64>,
    /// Stop as soon as the threshold test is certified.
    pub stop_early: bool,
    pub max_iter: usize,
    /// Minimum degree of the box multipliers.
    pub multiplier_degree: u32,
    /// Degree of `u_safe`; `None` means `2r - 1`.
    pub u_safe_degree: Option<u32>,
    pub z_degree: u32,
    pub delta_mode: DeltaMode,
    pub beta_mode: BetaMode,
    pub barrier_degree: u32,
    pub barrier_mode: BarrierMode,
    /// Largest value-function inflation tried at initialization is
    /// `2^init_doublings`.
    pub init_doublings: u32,
    /// Relaxation accepted at initialization.
    pub init_tolerance: f64,
    /// Directory receiving a replay dump of every SDP.
    pub dump_dir: Option<PathBuf>,
    #[serde(skip)]
    pub solver: SolverOptions,
}

impl Default for SrpiConfig {
    fn default() -> Self {
        SrpiConfig {
            v_degree: 2,
            k_delta: 100.0,
            stop_threshold: None,
            stop_early: true,
            max_iter: 10,
            multiplier_degree: 2,
            u_safe_degree: None,
            z_degree: 2,
            delta_mode: DeltaMode::Scalar,
            beta_mode: BetaMode::Joint,
            barrier_degree: 2,
            barrier_mode: BarrierMode::Flow,
            init_doublings: 10,
            init_tolerance: 1e-6,
            dump_dir: None,
            solver: SolverOptions::default(),
        }
    }
}

impl SrpiConfig {
    pub fn validate(&self) -> Result<(), SrpiError> {
        let bad = |m: &str| Err(SrpiError::Config(m.to_string()));
        if self.v_degree < 2 || self.v_degree % 2 == 1 {
            return bad("v_degree must be even and at least 2");
        }
        if !(self.k_delta > 0.0) {
            return bad("k_delta must be positive");
        }
        if let Some(t) = self.stop_threshold {
            if !(t > 0.0) {
                return bad("stop_threshold must be positive");
            }
        }
        if self.z_degree % 2 == 1 || self.multiplier_degree % 2 == 1 {
            return bad("multiplier degrees must be even");
        }
        if self.barrier_degree == 0 {
            return bad("barrier_degree must be positive");
        }
        if !(self.init_tolerance >= 0.0) {
            return bad("init_tolerance must be nonnegative");
        }
        Ok(())
    }

    pub fn u_safe_degree(&self) -> u32 {
        self.u_safe_degree.unwrap_or(self.v_degree - 1)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SrpiError {
    #[error(transparent)]
    Sos(#[from] SosError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{stage}: solver returned {status}{}", dump.as_ref().map(|p| format!(" (replay dump {})", p.display())).unwrap_or_default())]
    Solver {
        stage: String,
        status: SdpStatus,
        dump: Option<PathBuf>,
    },
    #[error("{stage}: certification refused: {reason}")]
    Refused {
        stage: String,
        reason: String,
        violation: Option<Vec<f64>>,
    },
    #[error("initialization failed: {0}")]
    Init(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl SrpiError {
    /// Short machine-readable stage name.
    pub fn stage(&self) -> &str {
        match self {
            SrpiError::Solver { stage, .. } | SrpiError::Refused { stage, .. } => stage,
            SrpiError::Init(_) => "init",
            SrpiError::Config(_) | SrpiError::Model(_) => "config",
            SrpiError::Sos(_) => "program",
            SrpiError::Io(_) => "io",
        }
    }
}

/// Statistics of one SDP solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveStats {
    pub label: String,
    pub status: SdpStatus,
    pub certified: bool,
    pub iterations: usize,
    pub seconds: f64,
    pub dump: Option<PathBuf>,
}

/// Solves SOS programs, logging statistics and writing replay dumps.
#[derive(Debug, Clone, Default)]
pub struct SdpRunner {
    pub opts: SolverOptions,
    pub dump_dir: Option<PathBuf>,
    pub log: Vec<SolveStats>,
}

impl SdpRunner {
    pub fn new(opts: SolverOptions, dump_dir: Option<PathBuf>) -> Self {
        SdpRunner {
            opts,
            dump_dir,
            log: Vec::new(),
        }
    }

    pub fn solve(&mut self, prog: &SosProgram, label: &str) -> Result<SosSolution, SrpiError> {
        let problem = prog.compile();
        let dump = match &self.dump_dir {
            Some(dir) => {
                let path = dir.join(format!("{:03}_{}.sdp", self.log.len(), label));
                write_atomic(&path, &dump_problem(&problem))?;
                Some(path)
            }
            None => None,
        };
        let start = Instant::now();
        let sol = crate::sdp::solve(&problem, &self.opts).map_err(SosError::from)?;
        let sol = prog.interpret(sol);
        log::debug!(
            "{label}: {} certified={} iterations={}",
            sol.status,
            sol.certified,
            sol.sdp.iterations
        );
        if !sol.certified {
            log::debug!("{label}: {}", sol.sdp.message);
            for c in sol.certificates.iter().filter(|c| !c.is_valid(&prog.tolerance())) {
                log::debug!(
                    "{label}: certificate {} min_eig={:.3e} reconstruction={:.3e} scale={:.3e}",
                    c.name,
                    c.min_eig,
                    c.reconstruction_error,
                    c.scale
                );
            }
        }
        self.log.push(SolveStats {
            label: label.to_string(),
            status: sol.status,
            certified: sol.certified,
            iterations: sol.sdp.iterations,
            seconds: start.elapsed().as_secs_f64(),
            dump,
        });
        Ok(sol)
    }

    /// As `solve`, failing unless the solution is certified.
    pub fn solve_certified(&mut self, prog: &SosProgram, label: &str) -> Result<SosSolution, SrpiError> {
        let sol = self.solve(prog, label)?;
        if sol.certified {
            Ok(sol)
        } else {
            Err(self.failure(label, sol.status))
        }
    }

    pub fn failure(&self, stage: &str, status: SdpStatus) -> SrpiError {
        SrpiError::Solver {
            stage: stage.to_string(),
            status,
            dump: self.log.last().and_then(|s| s.dump.clone()),
        }
    }
}

/// Writes through a temporary file and a rename.
pub fn write_atomic(path: &std::path::Path, contents: &str) -> Result<(), SrpiError> {
    let io = |e: std::io::Error| SrpiError::Io(format!("{}: {e}", path.display()));
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    std::fs::write(&tmp, contents).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

/// Even multiplier degree sufficient for an expression of degree `expr_degree`
/// against quadratic region inequalities.
pub(crate) fn multiplier_degree(expr_degree: u32, minimum: u32) -> u32 {
    let need = expr_degree.saturating_sub(2);
    minimum.max(need + need % 2)
}

/// `integral over region of p` as an affine expression in the decisions.
pub(crate) fn integral(expr: &crate::sos::PolyExpr, region: &BoxRegion) -> crate::sos::AffineExpr {
    let mut out = crate::sos::AffineExpr::constant(
        expr.constant_part().integrate_box(region).expect("dimensions"),
    );
    for (v, p) in expr.linear_parts() {
        out.add_term(v, p.integrate_box(region).expect("dimensions"));
    }
    out
}

#[cfg(test)]
mod tests;
