//! Command-line front end: synthesize, verify, simulate and compare.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use satisfice::srpi::SrpiError;

pub use config::{Mode, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("solver failure at {stage}: {message}")]
    Solver { stage: String, message: String },
    #[error("certification refused at {stage}: {message}")]
    Refused { stage: String, message: String },
    #[error("safety violation: {0}")]
    Unsafe(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Solver { .. } => 3,
            CliError::Refused { .. } => 4,
            CliError::Unsafe(_) => 5,
        }
    }

    /// Machine-readable failure stage.
    pub fn stage(&self) -> &str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Solver { stage, .. } | CliError::Refused { stage, .. } => stage,
            CliError::Unsafe(_) => "simulate",
        }
    }
}

impl From<SrpiError> for CliError {
    fn from(e: SrpiError) -> Self {
        let stage = e.stage().to_string();
        match e {
            SrpiError::Config(m) => CliError::Config(m),
            SrpiError::Model(m) => CliError::Config(m.to_string()),
            SrpiError::Io(m) => CliError::Io(m),
            SrpiError::Refused { .. } => CliError::Refused {
                stage,
                message: e.to_string(),
            },
            other => CliError::Solver {
                stage,
                message: other.to_string(),
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "satisfice", version, about = "Safety-certified satisficing controller synthesis")]
pub struct Cli {
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run policy iteration and write the controller, barrier and reports.
    Synthesize(SynthesizeArgs),
    /// Certify the zeroing barrier condition for a controller.
    Verify(VerifyArgs),
    /// Simulate one closed-loop trajectory.
    Simulate(SimulateArgs),
    /// Simulate several controllers from a shared set of initial states.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Built-in model name or model file.
    #[arg(long)]
    pub model: Option<String>,
    /// TOML run configuration; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimFlags {
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    /// zero, constant:V, sinusoid:FREQ[:AMP[:PHASE]], random[:SEED],
    /// adversarial; comma-separated for compare.
    #[arg(long)]
    pub disturbance: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthesizeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Run exactly this many iterations (no early stop).
    #[arg(long)]
    pub iters: Option<usize>,
    /// Degree of the value function.
    #[arg(long)]
    pub degree: Option<u32>,
    #[arg(long)]
    pub kdelta: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Controller file with entries u1..um.
    #[arg(long)]
    pub controller: PathBuf,
    /// Barrier file with entry h; searched from the safety spec when absent.
    #[arg(long)]
    pub barrier: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub sim: SimFlags,
    #[arg(long)]
    pub controller: PathBuf,
    #[arg(long)]
    pub barrier: Option<PathBuf>,
    /// Initial state, comma-separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub sim: SimFlags,
    /// Two or more controller files.
    #[arg(long, num_args = 1.., required = true)]
    pub controller: Vec<PathBuf>,
    /// Barrier whose positive set the initial states are drawn from.
    #[arg(long)]
    pub barrier: Option<PathBuf>,
    #[arg(long)]
    pub samples: Option<usize>,
}

impl CommonArgs {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::load(self.config.as_deref())?;
        if let Some(m) = &self.model {
            cfg.model = m.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        Ok(cfg)
    }
}

impl SimFlags {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(dt) = self.dt {
            cfg.sim.dt = dt;
        }
        if let Some(h) = self.horizon {
            cfg.sim.horizon = h;
        }
        if let Some(d) = &self.disturbance {
            cfg.sim.disturbance = d.clone();
        }
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Synthesize(a) => commands::synthesize(&a),
        Command::Verify(a) => commands::verify(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Compare(a) => commands::compare(&a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.stage());
            e.exit_code()
        }
    }
}
