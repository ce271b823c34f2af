//! Run configuration: a TOML file overlaid with command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use satisfice::model::{builtin, builtin_names, model_from_toml, SafetySpec, SystemModel};
use satisfice::poly::Polynomial;
use satisfice::sim::{DisturbanceProfile, SimSettings};
use satisfice::srpi::SrpiConfig;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Optimal part plus barrier correction.
    Satisficing,
    /// Barrier correction only.
    SafeOnly,
    /// Value-function policy with no barrier.
    OptimalOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub beta_u: f64,
    /// Comma-separated profiles, see `parse_disturbance`.
    pub disturbance: String,
    /// Initial states drawn for `compare`.
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
}

impl Default for SimConfig {
    fn default() -> Self {
        let s = SimSettings::default();
        SimConfig {
            dt: s.dt,
            horizon: s.horizon,
            beta_u: s.beta_u,
            disturbance: "zero".into(),
            samples: 10,
            x0: None,
        }
    }
}

impl SimConfig {
    pub fn settings(&self) -> SimSettings {
        SimSettings {
            dt: self.dt,
            horizon: self.horizon,
            beta_u: self.beta_u,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Built-in model name or path to a model file.
    pub model: String,
    pub seed: u64,
    pub out: PathBuf,
    pub mode: Mode,
    pub srpi: SrpiConfig,
    pub sim: SimConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: "suspension".into(),
            seed: 0,
            out: PathBuf::from("runs"),
            mode: Mode::Satisficing,
            srpi: SrpiConfig::default(),
            sim: SimConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = read(path)?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))
    }

    pub fn echo(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load_model(&self) -> Result<(SystemModel, Option<SafetySpec>), CliError> {
        if builtin_names().contains(&self.model.as_str()) {
            return builtin(&self.model).map_err(|e| CliError::Config(e.to_string()));
        }
        let path = Path::new(&self.model);
        if !path.exists() {
            return Err(CliError::Config(format!(
                "'{}' is neither a built-in model ({}) nor a file",
                self.model,
                builtin_names().join(", ")
            )));
        }
        model_from_toml(&read(path)?).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn disturbances(&self, m: usize, value: Option<&Polynomial>) -> Result<Vec<DisturbanceProfile>, CliError> {
        self.sim
            .disturbance
            .split(',')
            .map(|s| parse_disturbance(s.trim(), self.seed, m, value))
            .collect()
    }
}

pub fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// `zero`, `constant:<v>`, `sinusoid:<freq>[:<amp>[:<phase>]]`, `random`,
/// `random:<seed>` or `adversarial`.
pub fn parse_disturbance(
    text: &str,
    seed: u64,
    m: usize,
    value: Option<&Polynomial>,
) -> Result<DisturbanceProfile, CliError> {
    let bad = || CliError::Config(format!("bad disturbance '{text}'"));
    let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = text.split(':').collect();
    Ok(match parts.as_slice() {
        ["zero"] => DisturbanceProfile::Zero,
        ["constant", v] => DisturbanceProfile::Constant(vec![num(v)?; m]),
        ["sinusoid"] => DisturbanceProfile::sinusoid(1.0),
        ["sinusoid", f] => DisturbanceProfile::sinusoid(num(f)?),
        ["sinusoid", f, a] => DisturbanceProfile::Sinusoid {
            amplitude: num(a)?,
            frequency: num(f)?,
            phase: 0.0,
        },
        ["sinusoid", f, a, p] => DisturbanceProfile::Sinusoid {
            amplitude: num(a)?,
            frequency: num(f)?,
            phase: num(p)?,
        },
        ["random"] => DisturbanceProfile::UniformRandom { seed },
        ["random", s] => DisturbanceProfile::UniformRandom {
            seed: s.parse().map_err(|_| bad())?,
        },
        ["adversarial"] => DisturbanceProfile::Adversarial {
            value: value
                .cloned()
                .ok_or_else(|| CliError::Config("adversarial disturbance needs V in the controller file".into()))?,
        },
        _ => return Err(bad()),
    })
}
