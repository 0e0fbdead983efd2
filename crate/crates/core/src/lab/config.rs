//! Experiment configuration, read from TOML or JSON.
//!
//! ```toml
//! steps = 10000
//! seed = 7
//! gap_tolerance = 0.015625   # optional, default 1/64
//! stride = 1                 # optional
//!
//! [discount]
//! kind = "geometric"
//! gamma = 0.5
//!
//! [environment]
//! source = "file"            # file | random | lock | diagonal
//! path = "class.json"
//! true_index = 2
//!
//! [agent]
//! kind = "explorer"          # explorer | greedy | table | external
//! plan_tolerance = 0.0009765625
//!
//! [output]
//! trace = "trace.csv"
//! summary = "summary.json"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::DEFAULT_PLAN_TOLERANCE;
use crate::discount::Discount;
use crate::env::Reward;

use super::LabError;

pub const DEFAULT_GAP_TOLERANCE: f64 = 1.0 / 64.0;

fn default_gap_tolerance() -> f64 {
    DEFAULT_GAP_TOLERANCE
}

fn default_plan_tolerance() -> f64 {
    DEFAULT_PLAN_TOLERANCE
}

fn one() -> u64 {
    1
}

fn two() -> u64 {
    2
}

fn quarter() -> Reward {
    Reward::new(1, 4).expect("1/4 is a reward")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub steps: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_gap_tolerance")]
    pub gap_tolerance: f64,
    #[serde(default = "one")]
    pub stride: u64,
    pub discount: Discount,
    pub environment: EnvironmentSource,
    pub agent: AgentSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnvironmentSource {
    /// A JSON class file; `true_index` is 1-based.
    File { path: PathBuf, true_index: usize },
    /// Seeded random finite-state machines over two actions. Without a
    /// `true_index` the true environment is drawn from the run seed.
    Random {
        count: usize,
        max_states: usize,
        #[serde(default = "default_observations")]
        observations: usize,
        #[serde(default = "default_reward_den")]
        reward_den: u64,
        #[serde(default)]
        class_seed: u64,
        #[serde(default)]
        true_index: Option<usize>,
    },
    /// Two-member lock class: the static decoy first, the lock second (and
    /// true). The lock opens after `block` consecutive downs.
    Lock {
        #[serde(default = "one")]
        switch_on: u64,
        #[serde(default = "quarter")]
        epsilon: Reward,
        #[serde(default = "two")]
        block: u64,
    },
    /// The environment that diagonalizes the configured table or external
    /// agent.
    Diagonal,
}

fn default_observations() -> usize {
    2
}

fn default_reward_den() -> u64 {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AgentSpec {
    /// Exploration seed defaults to the run seed.
    Explorer {
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default = "default_plan_tolerance")]
        plan_tolerance: f64,
    },
    Greedy {
        #[serde(default = "default_plan_tolerance")]
        plan_tolerance: f64,
    },
    /// Random lookup table over the last `window` steps, drawn from `seed`
    /// (default: the run seed).
    Table {
        #[serde(default = "default_window")]
        window: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
    /// External policy oracle process; `command[0]` is the program.
    External {
        command: Vec<String>,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
    },
}

fn default_window() -> usize {
    3
}

fn default_timeout_ms() -> u64 {
    5000
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub trace: Option<PathBuf>,
    #[serde(default)]
    pub summary: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self, LabError> {
        let config: ExperimentConfig = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| LabError::Config(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))?
        };
        config.validate()?;
        Ok(config)
    }

    /// Loads a config file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, LabError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::parse(&text).map_err(|e| match e {
            LabError::Config(m) => LabError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        if let Some(dir) = path.parent() {
            config.resolve_paths(dir);
        }
        Ok(config)
    }

    pub fn resolve_paths(&mut self, dir: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        if let EnvironmentSource::File { path, .. } = &mut self.environment {
            resolve(path);
        }
        if let Some(p) = self.output.trace.as_mut() {
            resolve(p);
        }
        if let Some(p) = self.output.summary.as_mut() {
            resolve(p);
        }
    }

    pub fn validate(&self) -> Result<(), LabError> {
        let bad = |m: String| Err(LabError::Config(m));
        if self.steps == 0 {
            return bad("steps must be at least 1".into());
        }
        if self.stride == 0 {
            return bad("stride must be at least 1".into());
        }
        if !(self.gap_tolerance > 0.0 && self.gap_tolerance < 1.0) {
            return bad(format!("gap_tolerance {} not in (0, 1)", self.gap_tolerance));
        }
        self.discount.validate().map_err(|e| LabError::Config(format!("discount: {e}")))?;
        match &self.environment {
            EnvironmentSource::File { true_index, .. } if *true_index == 0 => {
                return bad("true_index is 1-based".into());
            }
            EnvironmentSource::Random { count, max_states, observations, reward_den, true_index, .. } => {
                if *count == 0 || *max_states == 0 || *observations == 0 || *reward_den == 0 {
                    return bad("random class needs positive count, max_states, observations and reward_den".into());
                }
                if let Some(i) = true_index {
                    if *i == 0 || i > count {
                        return bad(format!("true_index {i} outside class of size {count}"));
                    }
                }
            }
            EnvironmentSource::Lock { switch_on, epsilon, block } => {
                if *switch_on == 0 || *block == 0 {
                    return bad("lock switch_on and block must be at least 1".into());
                }
                if *epsilon == Reward::ZERO || *epsilon >= Reward::HALF {
                    return bad(format!("lock epsilon {epsilon} not in (0, 1/2)"));
                }
            }
            EnvironmentSource::Diagonal => {
                if matches!(self.agent, AgentSpec::Explorer { .. } | AgentSpec::Greedy { .. }) {
                    return bad("the diagonal environment needs a table or external agent".into());
                }
            }
            _ => {}
        }
        match &self.agent {
            AgentSpec::Explorer { plan_tolerance, .. } | AgentSpec::Greedy { plan_tolerance } => {
                if !(*plan_tolerance > 0.0 && *plan_tolerance < 1.0) {
                    return bad(format!("plan_tolerance {plan_tolerance} not in (0, 1)"));
                }
            }
            AgentSpec::External { command, .. } if command.is_empty() => {
                return bad("external agent needs a command".into());
            }
            _ => {}
        }
        Ok(())
    }

    /// SHA-256 of the config's canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}
