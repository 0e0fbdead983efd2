use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{fixed_block_pair, DiagonalEnvironment, LockParams, OracleError, PolicyOracle, ProcessOracle, TablePolicy};
use crate::agent::{AgentError, ExplorerAgent};
use crate::discount::Discount;
use crate::env::{ClassError, EnvError, Environment, EnvironmentClass, FsmEnvironmentSpec, History, Reward};
use crate::planner::{PlanError, Planner};

use super::config::{AgentSpec, EnvironmentSource, ExperimentConfig, OutputSpec};
use super::trace::{gap_series, RegretTrace, RunRecord, TraceError};

const TRUE_INDEX_STREAM: u64 = 2;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Class(#[from] ClassError),
    #[error("planner budget exhausted at step {step}: {message}")]
    Budget { step: u64, message: String },
    #[error("agent failed at step {step}: {source}")]
    Agent { step: u64, source: AgentError },
    #[error("policy oracle failed at step {step}: {source}")]
    Oracle { step: u64, source: OracleError },
    #[error("environment failed at step {step}: {source}")]
    Environment { step: u64, source: EnvError },
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl LabError {
    /// Process exit code: 2 for configuration problems, 3 for planner budget
    /// exhaustion, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) | LabError::Class(_) => 2,
            LabError::Budget { .. } => 3,
            LabError::Trace(TraceError::Plan(PlanError::BudgetExceeded { .. })) => 3,
            _ => 1,
        }
    }
}

/// The class the agent learns in, and the index of the true environment.
pub struct Setup {
    pub class: EnvironmentClass,
    pub true_index: usize,
    pub oracle: Option<Arc<dyn PolicyOracle>>,
}

impl Setup {
    pub fn true_env(&self) -> &dyn Environment {
        self.class.get(self.true_index).expect("true index validated")
    }
}

/// Decoy first, lock second: both pay 1/2 for up and `1/2 - ε` for a
/// locked down; only the lock pays 1 for down after `block` consecutive
/// downs starting at or after `switch_on`.
pub fn lock_class(switch_on: u64, epsilon: Reward, block: u64) -> Result<EnvironmentClass, LabError> {
    let params = LockParams::new(switch_on, epsilon.ratio()).map_err(LabError::Config)?;
    let (decoy, lock) = fixed_block_pair(&params, block);
    let mut class = EnvironmentClass::new();
    class.push(decoy);
    class.push(lock);
    Ok(class)
}

pub fn random_class(
    class_seed: u64,
    count: usize,
    max_states: usize,
    observations: usize,
    reward_den: u64,
) -> Result<EnvironmentClass, LabError> {
    let mut rng = ChaCha8Rng::seed_from_u64(class_seed);
    let specs: Vec<FsmEnvironmentSpec> = (0..count)
        .map(|_| FsmEnvironmentSpec::random(&mut rng, max_states, 2, observations, reward_den))
        .collect();
    EnvironmentClass::from_specs(&specs).map_err(|e| LabError::Config(e.to_string()))
}

/// True-environment index drawn from the run seed, uniform over `1..=count`.
pub fn drawn_true_index(seed: u64, count: usize) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(TRUE_INDEX_STREAM);
    rng.gen_range(1..=count)
}

fn oracle_for(config: &ExperimentConfig) -> Result<Option<Arc<dyn PolicyOracle>>, LabError> {
    Ok(match &config.agent {
        AgentSpec::Table { window, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(config.seed));
            Some(Arc::new(TablePolicy::random(&mut rng, *window, 2)))
        }
        AgentSpec::External { command, timeout_ms } => {
            let oracle = ProcessOracle::spawn(command, Duration::from_millis(*timeout_ms))
                .map_err(|e| LabError::Config(e.to_string()))?;
            Some(Arc::new(oracle))
        }
        _ => None,
    })
}

pub fn build_setup(config: &ExperimentConfig) -> Result<Setup, LabError> {
    let oracle = oracle_for(config)?;
    let (class, true_index) = match &config.environment {
        EnvironmentSource::File { path, true_index } => (crate::env::load_class(path)?, *true_index),
        EnvironmentSource::Random { count, max_states, observations, reward_den, class_seed, true_index } => {
            let class = random_class(*class_seed, *count, *max_states, *observations, *reward_den)?;
            (class, true_index.unwrap_or_else(|| drawn_true_index(config.seed, *count)))
        }
        EnvironmentSource::Lock { switch_on, epsilon, block } => (lock_class(*switch_on, *epsilon, *block)?, 2),
        EnvironmentSource::Diagonal => {
            let oracle = oracle.clone().ok_or_else(|| {
                LabError::Config("the diagonal environment needs a table or external agent".into())
            })?;
            let mut class = EnvironmentClass::new();
            class.push(DiagonalEnvironment::new(oracle));
            (class, 1)
        }
    };
    if true_index == 0 || true_index > class.len() {
        return Err(LabError::Config(format!("true_index {true_index} outside class of size {}", class.len())));
    }
    Ok(Setup { class, true_index, oracle })
}

fn agent_error(step: u64, source: AgentError) -> LabError {
    match source {
        AgentError::Plan(PlanError::BudgetExceeded { .. }) => LabError::Budget { step, message: source.to_string() },
        source => LabError::Agent { step, source },
    }
}

/// Plays the explorer (or greedy) agent for `n` steps in `env`.
pub fn run_agent(env: &dyn Environment, agent: &mut ExplorerAgent<'_>, n: u64) -> Result<RunRecord, LabError> {
    let mut run = RunRecord::default();
    let mut cursor = env.cursor();
    for _ in 0..n {
        let step = run.history.next_time();
        let d = agent.decide(&run.history).map_err(|e| agent_error(step, e))?;
        let p = cursor
            .advance(run.history.view(), d.action)
            .map_err(|source| LabError::Environment { step, source })?;
        run.history.push(d.action, p);
        run.exploring.push(d.exploring);
        run.model_index.push(d.model_index);
    }
    Ok(run)
}

/// Plays a fixed policy oracle; it has no model, recorded as index 0.
pub fn run_oracle(env: &dyn Environment, oracle: &dyn PolicyOracle, n: u64) -> Result<RunRecord, LabError> {
    let mut run = RunRecord::default();
    let mut cursor = env.cursor();
    for _ in 0..n {
        let step = run.history.next_time();
        let a = oracle.decide(run.history.view()).map_err(|source| LabError::Oracle { step, source })?;
        let p = cursor
            .advance(run.history.view(), a)
            .map_err(|source| LabError::Environment { step, source })?;
        run.history.push(a, p);
        run.exploring.push(false);
        run.model_index.push(0);
    }
    Ok(run)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecadeAverage {
    pub t: u64,
    pub avg_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config_hash: String,
    pub seed: u64,
    pub steps: u64,
    pub agent: String,
    pub discount: String,
    pub true_index: usize,
    pub gap_tolerance: f64,
    pub stride: u64,
    pub final_avg_gap: Option<f64>,
    pub evaluable_steps: usize,
    pub evaluable_fraction: f64,
    pub gaps_budget_exhausted: u64,
    pub decade_averages: Vec<DecadeAverage>,
    /// Finite-run proxy for the strong criterion: max gap over the final
    /// decade of evaluable steps.
    pub final_decade_max_gap: Option<f64>,
    pub settling_time: Option<u64>,
    pub final_model_index: usize,
    pub explored_steps: u64,
}

pub struct ExperimentOutput {
    pub run: RunRecord,
    pub trace: RegretTrace,
    pub summary: Summary,
}

fn agent_label(spec: &AgentSpec) -> String {
    match spec {
        AgentSpec::Explorer { .. } => "explorer".into(),
        AgentSpec::Greedy { .. } => "greedy".into(),
        AgentSpec::Table { window, .. } => format!("table(window={window})"),
        AgentSpec::External { command, .. } => format!("external({})", command.join(" ")),
    }
}

/// Runs the experiment without writing anything.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput, LabError> {
    config.validate()?;
    let setup = build_setup(config)?;
    let env = setup.true_env();
    let discount: &Discount = &config.discount;
    let run = match (&config.agent, &setup.oracle) {
        (AgentSpec::Explorer { seed, plan_tolerance }, _) => {
            let mut agent = ExplorerAgent::new(&setup.class, discount.clone(), seed.unwrap_or(config.seed), *plan_tolerance)
                .map_err(|e| agent_error(1, e))?;
            run_agent(env, &mut agent, config.steps)?
        }
        (AgentSpec::Greedy { plan_tolerance }, _) => {
            let mut agent =
                ExplorerAgent::greedy(&setup.class, discount.clone(), *plan_tolerance).map_err(|e| agent_error(1, e))?;
            run_agent(env, &mut agent, config.steps)?
        }
        (_, Some(oracle)) => run_oracle(env, oracle.as_ref(), config.steps)?,
        (_, None) => unreachable!("table and external agents always build an oracle"),
    };
    let gaps = gap_series(env, &run.history, config.gap_tolerance, discount, config.stride, &Planner::default())?;
    let trace = RegretTrace::new(&run, &gaps, config.gap_tolerance, config.stride);
    let summary = Summary {
        config_hash: config.hash(),
        seed: config.seed,
        steps: config.steps,
        agent: agent_label(&config.agent),
        discount: discount.label(),
        true_index: setup.true_index,
        gap_tolerance: config.gap_tolerance,
        stride: config.stride,
        final_avg_gap: trace.final_average(),
        evaluable_steps: trace.evaluable_count(),
        evaluable_fraction: trace.evaluable_fraction(),
        gaps_budget_exhausted: trace.budget_exhausted,
        decade_averages: trace.decade_averages().into_iter().map(|(t, avg_gap)| DecadeAverage { t, avg_gap }).collect(),
        final_decade_max_gap: trace.final_decade_max_gap(),
        settling_time: trace.settling_time,
        final_model_index: run.model_index.last().copied().unwrap_or(0),
        explored_steps: run.exploring.iter().filter(|&&e| e).count() as u64,
    };
    Ok(ExperimentOutput { run, trace, summary })
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), LabError> {
    let io = |source| LabError::Io { path: path.to_path_buf(), source };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn summary_json(summary: &Summary) -> String {
    serde_json::to_string_pretty(summary).expect("summary serializes") + "\n"
}

/// Writes the trace CSV and summary JSON where configured, each via a
/// temporary file and rename. On failure nothing written by this call is
/// left behind.
pub fn write_artifacts(output: &ExperimentOutput, paths: &OutputSpec) -> Result<(), LabError> {
    let mut written: Vec<&Path> = Vec::new();
    let result = (|| {
        if let Some(path) = &paths.trace {
            let csv = output.trace.to_csv()?;
            write_atomic(path, csv.as_bytes())?;
            written.push(path);
        }
        if let Some(path) = &paths.summary {
            write_atomic(path, summary_json(&output.summary).as_bytes())?;
            written.push(path);
        }
        Ok(())
    })();
    if result.is_err() {
        for path in written {
            let _ = std::fs::remove_file(path);
        }
    }
    result
}

/// Loads, runs and persists an experiment.
pub fn run_config_file(path: impl AsRef<Path>) -> Result<ExperimentOutput, LabError> {
    let config = ExperimentConfig::load(path)?;
    let output = run_experiment(&config)?;
    write_artifacts(&output, &config.output)?;
    Ok(output)
}

/// Replays a history's actions in `env`, returning the percept-consistent
/// history it generates.
pub fn replay_actions(env: &dyn Environment, actions: &[crate::env::Action]) -> Result<History, EnvError> {
    let mut h = History::with_capacity(actions.len());
    let mut cursor = env.cursor();
    for &a in actions {
        let p = cursor.advance(h.view(), a)?;
        h.push(a, p);
    }
    Ok(h)
}
