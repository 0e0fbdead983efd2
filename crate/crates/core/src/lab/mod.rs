//! Regret traces, experiment configuration and the experiment runner.

mod config;
mod experiment;
mod trace;

pub use config::{AgentSpec, EnvironmentSource, ExperimentConfig, OutputSpec, DEFAULT_GAP_TOLERANCE};
pub use experiment::{
    build_setup, drawn_true_index, lock_class, random_class, replay_actions, run_agent, run_config_file,
    run_experiment, run_oracle, summary_json, write_artifacts, DecadeAverage, ExperimentOutput, LabError, Setup,
    Summary,
};
pub use trace::{
    cesaro, gap_series, read_trace_csv, settling_time, GapSeries, RegretTrace, RunRecord, TraceError, TraceRecord,
};
