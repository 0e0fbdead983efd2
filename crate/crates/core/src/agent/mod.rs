//! The exploring agent and its exploration schedule.

mod explorer;
mod schedule;

pub use explorer::{AgentError, Decision, ExplorerAgent, DEFAULT_PLAN_TOLERANCE};
pub use schedule::{burst_length, burst_threshold, geometric_lookahead, ExplorationSchedule};
