//! Histories, deterministic environments, play-outs and model classes.

mod class;
mod environment;
mod fsm;
mod history;
mod percept;
mod playout;

pub use class::{load_class, parse_class_file, ClassError, ClassFile, EnvironmentClass, ModelTracker};
pub use environment::{
    consistent_cursor, cursor_at, is_consistent, Cursor, EnvError, Environment, StaticEnvironment,
};
pub use fsm::{FsmEnvironment, FsmEnvironmentSpec, FsmError, TransitionSpec};
pub use history::{History, HistoryParseError, HistoryView, Step};
pub use percept::{Action, Observation, Percept, Reward, RewardError};
pub use playout::{playout, FnPolicy, Policy, PlayoutError};
