//! Deterministic finite-state environments and their JSON file format.
//!
//! ```json
//! {"environments": [
//!   {"name": "toggle", "states": 2, "start": 0,
//!    "transitions": [
//!      {"state": 0, "action": 0, "next": 0, "obs": 0, "reward_num": 0, "reward_den": 1},
//!      {"state": 0, "action": 1, "next": 1, "obs": 0, "reward_num": 1, "reward_den": 2},
//!      ...
//!    ]}
//! ]}
//! ```
//!
//! `actions` defaults to 2 and `observations` to 1. Rewards are exact
//! rationals; floating-point rewards are not accepted.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::environment::{Cursor, EnvError, Environment};
use super::history::HistoryView;
use super::percept::{Action, Observation, Percept, Reward};

fn default_actions() -> usize {
    2
}

fn default_observations() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionSpec {
    pub state: usize,
    pub action: usize,
    pub next: usize,
    pub obs: u16,
    pub reward_num: u64,
    pub reward_den: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FsmEnvironmentSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub states: usize,
    pub start: usize,
    #[serde(default = "default_actions")]
    pub actions: usize,
    #[serde(default = "default_observations")]
    pub observations: usize,
    pub transitions: Vec<TransitionSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FsmError {
    #[error("environment {entry}: {message}")]
    Invalid { entry: usize, message: String },
    #[error("environment {entry}: transition for state {state}, action {action}: {message}")]
    Transition { entry: usize, state: usize, action: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Entry {
    next: usize,
    percept: Percept,
}

/// A validated, total transition table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FsmEnvironment {
    name: Option<String>,
    states: usize,
    start: usize,
    actions: usize,
    observations: usize,
    table: Vec<Entry>,
}

impl FsmEnvironmentSpec {
    /// Validates the spec; `entry` is the position used in diagnostics.
    pub fn build(&self, entry: usize) -> Result<FsmEnvironment, FsmError> {
        let invalid = |message: String| FsmError::Invalid { entry, message };
        if self.states == 0 {
            return Err(invalid("needs at least one state".into()));
        }
        if self.start >= self.states {
            return Err(invalid(format!("start state {} out of range 0..{}", self.start, self.states)));
        }
        if self.actions == 0 || self.actions > 256 {
            return Err(invalid(format!("action alphabet size {} not in 1..=256", self.actions)));
        }
        if self.observations == 0 || self.observations > u16::MAX as usize {
            return Err(invalid(format!("observation alphabet size {} invalid", self.observations)));
        }
        let mut table: Vec<Option<Entry>> = vec![None; self.states * self.actions];
        for tr in &self.transitions {
            let fail = |message: String| FsmError::Transition {
                entry,
                state: tr.state,
                action: tr.action,
                message,
            };
            if tr.state >= self.states {
                return Err(fail(format!("state out of range 0..{}", self.states)));
            }
            if tr.action >= self.actions {
                return Err(fail(format!("action out of range 0..{}", self.actions)));
            }
            if tr.next >= self.states {
                return Err(fail(format!("next state {} out of range", tr.next)));
            }
            if tr.obs as usize >= self.observations {
                return Err(fail(format!("observation {} out of range", tr.obs)));
            }
            let reward = Reward::new(tr.reward_num, tr.reward_den).map_err(|e| fail(e.to_string()))?;
            let slot = &mut table[tr.state * self.actions + tr.action];
            if slot.is_some() {
                return Err(fail("duplicate transition".into()));
            }
            *slot = Some(Entry { next: tr.next, percept: Percept::new(Observation(tr.obs), reward) });
        }
        let table = table
            .into_iter()
            .enumerate()
            .map(|(i, e)| {
                e.ok_or_else(|| FsmError::Transition {
                    entry,
                    state: i / self.actions,
                    action: i % self.actions,
                    message: "missing transition (table must be total)".into(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(FsmEnvironment {
            name: self.name.clone(),
            states: self.states,
            start: self.start,
            actions: self.actions,
            observations: self.observations,
            table,
        })
    }

    /// A random total table with `1..=max_states` states and rewards
    /// `k / reward_den`.
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        max_states: usize,
        actions: usize,
        observations: usize,
        reward_den: u64,
    ) -> Self {
        let states = rng.gen_range(1..=max_states);
        let mut transitions = Vec::with_capacity(states * actions);
        for state in 0..states {
            for action in 0..actions {
                transitions.push(TransitionSpec {
                    state,
                    action,
                    next: rng.gen_range(0..states),
                    obs: rng.gen_range(0..observations) as u16,
                    reward_num: rng.gen_range(0..=reward_den),
                    reward_den,
                });
            }
        }
        FsmEnvironmentSpec {
            name: None,
            states,
            start: rng.gen_range(0..states),
            actions,
            observations,
            transitions,
        }
    }
}

impl FsmEnvironment {
    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn start(&self) -> usize {
        self.start
    }

    fn entry(&self, state: usize, action: Action) -> Result<&Entry, EnvError> {
        self.check_action(action)?;
        Ok(&self.table[state * self.actions + action.index()])
    }

    fn state_after(&self, history: HistoryView<'_>) -> Result<usize, EnvError> {
        history
            .actions()
            .try_fold(self.start, |s, a| self.entry(s, a).map(|e| e.next))
    }

    pub fn to_spec(&self) -> FsmEnvironmentSpec {
        let mut transitions = Vec::with_capacity(self.table.len());
        for (i, e) in self.table.iter().enumerate() {
            transitions.push(TransitionSpec {
                state: i / self.actions,
                action: i % self.actions,
                next: e.next,
                obs: e.percept.observation.0,
                reward_num: e.percept.reward.numer(),
                reward_den: e.percept.reward.denom(),
            });
        }
        FsmEnvironmentSpec {
            name: self.name.clone(),
            states: self.states,
            start: self.start,
            actions: self.actions,
            observations: self.observations,
            transitions,
        }
    }
}

impl Environment for FsmEnvironment {
    fn action_count(&self) -> usize {
        self.actions
    }

    fn observation_count(&self) -> usize {
        self.observations
    }

    fn percept(&self, history: HistoryView<'_>, action: Action) -> Result<Percept, EnvError> {
        let state = self.state_after(history)?;
        Ok(self.entry(state, action)?.percept)
    }

    fn fingerprint(&self, history: HistoryView<'_>) -> Option<u64> {
        self.state_after(history).ok().map(|s| s as u64)
    }

    fn time_homogeneous(&self) -> bool {
        true
    }

    fn cursor(&self) -> Box<dyn Cursor<'_> + '_> {
        Box::new(FsmCursor { env: self, state: self.start })
    }
}

#[derive(Clone)]
struct FsmCursor<'e> {
    env: &'e FsmEnvironment,
    state: usize,
}

impl<'e> Cursor<'e> for FsmCursor<'e> {
    fn peek(&self, _history: HistoryView<'_>, action: Action) -> Result<Percept, EnvError> {
        Ok(self.env.entry(self.state, action)?.percept)
    }

    fn advance(&mut self, _history: HistoryView<'_>, action: Action) -> Result<Percept, EnvError> {
        let e = self.env.entry(self.state, action)?;
        self.state = e.next;
        Ok(e.percept)
    }

    fn fingerprint(&self, _history: HistoryView<'_>) -> Option<u64> {
        Some(self.state as u64)
    }

    fn box_clone(&self) -> Box<dyn Cursor<'e> + 'e> {
        Box::new(self.clone())
    }
}
