use thiserror::Error;

use super::history::{History, HistoryView};
use super::percept::{Action, Observation, Percept, Reward};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error("action {action} outside alphabet of size {alphabet}")]
    AlphabetMismatch { action: Action, alphabet: usize },
    #[error("policy oracle failed: {0}")]
    Oracle(String),
    #[error("environment evaluation failed: {0}")]
    Model(String),
}

/// A deterministic environment: a percept function of the full history and
/// the next action.
///
/// Environments with a finite internal state may expose it through
/// [`Environment::fingerprint`]; together with the time index the fingerprint
/// must determine every future percept. Planners use it for memoization.
pub trait Environment: Send + Sync {
    fn action_count(&self) -> usize {
        2
    }

    fn observation_count(&self) -> usize {
        1
    }

    fn percept(&self, history: HistoryView<'_>, action: Action) -> Result<Percept, EnvError>;

    fn fingerprint(&self, _history: HistoryView<'_>) -> Option<u64> {
        None
    }

    /// True if the fingerprint alone, without the time index, determines
    /// every future percept.
    fn time_homogeneous(&self) -> bool {
        false
    }

    /// A cursor positioned at the empty history. Environments with cheap
    /// incremental state override this; the default replays the history on
    /// every query.
    fn cursor(&self) -> Box<dyn Cursor<'_> + '_> {
        Box::new(ReplayCursor { env: self })
    }

    fn check_action(&self, action: Action) -> Result<(), EnvError> {
        if action.index() < self.action_count() {
            Ok(())
        } else {
            Err(EnvError::AlphabetMismatch { action, alphabet: self.action_count() })
        }
    }
}

/// Incremental evaluation of an environment along one history.
///
/// Every method receives the history the cursor currently sits at; stateful
/// cursors may ignore it.
pub trait Cursor<'e> {
    fn peek(&self, history: HistoryView<'_>, action: Action) -> Result<Percept, EnvError>;

    /// Moves past `action`, returning its percept. `history` is the history
    /// before the action.
    fn advance(&mut self, history: HistoryView<'_>, action: Action) -> Result<Percept, EnvError>;

    fn fingerprint(&self, history: HistoryView<'_>) -> Option<u64>;

    fn box_clone(&self) -> Box<dyn Cursor<'e> + 'e>;
}

struct ReplayCursor<'e, E: ?Sized> {
    env: &'e E,
}

impl<'e, E: Environment + ?Sized> Cursor<'e> for ReplayCursor<'e, E> {
    fn peek(&self, history: HistoryView<'_>, action: Action) -> Result<Percept, EnvError> {
        self.env.percept(history, action)
    }

    fn advance(&mut self, history: HistoryView<'_>, action: Action) -> Result<Percept, EnvError> {
        self.env.percept(history, action)
    }

    fn fingerprint(&self, history: HistoryView<'_>) -> Option<u64> {
        self.env.fingerprint(history)
    }

    fn box_clone(&self) -> Box<dyn Cursor<'e> + 'e> {
        Box::new(ReplayCursor { env: self.env })
    }
}

/// Cursor for `env` positioned after `history`, without checking that the
/// recorded percepts agree with the environment.
pub fn cursor_at<'e>(
    env: &'e (impl Environment + ?Sized),
    history: HistoryView<'_>,
) -> Result<Box<dyn Cursor<'e> + 'e>, EnvError> {
    let mut cursor = env.cursor();
    for k in 0..history.len() {
        let step = history.get(k).expect("index within view");
        cursor.advance(history.prefix(k), step.action)?;
    }
    Ok(cursor)
}

/// Replays `history` through a cursor; returns the cursor if every recorded
/// percept is reproduced.
pub fn consistent_cursor<'e>(
    env: &'e (impl Environment + ?Sized),
    history: HistoryView<'_>,
) -> Option<Box<dyn Cursor<'e> + 'e>> {
    let mut cursor = env.cursor();
    for k in 0..history.len() {
        let step = history.get(k)?;
        match cursor.advance(history.prefix(k), step.action) {
            Ok(p) if p == step.percept => {}
            _ => return None,
        }
    }
    Some(cursor)
}

/// True iff `env` reproduces every recorded percept of `history`:
/// `μ(y x_{<k} y_k) = x_k` for all `k < t`.
pub fn is_consistent(env: &(impl Environment + ?Sized), history: &History) -> bool {
    consistent_cursor(env, history.view()).is_some()
}

/// History-independent environment: each action has a fixed percept.
/// Covers the constant environments and both part-1/part-3 `μ`s.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StaticEnvironment {
    rewards: Vec<Reward>,
    observation: Observation,
}

impl StaticEnvironment {
    pub fn new(rewards: Vec<Reward>) -> Self {
        assert!(!rewards.is_empty(), "at least one action");
        StaticEnvironment { rewards, observation: Observation::UNIT }
    }

    /// The same reward for every action of a binary alphabet.
    pub fn constant(reward: Reward) -> Self {
        StaticEnvironment::new(vec![reward, reward])
    }

    pub fn reward_for(&self, action: Action) -> Option<Reward> {
        self.rewards.get(action.index()).copied()
    }
}

impl Environment for StaticEnvironment {
    fn action_count(&self) -> usize {
        self.rewards.len()
    }

    fn percept(&self, _history: HistoryView<'_>, action: Action) -> Result<Percept, EnvError> {
        self.check_action(action)?;
        Ok(Percept::new(self.observation, self.rewards[action.index()]))
    }

    fn fingerprint(&self, _history: HistoryView<'_>) -> Option<u64> {
        Some(0)
    }

    fn time_homogeneous(&self) -> bool {
        true
    }
}
