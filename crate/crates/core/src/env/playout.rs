use std::convert::Infallible;

use thiserror::Error;

use super::environment::{EnvError, Environment};
use super::history::History;
use super::percept::Action;

/// A (possibly stateful) policy driven along a single history.
pub trait Policy {
    type Error: std::error::Error + Send + Sync + 'static;

    fn act(&mut self, history: &History) -> Result<Action, Self::Error>;
}

/// Adapts a closure into a [`Policy`].
pub struct FnPolicy<F>(pub F);

impl<F: FnMut(&History) -> Action> Policy for FnPolicy<F> {
    type Error = Infallible;

    fn act(&mut self, history: &History) -> Result<Action, Infallible> {
        Ok((self.0)(history))
    }
}

#[derive(Debug, Error)]
pub enum PlayoutError<E: std::error::Error + 'static> {
    #[error("policy failed at step {step}: {source}")]
    Policy { step: u64, source: E },
    #[error("environment failed at step {step}: {source}")]
    Environment { step: u64, source: EnvError },
}

/// The first `n` steps of the play-out sequence of `policy` in `env`.
pub fn playout<P: Policy>(
    env: &(impl Environment + ?Sized),
    policy: &mut P,
    n: usize,
) -> Result<History, PlayoutError<P::Error>> {
    let mut history = History::with_capacity(n);
    let mut cursor = env.cursor();
    for _ in 0..n {
        let step = history.next_time();
        let action = policy.act(&history).map_err(|source| PlayoutError::Policy { step, source })?;
        let percept = cursor
            .advance(history.view(), action)
            .map_err(|source| PlayoutError::Environment { step, source })?;
        history.push(action, percept);
    }
    Ok(history)
}
