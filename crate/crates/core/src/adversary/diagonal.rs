//! The diagonalizing environment for a fixed deterministic policy: it pays 1
//! exactly when the agent plays something other than what the policy would
//! have played on the same history.

use crate::env::{Action, EnvError, Environment, HistoryView, Percept, Reward};

use super::oracle::PolicyOracle;

pub struct DiagonalEnvironment<O> {
    oracle: O,
}

impl<O: PolicyOracle> DiagonalEnvironment<O> {
    pub fn new(oracle: O) -> Self {
        DiagonalEnvironment { oracle }
    }

    pub fn oracle(&self) -> &O {
        &self.oracle
    }
}

impl<O: PolicyOracle> Environment for DiagonalEnvironment<O> {
    fn percept(&self, history: HistoryView<'_>, action: Action) -> Result<Percept, EnvError> {
        self.check_action(action)?;
        let predicted = self.oracle.decide(history).map_err(|e| EnvError::Oracle(e.to_string()))?;
        let reward = if action == predicted { Reward::ZERO } else { Reward::ONE };
        Ok(Percept::reward(reward))
    }
}
