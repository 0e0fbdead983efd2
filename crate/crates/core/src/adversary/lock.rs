//! Lock environments: the nominally bad action `down` pays a high reward
//! once a long enough contiguous block of downs has been played.
//!
//! A block starting at `t' ≥ T` ends at `end(t')` (inclusive); the lock is
//! open at step `t` iff some such block lies entirely inside the actions
//! `y_1..y_t` (the current action included). Once open, it stays open.

use std::collections::HashMap;
use std::sync::Mutex;

use num_rational::Ratio;

use crate::discount::Discount;
use crate::env::{
    Action, Cursor, EnvError, Environment, HistoryView, Percept, Reward, StaticEnvironment,
};

/// How long the unlocking block starting at `t'` must be.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockRule {
    /// `[t', t' + H_{t'}(p)]`.
    Horizon { discount: Discount, p: f64 },
    /// `[t', 2t']`.
    Doubling,
    /// `[t', t' + len - 1]`.
    Fixed(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LockVariant {
    Part1,
    Part3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LockParams {
    /// Switch-on time `T`: blocks must start at or after it.
    pub switch_on: u64,
    /// Penalty of a locked `down` in the part-3 construction.
    pub epsilon: Ratio<u64>,
}

impl Default for LockParams {
    fn default() -> Self {
        LockParams { switch_on: 1, epsilon: Ratio::new(1, 4) }
    }
}

impl LockParams {
    pub fn new(switch_on: u64, epsilon: Ratio<u64>) -> Result<Self, String> {
        if switch_on == 0 {
            return Err("switch-on time T must be at least 1".into());
        }
        if epsilon <= Ratio::from_integer(0) || epsilon >= Ratio::new(1, 2) {
            return Err(format!("epsilon {epsilon} not in (0, 1/2)"));
        }
        Ok(LockParams { switch_on, epsilon })
    }

    fn half_minus_epsilon(&self) -> Reward {
        Reward::from_ratio(Ratio::new(1, 2) - self.epsilon).expect("epsilon validated in (0, 1/2)")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct LockState {
    open: bool,
    // Smallest end(t') over block starts t' ≥ T inside the current down run.
    pending_end: Option<u64>,
}

#[derive(Debug)]
pub struct LockEnvironment {
    up: Reward,
    down_locked: Reward,
    down_open: Reward,
    switch_on: u64,
    rule: BlockRule,
    horizons: Mutex<HashMap<u64, u64>>,
}

impl LockEnvironment {
    pub fn new(up: Reward, down_locked: Reward, down_open: Reward, switch_on: u64, rule: BlockRule) -> Self {
        assert!(switch_on >= 1, "switch-on time is 1-based");
        LockEnvironment { up, down_locked, down_open, switch_on, rule, horizons: Mutex::new(HashMap::new()) }
    }

    pub fn rule(&self) -> &BlockRule {
        &self.rule
    }

    pub fn switch_on(&self) -> u64 {
        self.switch_on
    }

    /// Inclusive end of the unlocking block that starts at `start`.
    pub fn block_end(&self, start: u64) -> Result<u64, EnvError> {
        match &self.rule {
            BlockRule::Doubling => Ok(2 * start),
            BlockRule::Fixed(len) => Ok(start + len.saturating_sub(1)),
            BlockRule::Horizon { discount, p } => {
                if let Some(h) = self.horizons.lock().ok().and_then(|m| m.get(&start).copied()) {
                    return Ok(start + h);
                }
                let h = discount
                    .effective_horizon(start, *p)
                    .map_err(|e| EnvError::Model(e.to_string()))?;
                if let Ok(mut m) = self.horizons.lock() {
                    m.insert(start, h);
                }
                Ok(start + h)
            }
        }
    }

    fn step(&self, state: LockState, t: u64, action: Action) -> Result<(Percept, LockState), EnvError> {
        self.check_action(action)?;
        if action == Action::UP {
            let next = LockState { open: state.open, pending_end: None };
            return Ok((Percept::reward(self.up), next));
        }
        let mut pending = state.pending_end;
        if t >= self.switch_on {
            let end = self.block_end(t)?;
            pending = Some(pending.map_or(end, |e| e.min(end)));
        }
        let open = state.open || pending.is_some_and(|e| e <= t);
        let reward = if open { self.down_open } else { self.down_locked };
        Ok((Percept::reward(reward), LockState { open, pending_end: pending }))
    }

    fn state_after(&self, history: HistoryView<'_>) -> Result<LockState, EnvError> {
        let mut state = LockState::default();
        for (k, action) in history.actions().enumerate() {
            state = self.step(state, k as u64 + 1, action)?.1;
        }
        Ok(state)
    }

    /// Whether the lock is open after `history`.
    pub fn is_open(&self, history: HistoryView<'_>) -> Result<bool, EnvError> {
        Ok(self.state_after(history)?.open)
    }
}

fn fingerprint_of(state: LockState) -> u64 {
    if state.open {
        u64::MAX
    } else {
        state.pending_end.unwrap_or(0)
    }
}

impl Environment for LockEnvironment {
    fn percept(&self, history: HistoryView<'_>, action: Action) -> Result<Percept, EnvError> {
        let state = self.state_after(history)?;
        Ok(self.step(state, history.next_time(), action)?.0)
    }

    fn fingerprint(&self, history: HistoryView<'_>) -> Option<u64> {
        self.state_after(history).ok().map(fingerprint_of)
    }

    fn cursor(&self) -> Box<dyn Cursor<'_> + '_> {
        Box::new(LockCursor { env: self, state: LockState::default() })
    }
}

#[derive(Clone)]
struct LockCursor<'e> {
    env: &'e LockEnvironment,
    state: LockState,
}

impl<'e> Cursor<'e> for LockCursor<'e> {
    fn peek(&self, history: HistoryView<'_>, action: Action) -> Result<Percept, EnvError> {
        Ok(self.env.step(self.state, history.next_time(), action)?.0)
    }

    fn advance(&mut self, history: HistoryView<'_>, action: Action) -> Result<Percept, EnvError> {
        let (p, next) = self.env.step(self.state, history.next_time(), action)?;
        self.state = next;
        Ok(p)
    }

    fn fingerprint(&self, _history: HistoryView<'_>) -> Option<u64> {
        Some(fingerprint_of(self.state))
    }

    fn box_clone(&self) -> Box<dyn Cursor<'e> + 'e> {
        Box::new(self.clone())
    }
}

/// The no-strong-optimality pair: `μ` pays 1/2 for up and 0 for down; `ν`
/// additionally pays 1 for down once a block `[t', t' + H_{t'}(1/4)]` of
/// downs with `t' ≥ T` has been played.
pub fn part1_pair(params: &LockParams, discount: &Discount) -> (StaticEnvironment, LockEnvironment) {
    let mu = StaticEnvironment::new(vec![Reward::HALF, Reward::ZERO]);
    let nu = LockEnvironment::new(
        Reward::HALF,
        Reward::ZERO,
        Reward::ONE,
        params.switch_on,
        BlockRule::Horizon { discount: discount.clone(), p: 0.25 },
    );
    (mu, nu)
}

/// The no-weak-optimality pair for `γ_k = 1/(k(k+1))`: `μ` pays 1/2 for up
/// and 1/2 - ε for down; `ν` pays 1 for down once downs cover `[t', 2t']`
/// for some `t' ≥ T`.
pub fn part3_pair(params: &LockParams) -> (StaticEnvironment, LockEnvironment) {
    let locked = params.half_minus_epsilon();
    let mu = StaticEnvironment::new(vec![Reward::HALF, locked]);
    let nu = LockEnvironment::new(Reward::HALF, locked, Reward::ONE, params.switch_on, BlockRule::Doubling);
    (mu, nu)
}

/// Part-3 payoffs with a fixed-length unlocking block: a lock that bounded
/// exploration bursts can open.
pub fn fixed_block_pair(params: &LockParams, block: u64) -> (StaticEnvironment, LockEnvironment) {
    let locked = params.half_minus_epsilon();
    let mu = StaticEnvironment::new(vec![Reward::HALF, locked]);
    let nu = LockEnvironment::new(Reward::HALF, locked, Reward::ONE, params.switch_on, BlockRule::Fixed(block.max(1)));
    (mu, nu)
}
