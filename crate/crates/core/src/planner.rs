//! Exhaustive finite-horizon planning in a known deterministic environment.
//!
//! For deterministic environments the best policy over a fixed window is an
//! action sequence, so `best_plan` enumerates all `|Y|^{h+1}` sequences
//! (depth-first, optionally memoized on environment fingerprints). Truncation
//! assumes a zero tail, which yields the one-sided contract
//! `V* - ε ≤ optimal_value ≤ V*` once the window is `H_t(1-ε)` long.

use std::collections::HashMap;

use thiserror::Error;

use crate::discount::{Discount, DiscountError, TruncatedValue};
use crate::env::{cursor_at, Action, Cursor, EnvError, Environment, History, HistoryView, Step};

pub const DEFAULT_NODE_BUDGET: u64 = 1 << 26;

/// Totals closer than this are ties; ties go to the lexicographically
/// smaller action sequence.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("plan needs {required} node expansions but the budget is {budget}")]
    BudgetExceeded { required: u64, budget: u64 },
    #[error("planning tolerance {0} not in (0, 1)")]
    InvalidTolerance(f64),
    #[error(transparent)]
    Environment(#[from] EnvError),
    #[error(transparent)]
    Discount(#[from] DiscountError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub actions: Vec<Action>,
    pub value: TruncatedValue,
}

impl Plan {
    pub fn first_action(&self) -> Action {
        self.actions[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Planner {
    pub node_budget: u64,
    /// Reuse subtree results keyed by (depth, environment fingerprint).
    pub memoize: bool,
}

impl Default for Planner {
    fn default() -> Self {
        Planner { node_budget: DEFAULT_NODE_BUDGET, memoize: true }
    }
}

/// Node expansions of the unmemoized search over a window of `h+1` steps.
pub fn full_tree_size(actions: usize, horizon: u64) -> u64 {
    let mut level = 1u64;
    let mut total = 0u64;
    for _ in 0..=horizon {
        level = level.saturating_mul(actions as u64);
        total = total.saturating_add(level);
        if total == u64::MAX {
            break;
        }
    }
    total
}

type Subtree = (f64, Vec<Action>);

struct Search<'w> {
    weights: &'w [f64],
    actions: usize,
    budget: u64,
    required: u64,
    expanded: u64,
    memo: Option<HashMap<(usize, u64), Subtree>>,
}

impl Search<'_> {
    fn solve<'e>(
        &mut self,
        cursor: &(dyn Cursor<'e> + 'e),
        base: &[Step],
        ext: &mut Vec<Step>,
        depth: usize,
    ) -> Result<Subtree, PlanError> {
        let key = match &self.memo {
            Some(memo) => {
                let key = cursor.fingerprint(HistoryView::extended(base, ext)).map(|f| (depth, f));
                if let Some(hit) = key.and_then(|k| memo.get(&k)) {
                    return Ok(hit.clone());
                }
                key
            }
            None => None,
        };
        let last = depth + 1 == self.weights.len();
        let mut best: Option<Subtree> = None;
        for a in 0..self.actions {
            let action = Action(a as u8);
            self.expanded += 1;
            if self.expanded > self.budget {
                return Err(PlanError::BudgetExceeded { required: self.required, budget: self.budget });
            }
            let candidate = if last {
                let p = cursor.peek(HistoryView::extended(base, ext), action)?;
                (self.weights[depth] * p.reward.to_f64(), vec![action])
            } else {
                let mut child = cursor.box_clone();
                let p = child.advance(HistoryView::extended(base, ext), action)?;
                ext.push(Step::new(action, p));
                let sub = self.solve(child.as_ref(), base, ext, depth + 1);
                ext.pop();
                let (sub_value, sub_path) = sub?;
                let mut path = Vec::with_capacity(sub_path.len() + 1);
                path.push(action);
                path.extend(sub_path);
                (self.weights[depth] * p.reward.to_f64() + sub_value, path)
            };
            if best.as_ref().map_or(true, |(b, _)| candidate.0 > b + TIE_TOLERANCE) {
                best = Some(candidate);
            }
        }
        let best = best.expect("action alphabet is nonempty");
        if let (Some(memo), Some(k)) = (self.memo.as_mut(), key) {
            memo.insert(k, best.clone());
        }
        Ok(best)
    }
}

fn check_tolerance(eps: f64) -> Result<(), PlanError> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(PlanError::InvalidTolerance(eps))
    }
}

impl Planner {
    pub fn new(node_budget: u64) -> Self {
        Planner { node_budget, ..Planner::default() }
    }

    pub fn without_memo(self) -> Self {
        Planner { memoize: false, ..self }
    }

    /// Best action sequence over steps `t..=t+horizon`, where `t` follows
    /// `history`.
    pub fn best_plan(
        &self,
        model: &(impl Environment + ?Sized),
        history: &History,
        horizon: u64,
        discount: &Discount,
    ) -> Result<Plan, PlanError> {
        let cursor = cursor_at(model, history.view())?;
        self.best_plan_from(model, cursor.as_ref(), history.steps(), horizon, discount)
    }

    /// As [`Planner::best_plan`], starting from a cursor already positioned
    /// after `history`.
    pub fn best_plan_from<'e>(
        &self,
        model: &(impl Environment + ?Sized),
        cursor: &(dyn Cursor<'e> + 'e),
        history: &[Step],
        horizon: u64,
        discount: &Discount,
    ) -> Result<Plan, PlanError> {
        let t = history.len() as u64 + 1;
        let actions = model.action_count();
        let required = full_tree_size(actions, horizon);
        // even a fully memoized search expands every action at every depth
        let floor = (actions as u64).saturating_mul(horizon.saturating_add(1));
        if (!self.memoize && required > self.node_budget) || floor > self.node_budget {
            return Err(PlanError::BudgetExceeded { required, budget: self.node_budget });
        }
        let weights = discount.window_weights(t, horizon)?;
        let mut search = Search {
            weights: &weights,
            actions,
            budget: self.node_budget,
            required,
            expanded: 0,
            memo: self.memoize.then(HashMap::new),
        };
        let mut ext = Vec::with_capacity(horizon as usize + 1);
        let (_, actions) = search.solve(cursor, history, &mut ext, 0)?;

        // Recompute the value by a plain forward sum over the plan's rewards.
        let mut replay = cursor.box_clone();
        let mut rewards = Vec::with_capacity(actions.len());
        for &a in &actions {
            let p = replay.advance(HistoryView::extended(history, &ext), a)?;
            ext.push(Step::new(a, p));
            rewards.push(p.reward.to_f64());
        }
        let value = discount.truncated_value(t, &rewards)?;
        Ok(Plan { actions, value })
    }

    /// Plan over the window `H_t(1-ε)`; its value is within `ε` below `V*`.
    pub fn optimal_plan_from<'e>(
        &self,
        model: &(impl Environment + ?Sized),
        cursor: &(dyn Cursor<'e> + 'e),
        history: &[Step],
        eps: f64,
        discount: &Discount,
    ) -> Result<Plan, PlanError> {
        check_tolerance(eps)?;
        let t = history.len() as u64 + 1;
        let horizon = discount.effective_horizon(t, 1.0 - eps)?;
        self.best_plan_from(model, cursor, history, horizon, discount)
    }

    pub fn optimal_value(
        &self,
        model: &(impl Environment + ?Sized),
        history: &History,
        eps: f64,
        discount: &Discount,
    ) -> Result<f64, PlanError> {
        let cursor = cursor_at(model, history.view())?;
        Ok(self.optimal_plan_from(model, cursor.as_ref(), history.steps(), eps, discount)?.value.value)
    }

    /// First action of the lexicographically least ε-optimal plan.
    pub fn optimal_action(
        &self,
        model: &(impl Environment + ?Sized),
        history: &History,
        eps: f64,
        discount: &Discount,
    ) -> Result<Action, PlanError> {
        let cursor = cursor_at(model, history.view())?;
        Ok(self.optimal_plan_from(model, cursor.as_ref(), history.steps(), eps, discount)?.first_action())
    }

    /// Whether following `mu`'s ε-optimal policy for `h+1` steps from
    /// `history` produces a percept that `nu` disagrees with. Both
    /// environments are assumed consistent with `history`.
    pub fn is_h_different(
        &self,
        mu: &(impl Environment + ?Sized),
        nu: &(impl Environment + ?Sized),
        history: &History,
        h: u64,
        eps: f64,
        discount: &Discount,
    ) -> Result<bool, PlanError> {
        let mut hist = history.clone();
        let mut mu_cursor = cursor_at(mu, hist.view())?;
        let mut nu_cursor = cursor_at(nu, hist.view())?;
        for _ in 0..=h {
            let action = self
                .optimal_plan_from(mu, mu_cursor.as_ref(), hist.steps(), eps, discount)?
                .first_action();
            let x = mu_cursor.advance(hist.view(), action)?;
            let predicted = nu_cursor.advance(hist.view(), action);
            if predicted.as_ref() != Ok(&x) {
                return Ok(true);
            }
            hist.push(action, x);
        }
        Ok(false)
    }
}
