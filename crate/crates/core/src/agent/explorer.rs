use std::collections::HashMap;

use thiserror::Error;

use crate::discount::Discount;
use crate::env::{Action, ClassError, EnvironmentClass, History, ModelTracker, Policy};
use crate::planner::{PlanError, Planner};

use super::schedule::ExplorationSchedule;

pub const DEFAULT_PLAN_TOLERANCE: f64 = 1.0 / 1024.0;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("no environment in the class is consistent with the history: {0}")]
    Class(#[from] ClassError),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

impl AgentError {
    pub fn is_budget(&self) -> bool {
        matches!(self, AgentError::Plan(PlanError::BudgetExceeded { .. }))
    }
}

/// One step of the agent's behaviour, as recorded in traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub action: Action,
    pub exploring: bool,
    pub model_index: usize,
}

/// Plays `ψ_t` inside exploration bursts and otherwise the ε-optimal action
/// of the first class member consistent with the history. With exploration
/// disabled it is the greedy baseline.
pub struct ExplorerAgent<'c> {
    tracker: ModelTracker<'c>,
    schedule: Option<ExplorationSchedule>,
    discount: Discount,
    plan_tolerance: f64,
    planner: Planner,
    // (model index, fingerprint) -> action, for time-invariant planning problems
    plans: HashMap<(usize, u64), Action>,
    last: Option<Decision>,
}

impl<'c> ExplorerAgent<'c> {
    pub fn new(class: &'c EnvironmentClass, discount: Discount, seed: u64, plan_tolerance: f64) -> Result<Self, AgentError> {
        let actions = class.get(1)?.action_count();
        let mut agent = Self::greedy(class, discount, plan_tolerance)?;
        agent.schedule = Some(ExplorationSchedule::new(seed, actions));
        Ok(agent)
    }

    pub fn greedy(class: &'c EnvironmentClass, discount: Discount, plan_tolerance: f64) -> Result<Self, AgentError> {
        if !(plan_tolerance > 0.0 && plan_tolerance < 1.0) {
            return Err(PlanError::InvalidTolerance(plan_tolerance).into());
        }
        Ok(ExplorerAgent {
            tracker: ModelTracker::new(class)?,
            schedule: None,
            discount,
            plan_tolerance,
            planner: Planner::default(),
            plans: HashMap::new(),
            last: None,
        })
    }

    pub fn with_planner(mut self, planner: Planner) -> Self {
        self.planner = planner;
        self
    }

    pub fn model_index(&self) -> usize {
        self.tracker.index()
    }

    pub fn schedule(&self) -> Option<&ExplorationSchedule> {
        self.schedule.as_ref()
    }

    pub fn last_decision(&self) -> Option<Decision> {
        self.last
    }

    pub fn decide(&mut self, history: &History) -> Result<Decision, AgentError> {
        let model_index = self.tracker.sync(history)?;
        let t = history.next_time();
        if let Some(schedule) = self.schedule.as_mut() {
            if schedule.chi_bar(t) {
                let decision = Decision { action: schedule.psi(t), exploring: true, model_index };
                self.last = Some(decision);
                return Ok(decision);
            }
        }
        let action = self.exploit(history, model_index)?;
        let decision = Decision { action, exploring: false, model_index };
        self.last = Some(decision);
        Ok(decision)
    }

    fn exploit(&mut self, history: &History, model_index: usize) -> Result<Action, AgentError> {
        let model = self.tracker.model();
        let cursor = self.tracker.cursor();
        let key = (self.discount.is_time_invariant() && model.time_homogeneous())
            .then(|| cursor.fingerprint(history.view()))
            .flatten()
            .map(|f| (model_index, f));
        if let Some(&action) = key.and_then(|k| self.plans.get(&k)) {
            return Ok(action);
        }
        let plan = self.planner.optimal_plan_from(model, cursor, history.steps(), self.plan_tolerance, &self.discount)?;
        if let Some(k) = key {
            self.plans.insert(k, plan.first_action());
        }
        Ok(plan.first_action())
    }
}

impl Policy for ExplorerAgent<'_> {
    type Error = AgentError;

    fn act(&mut self, history: &History) -> Result<Action, AgentError> {
        Ok(self.decide(history)?.action)
    }
}
