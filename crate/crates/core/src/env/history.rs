use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::percept::{Action, Observation, Percept, Reward};

/// One interaction cycle: the action taken and the percept it produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Step {
    pub action: Action,
    pub percept: Percept,
}

impl Step {
    pub fn new(action: Action, percept: Percept) -> Self {
        Step { action, percept }
    }
}

/// Interleaved history `y_1 x_1 y_2 x_2 … y_{t-1} x_{t-1}`. Append-only.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct History {
    steps: Vec<Step>,
}

impl History {
    pub fn new() -> Self {
        History::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        History { steps: Vec::with_capacity(n) }
    }

    pub fn push(&mut self, action: Action, percept: Percept) {
        self.steps.push(Step { action, percept });
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// The 1-based index of the next step.
    pub fn next_time(&self) -> u64 {
        self.steps.len() as u64 + 1
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn view(&self) -> HistoryView<'_> {
        HistoryView::new(&self.steps)
    }

    /// View of the first `len` steps (`y x_{<len+1}`).
    pub fn prefix(&self, len: usize) -> HistoryView<'_> {
        HistoryView::new(&self.steps[..len])
    }

    pub fn rewards(&self) -> impl Iterator<Item = Reward> + '_ {
        self.steps.iter().map(|s| s.percept.reward)
    }

    /// Wire encoding shared by the oracle protocol and the CLI:
    /// space-separated `action:num/den` tokens, with the observation inserted
    /// as `action:obs:num/den` when it is not the unit symbol.
    pub fn encode(&self) -> String {
        self.view().encode()
    }
}

impl FromIterator<Step> for History {
    fn from_iter<I: IntoIterator<Item = Step>>(iter: I) -> Self {
        History { steps: iter.into_iter().collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("bad history token {token:?} at position {position}: {reason}")]
pub struct HistoryParseError {
    pub position: usize,
    pub token: String,
    pub reason: String,
}

impl FromStr for Step {
    type Err = String;

    fn from_str(token: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = token.split(':').collect();
        let (action, obs, reward) = match parts.as_slice() {
            [a, r] => (*a, None, *r),
            [a, o, r] => (*a, Some(*o), *r),
            _ => return Err("expected action:reward or action:observation:reward".into()),
        };
        let action = action.parse::<u8>().map_err(|_| format!("bad action {action:?}"))?;
        let observation = match obs {
            Some(o) => Observation(o.parse::<u16>().map_err(|_| format!("bad observation {o:?}"))?),
            None => Observation::UNIT,
        };
        let reward = reward.parse::<Reward>().map_err(|e| e.to_string())?;
        Ok(Step::new(Action(action), Percept::new(observation, reward)))
    }
}

impl FromStr for History {
    type Err = HistoryParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split_whitespace()
            .enumerate()
            .map(|(position, token)| {
                token.parse::<Step>().map_err(|reason| HistoryParseError {
                    position,
                    token: token.to_string(),
                    reason,
                })
            })
            .collect()
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let Percept { observation, reward } = self.percept;
        if observation == Observation::UNIT {
            write!(f, "{}:{}", self.action, reward)
        } else {
            write!(f, "{}:{}:{}", self.action, observation.0, reward)
        }
    }
}

/// A borrowed history made of a committed prefix plus a scratch extension.
/// Planners extend histories hypothetically without copying the prefix.
#[derive(Debug, Clone, Copy)]
pub struct HistoryView<'a> {
    head: &'a [Step],
    tail: &'a [Step],
}

impl<'a> HistoryView<'a> {
    pub fn new(steps: &'a [Step]) -> Self {
        HistoryView { head: steps, tail: &[] }
    }

    pub fn extended(head: &'a [Step], tail: &'a [Step]) -> Self {
        HistoryView { head, tail }
    }

    pub fn empty() -> HistoryView<'static> {
        HistoryView { head: &[], tail: &[] }
    }

    pub fn len(&self) -> usize {
        self.head.len() + self.tail.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn next_time(&self) -> u64 {
        self.len() as u64 + 1
    }

    /// 0-based access.
    pub fn get(&self, i: usize) -> Option<&'a Step> {
        if i < self.head.len() {
            self.head.get(i)
        } else {
            self.tail.get(i - self.head.len())
        }
    }

    pub fn last(&self) -> Option<&'a Step> {
        self.tail.last().or_else(|| self.head.last())
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = &'a Step> + 'a {
        self.head.iter().chain(self.tail.iter())
    }

    pub fn actions(&self) -> impl DoubleEndedIterator<Item = Action> + 'a {
        self.iter().map(|s| s.action)
    }

    /// The first `len` steps of this view.
    pub fn prefix(&self, len: usize) -> HistoryView<'a> {
        if len <= self.head.len() {
            HistoryView { head: &self.head[..len], tail: &[] }
        } else {
            HistoryView { head: self.head, tail: &self.tail[..len - self.head.len()] }
        }
    }

    pub fn to_history(&self) -> History {
        self.iter().copied().collect()
    }

    pub fn encode(&self) -> String {
        let mut out = String::new();
        for (i, step) in self.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(&step.to_string());
        }
        out
    }
}
