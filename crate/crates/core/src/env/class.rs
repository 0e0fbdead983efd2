use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::environment::{consistent_cursor, Cursor, Environment};
use super::fsm::{FsmEnvironment, FsmEnvironmentSpec, FsmError};
use super::history::History;

#[derive(Debug, Error)]
pub enum ClassError {
    #[error("cannot read class file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("class file {path}, line {line}, column {column}: {message}")]
    Parse { path: String, line: usize, column: usize, message: String },
    #[error("class file {path}: {source}")]
    Invalid { path: String, source: FsmError },
    #[error("no environment at index >= {from} is consistent with the history (class of size {size} exhausted)")]
    Exhausted { from: usize, size: usize },
    #[error("index {index} outside class of size {size} (indices start at 1)")]
    IndexOutOfRange { index: usize, size: usize },
}

/// On-disk container for a list of FSM specs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassFile {
    pub environments: Vec<FsmEnvironmentSpec>,
}

/// An ordered model class `μ_1, μ_2, …`, indexed from 1.
#[derive(Default)]
pub struct EnvironmentClass {
    members: Vec<Box<dyn Environment>>,
}

impl fmt::Debug for EnvironmentClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EnvironmentClass").field("len", &self.members.len()).finish()
    }
}

impl EnvironmentClass {
    pub fn new() -> Self {
        EnvironmentClass::default()
    }

    pub fn push(&mut self, env: impl Environment + 'static) {
        self.members.push(Box::new(env));
    }

    pub fn push_boxed(&mut self, env: Box<dyn Environment>) {
        self.members.push(env);
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// 1-based access.
    pub fn get(&self, index: usize) -> Result<&dyn Environment, ClassError> {
        index
            .checked_sub(1)
            .and_then(|i| self.members.get(i))
            .map(|b| b.as_ref())
            .ok_or(ClassError::IndexOutOfRange { index, size: self.members.len() })
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn Environment> {
        self.members.iter().map(|b| b.as_ref())
    }

    pub fn from_specs(specs: &[FsmEnvironmentSpec]) -> Result<Self, FsmError> {
        let mut class = EnvironmentClass::new();
        for (i, spec) in specs.iter().enumerate() {
            class.push(spec.build(i + 1)?);
        }
        Ok(class)
    }

    /// Smallest index `i ≥ from_index` whose environment is consistent with
    /// `history`.
    pub fn first_consistent(&self, history: &History, from_index: usize) -> Result<usize, ClassError> {
        let from = from_index.max(1);
        (from..=self.len())
            .find(|&i| consistent_cursor(self.members[i - 1].as_ref(), history.view()).is_some())
            .ok_or(ClassError::Exhausted { from, size: self.len() })
    }
}

impl FromIterator<FsmEnvironment> for EnvironmentClass {
    fn from_iter<I: IntoIterator<Item = FsmEnvironment>>(iter: I) -> Self {
        let mut class = EnvironmentClass::new();
        for env in iter {
            class.push(env);
        }
        class
    }
}

pub fn parse_class_file(text: &str, path: &str) -> Result<ClassFile, ClassError> {
    serde_json::from_str(text).map_err(|e| ClassError::Parse {
        path: path.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// Loads a JSON class file; environments keep file order.
pub fn load_class(path: impl AsRef<Path>) -> Result<EnvironmentClass, ClassError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ClassError::Io { path: shown.clone(), source })?;
    let file = parse_class_file(&text, &shown)?;
    EnvironmentClass::from_specs(&file.environments).map_err(|source| ClassError::Invalid { path: shown, source })
}

/// Tracks `i_t`, the first environment consistent with a growing history,
/// together with a cursor for that environment at the end of the history.
///
/// Consistency is monotone (an environment refuted once stays refuted), so
/// the index only moves forward and each step costs one cursor advance.
pub struct ModelTracker<'c> {
    class: &'c EnvironmentClass,
    index: usize,
    cursor: Box<dyn Cursor<'c> + 'c>,
    synced: usize,
}

impl<'c> ModelTracker<'c> {
    pub fn new(class: &'c EnvironmentClass) -> Result<Self, ClassError> {
        let first = class.get(1)?;
        Ok(ModelTracker { class, index: 1, cursor: first.cursor(), synced: 0 })
    }

    /// Current model index (1-based).
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn model(&self) -> &'c dyn Environment {
        self.class.get(self.index).expect("tracked index is in range")
    }

    pub fn cursor(&self) -> &(dyn Cursor<'c> + 'c) {
        self.cursor.as_ref()
    }

    /// Catches up with `history`, which must extend every history seen
    /// before.
    pub fn sync(&mut self, history: &History) -> Result<usize, ClassError> {
        assert!(history.len() >= self.synced, "model tracker histories must only grow");
        while self.synced < history.len() {
            let k = self.synced;
            let step = history.steps()[k];
            match self.cursor.advance(history.prefix(k), step.action) {
                Ok(p) if p == step.percept => self.synced += 1,
                _ => return self.advance_past_refuted(history),
            }
        }
        Ok(self.index)
    }

    fn advance_past_refuted(&mut self, history: &History) -> Result<usize, ClassError> {
        for i in self.index + 1..=self.class.len() {
            let env = self.class.get(i)?;
            if let Some(cursor) = consistent_cursor(env, history.view()) {
                self.index = i;
                self.cursor = cursor;
                self.synced = history.len();
                return Ok(i);
            }
        }
        Err(ClassError::Exhausted { from: self.index + 1, size: self.class.len() })
    }
}
