//! Deterministic history→action oracles.
//!
//! The external process protocol is line-oriented: each request is one line
//! holding the full history in the [`History::encode`] format (an empty line
//! for the empty history); each response is one line holding a decimal
//! action symbol. The oracle is treated as stateless, so any request may be
//! replayed; repeated histories are answered from a cache and periodically
//! re-asked to detect nondeterminism.

use std::collections::HashMap;
use std::convert::Infallible;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::Duration;

use rand::Rng;
use thiserror::Error;

use crate::env::{Action, History, HistoryView, Policy};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("cannot start oracle process {command:?}: {source}")]
    Spawn { command: String, source: std::io::Error },
    #[error("oracle i/o failed: {0}")]
    Io(String),
    #[error("oracle did not answer within {0:?}")]
    Timeout(Duration),
    #[error("oracle closed its output")]
    Closed,
    #[error("oracle answered {0:?}, expected an action symbol")]
    BadResponse(String),
    #[error("oracle answered {first} then {second} for the same history of length {len}")]
    Nondeterministic { len: usize, first: Action, second: Action },
}

/// A deterministic, replayable policy: identical histories yield identical
/// actions.
pub trait PolicyOracle: Send + Sync {
    fn decide(&self, history: HistoryView<'_>) -> Result<Action, OracleError>;
}

impl<O: PolicyOracle + ?Sized> PolicyOracle for &O {
    fn decide(&self, history: HistoryView<'_>) -> Result<Action, OracleError> {
        (**self).decide(history)
    }
}

impl<O: PolicyOracle + ?Sized> PolicyOracle for Box<O> {
    fn decide(&self, history: HistoryView<'_>) -> Result<Action, OracleError> {
        (**self).decide(history)
    }
}

impl<O: PolicyOracle + ?Sized> PolicyOracle for std::sync::Arc<O> {
    fn decide(&self, history: HistoryView<'_>) -> Result<Action, OracleError> {
        (**self).decide(history)
    }
}

/// Runs an oracle as a [`Policy`].
pub struct OraclePolicy<O>(pub O);

impl<O: PolicyOracle> Policy for OraclePolicy<O> {
    type Error = OracleError;

    fn act(&mut self, history: &History) -> Result<Action, OracleError> {
        self.0.decide(history.view())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstantPolicy(pub Action);

impl PolicyOracle for ConstantPolicy {
    fn decide(&self, _history: HistoryView<'_>) -> Result<Action, OracleError> {
        Ok(self.0)
    }
}

impl Policy for ConstantPolicy {
    type Error = Infallible;

    fn act(&mut self, _history: &History) -> Result<Action, Infallible> {
        Ok(self.0)
    }
}

/// Plays the other binary action than the wrapped oracle.
#[derive(Debug, Clone)]
pub struct Flipped<O>(pub O);

impl<O: PolicyOracle> PolicyOracle for Flipped<O> {
    fn decide(&self, history: HistoryView<'_>) -> Result<Action, OracleError> {
        Ok(Action(1 - self.0.decide(history)?.0.min(1)))
    }
}

/// A lookup-table policy over the most recent `window` steps, where each
/// step is summarized by its action and whether its reward was positive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TablePolicy {
    window: usize,
    actions: usize,
    table: Vec<Action>,
}

impl TablePolicy {
    fn table_len(window: usize, actions: usize) -> usize {
        let base = 2 * actions;
        (0..=window).map(|k| base.pow(k as u32)).sum()
    }

    pub fn new(window: usize, actions: usize, table: Vec<Action>) -> Self {
        assert_eq!(table.len(), Self::table_len(window, actions), "table size");
        assert!(table.iter().all(|a| a.index() < actions), "table actions in alphabet");
        TablePolicy { window, actions, table }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, window: usize, actions: usize) -> Self {
        let table = (0..Self::table_len(window, actions))
            .map(|_| Action(rng.gen_range(0..actions) as u8))
            .collect();
        TablePolicy { window, actions, table }
    }

    fn key(&self, history: HistoryView<'_>) -> usize {
        let base = 2 * self.actions;
        let k = history.len().min(self.window);
        let offset: usize = (0..k).map(|j| base.pow(j as u32)).sum();
        let code = history.iter().rev().take(k).fold(0usize, |acc, s| {
            let positive = (s.percept.reward.numer() > 0) as usize;
            acc * base + (s.action.index() % self.actions) * 2 + positive
        });
        offset + code
    }
}

impl PolicyOracle for TablePolicy {
    fn decide(&self, history: HistoryView<'_>) -> Result<Action, OracleError> {
        Ok(self.table[self.key(history)])
    }
}

struct ProcessState {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    cache: HashMap<String, Action>,
    replays: u64,
}

/// An oracle running as an external process.
pub struct ProcessOracle {
    state: Mutex<ProcessState>,
    timeout: Duration,
    spot_check_every: u64,
}

impl ProcessOracle {
    pub fn spawn(command: &[String], timeout: Duration) -> Result<Self, OracleError> {
        let shown = command.join(" ");
        let (program, args) = command.split_first().ok_or_else(|| OracleError::Spawn {
            command: shown.clone(),
            source: std::io::Error::new(std::io::ErrorKind::InvalidInput, "empty command"),
        })?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| OracleError::Spawn { command: shown, source })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(ProcessOracle {
            state: Mutex::new(ProcessState { child, stdin, lines: rx, cache: HashMap::new(), replays: 0 }),
            timeout,
            spot_check_every: 16,
        })
    }

    /// Re-ask every `n`-th repeated history instead of trusting the cache.
    pub fn with_spot_checks(mut self, n: u64) -> Self {
        self.spot_check_every = n.max(1);
        self
    }

    fn ask(state: &mut ProcessState, request: &str, timeout: Duration) -> Result<Action, OracleError> {
        writeln!(state.stdin, "{request}")
            .and_then(|_| state.stdin.flush())
            .map_err(|e| OracleError::Io(e.to_string()))?;
        let line = match state.lines.recv_timeout(timeout) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => return Err(OracleError::Io(e.to_string())),
            Err(RecvTimeoutError::Timeout) => return Err(OracleError::Timeout(timeout)),
            Err(RecvTimeoutError::Disconnected) => return Err(OracleError::Closed),
        };
        line.trim()
            .parse::<u8>()
            .map(Action)
            .map_err(|_| OracleError::BadResponse(line))
    }
}

impl PolicyOracle for ProcessOracle {
    fn decide(&self, history: HistoryView<'_>) -> Result<Action, OracleError> {
        let request = history.encode();
        let mut state = self.state.lock().map_err(|_| OracleError::Io("oracle lock poisoned".into()))?;
        if let Some(&cached) = state.cache.get(&request) {
            state.replays += 1;
            if state.replays % self.spot_check_every == 0 {
                let again = Self::ask(&mut state, &request, self.timeout)?;
                if again != cached {
                    return Err(OracleError::Nondeterministic { len: history.len(), first: cached, second: again });
                }
            }
            return Ok(cached);
        }
        let action = Self::ask(&mut state, &request, self.timeout)?;
        state.cache.insert(request, action);
        Ok(action)
    }
}

impl Drop for ProcessOracle {
    fn drop(&mut self) {
        if let Ok(state) = self.state.get_mut() {
            let _ = state.child.kill();
            let _ = state.child.wait();
        }
    }
}
