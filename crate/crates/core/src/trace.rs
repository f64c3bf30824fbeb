//! Execution traces: ordered line events with post-line variable state.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::program::MAX_PROGRAM_LINES;

/// Most line events a trace may hold.
pub const MAX_TRACE_LINES: usize = 1024;

/// Identifier -> rendered value, in first-binding order.
pub type StateMap = IndexMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionStatus {
    #[default]
    Ok,
    RuntimeError,
    Timeout,
    TraceLimitExceeded,
}

impl ExecutionStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ok => "ok",
            Self::RuntimeError => "runtime_error",
            Self::Timeout => "timeout",
            Self::TraceLimitExceeded => "trace_limit_exceeded",
        }
    }
}

/// One executed line and the state right after it.
///
/// Equality ignores the order of the state entries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceLine {
    pub line_no: u32,
    pub state: StateMap,
}

impl TraceLine {
    pub fn new<I, K, V>(line_no: u32, state: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        TraceLine { line_no, state: state.into_iter().map(|(k, v)| (k.into(), v.into())).collect() }
    }

    /// Order-free key used for multiset matching.
    pub fn canonical_key(&self) -> (u32, Vec<(&str, &str)>) {
        let mut pairs: Vec<(&str, &str)> = self.state.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
        pairs.sort_unstable();
        (self.line_no, pairs)
    }

    pub fn in_line_range(&self) -> bool {
        (1..=MAX_PROGRAM_LINES as u32).contains(&self.line_no)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Trace {
    pub lines: Vec<TraceLine>,
    #[serde(default)]
    pub stdout: String,
    #[serde(default)]
    pub status: ExecutionStatus,
}

impl Trace {
    pub fn new(lines: Vec<TraceLine>) -> Self {
        Trace { lines, stdout: String::new(), status: ExecutionStatus::Ok }
    }

    pub fn with_stdout(mut self, stdout: impl Into<String>) -> Self {
        self.stdout = stdout.into();
        self
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    /// Largest state size over the lines of this trace.
    pub fn max_state_size(&self) -> usize {
        self.lines.iter().map(|l| l.state.len()).max().unwrap_or(0)
    }
}
