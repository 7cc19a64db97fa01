//! Compilation and test execution against a working copy.

pub mod diagnostics;
pub mod maven;
pub mod scripted;
pub mod surefire;
mod workcopy;

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{RunResult, TestId};

pub use diagnostics::parse_compiler_output;
pub use maven::{MavenConfig, MavenRunner};
pub use scripted::{Script, ScriptedRunner};
pub use workcopy::WorkingCopy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BackendKind {
    Maven,
    Scripted,
}

/// Capabilities of a runner backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunnerBackend {
    pub kind: BackendKind,
    pub supports_ordered_runs: bool,
    pub supports_shaker: bool,
}

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("infrastructure failure: {message}{}", hint.as_ref().map(|h| format!(" (hint: {h})")).unwrap_or_default())]
    Infra { message: String, hint: Option<String> },
    #[error("{what} timed out after {}s", limit.as_secs())]
    Timeout { what: String, limit: Duration },
    #[error("test not found: {0}")]
    TestNotFound(TestId),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunnerError {
    pub fn infra(message: impl Into<String>) -> Self {
        RunnerError::Infra {
            message: message.into(),
            hint: None,
        }
    }
}

/// Per-test outcomes of one ordered run, keyed by test.
pub type OrderedResults = BTreeMap<TestId, RunResult>;

/// A compile-and-run backend. Each call needs exclusive access to the
/// working copy.
pub trait Runner: Send {
    fn backend(&self) -> RunnerBackend;

    /// `TEST_PASS` means the module's tests compiled.
    fn compile(&mut self, copy: &mut WorkingCopy) -> Result<RunResult, RunnerError>;

    /// Runs `sequence` in exactly that order inside one runtime instance.
    fn run_ordered(&mut self, copy: &mut WorkingCopy, sequence: &[TestId]) -> Result<OrderedResults, RunnerError>;

    fn run_isolated(&mut self, copy: &mut WorkingCopy, test: &TestId) -> Result<RunResult, RunnerError> {
        let mut results = self.run_ordered(copy, std::slice::from_ref(test))?;
        results
            .remove(test)
            .ok_or_else(|| RunnerError::TestNotFound(test.clone()))
    }

    /// Runs `test` under the nondeterminism shaker. Backends that run a clean
    /// baseline first return `rounds + 1` results with the baseline first.
    fn run_shaken(
        &mut self,
        copy: &mut WorkingCopy,
        test: &TestId,
        rounds: u32,
        seed: u64,
    ) -> Result<Vec<RunResult>, RunnerError>;
}

pub(crate) fn check_sequence(sequence: &[TestId]) -> Result<(), RunnerError> {
    let Some(first) = sequence.first() else {
        return Err(RunnerError::InvalidRequest("empty test sequence".into()));
    };
    if sequence.iter().any(|t| t.module_path != first.module_path) {
        return Err(RunnerError::InvalidRequest(
            "all tests of an ordered run must belong to one module".into(),
        ));
    }
    Ok(())
}
