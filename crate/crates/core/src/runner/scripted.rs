//! Deterministic backend whose behavior is a script table.
//!
//! A script is JSON:
//!
//! ```json
//! {
//!   "tests": ["p.FooTest#victim", "p.FooTest#polluter"],
//!   "compile": [
//!     { "when": [{"file": "src/test/java/p/FooTest.java", "contains": "new LinkedHashMap"},
//!                {"file": "src/test/java/p/FooTest.java", "not_contains": "import java.util.LinkedHashMap;"}],
//!       "diagnostics": [{"file": "src/test/java/p/FooTest.java", "line_of": "new LinkedHashMap",
//!                        "kind": "MISSING_SYMBOL", "symbol": "LinkedHashMap", "message": "cannot find symbol"}] }
//!   ],
//!   "ordered": [
//!     { "test": "p.FooTest#victim", "after": ["p.FooTest#polluter"], "when": [],
//!       "fail": "expected:<false> but was:<true>", "frames": ["p.FooTest.victim(FooTest.java:42)"] }
//!   ],
//!   "shaken": [
//!     { "test": "p.FooTest#ordered", "failing_rounds": [2], "fail": "expected:<[a, b]> but was:<[b, a]>" }
//!   ]
//! }
//! ```
//!
//! Every compile rule whose conditions hold contributes its diagnostics. For
//! runs, the first matching rule decides a test's outcome; no match means the
//! test passes. Paths are relative to the working-copy root.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{check_sequence, OrderedResults, Runner, RunnerBackend, RunnerError, BackendKind, WorkingCopy};
use crate::model::{CompilationDiagnostic, DiagnosticKind, RunResult, StackFrame, TestId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Condition {
    pub file: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub not_contains: Option<String>,
}

impl Condition {
    fn holds(&self, copy: &WorkingCopy) -> bool {
        let text = copy.read(&self.file).unwrap_or_default();
        self.contains.as_ref().is_none_or(|c| text.contains(c.as_str()))
            && self.not_contains.as_ref().is_none_or(|c| !text.contains(c.as_str()))
    }
}

fn all_hold(conds: &[Condition], copy: &WorkingCopy) -> bool {
    conds.iter().all(|c| c.holds(copy))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedDiagnostic {
    pub file: PathBuf,
    #[serde(default)]
    pub line: Option<u32>,
    /// Line of the first occurrence of this text in `file`, falling back to
    /// `line` (or 1) when absent.
    #[serde(default)]
    pub line_of: Option<String>,
    pub kind: DiagnosticKind,
    #[serde(default)]
    pub symbol: Option<String>,
    pub message: String,
}

impl ScriptedDiagnostic {
    fn materialize(&self, copy: &WorkingCopy) -> CompilationDiagnostic {
        let located = self.line_of.as_ref().and_then(|needle| {
            copy.read(&self.file)
                .ok()?
                .lines()
                .position(|l| l.contains(needle.as_str()))
                .map(|i| i as u32 + 1)
        });
        let line = located.or(self.line).unwrap_or(1);
        CompilationDiagnostic::new(&self.file, line, self.kind, self.symbol.clone(), &self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompileRule {
    #[serde(default)]
    pub when: Vec<Condition>,
    pub diagnostics: Vec<ScriptedDiagnostic>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderedRule {
    pub test: String,
    /// Tests that must run earlier in the same sequence.
    #[serde(default)]
    pub after: Vec<String>,
    /// Exact sequence this rule applies to.
    #[serde(default)]
    pub sequence: Option<Vec<String>>,
    /// Applies only when the test runs by itself.
    #[serde(default)]
    pub alone: bool,
    #[serde(default)]
    pub when: Vec<Condition>,
    /// Failure message; absent means the rule forces a pass.
    #[serde(default)]
    pub fail: Option<String>,
    #[serde(default)]
    pub frames: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShakenRule {
    pub test: String,
    /// 1-based rounds that fail.
    pub failing_rounds: Vec<u32>,
    /// Restricts the rule to one shaker seed.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub when: Vec<Condition>,
    pub fail: String,
    #[serde(default)]
    pub frames: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Script {
    pub tests: Vec<String>,
    #[serde(default)]
    pub compile: Vec<CompileRule>,
    #[serde(default)]
    pub ordered: Vec<OrderedRule>,
    #[serde(default)]
    pub shaken: Vec<ShakenRule>,
}

impl Script {
    pub fn from_json(text: &str) -> Result<Self, RunnerError> {
        serde_json::from_str(text).map_err(|e| RunnerError::infra(format!("invalid runner script: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, RunnerError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunnerError::infra(format!("cannot read runner script {}: {e}", path.display())))?;
        Script::from_json(&text)
    }
}

fn failure(message: &str, frames: &[String]) -> RunResult {
    let frames: Vec<StackFrame> = frames
        .iter()
        .filter_map(|f| {
            let f = f.trim();
            StackFrame::parse_jvm_line(f).or_else(|| StackFrame::parse_jvm_line(&format!("at {f}")))
        })
        .collect();
    RunResult::failure(message, frames)
}

/// Scripted backend. Cloning shares the script but not the execution log.
#[derive(Debug, Clone)]
pub struct ScriptedRunner {
    script: Arc<Script>,
    executed: Vec<Vec<TestId>>,
    compiles: usize,
}

impl ScriptedRunner {
    pub fn new(script: Script) -> Self {
        ScriptedRunner {
            script: Arc::new(script),
            executed: Vec::new(),
            compiles: 0,
        }
    }

    pub fn shared(script: Arc<Script>) -> Self {
        ScriptedRunner {
            script,
            executed: Vec::new(),
            compiles: 0,
        }
    }

    /// Every executed sequence in order; shaken runs appear as one-element
    /// sequences per round.
    pub fn executed(&self) -> &[Vec<TestId>] {
        &self.executed
    }

    pub fn compile_count(&self) -> usize {
        self.compiles
    }

    fn known(&self, test: &TestId) -> Result<(), RunnerError> {
        let id = test.to_string();
        if self.script.tests.contains(&id) {
            Ok(())
        } else {
            Err(RunnerError::TestNotFound(test.clone()))
        }
    }

    fn outcome_in_sequence(&self, copy: &WorkingCopy, ids: &[String], pos: usize) -> RunResult {
        let id = &ids[pos];
        let rule = self.script.ordered.iter().find(|r| {
            r.test == *id
                && r.after.iter().all(|a| ids[..pos].contains(a))
                && r.sequence.as_ref().is_none_or(|s| s.as_slice() == ids)
                && (!r.alone || ids.len() == 1)
                && all_hold(&r.when, copy)
        });
        match rule.and_then(|r| r.fail.as_ref().map(|f| (f, r))) {
            Some((msg, r)) => failure(msg, &r.frames),
            None => RunResult::pass(),
        }
    }
}

impl Runner for ScriptedRunner {
    fn backend(&self) -> RunnerBackend {
        RunnerBackend {
            kind: BackendKind::Scripted,
            supports_ordered_runs: true,
            supports_shaker: true,
        }
    }

    fn compile(&mut self, copy: &mut WorkingCopy) -> Result<RunResult, RunnerError> {
        let started = Instant::now();
        self.compiles += 1;
        let diagnostics: Vec<CompilationDiagnostic> = self
            .script
            .compile
            .iter()
            .filter(|r| all_hold(&r.when, copy))
            .flat_map(|r| r.diagnostics.iter().map(|d| d.materialize(copy)))
            .collect();
        Ok(RunResult::compilation_error(diagnostics).with_duration(started.elapsed().as_secs_f64()))
    }

    fn run_ordered(&mut self, copy: &mut WorkingCopy, sequence: &[TestId]) -> Result<OrderedResults, RunnerError> {
        check_sequence(sequence)?;
        for t in sequence {
            self.known(t)?;
        }
        let started = Instant::now();
        let ids: Vec<String> = sequence.iter().map(TestId::to_string).collect();
        let mut out = OrderedResults::new();
        for (pos, test) in sequence.iter().enumerate() {
            out.insert(test.clone(), self.outcome_in_sequence(copy, &ids, pos));
        }
        let per_test = started.elapsed().as_secs_f64() / sequence.len() as f64;
        for r in out.values_mut() {
            r.duration_s = per_test;
        }
        self.executed.push(sequence.to_vec());
        Ok(out)
    }

    fn run_shaken(
        &mut self,
        copy: &mut WorkingCopy,
        test: &TestId,
        rounds: u32,
        seed: u64,
    ) -> Result<Vec<RunResult>, RunnerError> {
        if rounds == 0 {
            return Err(RunnerError::InvalidRequest("rounds must be at least 1".into()));
        }
        self.known(test)?;
        let id = test.to_string();
        let rule = self.script.shaken.iter().find(|r| {
            r.test == id && r.seed.is_none_or(|s| s == seed) && all_hold(&r.when, copy)
        });
        let results = (1..=rounds)
            .map(|round| {
                self.executed.push(vec![test.clone()]);
                match rule {
                    Some(r) if r.failing_rounds.contains(&round) => failure(&r.fail, &r.frames),
                    _ => RunResult::pass(),
                }
            })
            .collect();
        Ok(results)
    }
}
