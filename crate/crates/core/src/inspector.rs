//! Reproduction of a reported flaky failure and extraction of the failure
//! context shown to the model: the error message, the failing statement and
//! the likely source of flakiness.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::java::{
    extract_related_code, find_unordered_suspects, locate_statement, ClassModel, RelatedCode, RelatedError,
    SuspectStatement, UnorderedCatalog,
};
use crate::model::{FlakinessCategory, FlakyTestCase, OutcomeKind, RunResult};
use crate::runner::{Runner, RunnerError, WorkingCopy};

/// Default number of shaker rounds used to reproduce and to validate
/// implementation-dependent flakiness.
pub const DEFAULT_SHAKER_ROUNDS: u32 = 5;

#[derive(Debug, Error)]
pub enum InspectError {
    #[error("flaky failure not reproduced: {0}")]
    NotReproduced(String),
    #[error("project does not compile before repair: {0}")]
    SetupCompile(String),
    #[error(transparent)]
    Runner(#[from] RunnerError),
    #[error(transparent)]
    Related(#[from] RelatedError),
}

/// The statement a failure surfaced at.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailingAssertion {
    pub line: u32,
    pub end_line: u32,
    pub statement: String,
    pub method: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextBundle {
    pub error_message: String,
    pub failing_assertion: Option<FailingAssertion>,
    /// Statements that may make an implementation-dependent test flaky.
    pub suspects: Vec<SuspectStatement>,
    /// Shared fields, lifecycle methods and helpers an order-dependent
    /// victim touches, one line each.
    pub shared_state: Vec<String>,
    pub related_code: RelatedCode,
    /// Set when no stack frame could be mapped into the test class.
    pub degraded: bool,
}

/// Runs the case the way its category needs in order to observe the failure
/// and returns the failing result.
///
/// Victims run after their polluters (in input order), brittle tests run
/// alone, and implementation-dependent tests run under the shaker until the
/// first failing round.
pub fn reproduce(
    case: &FlakyTestCase,
    runner: &mut dyn Runner,
    copy: &mut WorkingCopy,
    shaker_rounds: u32,
    seed: u64,
) -> Result<RunResult, InspectError> {
    let compiled = runner.compile(copy)?;
    if compiled.kind == OutcomeKind::CompilationError {
        let first = compiled
            .diagnostics
            .first()
            .map(|d| d.one_line())
            .unwrap_or_else(|| "no diagnostics".into());
        return Err(InspectError::SetupCompile(first));
    }
    let observed = match case.category {
        FlakinessCategory::OdVictim => {
            let mut sequence = case.polluters.clone();
            sequence.push(case.test.clone());
            let mut results = runner.run_ordered(copy, &sequence)?;
            vec![results
                .remove(&case.test)
                .ok_or_else(|| RunnerError::TestNotFound(case.test.clone()))?]
        }
        FlakinessCategory::OdBrittle => vec![runner.run_isolated(copy, &case.test)?],
        FlakinessCategory::Id => runner.run_shaken(copy, &case.test, shaker_rounds, seed)?,
    };
    observed
        .into_iter()
        .find(|r| r.kind == OutcomeKind::TestFailure)
        .ok_or_else(|| InspectError::NotReproduced(format!("{} passed in every reproduction run", case.test)))
}

/// Maps the innermost stack frame that lies in the test class back to its
/// statement.
fn failing_assertion(model: &ClassModel, result: &RunResult) -> Option<FailingAssertion> {
    result.stack_frames.iter().find_map(|frame| {
        let located = locate_statement(model, &frame.class_fqn, frame.line).ok()?;
        if located.degenerate {
            return None;
        }
        Some(FailingAssertion {
            line: located.start_line,
            end_line: located.end_line,
            statement: located.text,
            method: located.method.name.clone(),
        })
    })
}

/// Distills a failing run into the prompt context. Pure in its inputs.
pub fn extract_context(
    case: &FlakyTestCase,
    result: &RunResult,
    model: &ClassModel,
    polluter_models: &[ClassModel],
    catalog: &UnorderedCatalog,
) -> Result<ContextBundle, InspectError> {
    let related_code = extract_related_code(model, case, polluter_models)?;
    let assertion = failing_assertion(model, result);
    if assertion.is_none() {
        log::warn!(
            "{}: no stack frame maps into {}; continuing with the error message only",
            case.test,
            model.qualified_name()
        );
    }
    let suspects = match (&case.category, &assertion) {
        (FlakinessCategory::Id, Some(a)) => model
            .method(&a.method)
            .map(|m| find_unordered_suspects(model, m, a.line, catalog))
            .unwrap_or_default(),
        _ => Vec::new(),
    };
    let shared_state = if case.category == FlakinessCategory::OdVictim {
        related_code.shared_state_summary()
    } else {
        Vec::new()
    };
    Ok(ContextBundle {
        error_message: result.failure_message.clone().unwrap_or_default(),
        degraded: assertion.is_none(),
        failing_assertion: assertion,
        suspects,
        shared_state,
        related_code,
    })
}
