//! Acceptance of compiled patches: category-specific reruns, the co-victim
//! sweep, and advisory checks (overfitting to shared state, suspicious
//! assertion edits).

mod flags;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use flags::suspicious_patch_flags;

use crate::java::dataflow::referenced_names;
use crate::java::lexer::tokenize;
use crate::java::{ClassModel, MethodModel};
use crate::model::{FlakinessCategory, FlakyTestCase, OutcomeKind, RunResult, SuspicionFlag, TestId};
use crate::runner::{Runner, RunnerError, WorkingCopy};

pub const ORDER_POLLUTERS_FIRST: &str = "polluters_then_victim";
pub const ORDER_VICTIM_FIRST: &str = "victim_then_polluters";
pub const ORDER_ISOLATED: &str = "isolated";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationOutcome {
    pub kind: OutcomeKind,
    /// Flaky test result per executed order.
    pub per_order_results: BTreeMap<String, RunResult>,
    /// Polluter results from the polluters-first order.
    pub polluter_results: BTreeMap<TestId, RunResult>,
    pub shaken_results: Vec<RunResult>,
    pub co_victims_fixed: Vec<TestId>,
    pub warnings: Vec<SuspicionFlag>,
    pub runner_time_s: f64,
}

impl ValidationOutcome {
    fn new() -> Self {
        ValidationOutcome {
            kind: OutcomeKind::TestPass,
            per_order_results: BTreeMap::new(),
            polluter_results: BTreeMap::new(),
            shaken_results: Vec::new(),
            co_victims_fixed: Vec::new(),
            warnings: Vec::new(),
            runner_time_s: 0.0,
        }
    }

    /// First non-passing result, flaky test results before polluter ones.
    pub fn failure(&self) -> Option<&RunResult> {
        self.per_order_results
            .values()
            .chain(&self.shaken_results)
            .chain(self.polluter_results.values())
            .find(|r| !r.passed())
    }

    fn settle(&mut self) {
        self.kind = self.failure().map(|r| r.kind).unwrap_or(OutcomeKind::TestPass);
    }
}

fn take(results: &mut BTreeMap<TestId, RunResult>, test: &TestId) -> Result<RunResult, RunnerError> {
    results
        .remove(test)
        .ok_or_else(|| RunnerError::TestNotFound(test.clone()))
}

/// Reruns the patched flaky test the way its category requires.
///
/// Victims must pass both after and before their polluters, and the
/// polluters must themselves pass; brittle tests must pass alone;
/// implementation-dependent tests must pass every shaker round.
pub fn validate(
    case: &FlakyTestCase,
    copy: &mut WorkingCopy,
    runner: &mut dyn Runner,
    shaker_rounds: u32,
    seed: u64,
) -> Result<ValidationOutcome, RunnerError> {
    let mut out = ValidationOutcome::new();
    match case.category {
        FlakinessCategory::OdVictim => {
            let mut forward = case.polluters.clone();
            forward.push(case.test.clone());
            let mut results = runner.run_ordered(copy, &forward)?;
            out.per_order_results
                .insert(ORDER_POLLUTERS_FIRST.into(), take(&mut results, &case.test)?);
            for p in &case.polluters {
                out.polluter_results.insert(p.clone(), take(&mut results, p)?);
            }
            let mut backward = vec![case.test.clone()];
            backward.extend(case.polluters.iter().cloned());
            let mut results = runner.run_ordered(copy, &backward)?;
            out.per_order_results
                .insert(ORDER_VICTIM_FIRST.into(), take(&mut results, &case.test)?);
        }
        FlakinessCategory::OdBrittle => {
            let r = runner.run_isolated(copy, &case.test)?;
            out.per_order_results.insert(ORDER_ISOLATED.into(), r);
        }
        FlakinessCategory::Id => {
            out.shaken_results = runner.run_shaken(copy, &case.test, shaker_rounds, seed)?;
        }
    }
    out.runner_time_s = out
        .per_order_results
        .values()
        .chain(&out.shaken_results)
        .map(|r| r.duration_s)
        .sum();
    out.settle();
    Ok(out)
}

/// Co-victims of the same polluters that pass after them with the patch
/// in place.
pub fn covictim_sweep(case: &FlakyTestCase, copy: &mut WorkingCopy, runner: &mut dyn Runner) -> Vec<TestId> {
    let mut fixed = Vec::new();
    for w in &case.co_victims {
        let mut sequence = case.polluters.clone();
        sequence.push(w.clone());
        match runner.run_ordered(copy, &sequence) {
            Ok(mut results) => {
                if results.remove(w).is_some_and(|r| r.passed()) {
                    fixed.push(w.clone());
                }
            }
            Err(e) => log::warn!("co-victim {w} could not be run: {e}"),
        }
    }
    fixed
}

fn method_references(m: &MethodModel) -> BTreeSet<String> {
    match tokenize(&m.source) {
        Ok(toks) => referenced_names(&toks, &m.source),
        Err(_) => BTreeSet::new(),
    }
}

/// Fields of the victim's class that both the victim and a polluter read
/// or write directly.
pub fn shared_fields(victim_model: &ClassModel, case: &FlakyTestCase, polluter_models: &[ClassModel]) -> Vec<String> {
    let Some(victim) = victim_model.method(&case.test.method) else {
        return Vec::new();
    };
    let fields: BTreeSet<&str> = victim_model.fields.iter().map(|f| f.name.as_str()).collect();
    let victim_refs = method_references(victim);
    let mut polluter_refs = BTreeSet::new();
    for p in &case.polluters {
        let model = std::iter::once(victim_model)
            .chain(polluter_models)
            .find(|m| m.qualified_name() == p.class_fqn);
        if let Some(method) = model.and_then(|m| m.method(&p.method)) {
            polluter_refs.extend(method_references(method));
        }
    }
    victim_refs
        .intersection(&polluter_refs)
        .filter(|n| fields.contains(n.as_str()))
        .cloned()
        .collect()
}

/// Warns about other tests of the suite that reference a field shared by
/// the victim and its polluters, since such tests may also depend on it.
pub fn overfit_guard(suite_models: &[ClassModel], case: &FlakyTestCase, shared_fields: &[String]) -> Vec<String> {
    if shared_fields.is_empty() {
        return Vec::new();
    }
    let involved: BTreeSet<(String, String)> = std::iter::once(&case.test)
        .chain(&case.polluters)
        .map(|t| (t.class_fqn.clone(), t.method.clone()))
        .collect();
    let victim_class = case.test.class_fqn.as_str();
    let victim_simple = victim_class.rsplit('.').next().unwrap_or(victim_class);
    let mut warnings = Vec::new();
    for model in suite_models {
        let fqn = model.qualified_name();
        let bare_visible = fqn == victim_class
            || model
                .superclass
                .as_deref()
                .is_some_and(|s| s == victim_simple || s == victim_class);
        for m in model.methods.iter().filter(|m| m.is_test()) {
            if involved.contains(&(fqn.clone(), m.name.clone())) {
                continue;
            }
            let refs = method_references(m);
            for field in shared_fields {
                let qualified = m.source.contains(&format!("{victim_simple}.{field}"));
                if qualified || (bare_visible && refs.contains(field)) {
                    warnings.push(format!("test {fqn}#{} also references shared field {field}", m.name));
                }
            }
        }
    }
    warnings
}
