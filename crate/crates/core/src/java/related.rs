//! Related-code bundles: the code a repair prompt shows for one flaky test.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::lexer::TokenKind;
use super::parser::{ClassModel, MethodModel};
use crate::model::{FlakinessCategory, FlakyTestCase, TestId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RelatedKind {
    Flaky,
    Polluter,
    Field,
    Lifecycle,
    Helper,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelatedMember {
    pub kind: RelatedKind,
    pub class_fqn: String,
    pub name: String,
    pub source: String,
    /// 0 for the tests themselves, 1 for shared state and direct helpers,
    /// growing with call depth. Budget trimming drops the largest first.
    pub distance: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RelatedCode {
    pub members: Vec<RelatedMember>,
}

impl RelatedCode {
    pub fn of_kind(&self, kind: RelatedKind) -> impl Iterator<Item = &RelatedMember> {
        self.members.iter().filter(move |m| m.kind == kind)
    }

    pub fn contains(&self, kind: RelatedKind, name: &str) -> bool {
        self.of_kind(kind).any(|m| m.name == name)
    }

    /// One line per shared field and helper, used as the shared-state
    /// localization for order-dependent victims.
    pub fn shared_state_summary(&self) -> Vec<String> {
        self.members
            .iter()
            .filter_map(|m| match m.kind {
                RelatedKind::Field => Some(format!("shared field: {}", first_line(&m.source))),
                RelatedKind::Lifecycle => Some(format!("lifecycle method: {}", m.name)),
                RelatedKind::Helper => Some(format!("helper method: {}", m.name)),
                _ => None,
            })
            .collect()
    }
}

fn first_line(s: &str) -> String {
    super::statements::join_lines(s)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RelatedError {
    #[error("target method not found: {0}")]
    TargetNotFound(String),
}

/// Builds the related-code bundle for `case`. `model` is the flaky test's
/// class; polluters declared in other classes are looked up in
/// `polluter_models`.
pub fn extract_related_code(
    model: &ClassModel,
    case: &FlakyTestCase,
    polluter_models: &[ClassModel],
) -> Result<RelatedCode, RelatedError> {
    let flaky = model
        .method(&case.test.method)
        .ok_or_else(|| RelatedError::TargetNotFound(case.test.to_string()))?;
    let fqn = model.qualified_name();
    let mut members = vec![method_member(RelatedKind::Flaky, &fqn, flaky, 0)];
    if case.category != FlakinessCategory::OdVictim {
        return Ok(RelatedCode { members });
    }

    let mut classes: Vec<&ClassModel> = vec![model];
    let mut roots: Vec<(&ClassModel, &MethodModel)> = vec![(model, flaky)];
    for polluter in &case.polluters {
        let owner = owning_model(model, polluter, polluter_models)
            .ok_or_else(|| RelatedError::TargetNotFound(polluter.to_string()))?;
        let method = owner
            .method(&polluter.method)
            .ok_or_else(|| RelatedError::TargetNotFound(polluter.to_string()))?;
        members.push(method_member(RelatedKind::Polluter, &owner.qualified_name(), method, 0));
        roots.push((owner, method));
        if !classes.iter().any(|c| std::ptr::eq(*c, owner)) {
            classes.push(owner);
        }
    }

    for class in &classes {
        let class_fqn = class.qualified_name();
        for field in &class.fields {
            if members
                .iter()
                .any(|m| m.kind == RelatedKind::Field && m.class_fqn == class_fqn && m.name == field.name)
            {
                continue;
            }
            members.push(RelatedMember {
                kind: RelatedKind::Field,
                class_fqn: class_fqn.clone(),
                name: field.name.clone(),
                source: class.source_text[field.span.start..field.span.end].to_string(),
                distance: 1,
            });
        }
        for m in class.methods.iter().filter(|m| m.is_lifecycle()) {
            members.push(method_member(RelatedKind::Lifecycle, &class_fqn, m, 1));
        }
    }

    for (class, root) in roots {
        let class_fqn = class.qualified_name();
        for (helper, depth) in helper_closure(class, root) {
            let already = members.iter().any(|m| {
                m.class_fqn == class_fqn && m.name == helper.name && m.source == helper.source
            });
            if !already {
                members.push(method_member(RelatedKind::Helper, &class_fqn, helper, depth));
            }
        }
    }
    Ok(RelatedCode { members })
}

fn owning_model<'a>(
    model: &'a ClassModel,
    test: &TestId,
    others: &'a [ClassModel],
) -> Option<&'a ClassModel> {
    let matches = |m: &ClassModel| m.qualified_name() == test.class_fqn;
    if matches(model) {
        return Some(model);
    }
    others.iter().find(|m| matches(m))
}

fn method_member(kind: RelatedKind, class_fqn: &str, m: &MethodModel, distance: u32) -> RelatedMember {
    RelatedMember {
        kind,
        class_fqn: class_fqn.to_string(),
        name: m.name.clone(),
        source: m.source.clone(),
        distance,
    }
}

/// Names of same-class methods invoked from `method`'s body
/// (`name(..)` or `this.name(..)`).
pub(crate) fn local_callees(model: &ClassModel, method: &MethodModel) -> BTreeSet<String> {
    let src = model.source_text.as_str();
    let Some(body_start) = method.body_start else {
        return BTreeSet::new();
    };
    let toks = model.tokens_in(body_start, method.span.end);
    let text = |i: usize| toks.get(i).map(|t| t.text(src)).unwrap_or("");
    let mut out = BTreeSet::new();
    for (i, t) in toks.iter().enumerate() {
        if t.kind != TokenKind::Ident || text(i + 1) != "(" {
            continue;
        }
        let prev = if i > 0 { text(i - 1) } else { "" };
        let qualified_by_this = prev == "." && i >= 2 && text(i - 2) == "this";
        if (prev == "." && !qualified_by_this) || prev == "new" || prev == "::" {
            continue;
        }
        out.insert(t.text(src).to_string());
    }
    out
}

/// Non-test, non-lifecycle methods transitively called from `root`, with
/// their call depth, in breadth-first order.
fn helper_closure<'m>(model: &'m ClassModel, root: &MethodModel) -> Vec<(&'m MethodModel, u32)> {
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut out = Vec::new();
    let mut queue: VecDeque<(BTreeSet<String>, u32)> = VecDeque::new();
    queue.push_back((local_callees(model, root), 1));
    while let Some((names, depth)) = queue.pop_front() {
        for name in names {
            if name == root.name || !seen.insert(name.clone()) {
                continue;
            }
            for m in model
                .methods
                .iter()
                .filter(|m| m.name == name && !m.is_test() && !m.is_lifecycle())
            {
                out.push((m, depth));
                queue.push_back((local_callees(model, m), depth + 1));
            }
        }
    }
    out
}
