//! Offline repair of patches that do not compile.
//!
//! Four steps run in a fixed order over the patch (never over method
//! bodies): declarations the patch changed are reverted, missing classes are
//! imported after a compile probe confirms them, missing packages get a
//! build dependency, and patch imports that clash with the original imports
//! are dropped. Every step is logged as a [`StitchAction`] that
//! [`replay_actions`] can reapply.

mod index;

use std::collections::BTreeSet;

use thiserror::Error;

pub use index::{ClassIndex, CoordinateTable, IndexEntry, Origin};

use crate::java::patch::replacement_target;
use crate::java::{
    apply_patch, declaration_diff, declared_dependencies, parse_method_snippet, parse_test_class, BuildDependency,
    ClassModel, ImportDecl, ManifestError, MethodEdit, PatchCandidate,
};
use crate::model::{CompilationDiagnostic, DiagnosticKind, StitchAction, StitchActionKind};

pub const DEFAULT_PROBE_BUDGET: u32 = 10;

/// Compiles a candidate patch and reports its diagnostics (empty when it
/// compiles).
pub trait CompileProbe {
    fn probe(&mut self, patch: &PatchCandidate) -> Result<Vec<CompilationDiagnostic>, String>;
}

impl<F> CompileProbe for F
where
    F: FnMut(&PatchCandidate) -> Result<Vec<CompilationDiagnostic>, String>,
{
    fn probe(&mut self, patch: &PatchCandidate) -> Result<Vec<CompilationDiagnostic>, String> {
        self(patch)
    }
}

#[derive(Debug, Error)]
pub enum StitchError {
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("cannot replay {kind:?} `{detail}`: {reason}")]
    Replay {
        kind: StitchActionKind,
        detail: String,
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StitchOutcome {
    pub patch: PatchCandidate,
    pub actions: Vec<StitchAction>,
    /// Problems no step could fix, for the log.
    pub unresolved: Vec<String>,
    pub probes: u32,
}

/// Inputs that stay fixed for a project.
#[derive(Debug, Clone, Copy)]
pub struct StitchContext<'a> {
    pub index: &'a ClassIndex,
    pub coordinates: &'a CoordinateTable,
    /// Current build manifest text, if the project has one.
    pub manifest: Option<&'a str>,
    pub probe_budget: u32,
}

/// Diagnostic identity that survives line shifts caused by added imports.
type DiagId = (DiagnosticKind, Option<String>, String);

fn diag_id(d: &CompilationDiagnostic) -> DiagId {
    let file = d
        .file
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_default();
    let detail = d.symbol.clone().or_else(|| Some(d.raw_message.lines().next().unwrap_or("").trim().to_string()));
    (d.kind, detail, file)
}

/// Whether a diagnostic concerns the test class's source file.
fn concerns(original: &ClassModel, d: &CompilationDiagnostic) -> bool {
    d.file.as_os_str().is_empty()
        || d.file.file_name().and_then(|f| f.to_str()) == Some(&format!("{}.java", original.class_name))
}

/// Patch imports that the original already has are dropped.
fn normalize(original: &ClassModel, patch: &PatchCandidate) -> PatchCandidate {
    let mut out = patch.clone();
    let present: BTreeSet<String> = original.imports.iter().map(ImportDecl::key).collect();
    let removed: BTreeSet<String> = patch.removed_imports.iter().map(ImportDecl::key).collect();
    let mut seen = BTreeSet::new();
    out.new_imports
        .retain(|i| (!present.contains(&i.key()) || removed.contains(&i.key())) && seen.insert(i.key()));
    out
}

fn revert_declaration(original: &ClassModel, patch: &mut PatchCandidate, name: &str) -> Result<(), String> {
    let edit = patch
        .method_replacements
        .get(name)
        .ok_or_else(|| format!("patch does not replace `{name}`"))?;
    let target = replacement_target(original, name, &edit.source).ok_or_else(|| format!("no original `{name}`"))?;
    let patched = parse_method_snippet(&edit.source)
        .map_err(|e| e.to_string())?
        .into_iter()
        .find(|m| m.name == name)
        .ok_or_else(|| format!("replacement does not declare `{name}`"))?;
    let indent: String = original
        .line_text(target.span.start_line)
        .unwrap_or("")
        .chars()
        .take_while(|c| *c == ' ' || *c == '\t')
        .collect();
    let header: Vec<&str> = target
        .header_text()
        .split('\n')
        .map(|l| l.strip_prefix(indent.as_str()).unwrap_or(l))
        .collect();
    let source = format!("{}{}", header.join("\n"), patched.tail_text());
    patch
        .method_replacements
        .insert(name.to_string(), MethodEdit::replace(source));
    Ok(())
}

fn apply_action(original: &ClassModel, patch: &mut PatchCandidate, action: &StitchAction) -> Result<(), String> {
    match action.kind {
        StitchActionKind::RevertDeclaration => revert_declaration(original, patch, &action.detail)?,
        StitchActionKind::AddImport => {
            let imp = ImportDecl::from_key(&action.detail);
            if !patch.new_imports.iter().any(|i| i.key() == imp.key()) {
                patch.new_imports.push(imp);
            }
        }
        StitchActionKind::AddBuildDep => {
            let dep: BuildDependency = action.detail.parse()?;
            patch
                .build_dependencies
                .retain(|d| !(d.group == dep.group && d.artifact == dep.artifact));
            patch.build_dependencies.push(dep);
        }
        StitchActionKind::ExcludeImport => patch.new_imports.retain(|i| i.key() != action.detail),
    }
    Ok(())
}

/// Reapplies a stitch log to the patch it was produced from.
pub fn replay_actions(
    original: &ClassModel,
    pre_stitch: &PatchCandidate,
    actions: &[StitchAction],
) -> Result<PatchCandidate, StitchError> {
    let mut patch = normalize(original, pre_stitch);
    for action in actions {
        apply_action(original, &mut patch, action).map_err(|reason| StitchError::Replay {
            kind: action.kind,
            detail: action.detail.clone(),
            reason,
        })?;
    }
    Ok(patch)
}

fn action(kind: StitchActionKind, detail: impl Into<String>, resolved: Option<&CompilationDiagnostic>) -> StitchAction {
    StitchAction {
        kind,
        detail: detail.into(),
        resolved_diagnostic: resolved.cloned(),
    }
}

/// Methods a diagnostic points into, by enclosing span in the patched
/// source. A diagnostic outside every method implicates all replaced
/// methods.
fn implicated_methods(original: &ClassModel, patch: &PatchCandidate, diagnostics: &[&CompilationDiagnostic]) -> Vec<(String, CompilationDiagnostic)> {
    let replaced: Vec<&String> = patch
        .method_replacements
        .iter()
        .filter(|(name, e)| !e.addition && original.method(name).is_some())
        .map(|(name, _)| name)
        .collect();
    let patched_model = apply_patch(original, patch).ok().and_then(|s| parse_test_class(&s).ok());
    let mut out: Vec<(String, CompilationDiagnostic)> = Vec::new();
    for d in diagnostics {
        let enclosing = patched_model
            .as_ref()
            .and_then(|m| m.method_at_line(d.line))
            .map(|m| m.name.clone());
        let names: Vec<&String> = match &enclosing {
            Some(name) => replaced.iter().copied().filter(|r| *r == name).collect(),
            None => replaced.clone(),
        };
        for name in names {
            if !out.iter().any(|(n, _)| n == name) {
                out.push((name.clone(), (*d).clone()));
            }
        }
    }
    out
}

/// Reverts changed declarations of methods that a diagnostic implicates.
pub fn reconcile_declarations(
    original: &ClassModel,
    patch: &PatchCandidate,
    diagnostics: &[&CompilationDiagnostic],
) -> Vec<StitchAction> {
    let mut actions = Vec::new();
    for (name, diag) in implicated_methods(original, patch, diagnostics) {
        let edit = &patch.method_replacements[&name];
        let Some(target) = replacement_target(original, &name, &edit.source) else {
            continue;
        };
        let Some(patched) = parse_method_snippet(&edit.source)
            .ok()
            .and_then(|ms| ms.into_iter().find(|m| m.name == name))
        else {
            continue;
        };
        let diffs = declaration_diff(target, &patched);
        if !diffs.is_empty() {
            let summary: Vec<String> = diffs.iter().map(|d| d.summary()).collect();
            log::debug!("reverting declaration of {name}: {}", summary.join("; "));
            actions.push(action(StitchActionKind::RevertDeclaration, name, Some(&diag)));
        }
    }
    actions
}

/// Candidate imports for each missing symbol, each confirmed by a compile
/// probe. A candidate is kept when the symbol's diagnostic disappears and
/// no diagnostic outside `baseline` appears.
pub fn resolve_missing_symbols(
    original: &ClassModel,
    patch: &mut PatchCandidate,
    diagnostics: &[&CompilationDiagnostic],
    ctx: &StitchContext<'_>,
    prober: &mut dyn CompileProbe,
    log: &mut StitchOutcome,
) -> Vec<StitchAction> {
    let baseline: BTreeSet<DiagId> = diagnostics.iter().map(|d| diag_id(d)).collect();
    let imported: BTreeSet<String> = original
        .imports
        .iter()
        .chain(&patch.new_imports)
        .map(ImportDecl::key)
        .collect();
    let mut actions = Vec::new();
    let mut done = BTreeSet::new();
    for d in diagnostics.iter().filter(|d| d.kind == DiagnosticKind::MissingSymbol) {
        let Some(symbol) = d.symbol.as_deref() else { continue };
        let simple = symbol.split('.').next().unwrap_or(symbol);
        if !done.insert(simple.to_string()) {
            continue;
        }
        let candidates: Vec<String> = ctx
            .index
            .candidates(simple, &patch.raw_response)
            .into_iter()
            .filter(|c| !imported.contains(c))
            .collect();
        if candidates.is_empty() {
            log.unresolved.push(format!("no import candidates for symbol {simple}"));
            continue;
        }
        let mut resolved = false;
        for key in candidates.iter().take(ctx.probe_budget as usize) {
            let step = action(StitchActionKind::AddImport, key.clone(), Some(d));
            let mut trial = patch.clone();
            if apply_action(original, &mut trial, &step).is_err() {
                continue;
            }
            log.probes += 1;
            let result = match prober.probe(&trial) {
                Ok(r) => r,
                Err(e) => {
                    log.unresolved.push(format!("compile probe failed: {e}"));
                    return actions;
                }
            };
            let still_missing = result
                .iter()
                .any(|r| r.kind == DiagnosticKind::MissingSymbol && r.symbol.as_deref().map(|s| s.split('.').next().unwrap_or(s)) == Some(simple));
            let regressed = result.iter().any(|r| !baseline.contains(&diag_id(r)));
            if !still_missing && !regressed {
                *patch = trial;
                actions.push(step);
                resolved = true;
                break;
            }
        }
        if !resolved {
            log.unresolved.push(format!(
                "symbol {simple} unresolved after {} candidate(s)",
                candidates.len().min(ctx.probe_budget as usize)
            ));
        }
    }
    actions
}

/// Dependency additions for packages the compiler could not find.
pub fn add_build_dependency_for_missing_package(
    patch: &PatchCandidate,
    diagnostics: &[&CompilationDiagnostic],
    ctx: &StitchContext<'_>,
    log: &mut StitchOutcome,
) -> Result<Vec<StitchAction>, StitchError> {
    let declared = match ctx.manifest {
        Some(text) => declared_dependencies(text)?,
        None => Vec::new(),
    };
    let satisfied = |dep: &BuildDependency, extra: &[StitchAction]| {
        declared
            .iter()
            .chain(&patch.build_dependencies)
            .any(|d| d.group == dep.group && d.artifact == dep.artifact)
            || extra.iter().any(|a| a.detail == dep.to_string())
    };
    let mut actions = Vec::new();
    for d in diagnostics.iter().filter(|d| d.kind == DiagnosticKind::PackageNotFound) {
        let Some(package) = d.symbol.as_deref() else { continue };
        match ctx.coordinates.lookup(package) {
            Some(dep) if satisfied(dep, &actions) => {
                log::debug!("package {package}: {dep} already declared");
            }
            Some(dep) => actions.push(action(StitchActionKind::AddBuildDep, dep.to_string(), Some(d))),
            None => log.unresolved.push(format!("no known coordinate provides package {package}")),
        }
    }
    Ok(actions)
}

/// Patch-added imports whose simple name is already bound by an original
/// import; the original wins.
pub fn resolve_import_conflicts(
    original_imports: &[ImportDecl],
    patch: &PatchCandidate,
    diagnostics: &[&CompilationDiagnostic],
) -> Vec<StitchAction> {
    let kept: Vec<&ImportDecl> = original_imports
        .iter()
        .filter(|o| !patch.removed_imports.iter().any(|r| r.key() == o.key()))
        .collect();
    patch
        .new_imports
        .iter()
        .filter(|imp| !imp.is_wildcard())
        .filter(|imp| {
            kept.iter().any(|o| {
                !o.is_wildcard() && o.simple_name == imp.simple_name && o.is_static == imp.is_static && o.key() != imp.key()
            })
        })
        .map(|imp| {
            let ambiguity = diagnostics.iter().copied().find(|d| {
                d.kind == DiagnosticKind::AmbiguousReference && d.symbol.as_deref() == Some(imp.simple_name.as_str())
            });
            action(StitchActionKind::ExcludeImport, imp.key(), ambiguity)
        })
        .collect()
}

/// Runs the four repair steps over a patch whose compilation produced
/// `diagnostics`. With no diagnostics the patch comes back untouched.
pub fn stitch(
    original: &ClassModel,
    patch: &PatchCandidate,
    diagnostics: &[CompilationDiagnostic],
    ctx: &StitchContext<'_>,
    prober: &mut dyn CompileProbe,
) -> Result<StitchOutcome, StitchError> {
    let mut outcome = StitchOutcome {
        patch: patch.clone(),
        actions: Vec::new(),
        unresolved: Vec::new(),
        probes: 0,
    };
    let relevant: Vec<&CompilationDiagnostic> = diagnostics.iter().filter(|d| concerns(original, d)).collect();
    if relevant.is_empty() {
        return Ok(outcome);
    }
    let mut current = normalize(original, patch);
    let record = |current: &mut PatchCandidate, outcome: &mut StitchOutcome, actions: Vec<StitchAction>| {
        for a in actions {
            if let Err(e) = apply_action(original, current, &a) {
                outcome.unresolved.push(format!("{:?} {}: {e}", a.kind, a.detail));
                continue;
            }
            outcome.actions.push(a);
        }
    };

    let reverts = reconcile_declarations(original, &current, &relevant);
    record(&mut current, &mut outcome, reverts);

    let imports = resolve_missing_symbols(original, &mut current, &relevant, ctx, prober, &mut outcome);
    outcome.actions.extend(imports);

    let deps = add_build_dependency_for_missing_package(&current, &relevant, ctx, &mut outcome)?;
    record(&mut current, &mut outcome, deps);

    let exclusions = resolve_import_conflicts(&original.imports, &current, &relevant);
    record(&mut current, &mut outcome, exclusions);

    for u in &outcome.unresolved {
        log::info!("stitch: {u}");
    }
    outcome.patch = current;
    Ok(outcome)
}
