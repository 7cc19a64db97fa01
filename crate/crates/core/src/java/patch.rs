//! Patch candidates and their application to a parsed test class.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::parser::{compact, parse_method_snippet, parse_test_class, ClassModel, ImportDecl, MethodModel};
use super::ParseError;

/// Maven coordinate of a dependency to add or pin.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BuildDependency {
    pub group: String,
    pub artifact: String,
    pub version: String,
}

impl BuildDependency {
    pub fn new(group: &str, artifact: &str, version: &str) -> Self {
        BuildDependency {
            group: group.to_string(),
            artifact: artifact.to_string(),
            version: version.to_string(),
        }
    }
}

impl fmt::Display for BuildDependency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.group, self.artifact, self.version)
    }
}

impl FromStr for BuildDependency {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.trim().split(':').map(str::trim).collect();
        let valid_part = |p: &&str| {
            !p.is_empty()
                && p.chars()
                    .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_' | '$' | '{' | '}'))
        };
        match parts.as_slice() {
            [g, a, v] if [g, a, v].iter().all(|p| valid_part(p)) => Ok(BuildDependency::new(g, a, v)),
            _ => Err(format!("expected group:artifact:version, got `{}`", s.trim())),
        }
    }
}

/// Replacement source for one method, or a new helper when `addition` is set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodEdit {
    pub source: String,
    #[serde(default)]
    pub addition: bool,
}

impl MethodEdit {
    pub fn replace(source: impl Into<String>) -> Self {
        MethodEdit {
            source: source.into(),
            addition: false,
        }
    }

    pub fn add(source: impl Into<String>) -> Self {
        MethodEdit {
            source: source.into(),
            addition: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PatchCandidate {
    pub method_replacements: BTreeMap<String, MethodEdit>,
    pub new_imports: Vec<ImportDecl>,
    pub removed_imports: Vec<ImportDecl>,
    pub build_dependencies: Vec<BuildDependency>,
    #[serde(default)]
    pub raw_response: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatchError {
    #[error("replacement targets unknown method `{0}`")]
    UnknownTarget(String),
    #[error("patched source does not parse: {0}")]
    PatchSyntax(ParseError),
    #[error("invalid patch: {0}")]
    Invalid(String),
}

impl PatchCandidate {
    pub fn is_empty(&self) -> bool {
        self.method_replacements.is_empty()
            && self.new_imports.is_empty()
            && self.removed_imports.is_empty()
            && self.build_dependencies.is_empty()
    }

    pub fn validate(&self, model: &ClassModel) -> Result<(), PatchError> {
        for (name, edit) in &self.method_replacements {
            if !edit.addition && model.method(name).is_none() {
                return Err(PatchError::UnknownTarget(name.clone()));
            }
        }
        let added: BTreeSet<String> = self.new_imports.iter().map(ImportDecl::key).collect();
        if let Some(both) = self.removed_imports.iter().find(|i| added.contains(&i.key())) {
            return Err(PatchError::Invalid(format!(
                "import {} is both added and removed",
                both.key()
            )));
        }
        Ok(())
    }

    /// Folds a later patch into this one: later method sources win, import
    /// lists are unioned with removals cancelling additions, and a later
    /// coordinate replaces an earlier one for the same artifact.
    pub fn merge(&mut self, later: &PatchCandidate) {
        for (name, edit) in &later.method_replacements {
            let addition = edit.addition
                && self
                    .method_replacements
                    .get(name)
                    .is_none_or(|prev| prev.addition);
            self.method_replacements.insert(
                name.clone(),
                MethodEdit {
                    source: edit.source.clone(),
                    addition,
                },
            );
        }
        for imp in &later.removed_imports {
            self.new_imports.retain(|i| i.key() != imp.key());
            if !self.removed_imports.iter().any(|i| i.key() == imp.key()) {
                self.removed_imports.push(imp.clone());
            }
        }
        for imp in &later.new_imports {
            self.removed_imports.retain(|i| i.key() != imp.key());
            if !self.new_imports.iter().any(|i| i.key() == imp.key()) {
                self.new_imports.push(imp.clone());
            }
        }
        for dep in &later.build_dependencies {
            self.build_dependencies
                .retain(|d| !(d.group == dep.group && d.artifact == dep.artifact));
            self.build_dependencies.push(dep.clone());
        }
        if !later.raw_response.is_empty() {
            self.raw_response = later.raw_response.clone();
        }
    }
}

/// Original method a replacement should land on: the same-named overload
/// with matching parameter types, else the first one with that name.
pub(crate) fn replacement_target<'m>(model: &'m ClassModel, name: &str, source: &str) -> Option<&'m MethodModel> {
    let candidates: Vec<&MethodModel> = model.methods.iter().filter(|m| m.name == name).collect();
    if candidates.len() > 1 {
        if let Ok(parsed) = parse_method_snippet(source) {
            if let Some(p) = parsed.iter().find(|p| p.name == name) {
                let sig = |m: &MethodModel| -> Vec<String> {
                    m.parameters.iter().map(|p| compact(&p.type_text)).collect()
                };
                if let Some(hit) = candidates.iter().find(|c| sig(c) == sig(p)) {
                    return Some(hit);
                }
            }
        }
    }
    candidates.first().copied()
}

fn leading_ws(line: &str) -> &str {
    &line[..line.len() - line.trim_start().len()]
}

/// Indentation of the line that holds byte `offset`.
fn indent_at(src: &str, offset: usize) -> String {
    let line_start = src[..offset].rfind('\n').map(|i| i + 1).unwrap_or(0);
    leading_ws(&src[line_start..]).chars().take_while(|c| *c == ' ' || *c == '\t').collect()
}

/// Dedents `text` by its common indentation and re-indents every line after
/// the first with `indent`.
pub(crate) fn reindent(text: &str, indent: &str) -> String {
    let trimmed = text.trim_matches('\n').trim_end();
    let lines: Vec<&str> = trimmed.lines().collect();
    let common = lines
        .iter()
        .filter(|l| !l.trim().is_empty())
        .map(|l| leading_ws(l).len())
        .min()
        .unwrap_or(0);
    lines
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let body = if l.trim().is_empty() { "" } else { &l[common.min(leading_ws(l).len())..] };
            let body = body.trim_end();
            if i == 0 || body.is_empty() {
                body.to_string()
            } else {
                format!("{indent}{body}")
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Byte range of the full line(s) covering `[start, end)`, newline included.
fn line_range(src: &str, start: usize, end: usize) -> (usize, usize) {
    let s = src[..start].rfind('\n').map(|i| i + 1).unwrap_or(0);
    let e = src[end..].find('\n').map(|i| end + i + 1).unwrap_or(src.len());
    (s, e)
}

/// Materializes `patch` over `model`. Bytes outside the replaced method spans
/// and the import block are left untouched; the result must re-parse.
pub fn apply_patch(model: &ClassModel, patch: &PatchCandidate) -> Result<String, PatchError> {
    patch.validate(model)?;
    let src = model.source_text.as_str();
    let mut edits: Vec<(usize, usize, String)> = Vec::new();

    let mut replaced: BTreeSet<usize> = BTreeSet::new();
    let mut additions: Vec<&MethodEdit> = Vec::new();
    for (name, edit) in &patch.method_replacements {
        let target = if edit.addition {
            None
        } else {
            replacement_target(model, name, &edit.source)
        };
        match target {
            Some(m) => {
                if !replaced.insert(m.span.start) {
                    return Err(PatchError::Invalid(format!("method `{name}` replaced twice")));
                }
                let indent = indent_at(src, m.span.start);
                edits.push((m.span.start, m.span.end, reindent(&edit.source, &indent)));
            }
            None if edit.addition => additions.push(edit),
            None => return Err(PatchError::UnknownTarget(name.clone())),
        }
    }

    if !additions.is_empty() {
        let member_indent = model
            .methods
            .first()
            .map(|m| indent_at(src, m.span.start))
            .or_else(|| model.fields.first().map(|f| indent_at(src, f.span.start)))
            .unwrap_or_else(|| "    ".to_string());
        let last_member_end = model
            .methods
            .iter()
            .map(|m| m.span.end)
            .chain(model.fields.iter().map(|f| f.span.end))
            .chain(model.inner_types.iter().map(|t| t.span.end))
            .chain(model.opaque_spans.iter().map(|s| s.end).filter(|&e| e <= model.body_close))
            .max();
        let (at, mut text) = match last_member_end {
            Some(end) => (end, String::new()),
            None => (model.body_open + 1, String::new()),
        };
        for edit in additions {
            text.push_str("\n\n");
            text.push_str(&member_indent);
            text.push_str(&reindent(&edit.source, &member_indent));
        }
        if last_member_end.is_none() {
            text.push('\n');
        }
        edits.push((at, at, text));
    }

    let removed: BTreeSet<String> = patch.removed_imports.iter().map(ImportDecl::key).collect();
    let existing: BTreeSet<String> = model.imports.iter().map(ImportDecl::key).collect();
    let mut last_retained: Option<usize> = None;
    for (imp, span) in model.imports.iter().zip(&model.import_spans) {
        if removed.contains(&imp.key()) {
            let (s, e) = line_range(src, span.start, span.end);
            edits.push((s, e, String::new()));
        } else {
            last_retained = Some(last_retained.map_or(span.end, |p: usize| p.max(span.end)));
        }
    }
    let mut fresh: Vec<&ImportDecl> = patch
        .new_imports
        .iter()
        .filter(|i| !existing.contains(&i.key()) || removed.contains(&i.key()))
        .collect();
    fresh.sort_by_key(|i| (i.is_static, i.qualified_name.clone()));
    fresh.dedup_by_key(|i| i.key());
    if !fresh.is_empty() {
        let block: String = fresh.iter().map(|i| format!("import {};", i.key())).collect::<Vec<_>>().join("\n");
        let edit = match (last_retained, model.package_span) {
            (Some(end), _) => (end, end, format!("\n{block}")),
            (None, Some(pkg)) => (pkg.end, pkg.end, format!("\n\n{block}")),
            (None, None) => (0, 0, format!("{block}\n\n")),
        };
        edits.push(edit);
    }

    edits.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.cmp(&a.1)));
    for pair in edits.windows(2) {
        if pair[1].1 > pair[0].0 {
            return Err(PatchError::Invalid("overlapping edits".into()));
        }
    }
    let mut out = src.to_string();
    for (s, e, text) in &edits {
        out.replace_range(*s..*e, text);
    }
    parse_test_class(&out).map_err(PatchError::PatchSyntax)?;
    Ok(out)
}
