use std::sync::LazyLock;

use regex::Regex;

use super::LlmError;
use crate::java::{
    parse_method_snippet, parse_test_class, BuildDependency, ClassModel, ImportDecl, MethodEdit, MethodModel,
    PatchCandidate,
};
use crate::java::parser::compact;

static LABEL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?:^|[\s#*`>:(\[])(METHOD\s+([A-Za-z_$][\w$]*)|IMPORTS|BUILD_DEPS)(?:$|[\s*`:)\]])").unwrap()
});

#[derive(Debug, Clone, PartialEq, Eq)]
enum Label {
    Method(String),
    Imports,
    BuildDeps,
}

#[derive(Debug)]
struct Block {
    label: Option<Label>,
    body: String,
}

fn label_in(text: &str) -> Option<Label> {
    let caps = LABEL.captures(text)?;
    Some(match caps.get(2) {
        Some(name) => Label::Method(name.as_str().to_string()),
        None if &caps[1] == "IMPORTS" => Label::Imports,
        None => Label::BuildDeps,
    })
}

/// Splits markdown into fenced blocks. A block's label comes from its info
/// string, or else from the nearest non-blank line above the opening fence.
fn fenced_blocks(text: &str) -> Vec<Block> {
    let mut blocks = Vec::new();
    let mut previous = "";
    let mut lines = text.lines();
    while let Some(line) = lines.next() {
        let trimmed = line.trim_start();
        let fence = match trimmed.chars().next() {
            Some(c @ ('`' | '~')) => trimmed.chars().take_while(|x| *x == c).count(),
            _ => 0,
        };
        if fence < 3 {
            if !line.trim().is_empty() {
                previous = line;
            }
            continue;
        }
        let marker = &trimmed[..fence];
        let info = &trimmed[fence..];
        let mut body = Vec::new();
        for inner in lines.by_ref() {
            let t = inner.trim();
            if t.starts_with(marker) && t.chars().all(|c| c == marker.as_bytes()[0] as char) {
                break;
            }
            body.push(inner);
        }
        let label = label_in(info).or_else(|| label_in(previous));
        blocks.push(Block {
            label,
            body: body.join("\n"),
        });
        previous = "";
    }
    blocks
}

/// Leading `import` lines of a code block, and the remainder.
fn split_leading_imports(body: &str) -> (Vec<ImportDecl>, String) {
    let mut imports = Vec::new();
    let mut rest = Vec::new();
    let mut in_header = true;
    for line in body.lines() {
        let t = line.trim();
        if in_header {
            if t.is_empty() || t.starts_with("package ") {
                continue;
            }
            if t.starts_with("import ") {
                imports.extend(ImportDecl::parse(t));
                continue;
            }
            in_header = false;
        }
        rest.push(line);
    }
    (imports, rest.join("\n"))
}

fn add_method(patch: &mut PatchCandidate, target: &ClassModel, m: &MethodModel) {
    let src = m.source.clone();
    let edit = if target.method(&m.name).is_some() {
        MethodEdit::replace(src)
    } else {
        MethodEdit::add(src)
    };
    patch.method_replacements.insert(m.name.clone(), edit);
}

fn push_import(list: &mut Vec<ImportDecl>, imp: ImportDecl) {
    if !list.iter().any(|i| i.key() == imp.key()) {
        list.push(imp);
    }
}

fn add_new_imports(patch: &mut PatchCandidate, target: &ClassModel, imports: Vec<ImportDecl>) {
    for imp in imports {
        if !target.imports.iter().any(|i| i.key() == imp.key()) {
            push_import(&mut patch.new_imports, imp);
        }
    }
}

fn apply_labeled(patch: &mut PatchCandidate, target: &ClassModel, label: &Label, body: &str) {
    match label {
        Label::Method(name) => {
            let (imports, code) = split_leading_imports(body);
            add_new_imports(patch, target, imports);
            match parse_method_snippet(&code) {
                Ok(methods) if !methods.is_empty() => {
                    for m in &methods {
                        add_method(patch, target, m);
                    }
                }
                _ => {
                    let edit = if target.method(name).is_some() {
                        MethodEdit::replace(code.trim().to_string())
                    } else {
                        MethodEdit::add(code.trim().to_string())
                    };
                    patch.method_replacements.insert(name.clone(), edit);
                }
            }
        }
        Label::Imports => {
            for line in body.lines().map(str::trim).filter(|l| !l.is_empty()) {
                if let Some(removed) = line.strip_prefix('-') {
                    if let Some(imp) = ImportDecl::parse(removed) {
                        patch.new_imports.retain(|i| i.key() != imp.key());
                        push_import(&mut patch.removed_imports, imp);
                    }
                } else if let Some(imp) = ImportDecl::parse(line.strip_prefix('+').unwrap_or(line)) {
                    if !target.imports.iter().any(|i| i.key() == imp.key()) {
                        patch.removed_imports.retain(|i| i.key() != imp.key());
                        push_import(&mut patch.new_imports, imp);
                    }
                }
            }
        }
        Label::BuildDeps => {
            for line in body.lines().map(str::trim).filter(|l| !l.is_empty()) {
                let line = line.trim_start_matches(['-', '*', '+']).trim();
                match line.parse::<BuildDependency>() {
                    Ok(dep) => {
                        patch
                            .build_dependencies
                            .retain(|d| !(d.group == dep.group && d.artifact == dep.artifact));
                        patch.build_dependencies.push(dep);
                    }
                    Err(e) => log::debug!("ignoring build dependency line: {e}"),
                }
            }
        }
    }
}

/// Interprets an unlabeled block as methods, or as a whole class whose
/// changed methods and extra imports form the patch.
fn apply_unlabeled(patch: &mut PatchCandidate, target: &ClassModel, body: &str) -> bool {
    let (imports, code) = split_leading_imports(body);
    if let Ok(methods) = parse_method_snippet(&code) {
        if !methods.is_empty() {
            add_new_imports(patch, target, imports);
            for m in &methods {
                add_method(patch, target, m);
            }
            return true;
        }
    }
    let Ok(class) = parse_test_class(body) else {
        return false;
    };
    if class.methods.is_empty() {
        return false;
    }
    add_new_imports(patch, target, class.imports.clone());
    for m in &class.methods {
        let unchanged = target
            .method(&m.name)
            .is_some_and(|orig| compact(&orig.source) == compact(&m.source));
        if !unchanged {
            add_method(patch, target, m);
        }
    }
    true
}

/// Turns a model response into a patch for `target`.
///
/// Labeled blocks (`METHOD <name>`, `IMPORTS`, `BUILD_DEPS`) take precedence.
/// Without any, unlabeled blocks that parse as Java methods or as a class
/// are used. In `IMPORTS`, a line prefixed with `-` removes that import.
pub fn extract_patch(response_text: &str, target: &ClassModel) -> Result<PatchCandidate, LlmError> {
    let blocks = fenced_blocks(response_text);
    let mut patch = PatchCandidate {
        raw_response: response_text.to_string(),
        ..PatchCandidate::default()
    };
    let labeled: Vec<&Block> = blocks.iter().filter(|b| b.label.is_some()).collect();
    if labeled.is_empty() {
        for block in &blocks {
            apply_unlabeled(&mut patch, target, &block.body);
        }
    } else {
        for block in labeled {
            apply_labeled(&mut patch, target, block.label.as_ref().expect("labeled"), &block.body);
        }
    }
    if patch.is_empty() {
        return Err(LlmError::UnparseableResponse);
    }
    Ok(patch)
}
