use std::path::{Path, PathBuf};

use diffy::{DiffOptions, Patch};

use crate::runner::WorkingCopy;

/// One file touched by a repair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileChange {
    pub path: PathBuf,
    pub before: String,
    pub after: String,
}

fn slash_path(path: &Path) -> String {
    path.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// Multi-file unified diff with `a/` and `b/` prefixes, unchanged files
/// omitted. Paths are relative to the project root.
pub fn unified_diff(changes: &[FileChange]) -> String {
    let mut out = String::new();
    for change in changes.iter().filter(|c| c.before != c.after) {
        let name = slash_path(&change.path);
        let patch = DiffOptions::new()
            .set_original_filename(format!("a/{name}"))
            .set_modified_filename(format!("b/{name}"))
            .create_patch(&change.before, &change.after);
        out.push_str(&patch.to_string());
    }
    out
}

#[derive(Debug, thiserror::Error)]
pub enum DiffApplyError {
    #[error("malformed diff: {0}")]
    Malformed(String),
    #[error("cannot patch {path}: {reason}")]
    Apply { path: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Splits a multi-file diff into `(path, single-file diff)` pairs.
fn file_sections(diff: &str) -> Result<Vec<(String, String)>, DiffApplyError> {
    let mut sections: Vec<(String, String)> = Vec::new();
    let lines: Vec<&str> = diff.split_inclusive('\n').collect();
    let mut i = 0;
    while i < lines.len() {
        let line = lines[i];
        if line.starts_with("--- ") && lines.get(i + 1).is_some_and(|l| l.starts_with("+++ ")) {
            let target = lines[i + 1][4..].trim_end();
            let path = target.strip_prefix("b/").unwrap_or(target).to_string();
            sections.push((path, String::new()));
        }
        match sections.last_mut() {
            Some((_, body)) => body.push_str(line),
            None if line.trim().is_empty() => {}
            None => return Err(DiffApplyError::Malformed(format!("text before the first file header: {line}"))),
        }
        i += 1;
    }
    Ok(sections)
}

/// Applies a diff produced by [`unified_diff`] to a working copy.
pub fn apply_unified_diff(copy: &mut WorkingCopy, diff: &str) -> Result<Vec<PathBuf>, DiffApplyError> {
    let mut touched = Vec::new();
    for (path, section) in file_sections(diff)? {
        let patch = Patch::from_str(&section).map_err(|e| DiffApplyError::Malformed(e.to_string()))?;
        let rel = PathBuf::from(&path);
        let base = copy.read(&rel)?;
        let patched = diffy::apply(&base, &patch).map_err(|e| DiffApplyError::Apply {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        copy.write(&rel, &patched)?;
        touched.push(rel);
    }
    Ok(touched)
}
