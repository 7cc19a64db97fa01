//! Text-preserving edits to Maven `pom.xml` dependency sections.

use quick_xml::events::Event;
use quick_xml::Reader;
use thiserror::Error;

use super::patch::BuildDependency;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ManifestError {
    #[error("malformed build manifest: {0}")]
    ManifestParse(String),
}

#[derive(Debug, Default)]
struct DepEntry {
    group: String,
    artifact: String,
    /// Byte range of the version element's text content.
    version: Option<(usize, usize, String)>,
    /// Byte offset just after `</artifactId>`.
    artifact_end: usize,
    /// Byte offset of `<dependency>`.
    start: usize,
}

#[derive(Debug, Default)]
struct Scan {
    deps: Vec<DepEntry>,
    /// Byte offset of `</dependencies>` under the project root.
    deps_close: Option<usize>,
    /// Byte offset of `</project>`.
    project_close: Option<usize>,
}

fn scan(text: &str) -> Result<Scan, ManifestError> {
    let mut reader = Reader::from_str(text);
    reader.config_mut().trim_text(false);
    let mut path: Vec<String> = Vec::new();
    let mut out = Scan::default();
    let mut current: Option<DepEntry> = None;
    let mut text_start = 0usize;
    let mut text_buf = String::new();
    let err = |e: &dyn std::fmt::Display, pos: usize| {
        let line = text[..pos.min(text.len())].matches('\n').count() + 1;
        ManifestError::ManifestParse(format!("line {line}: {e}"))
    };
    loop {
        let before = reader.buffer_position() as usize;
        let event = reader.read_event().map_err(|e| err(&e, before))?;
        let after = reader.buffer_position() as usize;
        match event {
            Event::Start(e) => {
                let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
                if path.is_empty() && name != "project" {
                    return Err(err(&format!("root element is <{name}>, expected <project>"), before));
                }
                path.push(name);
                text_buf.clear();
                text_start = after;
                if is_dep_path(&path) {
                    current = Some(DepEntry {
                        start: before,
                        ..DepEntry::default()
                    });
                }
            }
            Event::End(e) => {
                let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
                if is_dep_path(&path) {
                    if let Some(dep) = current.take() {
                        out.deps.push(dep);
                    }
                } else if path.len() == 4 && is_dep_path(&path[..3]) {
                    if let Some(dep) = current.as_mut() {
                        let value = text_buf.trim().to_string();
                        match name.as_str() {
                            "groupId" => dep.group = value,
                            "artifactId" => {
                                dep.artifact = value;
                                dep.artifact_end = after;
                            }
                            "version" => dep.version = Some((text_start, before, value)),
                            _ => {}
                        }
                    }
                } else if path.len() == 2 && path[1] == "dependencies" {
                    out.deps_close = Some(before);
                } else if path.len() == 1 {
                    out.project_close = Some(before);
                }
                path.pop();
                text_buf.clear();
            }
            Event::Empty(e) => {
                if path.is_empty() {
                    return Err(err(&"empty root element", before));
                }
                let _ = e;
            }
            Event::Text(t) => {
                let raw = t.unescape().map_err(|e| err(&e, before))?;
                text_buf.push_str(&raw);
            }
            Event::CData(c) => text_buf.push_str(&String::from_utf8_lossy(&c)),
            Event::Eof => break,
            _ => {}
        }
    }
    if !path.is_empty() {
        return Err(err(&format!("unclosed element <{}>", path.last().unwrap()), text.len()));
    }
    if out.project_close.is_none() {
        return Err(ManifestError::ManifestParse("no <project> element".into()));
    }
    Ok(out)
}

fn is_dep_path(path: &[String]) -> bool {
    path.len() == 3 && path[0] == "project" && path[1] == "dependencies" && path[2] == "dependency"
}

fn indent_before(text: &str, offset: usize) -> &str {
    let line_start = text[..offset].rfind('\n').map(|i| i + 1).unwrap_or(0);
    let line = &text[line_start..offset];
    if line.trim().is_empty() {
        line
    } else {
        ""
    }
}

/// Detects the indentation unit as the shallowest indentation of a line
/// that starts an element. Attribute continuation lines do not count.
fn indent_unit(text: &str) -> String {
    text.lines()
        .filter(|l| l.trim_start().starts_with('<'))
        .map(|l| &l[..l.len() - l.trim_start().len()])
        .filter(|ws| !ws.is_empty())
        .min_by_key(|ws| ws.len())
        .map(str::to_string)
        .unwrap_or_else(|| "  ".to_string())
}

fn dependency_xml(dep: &BuildDependency, indent: &str, unit: &str) -> String {
    format!(
        "<dependency>\n{i}{u}<groupId>{g}</groupId>\n{i}{u}<artifactId>{a}</artifactId>\n{i}{u}<version>{v}</version>\n{i}{u}<scope>test</scope>\n{i}</dependency>",
        i = indent,
        u = unit,
        g = dep.group,
        a = dep.artifact,
        v = dep.version
    )
}

/// Adds `dep` (test scope) to the project's dependencies, or rewrites the
/// version of an existing entry for the same group and artifact. Applying
/// the same edit twice equals applying it once.
pub fn edit_build_dependency(manifest_text: &str, dep: &BuildDependency) -> Result<String, ManifestError> {
    let scan = scan(manifest_text)?;
    let unit = indent_unit(manifest_text);
    let mut out = manifest_text.to_string();

    if let Some(existing) = scan
        .deps
        .iter()
        .find(|d| d.group == dep.group && d.artifact == dep.artifact)
    {
        match &existing.version {
            Some((_, _, v)) if *v == dep.version => {}
            Some((s, e, _)) => out.replace_range(*s..*e, &dep.version),
            None => {
                let indent = indent_before(manifest_text, existing.start);
                let at = existing.artifact_end;
                out.insert_str(at, &format!("\n{indent}{unit}<version>{}</version>", dep.version));
            }
        }
        return Ok(out);
    }

    match scan.deps_close {
        Some(close) => {
            let close_indent = indent_before(manifest_text, close);
            let dep_indent = scan
                .deps
                .first()
                .map(|d| indent_before(manifest_text, d.start).to_string())
                .unwrap_or_else(|| format!("{close_indent}{unit}"));
            let line_start = close - close_indent.len();
            let block = format!("{dep_indent}{}\n", dependency_xml(dep, &dep_indent, &unit));
            out.insert_str(line_start, &block);
        }
        None => {
            let close = scan.project_close.expect("checked in scan");
            let close_indent = indent_before(manifest_text, close);
            let line_start = close - close_indent.len();
            let deps_indent = format!("{close_indent}{unit}");
            let dep_indent = format!("{deps_indent}{unit}");
            let block = format!(
                "{deps_indent}<dependencies>\n{dep_indent}{}\n{deps_indent}</dependencies>\n",
                dependency_xml(dep, &dep_indent, &unit)
            );
            if line_start == close && close > 0 && !manifest_text[..close].ends_with('\n') {
                out.insert_str(close, &format!("\n{block}"));
            } else {
                out.insert_str(line_start, &block);
            }
        }
    }
    Ok(out)
}

/// Declared `(group, artifact, version)` entries of the project's direct
/// dependencies.
pub fn declared_dependencies(manifest_text: &str) -> Result<Vec<BuildDependency>, ManifestError> {
    Ok(scan(manifest_text)?
        .deps
        .into_iter()
        .map(|d| BuildDependency {
            version: d.version.map(|v| v.2).unwrap_or_default(),
            group: d.group,
            artifact: d.artifact,
        })
        .collect())
}
