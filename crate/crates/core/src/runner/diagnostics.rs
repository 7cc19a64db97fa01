//! Compiler output parsing.
//!
//! Two line shapes start a diagnostic:
//!
//! * Maven compiler plugin: `[ERROR] /abs/File.java:[12,9] message`
//! * plain javac: `/abs/File.java:12: error: message`
//!
//! A following `symbol:` line (with an optional `[ERROR]` prefix) names the
//! missing symbol. Messages are classified as:
//!
//! | pattern                               | kind                  |
//! |---------------------------------------|-----------------------|
//! | `cannot find symbol`                  | `MISSING_SYMBOL`      |
//! | `package <p> does not exist`          | `PACKAGE_NOT_FOUND`   |
//! | `reference to <n> is ambiguous`       | `AMBIGUOUS_REFERENCE` |
//! | anything else                         | `OTHER`               |

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use regex::Regex;

use crate::model::{CompilationDiagnostic, DiagnosticKind};

static MAVEN_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\[ERROR\]\s+(?P<file>\S.*?\.java):\[(?P<line>\d+)(?:,(?P<col>\d+))?\]\s*(?P<msg>.*)$").unwrap()
});
static JAVAC_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?P<file>\S.*?\.java):(?P<line>\d+):\s+error:\s*(?P<msg>.*)$").unwrap()
});
static SYMBOL_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?:\[ERROR\])?\s*symbol\s*:\s+(?:class|variable|method|interface|enum|static|record|annotation type)?\s*(?P<sym>[\w$.]+)").unwrap()
});
static PACKAGE_MISSING: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"package (?P<pkg>[\w$.]+) does not exist").unwrap());
static AMBIGUOUS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"reference to (?P<name>[\w$]+) is ambiguous").unwrap());

/// Whether a line opens a diagnostic in either supported shape.
pub fn is_diagnostic_line(line: &str) -> bool {
    MAVEN_LINE.is_match(line.trim_end()) || JAVAC_LINE.is_match(line.trim_end())
}

/// Parses compiler output into diagnostics with paths relative to `root`.
/// Duplicates (Maven repeats errors in its failure summary) are dropped.
pub fn parse_compiler_output(output: &str, root: &Path) -> Vec<CompilationDiagnostic> {
    let lines: Vec<&str> = output.lines().map(str::trim_end).collect();
    let mut seen: HashSet<(PathBuf, u32, String, String)> = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        let Some(caps) = MAVEN_LINE.captures(line).or_else(|| JAVAC_LINE.captures(line)) else {
            continue;
        };
        let file = relativize(Path::new(caps["file"].trim()), root);
        let line_no: u32 = caps["line"].parse().unwrap_or(1);
        let col = caps.name("col").map(|c| c.as_str().to_string()).unwrap_or_default();
        let msg = caps["msg"].trim().to_string();
        let symbol_line = lines[i + 1..]
            .iter()
            .take(4)
            .take_while(|l| !is_diagnostic_line(l))
            .find_map(|l| SYMBOL_LINE.captures(l).map(|c| c["sym"].to_string()));
        let (kind, symbol) = classify(&msg, symbol_line);
        if !seen.insert((file.clone(), line_no, col, msg.clone())) {
            continue;
        }
        let mut raw = msg;
        if let Some(sym) = symbol.as_ref().filter(|_| kind == DiagnosticKind::MissingSymbol) {
            raw.push_str(&format!("\n  symbol: {sym}"));
        }
        out.push(CompilationDiagnostic::new(file, line_no, kind, symbol, raw));
    }
    out
}

fn classify(msg: &str, symbol_line: Option<String>) -> (DiagnosticKind, Option<String>) {
    if msg.contains("cannot find symbol") {
        let sym = symbol_line.unwrap_or_else(|| "<unknown>".to_string());
        // `symbol: method f(int)` keeps only the name
        let sym = sym.split('(').next().unwrap_or(&sym).to_string();
        return (DiagnosticKind::MissingSymbol, Some(sym));
    }
    if let Some(c) = PACKAGE_MISSING.captures(msg) {
        return (DiagnosticKind::PackageNotFound, Some(c["pkg"].to_string()));
    }
    if let Some(c) = AMBIGUOUS.captures(msg) {
        return (DiagnosticKind::AmbiguousReference, Some(c["name"].to_string()));
    }
    (DiagnosticKind::Other, None)
}

fn relativize(file: &Path, root: &Path) -> PathBuf {
    if let Ok(rel) = file.strip_prefix(root) {
        return rel.to_path_buf();
    }
    if let Ok(canon) = root.canonicalize() {
        if let Ok(rel) = file.strip_prefix(&canon) {
            return rel.to_path_buf();
        }
    }
    file.to_path_buf()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MAVEN: &str = "\
[INFO] -------------------------------------------------------------
[ERROR] COMPILATION ERROR :
[INFO] -------------------------------------------------------------
[ERROR] /tmp/wc/project/core/src/test/java/a/BTest.java:[14,9] cannot find symbol
  symbol:   class LinkedHashMap
  location: class a.BTest
[ERROR] /tmp/wc/project/core/src/test/java/a/BTest.java:[3,24] package com.google.gson does not exist
[ERROR] /tmp/wc/project/core/src/test/java/a/BTest.java:[20,9] reference to assertThat is ambiguous
  both method assertThat(T,org.hamcrest.Matcher<? super T>) in org.junit.Assert and method assertThat(T) in org.assertj.core.api.Assertions match
[INFO] 3 errors
[ERROR] Failed to execute goal org.apache.maven.plugins:maven-compiler-plugin:3.8.1:testCompile (default-testCompile) on project core: Compilation failure: Compilation failure:
[ERROR] /tmp/wc/project/core/src/test/java/a/BTest.java:[14,9] cannot find symbol
[ERROR]   symbol:   class LinkedHashMap
[ERROR]   location: class a.BTest
[ERROR] /tmp/wc/project/core/src/test/java/a/BTest.java:[3,24] package com.google.gson does not exist
[ERROR] /tmp/wc/project/core/src/test/java/a/BTest.java:[20,9] reference to assertThat is ambiguous
";

    #[test]
    fn maven_output_with_summary_duplicates() {
        let d = parse_compiler_output(MAVEN, Path::new("/tmp/wc/project"));
        let got: Vec<(String, u32, DiagnosticKind, Option<String>)> = d
            .iter()
            .map(|d| (d.file.display().to_string(), d.line, d.kind, d.symbol.clone()))
            .collect();
        let f = "core/src/test/java/a/BTest.java".to_string();
        assert_eq!(
            got,
            vec![
                (f.clone(), 14, DiagnosticKind::MissingSymbol, Some("LinkedHashMap".into())),
                (f.clone(), 3, DiagnosticKind::PackageNotFound, Some("com.google.gson".into())),
                (f, 20, DiagnosticKind::AmbiguousReference, Some("assertThat".into())),
            ]
        );
        assert!(d.iter().all(|d| d.validate().is_ok()));
    }

    #[test]
    fn javac_output() {
        let out = "\
src/test/java/a/BTest.java:7: error: cannot find symbol
        assertThat(x.size(), is(4));
        ^
  symbol:   method is(int)
  location: class BTest
src/test/java/a/BTest.java:9: error: ';' expected
        int x = 1
                 ^
2 errors
";
        let d = parse_compiler_output(out, Path::new("/nowhere"));
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].symbol.as_deref(), Some("is"));
        assert_eq!(d[1].kind, DiagnosticKind::Other);
        assert_eq!(d[1].raw_message, "';' expected");
    }
}
