//! Heuristics for patches that silence a failing test instead of fixing it.

use std::collections::BTreeSet;

use crate::java::dataflow::referenced_names;
use crate::java::lexer::{tokenize, Token, TokenKind};
use crate::java::parser::compact;
use crate::java::MethodModel;
use crate::model::{SuspicionFlag, SuspicionKind};

/// Exception types whose catch block hides an assertion failure.
const SWALLOWING_CATCHES: [&str; 6] = [
    "AssertionError",
    "AssertionFailedError",
    "ComparisonFailure",
    "Error",
    "Throwable",
    "MultipleFailuresError",
];

#[derive(Debug, Clone)]
struct Assertion {
    name: String,
    start: usize,
    /// Whole call including any fluent chain (`assertThat(x).isEqualTo(y)`).
    text: String,
    args: Vec<String>,
    chain: Vec<(String, Vec<String>)>,
}

struct Method {
    src: String,
    toks: Vec<Token>,
    body_start: usize,
}

impl Method {
    fn new(m: &MethodModel) -> Option<Self> {
        let toks = tokenize(&m.source).ok()?;
        let body_offset = m.body_start.map(|b| b - m.span.start).unwrap_or(m.source.len());
        let body_start = toks.iter().position(|t| t.start >= body_offset).unwrap_or(toks.len());
        Some(Method {
            src: m.source.clone(),
            toks,
            body_start,
        })
    }

    fn text(&self, i: usize) -> &str {
        self.toks[i].text(&self.src)
    }

    /// Index of the token closing the bracket opened at `open`.
    fn matching(&self, open: usize) -> Option<usize> {
        let (o, c) = match self.text(open) {
            "(" => ("(", ")"),
            "{" => ("{", "}"),
            "[" => ("[", "]"),
            _ => return None,
        };
        let mut depth = 0usize;
        for i in open..self.toks.len() {
            let t = self.text(i);
            if t == o {
                depth += 1;
            } else if t == c {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
        }
        None
    }

    /// Top-level comma-separated arguments between `open` and `close`.
    fn args(&self, open: usize, close: usize) -> Vec<String> {
        let mut out = Vec::new();
        let mut depth = 0i32;
        let mut start = open + 1;
        for i in open + 1..close {
            match self.text(i) {
                "(" | "{" | "[" => depth += 1,
                ")" | "}" | "]" => depth -= 1,
                "," if depth == 0 => {
                    out.push(self.slice(start, i));
                    start = i + 1;
                }
                _ => {}
            }
        }
        if start < close {
            out.push(self.slice(start, close));
        }
        out
    }

    fn slice(&self, from: usize, to: usize) -> String {
        if from >= to {
            return String::new();
        }
        compact(&self.src[self.toks[from].start..self.toks[to - 1].end])
    }

    fn assertions(&self) -> Vec<Assertion> {
        let mut out = Vec::new();
        let mut i = self.body_start;
        while i < self.toks.len() {
            let t = self.toks[i];
            let is_assert = t.kind == TokenKind::Ident
                && self.text(i).starts_with("assert")
                && i + 1 < self.toks.len()
                && self.text(i + 1) == "(";
            if !is_assert {
                i += 1;
                continue;
            }
            let Some(close) = self.matching(i + 1) else { break };
            let args = self.args(i + 1, close);
            let mut end = close;
            let mut chain = Vec::new();
            while end + 3 < self.toks.len()
                && self.text(end + 1) == "."
                && self.toks[end + 2].kind == TokenKind::Ident
                && self.text(end + 3) == "("
            {
                let Some(c) = self.matching(end + 3) else { break };
                chain.push((self.text(end + 2).to_string(), self.args(end + 3, c)));
                end = c;
            }
            out.push(Assertion {
                name: self.text(i).to_string(),
                start: t.start,
                text: self.slice(i, end + 1),
                args,
                chain,
            });
            i = end + 1;
        }
        out
    }

    /// Byte ranges of try bodies whose catch clauses swallow assertion
    /// failures (catch a failure type and neither rethrow nor fail).
    fn swallowing_try_ranges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in self.body_start..self.toks.len() {
            if self.text(i) != "try" {
                continue;
            }
            let mut open = i + 1;
            if open < self.toks.len() && self.text(open) == "(" {
                match self.matching(open) {
                    Some(c) => open = c + 1,
                    None => continue,
                }
            }
            if open >= self.toks.len() || self.text(open) != "{" {
                continue;
            }
            let Some(close) = self.matching(open) else { continue };
            let mut k = close + 1;
            let mut swallows = false;
            while k + 1 < self.toks.len() && self.text(k) == "catch" && self.text(k + 1) == "(" {
                let Some(pc) = self.matching(k + 1) else { break };
                let catches_failure = (k + 2..pc).any(|j| SWALLOWING_CATCHES.contains(&self.text(j)));
                if pc + 1 >= self.toks.len() || self.text(pc + 1) != "{" {
                    break;
                }
                let Some(bc) = self.matching(pc + 1) else { break };
                let rethrows = (pc + 2..bc).any(|j| matches!(self.text(j), "throw" | "fail"));
                swallows |= catches_failure && !rethrows;
                k = bc + 1;
            }
            if swallows {
                out.push((self.toks[open].start, self.toks[close].end));
            }
        }
        out
    }
}

/// Expression the assertion checks: the value under test.
fn subject(a: &Assertion) -> Option<&str> {
    if a.name == "assertThat" || a.args.len() < 2 {
        a.args.first().map(String::as_str)
    } else {
        a.args.last().map(String::as_str)
    }
}

/// Variables an expression reads, excluding member names and callees.
fn variables(expr: &str) -> BTreeSet<String> {
    tokenize(expr)
        .map(|toks| referenced_names(&toks, expr))
        .unwrap_or_default()
}

fn is_literal_text(s: &str) -> bool {
    s.starts_with('"')
        || s.starts_with('\'')
        || s.chars().next().is_some_and(|c| c.is_ascii_digit() || c == '-')
        || matches!(s, "true" | "false" | "null")
}

/// Whether the assertion holds regardless of the code under test.
fn trivially_true(a: &Assertion) -> bool {
    let last = a.args.last().map(String::as_str).unwrap_or("");
    let pair_equal = a.args.len() >= 2 && a.args[a.args.len() - 2] == a.args[a.args.len() - 1];
    match a.name.as_str() {
        "assertTrue" => last == "true" && a.args.len() <= 2,
        "assertFalse" => last == "false" && a.args.len() <= 2,
        "assertNull" => last == "null",
        "assertNotNull" => last != "null" && (is_literal_text(last) || last.starts_with("new")),
        "assertEquals" | "assertSame" | "assertArrayEquals" | "assertIterableEquals" => pair_equal,
        "assertThat" => {
            let Some(subject) = a.args.first() else { return false };
            if a.args.len() == 2 {
                let m = &a.args[1];
                let inner = m
                    .strip_suffix(')')
                    .and_then(|m| m.split_once('('))
                    .map(|(_, inner)| inner);
                return inner == Some(subject.as_str());
            }
            match a.chain.first() {
                Some((name, args)) if matches!(name.as_str(), "isEqualTo" | "isSameAs") => args.first() == Some(subject),
                Some((name, _)) if name == "isTrue" => subject == "true",
                Some((name, _)) if name == "isFalse" => subject == "false",
                _ => false,
            }
        }
        _ => false,
    }
}

/// Flags patterns by which `patched` may hide the failure of `original`.
/// The flags are advisory.
pub fn suspicious_patch_flags(original: &MethodModel, patched: &MethodModel) -> Vec<SuspicionFlag> {
    let (Some(orig), Some(new)) = (Method::new(original), Method::new(patched)) else {
        return Vec::new();
    };
    let before = orig.assertions();
    let after = new.assertions();
    let mut flags = Vec::new();

    if after.len() < before.len() {
        for a in &before {
            if after.iter().any(|p| p.text == a.text) {
                continue;
            }
            let roots = subject(a).map(variables).unwrap_or_default();
            let replaced = after
                .iter()
                .filter(|p| !before.iter().any(|b| b.text == p.text))
                .any(|p| !variables(&p.text).is_disjoint(&roots));
            if !replaced {
                flags.push(SuspicionFlag {
                    kind: SuspicionKind::AssertionDeleted,
                    evidence: a.text.clone(),
                });
            }
        }
    }

    let wrapped_before = orig.swallowing_try_ranges();
    let wrapped_after = new.swallowing_try_ranges();
    let inside = |ranges: &[(usize, usize)], at: usize| ranges.iter().any(|(s, e)| *s <= at && at < *e);
    for p in &after {
        let was_original = before.iter().find(|a| a.text == p.text);
        if let Some(a) = was_original {
            if inside(&wrapped_after, p.start) && !inside(&wrapped_before, a.start) {
                flags.push(SuspicionFlag {
                    kind: SuspicionKind::TryCatchWrapped,
                    evidence: p.text.clone(),
                });
            }
        }
        if trivially_true(p) && !before.iter().any(|a| a.text == p.text) {
            flags.push(SuspicionFlag {
                kind: SuspicionKind::TriviallyTrueAssertion,
                evidence: p.text.clone(),
            });
        }
    }
    flags
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::java::parse_method_snippet;

    fn m(src: &str) -> MethodModel {
        parse_method_snippet(src).unwrap().remove(0)
    }

    const ORIGINAL: &str = "@Test\npublic void t() {\n    Map<String, String> m = build();\n    assertTrue(m.containsKey(\"a\"));\n    assertEquals(\"{a=1}\", m.toString());\n}";

    fn kinds(orig: &str, patched: &str) -> Vec<SuspicionKind> {
        suspicious_patch_flags(&m(orig), &m(patched)).into_iter().map(|f| f.kind).collect()
    }

    #[test]
    fn identical_methods_are_clean() {
        assert!(kinds(ORIGINAL, ORIGINAL).is_empty());
    }

    #[test]
    fn deleted_assertion() {
        let patched = "@Test\npublic void t() {\n    Map<String, String> m = build();\n    assertEquals(\"{a=1}\", m.toString());\n}";
        let flags = suspicious_patch_flags(&m(ORIGINAL), &m(patched));
        assert_eq!(flags.len(), 1);
        assert_eq!(flags[0].kind, SuspicionKind::AssertionDeleted);
        assert_eq!(flags[0].evidence, "assertTrue(m.containsKey(\"a\"))");
    }

    #[test]
    fn merged_assertion_on_same_subject_is_not_deletion() {
        let patched = "@Test\npublic void t() {\n    Map<String, String> m = build();\n    assertEquals(Collections.singletonMap(\"a\", \"1\"), m);\n}";
        assert!(kinds(ORIGINAL, patched).is_empty());
    }

    #[test]
    fn try_catch_wrapping() {
        let patched = "@Test\npublic void t() {\n    Map<String, String> m = build();\n    assertTrue(m.containsKey(\"a\"));\n    try {\n        assertEquals(\"{a=1}\", m.toString());\n    } catch (AssertionError e) {\n        // ignore\n    }\n}";
        assert_eq!(kinds(ORIGINAL, patched), vec![SuspicionKind::TryCatchWrapped]);
        let rethrown = patched.replace("// ignore", "throw e;");
        assert!(kinds(ORIGINAL, &rethrown).is_empty());
        let unrelated = patched.replace("AssertionError", "IllegalStateException");
        assert!(kinds(ORIGINAL, &unrelated).is_empty());
    }

    #[test]
    fn constant_true_assertions() {
        let patched = "@Test\npublic void t() {\n    Map<String, String> m = build();\n    assertTrue(m.containsKey(\"a\"));\n    assertTrue(true);\n}";
        assert_eq!(kinds(ORIGINAL, patched), vec![SuspicionKind::TriviallyTrueAssertion]);
        let same = "@Test\npublic void t() {\n    assertTrue(m.containsKey(\"a\"));\n    assertEquals(m.toString(), m.toString());\n}";
        assert_eq!(kinds(ORIGINAL, same), vec![SuspicionKind::TriviallyTrueAssertion]);
        let fluent = "@Test\npublic void t() {\n    assertTrue(m.containsKey(\"a\"));\n    assertThat(m.toString()).isEqualTo(m.toString());\n}";
        assert_eq!(kinds(ORIGINAL, fluent), vec![SuspicionKind::TriviallyTrueAssertion]);
    }
}
