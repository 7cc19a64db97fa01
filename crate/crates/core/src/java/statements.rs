//! Statement segmentation inside method bodies.
//!
//! A body is cut into statements at `;` and at block braces. Braces that
//! belong to an expression (lambda bodies and anonymous classes inside
//! argument lists, array initializers, `x = new T() { .. }`) stay inside the
//! enclosing statement. Control-flow headers such as `if (..)` become their
//! own header segments.

use thiserror::Error;

use super::lexer::Token;
use super::parser::{ClassModel, MethodModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StatementSpan {
    /// Index of the first token in `ClassModel::tokens`.
    pub first_tok: usize,
    /// Index of the last token (inclusive).
    pub last_tok: usize,
    pub start: usize,
    pub end: usize,
    pub start_line: u32,
    pub end_line: u32,
    /// Block nesting depth; 1 for top-level statements of the body.
    pub depth: u32,
    pub is_header: bool,
}

impl StatementSpan {
    pub fn covers_line(&self, line: u32) -> bool {
        self.start_line <= line && line <= self.end_line
    }

    pub fn tokens<'m>(&self, model: &'m ClassModel) -> &'m [Token] {
        &model.tokens()[self.first_tok..=self.last_tok]
    }

    pub fn raw<'m>(&self, model: &'m ClassModel) -> &'m str {
        &model.source_text[self.start..self.end]
    }
}

const EXPRESSION_LEADERS: [&str; 3] = ["return", "throw", "yield"];

/// Splits a method body into statements in source order.
pub fn statement_spans(model: &ClassModel, method: &MethodModel) -> Vec<StatementSpan> {
    let Some(body_start) = method.body_start else {
        return Vec::new();
    };
    let src = model.source_text.as_str();
    let all = model.tokens();
    let lo = all.partition_point(|t| t.start < body_start);
    let hi = all.partition_point(|t| t.start < method.span.end);
    if hi <= lo + 1 {
        return Vec::new();
    }
    // skip the outer braces
    let (lo, hi) = (lo + 1, hi - 1);

    let mut out = Vec::new();
    let mut depth = 1u32;
    let mut seg_start: Option<usize> = None;
    let mut nesting = 0i32;
    let mut assign_seen = false;
    let mut expr_leader = false;

    let emit = |out: &mut Vec<StatementSpan>, first: usize, last: usize, depth: u32, is_header: bool| {
        let a = all[first];
        let b = all[last];
        out.push(StatementSpan {
            first_tok: first,
            last_tok: last,
            start: a.start,
            end: b.end,
            start_line: a.line,
            end_line: model.line_index.line_of(b.end - 1),
            depth,
            is_header,
        });
    };

    for i in lo..hi {
        let t = all[i].text(src);
        if seg_start.is_none() {
            match t {
                "{" => {
                    depth += 1;
                    continue;
                }
                "}" => {
                    depth = depth.saturating_sub(1).max(1);
                    continue;
                }
                ";" => continue,
                _ => {
                    seg_start = Some(i);
                    nesting = 0;
                    assign_seen = false;
                    expr_leader = EXPRESSION_LEADERS.contains(&t);
                }
            }
        }
        let first = seg_start.unwrap_or(i);
        match t {
            "(" | "[" => nesting += 1,
            ")" | "]" => nesting -= 1,
            "{" if nesting > 0 || assign_seen || expr_leader => nesting += 1,
            "{" => {
                if i > first {
                    emit(&mut out, first, i - 1, depth, true);
                }
                depth += 1;
                seg_start = None;
            }
            "}" if nesting > 0 => nesting -= 1,
            "}" => {
                // a statement without terminator before a closing brace
                if i > first {
                    emit(&mut out, first, i - 1, depth, false);
                }
                depth = depth.saturating_sub(1).max(1);
                seg_start = None;
            }
            ";" if nesting == 0 => {
                emit(&mut out, first, i, depth, false);
                seg_start = None;
            }
            ":" if nesting == 0 && matches!(all[first].text(src), "case" | "default") => {
                emit(&mut out, first, i, depth, true);
                seg_start = None;
            }
            "=" if nesting == 0 => assign_seen = true,
            _ => {}
        }
    }
    if let Some(first) = seg_start {
        if hi > first {
            emit(&mut out, first, hi - 1, depth, false);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LocateError {
    /// The line is outside every method of the class: the frame belongs to a
    /// helper elsewhere and the caller should try the next frame.
    #[error("line {0} is not inside any method")]
    NoEnclosingMethod(u32),
    #[error("frame class {frame} does not belong to {model}")]
    ClassMismatch { frame: String, model: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocatedStatement<'m> {
    pub method: &'m MethodModel,
    /// Statement text with each line trimmed and joined by single spaces.
    pub text: String,
    pub start_line: u32,
    pub end_line: u32,
    /// True when the line holds no statement (signature line, lone brace).
    pub degenerate: bool,
}

/// Finds the innermost method and the complete statement covering `line`.
pub fn locate_statement<'m>(
    model: &'m ClassModel,
    class_fqn: &str,
    line: u32,
) -> Result<LocatedStatement<'m>, LocateError> {
    let outer = class_fqn.split('$').next().unwrap_or(class_fqn);
    let qualified = model.qualified_name();
    if outer != qualified && outer != model.class_name {
        return Err(LocateError::ClassMismatch {
            frame: class_fqn.to_string(),
            model: qualified,
        });
    }
    let method = model
        .method_at_line(line)
        .ok_or(LocateError::NoEnclosingMethod(line))?;
    let best = statement_spans(model, method)
        .into_iter()
        .filter(|s| s.covers_line(line))
        .min_by_key(|s| (s.is_header, s.end_line - s.start_line, s.start));
    Ok(match best {
        Some(s) => LocatedStatement {
            method,
            text: join_lines(s.raw(model)),
            start_line: s.start_line,
            end_line: s.end_line,
            degenerate: false,
        },
        None => LocatedStatement {
            method,
            text: String::new(),
            start_line: line,
            end_line: line,
            degenerate: true,
        },
    })
}

/// Trims every line and joins them with single spaces.
pub fn join_lines(text: &str) -> String {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::java::parse_test_class;

    const SRC: &str = r#"package a;
class T {
    @Test
    public void testPriority() throws Exception {
        MBeanServer mbs = ManagementFactory.getPlatformMBeanServer();
        String cvs1 = (String) mbs.getAttribute(name, "CallVolumeSummary");
        assertTrue("Get expected JMX of CallVolumeSummary before decay", cvs1.equals("{\"A\":6,\"B\":2,\"C\":2}"));
        if (cvs1 != null) {
            fail();
        }
        int[] arr = {1, 2};
        list.forEach(x -> {
            use(x);
        });
        Runnable r = () -> {
            go();
        };
        for (int i = 0; i < 3; i++) { step(i); }
    }

    void helper() {}
}
"#;

    fn texts(m: &ClassModel, name: &str) -> Vec<(String, bool)> {
        let method = m.method(name).unwrap();
        statement_spans(m, method)
            .iter()
            .map(|s| (join_lines(s.raw(m)), s.is_header))
            .collect()
    }

    #[test]
    fn segmentation() {
        let m = parse_test_class(SRC).unwrap();
        let got = texts(&m, "testPriority");
        let expected: Vec<(&str, bool)> = vec![
            ("MBeanServer mbs = ManagementFactory.getPlatformMBeanServer();", false),
            ("String cvs1 = (String) mbs.getAttribute(name, \"CallVolumeSummary\");", false),
            ("assertTrue(\"Get expected JMX of CallVolumeSummary before decay\", cvs1.equals(\"{\\\"A\\\":6,\\\"B\\\":2,\\\"C\\\":2}\"));", false),
            ("if (cvs1 != null)", true),
            ("fail();", false),
            ("int[] arr = {1, 2};", false),
            ("list.forEach(x -> { use(x); });", false),
            ("Runnable r = () -> { go(); };", false),
            ("for (int i = 0; i < 3; i++)", true),
            ("step(i);", false),
        ];
        let got: Vec<(&str, bool)> = got.iter().map(|(s, h)| (s.as_str(), *h)).collect();
        assert_eq!(got, expected);
        assert!(texts(&m, "helper").is_empty());
    }

    #[test]
    fn locate_assertion() {
        let m = parse_test_class(SRC).unwrap();
        let s = locate_statement(&m, "a.T", 7).unwrap();
        assert_eq!(s.method.name, "testPriority");
        assert!(s.text.starts_with("assertTrue(\"Get expected JMX"));
        assert!(!s.degenerate);
        // inside a lambda body: the enclosing statement
        let s = locate_statement(&m, "a.T$1", 13).unwrap();
        assert_eq!(s.text, "list.forEach(x -> { use(x); });");
        // brace line of if-block body prefers the inner statement
        let s = locate_statement(&m, "a.T", 9).unwrap();
        assert_eq!(s.text, "fail();");
    }

    #[test]
    fn locate_degenerate_and_errors() {
        let m = parse_test_class(SRC).unwrap();
        let s = locate_statement(&m, "a.T", 4).unwrap();
        assert!(s.degenerate);
        assert_eq!(s.text, "");
        assert_eq!(s.method.name, "testPriority");
        assert_eq!(locate_statement(&m, "a.T", 2), Err(LocateError::NoEnclosingMethod(2)));
        assert!(matches!(locate_statement(&m, "b.Other", 7), Err(LocateError::ClassMismatch { .. })));
    }
}
