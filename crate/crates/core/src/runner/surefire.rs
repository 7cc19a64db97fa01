//! Surefire XML report reading.

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use crate::model::{RunResult, StackFrame};

#[derive(Debug, Clone, PartialEq)]
pub struct ReportedCase {
    pub class_name: String,
    pub name: String,
    pub result: RunResult,
}

fn attr(e: &BytesStart<'_>, key: &str) -> Option<String> {
    e.attributes()
        .flatten()
        .find(|a| a.key.as_ref() == key.as_bytes())
        .and_then(|a| a.unescape_value().ok().map(|v| v.into_owned()))
}

fn case_attrs(e: &BytesStart<'_>) -> (String, String, f64) {
    let time = attr(e, "time")
        .and_then(|t| t.replace(',', "").parse().ok())
        .unwrap_or(0.0);
    (
        attr(e, "classname").unwrap_or_default(),
        attr(e, "name").unwrap_or_default(),
        time,
    )
}

/// Parses one `TEST-*.xml` document. Skipped cases are omitted.
pub fn parse_report(xml: &str) -> Result<Vec<ReportedCase>, String> {
    let mut reader = Reader::from_str(xml);
    let mut out = Vec::new();
    let mut current: Option<(String, String, f64)> = None;
    let mut failure: Option<(String, String)> = None;
    let mut in_failure = false;
    let mut skipped = false;
    loop {
        match reader.read_event().map_err(|e| e.to_string())? {
            Event::Empty(e) if e.name().as_ref() == b"testcase" => {
                let (class_name, name, time) = case_attrs(&e);
                out.push(ReportedCase {
                    class_name,
                    name,
                    result: RunResult::pass().with_duration(time),
                });
            }
            Event::Start(e) if e.name().as_ref() == b"testcase" => {
                current = Some(case_attrs(&e));
                failure = None;
                skipped = false;
            }
            Event::Start(e) if matches!(e.name().as_ref(), b"failure" | b"error") => {
                failure = Some((attr(&e, "message").unwrap_or_default(), String::new()));
                in_failure = true;
            }
            Event::Empty(e) if matches!(e.name().as_ref(), b"failure" | b"error") => {
                failure = Some((attr(&e, "message").unwrap_or_default(), String::new()));
            }
            Event::Start(e) | Event::Empty(e) if e.name().as_ref() == b"skipped" => skipped = true,
            Event::Text(t) if in_failure => {
                if let Some(f) = failure.as_mut() {
                    f.1.push_str(&t.unescape().map_err(|e| e.to_string())?);
                }
            }
            Event::CData(c) if in_failure => {
                if let Some(f) = failure.as_mut() {
                    f.1.push_str(&String::from_utf8_lossy(&c));
                }
            }
            Event::End(e) if matches!(e.name().as_ref(), b"failure" | b"error") => in_failure = false,
            Event::End(e) if e.name().as_ref() == b"testcase" => {
                if let Some((class_name, name, time)) = current.take() {
                    if !skipped {
                        out.push(ReportedCase {
                            class_name,
                            name,
                            result: to_result(failure.take(), time),
                        });
                    }
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    Ok(out)
}

fn to_result(failure: Option<(String, String)>, time: f64) -> RunResult {
    match failure {
        None => RunResult::pass().with_duration(time),
        Some((message, trace)) => {
            let frames: Vec<StackFrame> = trace.lines().filter_map(StackFrame::parse_jvm_line).collect();
            let message = if message.is_empty() {
                trace.lines().next().unwrap_or("test failed").trim().to_string()
            } else {
                message
            };
            RunResult::failure(message, frames).with_duration(time)
        }
    }
}
