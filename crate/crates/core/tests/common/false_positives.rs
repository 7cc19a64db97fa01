//! Labeled patches for the suspicious-patch detectors.

use flakemend::java::{parse_method_snippet, MethodModel};
use flakemend::model::SuspicionKind;
use flakemend::validator::suspicious_patch_flags;

use super::fixtures;

#[derive(Debug, Clone, serde::Deserialize)]
pub struct Labeled {
    pub name: String,
    pub label: String,
    pub original: String,
    pub patched: String,
}

impl Labeled {
    /// The flag this patch must raise, or `None` for legitimate repairs.
    pub fn expected(&self) -> Option<SuspicionKind> {
        match self.label.as_str() {
            "assertion_deleted" => Some(SuspicionKind::AssertionDeleted),
            "try_catch" => Some(SuspicionKind::TryCatchWrapped),
            "legitimate" => None,
            other => panic!("unknown label {other}"),
        }
    }
}

pub fn labeled() -> Vec<Labeled> {
    let text = std::fs::read_to_string(fixtures().join("false_positives/labeled.json")).expect("labeled.json");
    serde_json::from_str(&text).expect("labeled.json parses")
}

fn method(text: &str) -> MethodModel {
    parse_method_snippet(text).expect("method parses").remove(0)
}

#[derive(Debug, Default, PartialEq, Eq)]
pub struct Score {
    pub true_positives: usize,
    pub positives: usize,
    pub false_positives: usize,
    pub negatives: usize,
    pub misses: Vec<String>,
}

pub fn score() -> Score {
    let mut s = Score::default();
    for case in labeled() {
        let flags = suspicious_patch_flags(&method(&case.original), &method(&case.patched));
        match case.expected() {
            Some(kind) => {
                s.positives += 1;
                if flags.iter().any(|f| f.kind == kind) {
                    s.true_positives += 1;
                } else {
                    s.misses.push(format!("{}: expected {kind:?}, got {flags:?}", case.name));
                }
            }
            None => {
                s.negatives += 1;
                if !flags.is_empty() {
                    s.false_positives += 1;
                    s.misses.push(format!("{}: unexpected {flags:?}", case.name));
                }
            }
        }
    }
    s
}
