//! Truth tables for category-specific acceptance, driven by file markers
//! that the scripted backend turns into pass/fail outcomes.

use flakemend::inspector::DEFAULT_SHAKER_ROUNDS;
use flakemend::model::{FlakinessCategory, OutcomeKind};
use flakemend::runner::{Script, ScriptedRunner, WorkingCopy};
use flakemend::validator::{validate, ValidationOutcome};

use super::case;

const FILE: &str = "src/test/java/t/VTest.java";
const VICTIM: &str = "t.VTest#victim";
const POLLUTER: &str = "t.VTest#polluter";
const BRITTLE: &str = "t.VTest#brittle";
const SHUFFLED: &str = "t.VTest#shuffled";

fn script() -> Script {
    let text = serde_json::json!({
        "tests": [VICTIM, POLLUTER, BRITTLE, SHUFFLED],
        "ordered": [
            { "test": VICTIM, "after": [POLLUTER], "when": [{ "file": FILE, "not_contains": "FORWARD_OK" }],
              "fail": "expected:<0> but was:<1>" },
            { "test": VICTIM, "sequence": [VICTIM, POLLUTER], "when": [{ "file": FILE, "not_contains": "BACKWARD_OK" }],
              "fail": "expected:<1> but was:<0>" },
            { "test": POLLUTER, "when": [{ "file": FILE, "not_contains": "POLLUTER_OK" }],
              "fail": "expected:<true> but was:<false>" },
            { "test": BRITTLE, "alone": true, "when": [{ "file": FILE, "not_contains": "ALONE_OK" }],
              "fail": "expected:<30> but was:<null>" },
            { "test": BRITTLE, "after": [VICTIM], "fail": "brittle test is not expected to run after the victim" }
        ],
        "shaken": [
            { "test": SHUFFLED, "failing_rounds": [3], "when": [{ "file": FILE, "contains": "ROUND_3_FAILS" }],
              "fail": "expected:<[a, b]> but was:<[b, a]>" },
            { "test": SHUFFLED, "failing_rounds": [1, 2, 3, 4, 5], "when": [{ "file": FILE, "contains": "EVERY_ROUND_FAILS" }],
              "fail": "expected:<[a, b]> but was:<[b, a]>" },
            { "test": SHUFFLED, "failing_rounds": [5], "when": [{ "file": FILE, "contains": "ROUND_5_FAILS" }],
              "fail": "expected:<[a, b]> but was:<[b, a]>" }
        ]
    });
    Script::from_json(&text.to_string()).expect("validation script")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub label: String,
    pub expected_accept: bool,
    pub accepted: bool,
    pub detail: String,
}

fn run(category: FlakinessCategory, markers: &[&str]) -> ValidationOutcome {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join(FILE);
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(&path, format!("// {}\n", markers.join(" "))).unwrap();
    let mut copy = WorkingCopy::create(dir.path(), "").expect("working copy");
    let mut runner = ScriptedRunner::new(script());
    let case = match category {
        FlakinessCategory::OdVictim => case(VICTIM, category, &[POLLUTER], &[]),
        FlakinessCategory::OdBrittle => case(BRITTLE, category, &[], &[]),
        FlakinessCategory::Id => case(SHUFFLED, category, &[], &[]),
    };
    validate(&case, &mut copy, &mut runner, DEFAULT_SHAKER_ROUNDS, 1).expect("validation runs")
}

fn row(label: String, expected_accept: bool, outcome: &ValidationOutcome) -> Row {
    let detail = outcome
        .per_order_results
        .iter()
        .map(|(order, r)| format!("{order}={:?}", r.kind))
        .chain(outcome.polluter_results.values().map(|r| format!("polluter={:?}", r.kind)))
        .chain(std::iter::once(format!(
            "shaken={}/{}",
            outcome.shaken_results.iter().filter(|r| r.passed()).count(),
            outcome.shaken_results.len()
        )))
        .collect::<Vec<_>>()
        .join(" ");
    Row {
        label,
        expected_accept,
        accepted: outcome.kind == OutcomeKind::TestPass,
        detail,
    }
}

/// Every combination of victim-after-polluter, victim-before-polluter and
/// polluter outcomes; only the all-pass row may be accepted.
pub fn od_victim_table() -> Vec<Row> {
    let mut rows = Vec::new();
    for forward in [false, true] {
        for backward in [false, true] {
            for polluter in [false, true] {
                let mut markers = Vec::new();
                if forward {
                    markers.push("FORWARD_OK");
                }
                if backward {
                    markers.push("BACKWARD_OK");
                }
                if polluter {
                    markers.push("POLLUTER_OK");
                }
                let outcome = run(FlakinessCategory::OdVictim, &markers);
                let label = format!("OD_VICTIM forward={forward} backward={backward} polluter={polluter}");
                rows.push(row(label, forward && backward && polluter, &outcome));
            }
        }
    }
    rows
}

pub fn od_brittle_table() -> Vec<Row> {
    [(false, "OD_BRITTLE isolated run fails"), (true, "OD_BRITTLE isolated run passes")]
        .into_iter()
        .map(|(alone, label)| {
            let markers: &[&str] = if alone { &["ALONE_OK"] } else { &[] };
            row(label.to_string(), alone, &run(FlakinessCategory::OdBrittle, markers))
        })
        .collect()
}

pub fn id_table() -> Vec<Row> {
    [
        ("", "ID 5/5 shaken rounds pass", true),
        ("ROUND_3_FAILS", "ID round 3 of 5 fails", false),
        ("ROUND_5_FAILS", "ID round 5 of 5 fails", false),
        ("EVERY_ROUND_FAILS", "ID every round fails", false),
    ]
    .into_iter()
    .map(|(marker, label, expected)| {
        let outcome = run(FlakinessCategory::Id, &[marker]);
        assert_eq!(outcome.shaken_results.len(), DEFAULT_SHAKER_ROUNDS as usize);
        row(label.to_string(), expected, &outcome)
    })
    .collect()
}

pub fn all_rows() -> Vec<Row> {
    let mut rows = od_victim_table();
    rows.extend(od_brittle_table());
    rows.extend(id_table());
    rows
}
