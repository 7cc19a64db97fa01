//! Generative and fixture-wide properties, callable from both the test
//! harness and the acceptance runner.

use std::collections::BTreeSet;
use std::path::PathBuf;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use flakemend::java::{apply_patch, parse_test_class, MethodEdit, PatchCandidate};
use flakemend::model::{
    decode_report, diagnostic_key, encode_report, CompilationDiagnostic, DiagnosticKind, FlakinessCategory,
    FlakyTestCase, IterationRecord, OutcomeKind, RepairSession, RepairStatus, StitchAction, StitchActionKind,
    SuspicionFlag, SuspicionKind, TestId,
};
use flakemend::runner::{Script, ScriptedRunner};
use flakemend::stitcher::replay_actions;

use super::{corpus, corpus_project, stitching};

pub const REPORT_CASES: u32 = 1000;
pub const PATCH_CASES: u32 = 200;
pub const KEY_CASES: u32 = 500;

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

fn check<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<u32, String>
where
    S::Value: std::fmt::Debug,
{
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())?;
    Ok(cases)
}

fn ident() -> impl Strategy<Value = String> {
    "[a-z][A-Za-z0-9_]{0,8}"
}

fn test_id() -> impl Strategy<Value = TestId> {
    (
        prop::collection::vec("[a-z][a-z0-9]{0,5}", 1..4),
        "[A-Z][A-Za-z0-9]{0,8}",
        ident(),
        prop_oneof![Just(String::new()), "[a-z]{1,6}(/[a-z]{1,6})?"],
    )
        .prop_map(|(pkg, class, method, module)| {
            TestId::new(format!("{}.{class}", pkg.join(".")), method, module).unwrap()
        })
}

fn category() -> impl Strategy<Value = FlakinessCategory> {
    prop_oneof![
        Just(FlakinessCategory::OdVictim),
        Just(FlakinessCategory::OdBrittle),
        Just(FlakinessCategory::Id)
    ]
}

fn flaky_case() -> impl Strategy<Value = FlakyTestCase> {
    (
        test_id(),
        category(),
        prop::collection::vec(test_id(), 1..4),
        prop::collection::vec(test_id(), 0..3),
    )
        .prop_map(|(test, category, polluters, co_victims)| {
            let polluters = match category {
                FlakinessCategory::OdVictim => polluters.into_iter().filter(|p| *p != test).collect::<Vec<_>>(),
                _ => Vec::new(),
            };
            let co_victims = co_victims.into_iter().filter(|c| *c != test).collect();
            (test, category, polluters, co_victims)
        })
        .prop_filter("victims need a polluter", |(_, c, p, _)| *c != FlakinessCategory::OdVictim || !p.is_empty())
        .prop_map(|(t, c, p, v)| FlakyTestCase::new(t, c, p, v).unwrap())
}

fn diag_kind() -> impl Strategy<Value = DiagnosticKind> {
    prop_oneof![
        Just(DiagnosticKind::MissingSymbol),
        Just(DiagnosticKind::PackageNotFound),
        Just(DiagnosticKind::AmbiguousReference),
        Just(DiagnosticKind::Other)
    ]
}

fn diagnostic() -> impl Strategy<Value = CompilationDiagnostic> {
    (
        prop::collection::vec("[a-z]{1,6}", 0..4),
        "[A-Z][A-Za-z]{0,8}",
        1u32..2000,
        diag_kind(),
        prop::option::of("[A-Za-z][A-Za-z0-9.]{0,12}"),
        ".{1,60}",
    )
        .prop_map(|(pkg, class, line, kind, symbol, message)| {
            let mut file = PathBuf::from("src/test/java");
            file.extend(&pkg);
            file.push(format!("{class}.java"));
            let symbol = match kind {
                DiagnosticKind::MissingSymbol => Some(symbol.unwrap_or_else(|| "Missing".into())),
                _ => symbol,
            };
            CompilationDiagnostic::new(file, line, kind, symbol, message)
        })
}

fn outcome() -> impl Strategy<Value = OutcomeKind> {
    prop_oneof![
        Just(OutcomeKind::TestPass),
        Just(OutcomeKind::TestFailure),
        Just(OutcomeKind::CompilationError)
    ]
}

fn stitch_action() -> impl Strategy<Value = StitchAction> {
    (
        prop_oneof![
            Just(StitchActionKind::RevertDeclaration),
            Just(StitchActionKind::AddImport),
            Just(StitchActionKind::AddBuildDep),
            Just(StitchActionKind::ExcludeImport)
        ],
        "[a-z][a-zA-Z.:0-9]{0,30}",
        prop::option::of(diagnostic()),
    )
        .prop_map(|(kind, detail, resolved_diagnostic)| StitchAction {
            kind,
            detail,
            resolved_diagnostic,
        })
}

fn seconds() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), 0.0f64..1e-3, 0.0f64..1e7]
}

fn iterations() -> impl Strategy<Value = Vec<IterationRecord>> {
    prop::collection::vec(
        (
            ".{0,80}",
            ".{0,80}",
            prop::collection::vec(stitch_action(), 0..3),
            outcome(),
            prop::collection::vec(diagnostic(), 1..4),
            any::<u64>(),
            any::<u64>(),
            seconds(),
        ),
        0..=5,
    )
    .prop_map(|records| {
        records
            .into_iter()
            .enumerate()
            .map(|(i, (prompt, response, actions, outcome, diags, tin, tout, rt))| IterationRecord {
                index: i as u32 + 1,
                prompt_text: prompt,
                response_text: response,
                stitch_actions: actions,
                outcome,
                diagnostic_key: (outcome == OutcomeKind::CompilationError).then(|| diagnostic_key(&diags)),
                tokens_in: tin,
                tokens_out: tout,
                runner_time_s: rt,
            })
            .collect()
    })
}

fn status() -> impl Strategy<Value = RepairStatus> {
    prop_oneof![
        Just(RepairStatus::Fixed),
        Just(RepairStatus::ExhaustedIterations),
        Just(RepairStatus::ExhaustedIdenticalErrors),
        Just(RepairStatus::NotReproduced),
        Just(RepairStatus::ProviderError)
    ]
}

fn flag() -> impl Strategy<Value = SuspicionFlag> {
    (
        prop_oneof![
            Just(SuspicionKind::AssertionDeleted),
            Just(SuspicionKind::TryCatchWrapped),
            Just(SuspicionKind::TriviallyTrueAssertion)
        ],
        ".{0,40}",
    )
        .prop_map(|(kind, evidence)| SuspicionFlag { kind, evidence })
}

prop_compose! {
    fn session()(
        case in flaky_case(),
        mut iterations in iterations(),
        status in status(),
        detail in prop::option::of(".{0,60}"),
        patch in prop::option::of(".{1,200}"),
        wall in seconds(),
        setup in seconds(),
        tokens in (any::<u64>(), any::<u64>()),
        seed in prop::option::of(any::<u64>()),
        fixed in prop::collection::vec(test_id(), 0..3),
        flags in prop::collection::vec(flag(), 0..3),
        warnings in prop::collection::vec(".{0,40}", 0..3),
    ) -> RepairSession {
        let final_patch = match status {
            RepairStatus::Fixed => {
                match iterations.last_mut() {
                    Some(last) => {
                        last.outcome = OutcomeKind::TestPass;
                        last.diagnostic_key = None;
                    }
                    None => iterations.push(IterationRecord {
                        index: 1,
                        prompt_text: "p".into(),
                        response_text: "r".into(),
                        stitch_actions: Vec::new(),
                        outcome: OutcomeKind::TestPass,
                        diagnostic_key: None,
                        tokens_in: 1,
                        tokens_out: 1,
                        runner_time_s: 0.5,
                    }),
                }
                Some(patch.unwrap_or_else(|| "--- a/x\n+++ b/x\n".into()))
            }
            _ => patch,
        };
        RepairSession {
            case,
            iterations,
            status,
            status_detail: detail,
            final_patch,
            wall_time_s: wall,
            llm_tokens_in: tokens.0,
            llm_tokens_out: tokens.1,
            setup_runner_time_s: setup,
            validation_seed: seed,
            co_victims_fixed: fixed,
            suspicion_flags: flags,
            overfit_warnings: warnings,
        }
    }
}


/// Sessions survive an encode/decode cycle unchanged.
pub fn report_round_trip(cases: u32) -> Result<u32, String> {
    check(cases, session(), |session| {
        prop_assert!(session.validate().is_ok(), "{:?}", session.validate());
        let decoded = decode_report(&encode_report(&session)).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(decoded, session);
        Ok(())
    })
}

const STATEMENTS: [&str; 6] = [
    "int v{n} = {n};",
    "assertEquals({n}, {n});",
    "String s{n} = \"{n} }} {{ \";",
    "// note {n} }",
    "list.add(\"{n}\");",
    "if (v > {n}) {\n    v = {n};\n}",
];

fn body() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec((0..STATEMENTS.len(), 0u32..1000), 0..5).prop_map(|stmts| {
        stmts
            .into_iter()
            .map(|(i, n)| STATEMENTS[i].replace("{n}", &n.to_string()).replace("}}", "}").replace("{{", "{"))
            .collect()
    })
}

fn indent_block(lines: &[String], pad: &str) -> String {
    lines
        .iter()
        .flat_map(|s| s.lines().map(move |l| format!("{pad}{l}\n")))
        .collect()
}

fn render_method(name: &str, body: &[String], annotated: bool, pad: &str) -> String {
    let mut out = String::new();
    if annotated {
        out.push_str(&format!("{pad}@Test\n"));
    }
    out.push_str(&format!("{pad}public void {name}() {{\n"));
    out.push_str(&indent_block(body, &format!("{pad}    ")));
    out.push_str(&format!("{pad}}}\n"));
    out
}

prop_compose! {
    fn class_and_patch()(
        bodies in prop::collection::vec((body(), any::<bool>()), 2..7),
        new_body in body(),
        pick in any::<prop::sample::Index>(),
        tabs in any::<bool>(),
    ) -> (String, String, String) {
        let pad = if tabs { "\t" } else { "    " };
        let mut src = String::from("package p.q;\n\nimport java.util.List;\nimport org.junit.Test;\n\npublic class GenTest {\n");
        src.push_str(&format!("{pad}private List<String> list;\n\n"));
        for (i, (b, annotated)) in bodies.iter().enumerate() {
            src.push_str(&render_method(&format!("m{i}"), b, *annotated, pad));
            src.push('\n');
        }
        src.push_str("}\n");
        let target = format!("m{}", pick.index(bodies.len()));
        let mut replacement = vec!["int fresh = 7;".to_string()];
        replacement.extend(new_body);
        let new_method = render_method(&target, &replacement, true, "");
        (src, target, new_method)
    }
}

/// Replacing one method leaves every byte outside its span alone.
pub fn apply_patch_locality(cases: u32) -> Result<u32, String> {
    check(cases, class_and_patch(), |(src, target, new_method)| {
        let model = parse_test_class(&src).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let mut patch = PatchCandidate::default();
        patch.method_replacements.insert(target.clone(), MethodEdit::replace(new_method));
        let out = apply_patch(&model, &patch).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let patched = parse_test_class(&out).map_err(|e| TestCaseError::fail(format!("re-parse: {e}\n{out}")))?;

        let span = model.method(&target).unwrap().span;
        prop_assert!(out.starts_with(&src[..span.start]));
        prop_assert!(out.ends_with(&src[span.end..]));
        for m in &model.methods {
            let after = patched.method(&m.name).unwrap();
            if m.name == target {
                prop_assert!(after.body_text.contains("int fresh = 7;"));
            } else {
                prop_assert_eq!(&after.source, &m.source);
            }
        }
        prop_assert_eq!(patched.methods.len(), model.methods.len());
        Ok(())
    })
}

fn shifted(d: &CompilationDiagnostic, delta: i64, root: &str) -> CompilationDiagnostic {
    let line = (d.line as i64 + delta).clamp(1, u32::MAX as i64) as u32;
    let file = if root.is_empty() { d.file.clone() } else { PathBuf::from(root).join(&d.file) };
    CompilationDiagnostic::new(file, line, d.kind, d.symbol.clone(), d.raw_message.clone())
}

fn root() -> impl Strategy<Value = String> {
    prop_oneof![
        Just(String::new()),
        "/tmp/[a-z]{1,8}/work[0-9]{1,3}",
        "/home/[a-z]{1,6}/proj",
        "[a-z]{1,5}/[a-z]{1,5}",
    ]
}

/// Keys ignore line numbers, working-copy roots and diagnostic order.
pub fn diagnostic_key_invariance(cases: u32) -> Result<u32, String> {
    let strategy = (
        prop::collection::vec(diagnostic(), 1..6),
        prop::collection::vec(-50i64..500, 6),
        root(),
        any::<bool>(),
    );
    check(cases, strategy, |(diags, deltas, root, reverse)| {
        let mut moved: Vec<CompilationDiagnostic> =
            diags.iter().zip(&deltas).map(|(d, k)| shifted(d, *k, &root)).collect();
        if reverse {
            moved.reverse();
        }
        prop_assert_eq!(diagnostic_key(&moved), diagnostic_key(&diags));
        Ok(())
    })
}

/// A different symbol gives a different key.
pub fn diagnostic_key_discrimination(cases: u32) -> Result<u32, String> {
    check(cases, (diagnostic(), "[A-Z][a-z]{1,8}X"), |(d, other)| {
        prop_assume!(d.symbol.as_deref() != Some(other.as_str()));
        let mut changed = d.clone();
        changed.symbol = Some(other);
        prop_assert_ne!(diagnostic_key(&[changed]), diagnostic_key(&[d]));
        Ok(())
    })
}

/// Stitch runs over every fixture with a compilable or stitchable patch.
pub fn stitch_fixture_runs() -> Vec<(String, stitching::ScenarioRun)> {
    let mut runs = Vec::new();
    for scenario in stitching::scenarios() {
        let run = stitching::run(&scenario, &mut stitching::scripted_runner()).expect("scenario runs");
        runs.push((scenario.name.clone(), run));
    }
    #[derive(serde::Deserialize)]
    struct Rule {
        needles: Vec<String>,
        response: String,
    }
    let rules: Vec<Rule> =
        serde_json::from_str(&std::fs::read_to_string(corpus().join("responses.json")).unwrap()).unwrap();
    let script = Script::load(&corpus().join("runner-script.json")).unwrap();
    for rule in rules {
        let Some(test) = rule.needles.iter().find(|n| n.contains('#')) else { continue };
        let mut runner = ScriptedRunner::new(script.clone());
        let run = stitching::run_in(&corpus_project(), test, &rule.response, &mut runner).expect("corpus patch runs");
        runs.push((test.clone(), run));
    }
    runs
}

/// Idempotence, replayability and monotone diagnostics over every fixture
/// patch; returns how many fixtures were checked.
pub fn stitch_fixture_properties() -> Result<usize, String> {
    let runs = stitch_fixture_runs();
    let stitched = runs.iter().filter(|(_, r)| !r.log.is_empty()).count();
    if runs.len() < 10 || stitched < 6 {
        return Err(format!("only {} fixtures, {stitched} of them stitched", runs.len()));
    }
    for (name, run) in &runs {
        if run.restitched != run.stitched || !run.restitch_log.is_empty() {
            return Err(format!("{name}: stitching twice changed the patch ({:?})", run.restitch_log));
        }
        let replayed = replay_actions(&run.model, &run.pre_stitch, &run.log).map_err(|e| format!("{name}: {e}"))?;
        if replayed != run.stitched {
            return Err(format!("{name}: replaying the action log gives a different patch"));
        }
        let a = apply_patch(&run.model, &replayed).map_err(|e| format!("{name}: {e}"))?;
        let b = apply_patch(&run.model, &run.stitched).map_err(|e| format!("{name}: {e}"))?;
        if a.as_bytes() != b.as_bytes() {
            return Err(format!("{name}: replayed source differs"));
        }
        let before: BTreeSet<String> = run.before.iter().map(|d| diagnostic_key(std::slice::from_ref(d))).collect();
        if let Some(d) = run.after.iter().find(|d| !before.contains(&diagnostic_key(std::slice::from_ref(d)))) {
            return Err(format!("{name}: stitching introduced {}", d.one_line()));
        }
    }
    Ok(runs.len())
}

/// Stitching touches only signatures, imports and the manifest, never a
/// method body.
pub fn stitch_body_preservation() -> Result<usize, String> {
    let runs = stitch_fixture_runs();
    for (name, run) in &runs {
        for (method, edit) in &run.stitched.method_replacements {
            let pre = &run.pre_stitch.method_replacements[method];
            let body = |s: &str| s[s.find('{').unwrap_or(0)..].to_string();
            if body(&edit.source) != body(&pre.source) {
                return Err(format!("{name}: body of {method} changed"));
            }
        }
    }
    Ok(runs.len())
}
