#![allow(dead_code)]

use std::path::{Path, PathBuf};
pub mod context;
pub mod false_positives;
pub mod properties;
pub mod prompts;
pub mod stitching;
pub mod termination;
pub mod validation;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use flakemend::llm::{Provider, RecordingProvider, ReplayProvider, RuleProvider};
use flakemend::model::{FlakinessCategory, FlakyTestCase, TestId};
use flakemend::orchestrator::{RepairConfig, SessionEnv, Toolkit};
use flakemend::runner::{Runner, Script, ScriptedRunner, WorkingCopy};

/// Set to regenerate committed replay fixtures and prompt goldens.
pub const BLESS_VAR: &str = "FLAKEMEND_BLESS";

pub fn blessing() -> bool {
    std::env::var_os(BLESS_VAR).is_some_and(|v| !v.is_empty() && v != "0")
}

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn corpus() -> PathBuf {
    fixtures().join("corpus")
}

pub fn corpus_project() -> PathBuf {
    corpus().join("project")
}

pub fn corpus_script() -> Arc<Script> {
    Arc::new(Script::load(&corpus().join("runner-script.json")).expect("corpus runner script"))
}

pub fn corpus_runner() -> ScriptedRunner {
    ScriptedRunner::shared(corpus_script())
}

pub fn test_id(text: &str) -> TestId {
    TestId::parse(text, "").expect("test id")
}

pub fn case(test: &str, category: FlakinessCategory, polluters: &[&str], co_victims: &[&str]) -> FlakyTestCase {
    FlakyTestCase::new(
        test_id(test),
        category,
        polluters.iter().map(|p| test_id(p)).collect(),
        co_victims.iter().map(|p| test_id(p)).collect(),
    )
    .expect("valid case")
}

/// Stand-in model answering from `responses.json`.
pub fn corpus_rules() -> RuleProvider {
    #[derive(serde::Deserialize)]
    struct Rule {
        needles: Vec<String>,
        response: String,
    }
    let text = std::fs::read_to_string(corpus().join("responses.json")).expect("responses.json");
    let rules: Vec<Rule> = serde_json::from_str(&text).expect("responses.json parses");
    rules.iter().fold(RuleProvider::new(), |p, r| {
        let needles: Vec<&str> = r.needles.iter().map(String::as_str).collect();
        p.rule(&needles, &r.response)
    })
}

type Recorder = Arc<RecordingProvider<Box<dyn Provider>>>;

/// Replays `fixtures/replay/<name>.json`; when blessing, re-records it from
/// `inner` first. Recorders are shared per fixture so parallel tests in one
/// process append to the same table.
pub fn replay_or_record(name: &str, inner: impl Provider + 'static) -> Box<dyn Provider> {
    static RECORDERS: OnceLock<Mutex<HashMap<String, Recorder>>> = OnceLock::new();
    let path = fixtures().join("replay").join(format!("{name}.json"));
    let mut recorders = RECORDERS.get_or_init(Default::default).lock().unwrap();
    if let Some(rec) = recorders.get(name) {
        return Box::new(Arc::clone(rec));
    }
    if blessing() || !path.exists() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        let _ = std::fs::remove_file(&path);
        let inner: Box<dyn Provider> = Box::new(inner);
        let rec = Arc::new(RecordingProvider::new(inner, path).expect("recorder"));
        recorders.insert(name.to_string(), Arc::clone(&rec));
        return Box::new(rec);
    }
    Box::new(ReplayProvider::load(&path).expect("replay fixture"))
}

pub fn corpus_provider() -> Box<dyn Provider> {
    replay_or_record("corpus", corpus_rules())
}

/// Runs one session over the corpus project.
pub fn repair(
    case: &FlakyTestCase,
    runner: &mut dyn Runner,
    provider: &dyn Provider,
    config: &RepairConfig,
) -> flakemend::model::RepairSession {
    let toolkit = Toolkit::for_project(&corpus_project());
    let project = corpus_project();
    let mut env = SessionEnv {
        project: &project,
        runner,
        provider,
        toolkit: &toolkit,
    };
    flakemend::orchestrator::repair_one(case, &mut env, config).expect("session runs")
}

pub fn corpus_copy() -> WorkingCopy {
    WorkingCopy::create(&corpus_project(), "").expect("working copy")
}

/// Compares `actual` with a committed golden file, rewriting it when
/// blessing.
pub fn check_golden(name: &str, actual: &str) -> Result<(), String> {
    let path = fixtures().join("goldens").join(name);
    if blessing() || !path.exists() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return Ok(());
    }
    let expected = std::fs::read_to_string(&path).unwrap();
    if expected == actual {
        Ok(())
    } else {
        let first = expected
            .lines()
            .zip(actual.lines())
            .position(|(a, b)| a != b)
            .map(|i| i + 1)
            .unwrap_or_else(|| expected.lines().count().min(actual.lines().count()) + 1);
        Err(format!("{name} differs from the golden starting at line {first}"))
    }
}
