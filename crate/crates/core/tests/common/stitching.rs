//! The four stitching scenarios, runnable against any [`Runner`].

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use flakemend::java::{apply_patch, edit_build_dependency, parse_test_class, ClassModel, PatchCandidate};
use flakemend::llm::extract_patch;
use flakemend::model::{CompilationDiagnostic, OutcomeKind, StitchAction, StitchActionKind};
use flakemend::orchestrator::Toolkit;
use flakemend::runner::{Runner, Script, ScriptedRunner, WorkingCopy};
use flakemend::stitcher::{stitch, StitchContext, DEFAULT_PROBE_BUDGET};

use super::{fixtures, test_id};

#[derive(Debug, Clone, serde::Deserialize)]
pub struct Scenario {
    pub name: String,
    pub test: String,
    pub response: String,
    pub actions: Vec<(StitchActionKind, String)>,
    pub contains: Vec<String>,
    pub absent: Vec<String>,
    pub manifest_contains: Vec<String>,
}

pub fn root() -> PathBuf {
    fixtures().join("stitching")
}

pub fn project() -> PathBuf {
    root().join("project")
}

pub fn scenarios() -> Vec<Scenario> {
    let text = std::fs::read_to_string(root().join("scenarios.json")).expect("scenarios.json");
    serde_json::from_str(&text).expect("scenarios.json parses")
}

pub fn scripted_runner() -> ScriptedRunner {
    ScriptedRunner::new(Script::load(&root().join("runner-script.json")).expect("stitching script"))
}

#[derive(Debug)]
pub struct ScenarioRun {
    pub model: ClassModel,
    pub before: Vec<CompilationDiagnostic>,
    pub after: Vec<CompilationDiagnostic>,
    pub actions: Vec<(StitchActionKind, String)>,
    pub log: Vec<StitchAction>,
    pub pre_stitch: PatchCandidate,
    pub stitched: PatchCandidate,
    /// Stitching the stitched patch again against the original diagnostics.
    pub restitched: PatchCandidate,
    pub restitch_log: Vec<StitchAction>,
    pub source: String,
    pub manifest: String,
    pub elapsed: Duration,
}

fn compile(runner: &mut dyn Runner, copy: &mut WorkingCopy) -> Result<Vec<CompilationDiagnostic>, String> {
    let result = runner.compile(copy).map_err(|e| e.to_string())?;
    match result.kind {
        OutcomeKind::CompilationError if result.diagnostics.is_empty() => {
            Err(format!("compile failed without diagnostics: {:?}", result.failure_message))
        }
        _ => Ok(result.diagnostics),
    }
}

fn install(
    copy: &mut WorkingCopy,
    source_rel: &Path,
    original_source: &str,
    original_manifest: &str,
    patch: &PatchCandidate,
) -> Result<String, String> {
    let model = parse_test_class(original_source).map_err(|e| e.to_string())?;
    let source = apply_patch(&model, patch).map_err(|e| e.to_string())?;
    let mut manifest = original_manifest.to_string();
    for dep in &patch.build_dependencies {
        manifest = edit_build_dependency(&manifest, dep).map_err(|e| e.to_string())?;
    }
    copy.write(source_rel, &source).map_err(|e| e.to_string())?;
    copy.write(Path::new("pom.xml"), &manifest).map_err(|e| e.to_string())?;
    Ok(source)
}

/// Installs the scenario's patch, stitches it with `runner` as the compile
/// probe and compiles the result.
pub fn run(scenario: &Scenario, runner: &mut dyn Runner) -> Result<ScenarioRun, String> {
    run_in(&project(), &scenario.test, &scenario.response, runner)
}

pub fn run_in(project: &Path, test: &str, response: &str, runner: &mut dyn Runner) -> Result<ScenarioRun, String> {
    let started = Instant::now();
    let test = test_id(test);
    let mut copy = WorkingCopy::create(project, "").map_err(|e| e.to_string())?;
    let source_rel = test.source_path();
    let original_source = copy.read(&source_rel).map_err(|e| e.to_string())?;
    let original_manifest = copy.read(Path::new("pom.xml")).map_err(|e| e.to_string())?;
    let model = parse_test_class(&original_source).map_err(|e| e.to_string())?;
    let patch = extract_patch(response, &model).map_err(|e| e.to_string())?;

    install(&mut copy, &source_rel, &original_source, &original_manifest, &patch)?;
    let before = compile(runner, &mut copy)?;

    let toolkit = Toolkit::for_project(project);
    let ctx = StitchContext {
        index: &toolkit.index,
        coordinates: &toolkit.coordinates,
        manifest: Some(&original_manifest),
        probe_budget: DEFAULT_PROBE_BUDGET,
    };
    let (outcome, again) = {
        let copy = &mut copy;
        let runner = &mut *runner;
        let mut probe = |candidate: &PatchCandidate| -> Result<Vec<CompilationDiagnostic>, String> {
            install(copy, &source_rel, &original_source, &original_manifest, candidate)?;
            compile(runner, copy)
        };
        let outcome = stitch(&model, &patch, &before, &ctx, &mut probe).map_err(|e| e.to_string())?;
        let again = stitch(&model, &outcome.patch, &before, &ctx, &mut probe).map_err(|e| e.to_string())?;
        (outcome, again)
    };

    let source = install(&mut copy, &source_rel, &original_source, &original_manifest, &outcome.patch)?;
    let after = compile(runner, &mut copy)?;
    let manifest = copy.read(Path::new("pom.xml")).map_err(|e| e.to_string())?;
    Ok(ScenarioRun {
        model,
        before,
        after,
        actions: outcome.actions.iter().map(|a| (a.kind, a.detail.clone())).collect(),
        log: outcome.actions,
        pre_stitch: patch,
        stitched: outcome.patch,
        restitched: again.patch,
        restitch_log: again.actions,
        source,
        manifest,
        elapsed: started.elapsed(),
    })
}

/// Every way `run` departs from the scenario's expectations.
pub fn mismatches(scenario: &Scenario, run: &ScenarioRun) -> Vec<String> {
    let mut out = Vec::new();
    if run.before.is_empty() {
        out.push("the unstitched patch already compiles".to_string());
    }
    if !run.after.is_empty() {
        let lines: Vec<String> = run.after.iter().map(|d| d.one_line()).collect();
        out.push(format!("stitched patch still fails to compile: {}", lines.join(" | ")));
    }
    if run.actions != scenario.actions {
        out.push(format!("actions {:?}, expected {:?}", run.actions, scenario.actions));
    }
    for needle in &scenario.contains {
        if !run.source.contains(needle.as_str()) {
            out.push(format!("stitched source lacks {needle:?}"));
        }
    }
    for needle in &scenario.absent {
        if run.source.contains(needle.as_str()) {
            out.push(format!("stitched source still has {needle:?}"));
        }
    }
    for needle in &scenario.manifest_contains {
        if !run.manifest.contains(needle.as_str()) {
            out.push(format!("pom.xml lacks {needle:?}"));
        }
    }
    out
}
