//! The repair loop for one flaky test and campaigns over lists of them.

mod campaign;
mod diff;

use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;
use walkdir::WalkDir;

pub use campaign::{
    parse_input_list, run_campaign, run_campaign_with, CampaignConfig, CampaignReport, CategoryCounts, InputRow,
    RowOutcome, RowStatus, RunnerFactory, CAMPAIGN_REPORT_FILE,
};
pub use diff::{apply_unified_diff, unified_diff, DiffApplyError, FileChange};

use crate::inspector::{extract_context, reproduce, ContextBundle, InspectError, DEFAULT_SHAKER_ROUNDS};
use crate::java::{
    apply_patch, edit_build_dependency, extract_related_code, parse_test_class, ClassModel, PatchCandidate,
    RelatedCode, UnorderedCatalog,
};
use crate::llm::{extract_patch, Provider};
use crate::model::{
    diagnostic_key, CompilationDiagnostic, DiagnosticKind, FlakinessCategory, FlakyTestCase, IterationRecord,
    OutcomeKind, RepairSession, RepairStatus, RunResult, MAX_ITERATIONS,
};
use crate::prompt::{augment_with_feedback, build_prompt, Feedback, Prompt, PromptConfig};
use crate::runner::{Runner, RunnerError, WorkingCopy};
use crate::stitcher::{stitch, ClassIndex, CoordinateTable, StitchContext, DEFAULT_PROBE_BUDGET};
use crate::validator::{covictim_sweep, overfit_guard, shared_fields, suspicious_patch_flags, validate};

pub const DEFAULT_IDENTICAL_ERROR_LIMIT: u32 = 3;
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("session setup failed: {0}")]
    Setup(String),
    #[error(transparent)]
    Runner(#[from] RunnerError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Per-session knobs.
#[derive(Debug, Clone)]
pub struct RepairConfig {
    pub max_iterations: u32,
    /// Consecutive identical compilation errors that end a session early.
    pub identical_error_limit: u32,
    pub nondex_rounds: u32,
    pub seed: u64,
    pub probe_budget: u32,
    /// Keep working copies on disk instead of deleting them.
    pub keep_workdirs: bool,
    /// Parent directory for kept working copies; the system temp dir if unset.
    pub workdir_root: Option<PathBuf>,
    pub prompt: PromptConfig,
}

impl Default for RepairConfig {
    fn default() -> Self {
        RepairConfig {
            max_iterations: MAX_ITERATIONS,
            identical_error_limit: DEFAULT_IDENTICAL_ERROR_LIMIT,
            nondex_rounds: DEFAULT_SHAKER_ROUNDS,
            seed: DEFAULT_SEED,
            probe_budget: DEFAULT_PROBE_BUDGET,
            keep_workdirs: false,
            workdir_root: None,
            prompt: PromptConfig::default(),
        }
    }
}

impl RepairConfig {
    pub fn validate(&self) -> Result<(), OrchestratorError> {
        let bad = |m: String| Err(OrchestratorError::Config(m));
        if !(1..=MAX_ITERATIONS).contains(&self.max_iterations) {
            return bad(format!("max_iterations must be within 1..={MAX_ITERATIONS}, got {}", self.max_iterations));
        }
        if self.identical_error_limit == 0 {
            return bad("identical_error_limit must be at least 1".into());
        }
        if self.nondex_rounds == 0 {
            return bad("nondex_rounds must be at least 1".into());
        }
        if self.prompt.max_diagnostics == 0 {
            return bad("max_diagnostics must be at least 1".into());
        }
        Ok(())
    }
}

/// Lookup tables shared by all sessions of a project.
#[derive(Debug, Clone)]
pub struct Toolkit {
    pub index: ClassIndex,
    pub coordinates: CoordinateTable,
    pub catalog: UnorderedCatalog,
}

impl Toolkit {
    pub fn builtin() -> Self {
        Toolkit {
            index: ClassIndex::builtin(),
            coordinates: CoordinateTable::builtin(),
            catalog: UnorderedCatalog::builtin(),
        }
    }

    /// Built-in tables plus the classes declared in the project's sources.
    pub fn for_project(project: &Path) -> Self {
        let mut toolkit = Toolkit::builtin();
        toolkit.index.add_sources(project);
        toolkit
    }
}

/// What a session works against.
pub struct SessionEnv<'a> {
    pub project: &'a Path,
    pub runner: &'a mut dyn Runner,
    pub provider: &'a dyn Provider,
    pub toolkit: &'a Toolkit,
}

/// Result of trying one response.
enum Attempt {
    Uncompilable(Vec<CompilationDiagnostic>),
    Failed(RunResult, Option<ClassModel>),
    Passed(ValidatedPatch),
}

struct ValidatedPatch {
    patch: PatchCandidate,
    source: String,
    manifest: Option<String>,
    model: ClassModel,
}

struct Session<'e, 'a> {
    env: &'e mut SessionEnv<'a>,
    config: &'e RepairConfig,
    case: &'e FlakyTestCase,
    copy: WorkingCopy,
    source_rel: PathBuf,
    original_source: String,
    manifest_rel: PathBuf,
    original_manifest: Option<String>,
    model: ClassModel,
    polluter_models: Vec<ClassModel>,
    /// Every edit so far, folded onto the pristine class.
    cumulative: PatchCandidate,
    runner_time_s: f64,
}

fn synthetic(file: &Path, message: &str) -> CompilationDiagnostic {
    CompilationDiagnostic::new(file, 1, DiagnosticKind::Other, None, message)
}

impl Session<'_, '_> {
    fn timed<T>(&mut self, f: impl FnOnce(&mut dyn Runner, &mut WorkingCopy) -> T) -> T {
        let started = Instant::now();
        let out = f(&mut *self.env.runner, &mut self.copy);
        self.runner_time_s += started.elapsed().as_secs_f64();
        out
    }

    fn materialize(&self, patch: &PatchCandidate) -> Result<(String, Option<String>), String> {
        let source = apply_patch(&self.model, patch).map_err(|e| format!("patch could not be applied: {e}"))?;
        let manifest = match (&self.original_manifest, patch.build_dependencies.is_empty()) {
            (_, true) => self.original_manifest.clone(),
            (None, false) => return Err("patch adds build dependencies but the module has no pom.xml".into()),
            (Some(text), false) => {
                let mut text = text.clone();
                for dep in &patch.build_dependencies {
                    text = edit_build_dependency(&text, dep).map_err(|e| format!("dependency {dep}: {e}"))?;
                }
                Some(text)
            }
        };
        Ok((source, manifest))
    }

    fn write(&mut self, source: &str, manifest: Option<&str>) -> std::io::Result<()> {
        self.copy.write(&self.source_rel, source)?;
        if let Some(m) = manifest {
            self.copy.write(&self.manifest_rel, m)?;
        }
        Ok(())
    }

    fn compile(&mut self) -> Result<Vec<CompilationDiagnostic>, RunnerError> {
        let result = self.timed(|runner, copy| runner.compile(copy))?;
        Ok(match result.kind {
            OutcomeKind::CompilationError if result.diagnostics.is_empty() => {
                vec![synthetic(&self.source_rel, "compilation failed without diagnostics")]
            }
            OutcomeKind::CompilationError => result.diagnostics,
            _ => Vec::new(),
        })
    }

    fn install(&mut self, patch: &PatchCandidate) -> Result<Result<(), String>, OrchestratorError> {
        match self.materialize(patch) {
            Ok((source, manifest)) => {
                self.write(&source, manifest.as_deref())?;
                Ok(Ok(()))
            }
            Err(e) => Ok(Err(e)),
        }
    }

    fn attempt(&mut self, response: &str, stitch_log: &mut Vec<crate::model::StitchAction>) -> Result<Attempt, OrchestratorError> {
        let candidate = match extract_patch(response, &self.model) {
            Ok(p) => p,
            Err(e) => {
                return Ok(Attempt::Uncompilable(vec![synthetic(
                    &self.source_rel,
                    &format!("no usable patch in the response: {e}"),
                )]))
            }
        };
        let mut patch = self.cumulative.clone();
        patch.merge(&candidate);
        if let Err(e) = self.install(&patch)? {
            return Ok(Attempt::Uncompilable(vec![synthetic(&self.source_rel, &e)]));
        }
        let mut diagnostics = self.compile()?;
        if !diagnostics.is_empty() {
            let (stitched, actions) = self.stitch(&patch, &diagnostics)?;
            *stitch_log = actions;
            patch = stitched;
            if let Err(e) = self.install(&patch)? {
                return Ok(Attempt::Uncompilable(vec![synthetic(&self.source_rel, &e)]));
            }
            diagnostics = self.compile()?;
        }
        self.cumulative = patch.clone();
        if !diagnostics.is_empty() {
            return Ok(Attempt::Uncompilable(diagnostics));
        }
        let (source, manifest) = self.materialize(&patch).map_err(OrchestratorError::Setup)?;
        let model = parse_test_class(&source).map_err(|e| OrchestratorError::Setup(format!("patched class: {e}")))?;
        let (case, rounds, seed) = (self.case, self.config.nondex_rounds, self.config.seed);
        let outcome = self.timed(|runner, copy| validate(case, copy, runner, rounds, seed))?;
        match outcome.failure() {
            None => Ok(Attempt::Passed(ValidatedPatch {
                patch,
                source,
                manifest,
                model,
            })),
            Some(failure) => Ok(Attempt::Failed(failure.clone(), Some(model))),
        }
    }

    fn stitch(
        &mut self,
        patch: &PatchCandidate,
        diagnostics: &[CompilationDiagnostic],
    ) -> Result<(PatchCandidate, Vec<crate::model::StitchAction>), OrchestratorError> {
        let toolkit = self.env.toolkit;
        let manifest = self.original_manifest.clone();
        let ctx = StitchContext {
            index: &toolkit.index,
            coordinates: &toolkit.coordinates,
            manifest: manifest.as_deref(),
            probe_budget: self.config.probe_budget,
        };
        let model = self.model.clone();
        let mut probe = |candidate: &PatchCandidate| -> Result<Vec<CompilationDiagnostic>, String> {
            match self.install(candidate) {
                Ok(Ok(())) => {}
                Ok(Err(e)) => return Err(e),
                Err(e) => return Err(e.to_string()),
            }
            self.compile().map_err(|e| e.to_string())
        };
        match stitch(&model, patch, diagnostics, &ctx, &mut probe) {
            Ok(outcome) => Ok((outcome.patch, outcome.actions)),
            Err(e) => {
                log::info!("{}: stitching gave up: {e}", self.case.test);
                Ok((patch.clone(), Vec::new()))
            }
        }
    }

    fn failure_context(&self, result: &RunResult, patched: Option<&ClassModel>) -> Option<ContextBundle> {
        let model = patched.unwrap_or(&self.model);
        extract_context(self.case, result, model, &self.polluter_models, &self.env.toolkit.catalog).ok()
    }

    fn related_for(&self, source: Option<&str>) -> Option<RelatedCode> {
        let model = parse_test_class(source?).ok()?;
        extract_related_code(&model, self.case, &self.polluter_models).ok()
    }
}

fn read_class(copy: &WorkingCopy, rel: &Path) -> Result<(String, ClassModel), OrchestratorError> {
    let text = copy
        .read(rel)
        .map_err(|e| OrchestratorError::Setup(format!("cannot read {}: {e}", rel.display())))?;
    let model = parse_test_class(&text).map_err(|e| OrchestratorError::Setup(format!("{}: {e}", rel.display())))?;
    Ok((text, model))
}

/// Parses every test class of the module, skipping files that do not parse.
fn suite_models(copy: &WorkingCopy) -> Vec<ClassModel> {
    let root = copy.module_dir().join("src/test/java");
    WalkDir::new(root)
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.path().extension().and_then(|x| x.to_str()) == Some("java"))
        .filter_map(|e| std::fs::read_to_string(e.path()).ok())
        .filter_map(|text| parse_test_class(&text).ok())
        .collect()
}

fn finish(mut session: RepairSession, started: Instant, copy: WorkingCopy, config: &RepairConfig) -> RepairSession {
    session.llm_tokens_in = session.iterations.iter().map(|i| i.tokens_in).sum();
    session.llm_tokens_out = session.iterations.iter().map(|i| i.tokens_out).sum();
    if config.keep_workdirs {
        let path = copy.keep();
        log::info!("{}: working copy kept at {}", session.case.test, path.display());
    }
    session.wall_time_s = started.elapsed().as_secs_f64();
    session
}

fn new_copy(env: &SessionEnv<'_>, case: &FlakyTestCase, config: &RepairConfig) -> std::io::Result<WorkingCopy> {
    match (&config.workdir_root, config.keep_workdirs) {
        (Some(parent), true) => {
            std::fs::create_dir_all(parent)?;
            let name = format!("{}.{}", case.test.class_fqn, case.test.method);
            WorkingCopy::create_in(env.project, &case.test.module_path, parent, &name)
        }
        _ => WorkingCopy::create(env.project, &case.test.module_path),
    }
}

/// Repairs one flaky test in a scratch copy of the project.
///
/// Each iteration asks the model once, applies the answer on top of all
/// earlier edits, compiles (stitching the patch when it does not compile)
/// and validates. The session ends on a validated patch, after
/// `max_iterations` model calls, or once the same compilation error has come
/// back `identical_error_limit` times in a row.
///
/// Infrastructure problems (unreadable sources, a project that does not
/// compile before any change, runner failures) are returned as errors.
pub fn repair_one(
    case: &FlakyTestCase,
    env: &mut SessionEnv<'_>,
    config: &RepairConfig,
) -> Result<RepairSession, OrchestratorError> {
    config.validate()?;
    let started = Instant::now();
    let mut copy = new_copy(env, case, config)?;
    let source_rel = case.test.source_path();
    let (original_source, model) = read_class(&copy, &source_rel)?;
    let mut polluter_models = Vec::new();
    for p in &case.polluters {
        let rel = p.source_path();
        if rel == source_rel || polluter_models.iter().any(|m: &ClassModel| m.qualified_name() == p.class_fqn) {
            continue;
        }
        polluter_models.push(read_class(&copy, &rel)?.1);
    }
    let manifest_rel = copy.manifest_path();
    let original_manifest = copy.read(&manifest_rel).ok();

    let mut session = RepairSession::new(case.clone(), RepairStatus::ExhaustedIterations);
    if case.category == FlakinessCategory::Id {
        session.validation_seed = Some(config.seed);
    }

    let setup_started = Instant::now();
    let reproduced = reproduce(case, &mut *env.runner, &mut copy, config.nondex_rounds, config.seed);
    session.setup_runner_time_s = setup_started.elapsed().as_secs_f64();
    let failing = match reproduced {
        Ok(r) => r,
        Err(InspectError::NotReproduced(detail)) => {
            session.status = RepairStatus::NotReproduced;
            session.status_detail = Some(detail);
            return Ok(finish(session, started, copy, config));
        }
        Err(InspectError::Runner(e)) => return Err(e.into()),
        Err(e) => return Err(OrchestratorError::Setup(e.to_string())),
    };
    let context = extract_context(case, &failing, &model, &polluter_models, &env.toolkit.catalog)
        .map_err(|e| OrchestratorError::Setup(e.to_string()))?;
    let mut prompt: Prompt = match build_prompt(case, &context, &config.prompt) {
        Ok(p) => p,
        Err(e) => {
            session.status = RepairStatus::ProviderError;
            session.status_detail = Some(format!("prompt: {e}"));
            return Ok(finish(session, started, copy, config));
        }
    };

    let mut state = Session {
        env,
        config,
        case,
        copy,
        source_rel,
        original_source,
        manifest_rel,
        original_manifest,
        model,
        polluter_models,
        cumulative: PatchCandidate::default(),
        runner_time_s: 0.0,
    };
    let mut related = context.related_code.clone();
    let mut last_key: Option<String> = None;
    let mut streak = 0u32;

    for index in 1..=config.max_iterations {
        let prompt_text = prompt.render();
        let completion = match state.env.provider.complete(&prompt_text) {
            Ok(c) => c,
            Err(e) => {
                session.status = RepairStatus::ProviderError;
                session.status_detail = Some(e.to_string());
                break;
            }
        };
        state.runner_time_s = 0.0;
        let mut actions = Vec::new();
        let attempt = state.attempt(&completion.text, &mut actions)?;
        let mut record = IterationRecord {
            index,
            prompt_text,
            response_text: completion.text,
            stitch_actions: actions,
            outcome: OutcomeKind::TestFailure,
            diagnostic_key: None,
            tokens_in: completion.tokens_in,
            tokens_out: completion.tokens_out,
            runner_time_s: 0.0,
        };

        let latest_source = state.materialize(&state.cumulative).ok().map(|(s, _)| s);
        if let Some(r) = state.related_for(latest_source.as_deref()) {
            related = r;
        }
        let next = match attempt {
            Attempt::Passed(fixed) => {
                record.outcome = OutcomeKind::TestPass;
                record.runner_time_s = state.runner_time_s;
                session.iterations.push(record);
                conclude_fixed(&mut state, &mut session, fixed)?;
                break;
            }
            Attempt::Uncompilable(diags) => {
                let key = diagnostic_key(&diags);
                streak = if last_key.as_deref() == Some(key.as_str()) { streak + 1 } else { 1 };
                last_key = Some(key.clone());
                record.outcome = OutcomeKind::CompilationError;
                record.diagnostic_key = Some(key);
                record.runner_time_s = state.runner_time_s;
                if streak >= config.identical_error_limit {
                    session.status = RepairStatus::ExhaustedIdenticalErrors;
                    session.status_detail = Some(format!("same compilation error in {streak} consecutive iterations"));
                    session.iterations.push(record);
                    break;
                }
                augment_with_feedback(&prompt, &record, &related, Feedback::Compilation(&diags), &config.prompt)
            }
            Attempt::Failed(result, patched) => {
                last_key = None;
                streak = 0;
                record.outcome = OutcomeKind::TestFailure;
                record.runner_time_s = state.runner_time_s;
                match state.failure_context(&result, patched.as_ref()) {
                    Some(ctx) => augment_with_feedback(&prompt, &record, &related, Feedback::Failure(&ctx), &config.prompt),
                    None => {
                        let fallback = ContextBundle {
                            error_message: result.failure_message.clone().unwrap_or_default(),
                            failing_assertion: None,
                            suspects: Vec::new(),
                            shared_state: Vec::new(),
                            related_code: related.clone(),
                            degraded: true,
                        };
                        augment_with_feedback(&prompt, &record, &related, Feedback::Failure(&fallback), &config.prompt)
                    }
                }
            }
        };
        session.iterations.push(record);
        if index == config.max_iterations {
            session.status = RepairStatus::ExhaustedIterations;
            break;
        }
        match next {
            Ok(p) => prompt = p,
            Err(e) => {
                session.status = RepairStatus::ProviderError;
                session.status_detail = Some(format!("prompt: {e}"));
                break;
            }
        }
    }
    let Session { copy, .. } = state;
    Ok(finish(session, started, copy, config))
}

fn conclude_fixed(state: &mut Session<'_, '_>, session: &mut RepairSession, fixed: ValidatedPatch) -> Result<(), OrchestratorError> {
    session.status = RepairStatus::Fixed;
    let case = state.case;
    if case.category == FlakinessCategory::OdVictim && !case.co_victims.is_empty() {
        session.co_victims_fixed = state.timed(|runner, copy| covictim_sweep(case, copy, runner));
    }
    for (name, edit) in &fixed.patch.method_replacements {
        if edit.addition {
            continue;
        }
        if let (Some(before), Some(after)) = (state.model.method(name), fixed.model.method(name)) {
            session.suspicion_flags.extend(suspicious_patch_flags(before, after));
        }
    }
    if case.category == FlakinessCategory::OdVictim {
        let shared = shared_fields(&state.model, case, &state.polluter_models);
        session.overfit_warnings = overfit_guard(&suite_models(&state.copy), case, &shared);
    }
    let mut changes = vec![FileChange {
        path: state.source_rel.clone(),
        before: state.original_source.clone(),
        after: fixed.source.clone(),
    }];
    if let (Some(before), Some(after)) = (&state.original_manifest, &fixed.manifest) {
        changes.push(FileChange {
            path: state.manifest_rel.clone(),
            before: before.clone(),
            after: after.clone(),
        });
    }
    session.final_patch = Some(unified_diff(&changes));
    Ok(())
}
