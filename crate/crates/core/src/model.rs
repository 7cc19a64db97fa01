//! Shared domain types: test identities, run outcomes, compiler diagnostics,
//! repair sessions and their on-disk report format.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Component, Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Version stamped into every session report.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Upper bound on feedback iterations in a single session.
pub const MAX_ITERATIONS: u32 = 5;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("invalid test id `{0}`: {1}")]
    InvalidTestId(String, &'static str),
    #[error("unknown flakiness category `{0}`")]
    UnknownCategory(String),
    #[error("invalid flaky test case: {0}")]
    InvalidCase(String),
    #[error("malformed report at `{field}`: {reason}")]
    Report { field: String, reason: String },
}

/// Identity of one test method.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TestId {
    pub class_fqn: String,
    pub method: String,
    /// Maven module holding the test, relative to the project root. Empty for
    /// single-module projects.
    #[serde(default)]
    pub module_path: String,
}

impl TestId {
    pub fn new(
        class_fqn: impl Into<String>,
        method: impl Into<String>,
        module_path: impl Into<String>,
    ) -> Result<Self, ModelError> {
        let id = TestId {
            class_fqn: class_fqn.into(),
            method: method.into(),
            module_path: module_path.into(),
        };
        id.validate()?;
        Ok(id)
    }

    /// Parses `com.example.FooTest#testBar` (the usual IDoFT spelling).
    pub fn parse(text: &str, module_path: &str) -> Result<Self, ModelError> {
        let text = text.trim();
        let (class, method) = text
            .split_once('#')
            .ok_or_else(|| ModelError::InvalidTestId(text.to_string(), "expected Class#method"))?;
        TestId::new(class, method, module_path)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let shown = self.to_string();
        if self.class_fqn.is_empty()
            || !self.class_fqn.split('.').all(is_java_identifier)
        {
            return Err(ModelError::InvalidTestId(shown, "class name must be dot-separated identifiers"));
        }
        if !is_java_identifier(&self.method) {
            return Err(ModelError::InvalidTestId(shown, "method name must be an identifier"));
        }
        let module = Path::new(&self.module_path);
        if module.is_absolute()
            || module
                .components()
                .any(|c| matches!(c, Component::ParentDir | Component::Prefix(_)))
        {
            return Err(ModelError::InvalidTestId(shown, "module path must stay inside the project"));
        }
        Ok(())
    }

    pub fn simple_class_name(&self) -> &str {
        self.class_fqn.rsplit('.').next().unwrap_or(&self.class_fqn)
    }

    pub fn package(&self) -> &str {
        self.class_fqn.rsplit_once('.').map(|(p, _)| p).unwrap_or("")
    }

    /// Test source file relative to the project root, assuming the standard
    /// Maven layout.
    pub fn source_path(&self) -> PathBuf {
        let mut path = PathBuf::from(&self.module_path);
        path.push("src/test/java");
        let outer = self.class_fqn.split('$').next().unwrap_or(&self.class_fqn);
        path.push(format!("{}.java", outer.replace('.', "/")));
        path
    }
}

impl fmt::Display for TestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.class_fqn, self.method)
    }
}

pub(crate) fn is_java_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_alphabetic() || c == '_' || c == '$' => {}
        _ => return false,
    }
    chars.all(|c| c.is_alphanumeric() || c == '_' || c == '$')
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FlakinessCategory {
    Id,
    OdVictim,
    OdBrittle,
}

impl FlakinessCategory {
    pub const ALL: [FlakinessCategory; 3] = [
        FlakinessCategory::OdVictim,
        FlakinessCategory::OdBrittle,
        FlakinessCategory::Id,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FlakinessCategory::Id => "ID",
            FlakinessCategory::OdVictim => "OD_VICTIM",
            FlakinessCategory::OdBrittle => "OD_BRITTLE",
        }
    }
}

impl fmt::Display for FlakinessCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FlakinessCategory {
    type Err = ModelError;

    /// Accepts the canonical names plus the IDoFT spellings (`OD-Vic`, `OD-Brit`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .trim()
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_uppercase();
        match norm.as_str() {
            "ID" => Ok(FlakinessCategory::Id),
            "ODVICTIM" | "ODVIC" | "VICTIM" => Ok(FlakinessCategory::OdVictim),
            "ODBRITTLE" | "ODBRIT" | "BRITTLE" => Ok(FlakinessCategory::OdBrittle),
            _ => Err(ModelError::UnknownCategory(s.to_string())),
        }
    }
}

/// The repair target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlakyTestCase {
    pub test: TestId,
    pub category: FlakinessCategory,
    #[serde(default)]
    pub polluters: Vec<TestId>,
    #[serde(default)]
    pub co_victims: Vec<TestId>,
}

impl FlakyTestCase {
    pub fn new(
        test: TestId,
        category: FlakinessCategory,
        polluters: Vec<TestId>,
        co_victims: Vec<TestId>,
    ) -> Result<Self, ModelError> {
        let case = FlakyTestCase {
            test,
            category,
            polluters,
            co_victims,
        };
        case.validate()?;
        Ok(case)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.test.validate()?;
        for other in self.polluters.iter().chain(&self.co_victims) {
            other.validate()?;
        }
        match self.category {
            FlakinessCategory::OdVictim if self.polluters.is_empty() => {
                return Err(ModelError::InvalidCase(format!(
                    "{} is OD_VICTIM but has no polluters",
                    self.test
                )))
            }
            FlakinessCategory::Id | FlakinessCategory::OdBrittle if !self.polluters.is_empty() => {
                return Err(ModelError::InvalidCase(format!(
                    "{} is {} and must not list polluters",
                    self.test, self.category
                )))
            }
            _ => {}
        }
        if self.polluters.contains(&self.test) {
            return Err(ModelError::InvalidCase(format!("{} lists itself as polluter", self.test)));
        }
        if self.co_victims.contains(&self.test) {
            return Err(ModelError::InvalidCase(format!("{} lists itself as co-victim", self.test)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OutcomeKind {
    TestPass,
    TestFailure,
    CompilationError,
}

impl fmt::Display for OutcomeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutcomeKind::TestPass => "TEST_PASS",
            OutcomeKind::TestFailure => "TEST_FAILURE",
            OutcomeKind::CompilationError => "COMPILATION_ERROR",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DiagnosticKind {
    MissingSymbol,
    PackageNotFound,
    AmbiguousReference,
    Other,
}

impl DiagnosticKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagnosticKind::MissingSymbol => "MISSING_SYMBOL",
            DiagnosticKind::PackageNotFound => "PACKAGE_NOT_FOUND",
            DiagnosticKind::AmbiguousReference => "AMBIGUOUS_REFERENCE",
            DiagnosticKind::Other => "OTHER",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CompilationDiagnostic {
    /// Path relative to the working-copy root.
    pub file: PathBuf,
    pub line: u32,
    pub kind: DiagnosticKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbol: Option<String>,
    pub raw_message: String,
}

impl CompilationDiagnostic {
    pub fn new(
        file: impl Into<PathBuf>,
        line: u32,
        kind: DiagnosticKind,
        symbol: Option<String>,
        raw_message: impl Into<String>,
    ) -> Self {
        CompilationDiagnostic {
            file: file.into(),
            line: line.max(1),
            kind,
            symbol,
            raw_message: raw_message.into(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.line == 0 {
            return Err("line must be positive".into());
        }
        if self.raw_message.is_empty() {
            return Err("raw_message must not be empty".into());
        }
        if self.kind == DiagnosticKind::MissingSymbol && self.symbol.is_none() {
            return Err("MISSING_SYMBOL requires a symbol".into());
        }
        Ok(())
    }

    /// One-line rendering used in feedback prompts.
    pub fn one_line(&self) -> String {
        let detail = match &self.symbol {
            Some(sym) => format!("symbol {sym}"),
            None => first_line(&self.raw_message).to_string(),
        };
        format!(
            "{}:{} {} {}",
            self.file.display(),
            self.line,
            self.kind.as_str(),
            detail
        )
    }
}

fn first_line(s: &str) -> &str {
    s.lines().next().unwrap_or("").trim()
}

/// One stack frame, innermost first in [`RunResult::stack_frames`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StackFrame {
    pub class_fqn: String,
    pub method: String,
    #[serde(default)]
    pub file: String,
    #[serde(default)]
    pub line: u32,
}

impl StackFrame {
    pub fn new(class_fqn: &str, method: &str, file: &str, line: u32) -> Self {
        StackFrame {
            class_fqn: class_fqn.into(),
            method: method.into(),
            file: file.into(),
            line,
        }
    }

    /// Parses a `at com.x.Foo.bar(Foo.java:12)` line as printed by the JVM.
    pub fn parse_jvm_line(line: &str) -> Option<StackFrame> {
        let rest = line.trim().strip_prefix("at ")?;
        let (qualified, location) = rest.split_once('(')?;
        let location = location.strip_suffix(')').unwrap_or(location);
        // module prefixes such as `java.base/`
        let qualified = qualified.rsplit('/').next().unwrap_or(qualified);
        let (class, method) = qualified.rsplit_once('.')?;
        let (file, line_no) = match location.split_once(':') {
            Some((f, l)) => (f, l.trim().parse().unwrap_or(0)),
            None => (location, 0),
        };
        Some(StackFrame::new(class, method, file, line_no))
    }
}

/// Classified outcome of a build or a test execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub kind: OutcomeKind,
    #[serde(default)]
    pub diagnostics: Vec<CompilationDiagnostic>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_message: Option<String>,
    #[serde(default)]
    pub stack_frames: Vec<StackFrame>,
    #[serde(default)]
    pub duration_s: f64,
}

impl RunResult {
    pub fn pass() -> Self {
        RunResult {
            kind: OutcomeKind::TestPass,
            diagnostics: Vec::new(),
            failure_message: None,
            stack_frames: Vec::new(),
            duration_s: 0.0,
        }
    }

    pub fn failure(message: impl Into<String>, frames: Vec<StackFrame>) -> Self {
        RunResult {
            kind: OutcomeKind::TestFailure,
            failure_message: Some(message.into()),
            stack_frames: frames,
            ..RunResult::pass()
        }
    }

    pub fn compilation_error(diagnostics: Vec<CompilationDiagnostic>) -> Self {
        let mut result = RunResult {
            diagnostics,
            ..RunResult::pass()
        };
        result.kind = classify_outcome(&result);
        result
    }

    pub fn with_duration(mut self, duration_s: f64) -> Self {
        self.duration_s = duration_s.max(0.0);
        self
    }

    pub fn passed(&self) -> bool {
        self.kind == OutcomeKind::TestPass
    }

    pub fn validate(&self) -> Result<(), String> {
        if (self.kind == OutcomeKind::CompilationError) != !self.diagnostics.is_empty() {
            return Err("COMPILATION_ERROR iff diagnostics are present".into());
        }
        if self.kind == OutcomeKind::TestFailure && self.failure_message.is_none() {
            return Err("TEST_FAILURE requires a failure message".into());
        }
        if !(self.duration_s >= 0.0) {
            return Err("duration must be nonnegative".into());
        }
        Ok(())
    }
}

/// Outcome class of a raw run: diagnostics dominate, then a failure message.
pub fn classify_outcome(raw: &RunResult) -> OutcomeKind {
    if !raw.diagnostics.is_empty() {
        OutcomeKind::CompilationError
    } else if raw.failure_message.is_some() {
        OutcomeKind::TestFailure
    } else {
        OutcomeKind::TestPass
    }
}

/// Normalized identity of a set of compiler diagnostics. Line numbers and
/// working-copy roots do not participate, so the same error reported at a
/// shifted line or from a different scratch directory yields the same key.
pub fn diagnostic_key(diagnostics: &[CompilationDiagnostic]) -> String {
    let entries: BTreeSet<String> = diagnostics
        .iter()
        .map(|d| {
            let what = match &d.symbol {
                Some(sym) => sym.clone(),
                None => first_message_token(&d.raw_message),
            };
            format!("{}|{}|{}", normalize_diag_path(&d.file), d.kind.as_str(), what)
        })
        .collect();
    entries.into_iter().collect::<Vec<_>>().join(";")
}

fn first_message_token(message: &str) -> String {
    first_line(message)
        .split_whitespace()
        .next()
        .unwrap_or("")
        .to_string()
}

/// Strips anything above the innermost `src` directory so keys are stable
/// across working copies; falls back to the bare file name.
fn normalize_diag_path(path: &Path) -> String {
    let parts: Vec<String> = path
        .components()
        .filter_map(|c| match c {
            Component::Normal(s) => Some(s.to_string_lossy().into_owned()),
            _ => None,
        })
        .collect();
    if let Some(pos) = parts.iter().rposition(|p| p == "src") {
        parts[pos..].join("/")
    } else if path.is_absolute() {
        parts.last().cloned().unwrap_or_default()
    } else {
        parts.join("/")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RepairStatus {
    Fixed,
    ExhaustedIterations,
    ExhaustedIdenticalErrors,
    NotReproduced,
    ProviderError,
}

impl fmt::Display for RepairStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RepairStatus::Fixed => "FIXED",
            RepairStatus::ExhaustedIterations => "EXHAUSTED_ITERATIONS",
            RepairStatus::ExhaustedIdenticalErrors => "EXHAUSTED_IDENTICAL_ERRORS",
            RepairStatus::NotReproduced => "NOT_REPRODUCED",
            RepairStatus::ProviderError => "PROVIDER_ERROR",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StitchActionKind {
    RevertDeclaration,
    AddImport,
    AddBuildDep,
    ExcludeImport,
}

/// One offline edit performed by the stitcher.
///
/// `detail` is enough to replay the edit: a method name for declaration
/// reverts, `[static ]qualified.Name` for imports, `group:artifact:version`
/// for dependencies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StitchAction {
    pub kind: StitchActionKind,
    pub detail: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolved_diagnostic: Option<CompilationDiagnostic>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SuspicionKind {
    AssertionDeleted,
    TryCatchWrapped,
    TriviallyTrueAssertion,
}

/// Warning attached to a patch that may silence a failure instead of fixing it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuspicionFlag {
    pub kind: SuspicionKind,
    pub evidence: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub index: u32,
    pub prompt_text: String,
    pub response_text: String,
    #[serde(default)]
    pub stitch_actions: Vec<StitchAction>,
    pub outcome: OutcomeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic_key: Option<String>,
    #[serde(default)]
    pub tokens_in: u64,
    #[serde(default)]
    pub tokens_out: u64,
    /// Time spent in compile/test subprocesses during this iteration.
    #[serde(default)]
    pub runner_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairSession {
    pub case: FlakyTestCase,
    pub iterations: Vec<IterationRecord>,
    pub status: RepairStatus,
    /// Human-readable cause for non-FIXED terminations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status_detail: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_patch: Option<String>,
    pub wall_time_s: f64,
    pub llm_tokens_in: u64,
    pub llm_tokens_out: u64,
    /// Time spent reproducing the failure before the first prompt.
    #[serde(default)]
    pub setup_runner_time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_seed: Option<u64>,
    #[serde(default)]
    pub co_victims_fixed: Vec<TestId>,
    #[serde(default)]
    pub suspicion_flags: Vec<SuspicionFlag>,
    #[serde(default)]
    pub overfit_warnings: Vec<String>,
}

impl RepairSession {
    pub fn new(case: FlakyTestCase, status: RepairStatus) -> Self {
        RepairSession {
            case,
            iterations: Vec::new(),
            status,
            status_detail: None,
            final_patch: None,
            wall_time_s: 0.0,
            llm_tokens_in: 0,
            llm_tokens_out: 0,
            setup_runner_time_s: 0.0,
            validation_seed: None,
            co_victims_fixed: Vec::new(),
            suspicion_flags: Vec::new(),
            overfit_warnings: Vec::new(),
        }
    }

    /// Report file name, `<class_fqn>.<method>.session.json`.
    pub fn report_file_name(&self) -> String {
        format!("{}.{}.session.json", self.case.test.class_fqn, self.case.test.method)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let err = |field: String, reason: &str| ModelError::Report {
            field,
            reason: reason.to_string(),
        };
        self.case
            .validate()
            .map_err(|e| err("case".into(), &e.to_string()))?;
        if self.iterations.len() > MAX_ITERATIONS as usize {
            return Err(err("iterations".into(), "more than 5 iterations"));
        }
        for (pos, it) in self.iterations.iter().enumerate() {
            if it.index as usize != pos + 1 {
                return Err(err(format!("iterations[{pos}].index"), "indices must be 1..k contiguous"));
            }
            if it.outcome == OutcomeKind::CompilationError && it.diagnostic_key.is_none() {
                return Err(err(
                    format!("iterations[{pos}].diagnostic_key"),
                    "required when outcome is COMPILATION_ERROR",
                ));
            }
            if !(it.runner_time_s >= 0.0) {
                return Err(err(format!("iterations[{pos}].runner_time_s"), "must be nonnegative"));
            }
        }
        if self.status == RepairStatus::Fixed {
            if self.final_patch.is_none() {
                return Err(err("final_patch".into(), "FIXED sessions carry a final patch"));
            }
            if self.iterations.last().map(|i| i.outcome) != Some(OutcomeKind::TestPass) {
                return Err(err("iterations".into(), "FIXED sessions end with TEST_PASS"));
            }
        }
        if !(self.wall_time_s >= 0.0) {
            return Err(err("wall_time_s".into(), "must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct ReportOut<'a> {
    schema_version: u32,
    #[serde(flatten)]
    session: &'a RepairSession,
}

#[derive(Deserialize)]
struct ReportIn {
    schema_version: Option<u32>,
    #[serde(flatten)]
    session: RepairSession,
}

/// Renders a session as a versioned, pretty-printed JSON document.
pub fn encode_report(session: &RepairSession) -> String {
    serde_json::to_string_pretty(&ReportOut {
        schema_version: REPORT_SCHEMA_VERSION,
        session,
    })
    .expect("session serialization is infallible")
}

pub fn decode_report(document: &str) -> Result<RepairSession, ModelError> {
    let value: serde_json::Value = serde_json::from_str(document).map_err(|e| ModelError::Report {
        field: "<document>".into(),
        reason: e.to_string(),
    })?;
    match value.get("schema_version").and_then(|v| v.as_u64()) {
        Some(v) if v == REPORT_SCHEMA_VERSION as u64 => {}
        Some(v) => {
            return Err(ModelError::Report {
                field: "schema_version".into(),
                reason: format!("unsupported version {v}"),
            })
        }
        None => {
            return Err(ModelError::Report {
                field: "schema_version".into(),
                reason: "missing".into(),
            })
        }
    }
    let parsed: ReportIn = serde_json::from_value(value).map_err(|e| ModelError::Report {
        field: field_from_serde_message(&e.to_string()),
        reason: e.to_string(),
    })?;
    debug_assert!(parsed.schema_version.is_some());
    parsed.session.validate()?;
    Ok(parsed.session)
}

/// serde_json messages name the field in backticks (`missing field `status``).
fn field_from_serde_message(message: &str) -> String {
    let mut parts = message.split('`');
    parts.next();
    parts
        .next()
        .map(str::to_string)
        .unwrap_or_else(|| "<session>".to_string())
}
