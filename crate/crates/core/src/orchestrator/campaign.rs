use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{repair_one, OrchestratorError, RepairConfig, SessionEnv, Toolkit};
use crate::llm::{Provider, ProviderConfig};
use crate::model::{encode_report, FlakinessCategory, FlakyTestCase, RepairStatus, TestId};
use crate::runner::{Runner, RunnerError};
use crate::stitcher::CoordinateTable;

/// Builds a runner for a project directory. Called once per session.
pub type RunnerFactory<'a> = dyn Fn(&Path) -> Result<Box<dyn Runner>, RunnerError> + Sync + 'a;

pub const CAMPAIGN_REPORT_FILE: &str = "campaign.json";

#[derive(Debug, Clone)]
pub struct CampaignConfig {
    /// Checkout used for rows whose project column is empty or a remote URL,
    /// and the base for relative project paths.
    pub project_dir: PathBuf,
    pub input: PathBuf,
    pub provider: ProviderConfig,
    pub out_dir: PathBuf,
    /// Sessions that may run at the same time.
    pub jobs: usize,
    pub repair: RepairConfig,
    /// Package coordinates consulted before the built-in table.
    pub coordinates: CoordinateTable,
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<(), OrchestratorError> {
        self.repair.validate()?;
        if self.jobs == 0 {
            return Err(OrchestratorError::Config("jobs must be at least 1".into()));
        }
        Ok(())
    }
}

/// One data row of the input list.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct InputRow {
    #[serde(skip)]
    pub line: usize,
    pub project: String,
    #[serde(default)]
    pub sha: String,
    #[serde(default)]
    pub module: String,
    pub test: String,
    pub category: String,
    #[serde(default)]
    pub polluters: String,
}

impl InputRow {
    fn is_remote(&self) -> bool {
        let p = self.project.trim();
        ["http://", "https://", "git@", "ssh://", "git://"].iter().any(|s| p.starts_with(s))
    }

    /// Local checkout the row refers to.
    pub fn project_path(&self, base: &Path) -> PathBuf {
        let p = self.project.trim();
        if p.is_empty() || self.is_remote() {
            base.to_path_buf()
        } else {
            base.join(p)
        }
    }

    pub fn to_case(&self) -> Result<FlakyTestCase, String> {
        let module = self.module.trim().trim_matches('/');
        let module = if module == "." { "" } else { module };
        let test = TestId::parse(self.test.trim(), module).map_err(|e| e.to_string())?;
        let category: FlakinessCategory = self.category.parse().map_err(|e: crate::model::ModelError| e.to_string())?;
        let polluters = self
            .polluters
            .split(';')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|p| TestId::parse(p, module).map_err(|e| e.to_string()))
            .collect::<Result<Vec<_>, _>>()?;
        FlakyTestCase::new(test, category, polluters, Vec::new()).map_err(|e| e.to_string())
    }
}

/// Reads a headed CSV input list. Rows that cannot be read are returned as
/// errors in place so the campaign can report them and go on.
pub fn parse_input_list(text: &str) -> Vec<Result<InputRow, (usize, String)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                rows.push(Err((line, e.to_string())));
                continue;
            }
        };
        if line == 1 && record.get(0).is_some_and(|f| f.starts_with("project")) {
            continue;
        }
        if record.iter().all(str::is_empty) || record.get(0).is_some_and(|f| f.starts_with('#')) {
            continue;
        }
        if record.len() < 5 {
            rows.push(Err((line, format!("expected at least 5 columns, found {}", record.len()))));
            continue;
        }
        let field = |k: usize| record.get(k).unwrap_or("").to_string();
        rows.push(Ok(InputRow {
            line,
            project: field(0),
            sha: field(1),
            module: field(2),
            test: field(3),
            category: field(4),
            polluters: field(5),
        }));
    }
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RowStatus {
    Fixed,
    ExhaustedIterations,
    ExhaustedIdenticalErrors,
    NotReproduced,
    ProviderError,
    FixedByCovictimSweep,
    RowError,
}

impl From<RepairStatus> for RowStatus {
    fn from(s: RepairStatus) -> Self {
        match s {
            RepairStatus::Fixed => RowStatus::Fixed,
            RepairStatus::ExhaustedIterations => RowStatus::ExhaustedIterations,
            RepairStatus::ExhaustedIdenticalErrors => RowStatus::ExhaustedIdenticalErrors,
            RepairStatus::NotReproduced => RowStatus::NotReproduced,
            RepairStatus::ProviderError => RowStatus::ProviderError,
        }
    }
}

impl fmt::Display for RowStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RowStatus::Fixed => "FIXED",
            RowStatus::ExhaustedIterations => "EXHAUSTED_ITERATIONS",
            RowStatus::ExhaustedIdenticalErrors => "EXHAUSTED_IDENTICAL_ERRORS",
            RowStatus::NotReproduced => "NOT_REPRODUCED",
            RowStatus::ProviderError => "PROVIDER_ERROR",
            RowStatus::FixedByCovictimSweep => "FIXED_BY_COVICTIM_SWEEP",
            RowStatus::RowError => "ROW_ERROR",
        })
    }
}

impl RowStatus {
    pub fn is_fixed(self) -> bool {
        matches!(self, RowStatus::Fixed | RowStatus::FixedByCovictimSweep)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowOutcome {
    pub line: usize,
    pub test: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<FlakinessCategory>,
    pub status: RowStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patch: Option<PathBuf>,
    pub iterations: usize,
    pub wall_time_s: f64,
    pub tokens_in: u64,
    pub tokens_out: u64,
    pub co_victims_fixed: Vec<String>,
    pub suspicion_flags: Vec<String>,
    pub overfit_warnings: usize,
}

impl RowOutcome {
    fn error(line: usize, test: &str, category: Option<FlakinessCategory>, detail: String) -> Self {
        RowOutcome {
            line,
            test: test.to_string(),
            category,
            status: RowStatus::RowError,
            detail: Some(detail),
            report: None,
            patch: None,
            iterations: 0,
            wall_time_s: 0.0,
            tokens_in: 0,
            tokens_out: 0,
            co_victims_fixed: Vec::new(),
            suspicion_flags: Vec::new(),
            overfit_warnings: 0,
        }
    }

    /// True when an LLM session actually ran for this row.
    pub fn has_session(&self) -> bool {
        !matches!(self.status, RowStatus::RowError | RowStatus::FixedByCovictimSweep)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCounts {
    pub fixed: usize,
    pub failed: usize,
    pub fixed_by_covictim_sweep: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub rows: Vec<RowOutcome>,
    pub sessions: usize,
    pub row_errors: usize,
    pub per_category: BTreeMap<FlakinessCategory, CategoryCounts>,
    /// Suspicion flag counts by kind over fixed sessions.
    pub suspicion_flags: BTreeMap<String, usize>,
    pub overfit_warnings: usize,
    pub mean_wall_time_s: f64,
    pub tokens_in: u64,
    pub tokens_out: u64,
}

impl CampaignReport {
    pub fn from_rows(mut rows: Vec<RowOutcome>) -> Self {
        rows.sort_by_key(|r| r.line);
        let mut per_category: BTreeMap<FlakinessCategory, CategoryCounts> = BTreeMap::new();
        let mut suspicion_flags: BTreeMap<String, usize> = BTreeMap::new();
        for r in &rows {
            let Some(category) = r.category.filter(|_| r.status != RowStatus::RowError) else {
                continue;
            };
            let counts = per_category.entry(category).or_default();
            match r.status {
                RowStatus::Fixed => counts.fixed += 1,
                RowStatus::FixedByCovictimSweep => counts.fixed_by_covictim_sweep += 1,
                _ => counts.failed += 1,
            }
            for f in &r.suspicion_flags {
                *suspicion_flags.entry(f.clone()).or_default() += 1;
            }
        }
        let sessions: Vec<&RowOutcome> = rows.iter().filter(|r| r.has_session()).collect();
        let mean_wall_time_s = if sessions.is_empty() {
            0.0
        } else {
            sessions.iter().map(|r| r.wall_time_s).sum::<f64>() / sessions.len() as f64
        };
        CampaignReport {
            sessions: sessions.len(),
            row_errors: rows.iter().filter(|r| r.status == RowStatus::RowError).count(),
            overfit_warnings: rows.iter().map(|r| r.overfit_warnings).sum(),
            tokens_in: rows.iter().map(|r| r.tokens_in).sum(),
            tokens_out: rows.iter().map(|r| r.tokens_out).sum(),
            per_category,
            suspicion_flags,
            mean_wall_time_s,
            rows,
        }
    }

    /// 0 when every row is fixed, 2 when any row hit an input or
    /// infrastructure error, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.row_errors > 0 {
            2
        } else if self.rows.iter().all(|r| r.status.is_fixed()) {
            0
        } else {
            1
        }
    }

    /// Plain-text summary table.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<10} {:>6} {:>8} {:>7}", "category", "fixed", "covictim", "failed");
        for (category, c) in &self.per_category {
            let _ = writeln!(
                out,
                "{:<10} {:>6} {:>8} {:>7}",
                category.as_str(),
                c.fixed,
                c.fixed_by_covictim_sweep,
                c.failed
            );
        }
        let _ = writeln!(
            out,
            "sessions {}  row errors {}  mean wall time {:.2}s  tokens in/out {}/{}",
            self.sessions, self.row_errors, self.mean_wall_time_s, self.tokens_in, self.tokens_out
        );
        if !self.suspicion_flags.is_empty() || self.overfit_warnings > 0 {
            let flags: Vec<String> = self.suspicion_flags.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let _ = writeln!(out, "suspicion flags {}  overfit warnings {}", flags.join(" "), self.overfit_warnings);
        }
        out
    }
}

struct Planned {
    row: InputRow,
    project: PathBuf,
    case: FlakyTestCase,
}

/// Victims of a shared polluter in the same module form one group; groups
/// run in parallel and rows inside a group run in input order.
fn group_rows(planned: &[Planned]) -> Vec<Vec<usize>> {
    let n = planned.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (&planned[i], &planned[j]);
            let linked = a.project == b.project
                && a.case.test.module_path == b.case.test.module_path
                && a.case.polluters.iter().any(|p| b.case.polluters.contains(p));
            if linked {
                let (ra, rb) = (find(&mut parent, i), find(&mut parent, j));
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    groups.into_values().collect()
}

/// Victims in the same group that share a polluter with `i`.
fn co_victims(planned: &[Planned], group: &[usize], i: usize) -> Vec<TestId> {
    let me = &planned[i].case;
    if me.category != FlakinessCategory::OdVictim {
        return Vec::new();
    }
    let mut out: Vec<TestId> = Vec::new();
    for &j in group {
        let other = &planned[j].case;
        if j != i
            && other.category == FlakinessCategory::OdVictim
            && other.test != me.test
            && !me.polluters.contains(&other.test)
            && other.polluters.iter().any(|p| me.polluters.contains(p))
            && !out.contains(&other.test)
        {
            out.push(other.test.clone());
        }
    }
    out
}

fn write_artifacts(
    out_dir: &Path,
    session: &crate::model::RepairSession,
) -> std::io::Result<(PathBuf, Option<PathBuf>)> {
    let report = out_dir.join(session.report_file_name());
    std::fs::write(&report, encode_report(session))?;
    let patch = match &session.final_patch {
        Some(diff) => {
            let path = out_dir.join(format!("{}.{}.patch", session.case.test.class_fqn, session.case.test.method));
            std::fs::write(&path, diff)?;
            Some(path)
        }
        None => None,
    };
    Ok((report, patch))
}

fn run_row(
    planned: &Planned,
    case: FlakyTestCase,
    config: &CampaignConfig,
    provider: &dyn Provider,
    runners: &RunnerFactory<'_>,
    toolkit: &Toolkit,
) -> RowOutcome {
    let line = planned.row.line;
    let test = case.test.to_string();
    let category = Some(case.category);
    let mut runner = match runners(&planned.project) {
        Ok(r) => r,
        Err(e) => return RowOutcome::error(line, &test, category, e.to_string()),
    };
    let mut env = SessionEnv {
        project: &planned.project,
        runner: runner.as_mut(),
        provider,
        toolkit,
    };
    let session = match repair_one(&case, &mut env, &config.repair) {
        Ok(s) => s,
        Err(e) => return RowOutcome::error(line, &test, category, e.to_string()),
    };
    let (report, patch) = match write_artifacts(&config.out_dir, &session) {
        Ok(paths) => paths,
        Err(e) => return RowOutcome::error(line, &test, category, format!("cannot write report: {e}")),
    };
    log::info!("{test}: {} after {} iteration(s)", session.status, session.iterations.len());
    RowOutcome {
        line,
        test,
        category,
        status: session.status.into(),
        detail: session.status_detail.clone(),
        report: Some(report),
        patch,
        iterations: session.iterations.len(),
        wall_time_s: session.wall_time_s,
        tokens_in: session.llm_tokens_in,
        tokens_out: session.llm_tokens_out,
        co_victims_fixed: session.co_victims_fixed.iter().map(ToString::to_string).collect(),
        suspicion_flags: session
            .suspicion_flags
            .iter()
            .map(|f| serde_json::to_value(f.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default())
            .collect(),
        overfit_warnings: session.overfit_warnings.len(),
    }
}

fn run_group(
    planned: &[Planned],
    group: &[usize],
    config: &CampaignConfig,
    provider: &dyn Provider,
    runners: &RunnerFactory<'_>,
) -> Vec<RowOutcome> {
    let mut toolkit = Toolkit::for_project(&planned[group[0]].project);
    toolkit.coordinates.extend(config.coordinates.clone());
    let mut swept: BTreeMap<TestId, String> = BTreeMap::new();
    let mut out = Vec::new();
    for &i in group {
        let p = &planned[i];
        if let Some(by) = swept.get(&p.case.test) {
            let mut row = RowOutcome::error(p.row.line, &p.case.test.to_string(), Some(p.case.category), String::new());
            row.status = RowStatus::FixedByCovictimSweep;
            row.detail = Some(format!("fixed by the patch for {by}"));
            out.push(row);
            continue;
        }
        let mut case = p.case.clone();
        case.co_victims = co_victims(planned, group, i);
        let outcome = run_row(p, case, config, provider, runners, &toolkit);
        if outcome.status == RowStatus::Fixed {
            for w in &outcome.co_victims_fixed {
                if let Ok(id) = TestId::parse(w, &p.case.test.module_path) {
                    swept.entry(id).or_insert_with(|| outcome.test.clone());
                }
            }
        }
        out.push(outcome);
    }
    out
}

/// Runs every row of the input list with `provider` and a runner from
/// `runners`, writes one report per session plus `campaign.json` into the
/// output directory, and returns the aggregate.
pub fn run_campaign_with(
    config: &CampaignConfig,
    provider: &dyn Provider,
    runners: &RunnerFactory<'_>,
) -> Result<CampaignReport, OrchestratorError> {
    config.validate()?;
    let text = std::fs::read_to_string(&config.input)
        .map_err(|e| OrchestratorError::Config(format!("cannot read input list {}: {e}", config.input.display())))?;
    std::fs::create_dir_all(&config.out_dir)?;

    let mut outcomes = Vec::new();
    let mut planned = Vec::new();
    let mut seen = BTreeSet::new();
    for row in parse_input_list(&text) {
        match row {
            Err((line, reason)) => outcomes.push(RowOutcome::error(line, "", None, reason)),
            Ok(row) => match row.to_case() {
                Err(reason) => outcomes.push(RowOutcome::error(row.line, row.test.trim(), None, reason)),
                Ok(case) => {
                    let project = row.project_path(&config.project_dir);
                    if !seen.insert((project.clone(), case.test.clone())) {
                        let reason = "duplicate row for this test".to_string();
                        outcomes.push(RowOutcome::error(row.line, &case.test.to_string(), Some(case.category), reason));
                        continue;
                    }
                    if row.is_remote() {
                        log::info!("line {}: using {} for {}", row.line, project.display(), row.project.trim());
                    }
                    planned.push(Planned { row, project, case });
                }
            },
        }
    }

    let groups = group_rows(&planned);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| OrchestratorError::Config(format!("thread pool: {e}")))?;
    let results: Vec<Vec<RowOutcome>> = pool.install(|| {
        groups
            .par_iter()
            .map(|g| run_group(&planned, g, config, provider, runners))
            .collect()
    });
    outcomes.extend(results.into_iter().flatten());
    let report = CampaignReport::from_rows(outcomes);
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(config.out_dir.join(CAMPAIGN_REPORT_FILE), json)?;
    Ok(report)
}

/// [`run_campaign_with`] using the provider described by the configuration.
pub fn run_campaign(config: &CampaignConfig, runners: &RunnerFactory<'_>) -> Result<CampaignReport, OrchestratorError> {
    let provider = config
        .provider
        .build()
        .map_err(|e| OrchestratorError::Config(e.to_string()))?;
    run_campaign_with(config, provider.as_ref(), runners)
}
