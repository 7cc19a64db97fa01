//! Maven backend: `mvn` subprocesses, a generated ordered-run driver, and
//! the NonDex plugin for shaken runs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitStatus, Stdio};
use std::time::{Duration, Instant, SystemTime};

use base64::Engine;
use walkdir::WalkDir;

use super::diagnostics::parse_compiler_output;
use super::surefire::parse_report;
use super::{check_sequence, BackendKind, OrderedResults, Runner, RunnerBackend, RunnerError, WorkingCopy};
use crate::model::{RunResult, StackFrame, TestId};

const DRIVER_JUNIT4: &str = include_str!("../../templates/driver/OrderedRunDriverJUnit4.java");
const DRIVER_JUNIT5: &str = include_str!("../../templates/driver/OrderedRunDriverJUnit5.java");
const DRIVER_CLASS: &str = "flakemend_driver.OrderedRunDriver";
const DRIVER_PATH: &str = "src/test/java/flakemend_driver/OrderedRunDriver.java";

#[derive(Debug, Clone)]
pub struct MavenConfig {
    pub mvn: PathBuf,
    pub compile_timeout: Duration,
    pub test_timeout: Duration,
    pub shaker_timeout: Duration,
    pub nondex_version: String,
    pub offline: bool,
    pub extra_args: Vec<String>,
}

impl Default for MavenConfig {
    fn default() -> Self {
        MavenConfig {
            mvn: std::env::var_os("FLAKEMEND_MVN")
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("mvn")),
            compile_timeout: Duration::from_secs(600),
            test_timeout: Duration::from_secs(300),
            shaker_timeout: Duration::from_secs(900),
            nondex_version: "2.1.7".to_string(),
            offline: false,
            extra_args: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct MavenRunner {
    pub config: MavenConfig,
}

struct Finished {
    status: ExitStatus,
    output: String,
    elapsed: Duration,
}

impl MavenRunner {
    pub fn new(config: MavenConfig) -> Self {
        MavenRunner { config }
    }

    /// Whether the configured `mvn` executable can be started.
    pub fn available(&self) -> bool {
        Command::new(&self.config.mvn)
            .arg("--version")
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .status()
            .map(|s| s.success())
            .unwrap_or(false)
    }

    fn base_args(&self, copy: &WorkingCopy) -> Vec<String> {
        let mut args = vec!["-B".to_string()];
        if self.config.offline {
            args.push("-o".into());
        }
        if !copy.module_path().is_empty() {
            args.extend(["-pl".into(), copy.module_path().to_string(), "-am".into()]);
        }
        args.extend(self.config.extra_args.iter().cloned());
        args
    }

    fn mvn(&self, copy: &WorkingCopy, args: &[String], limit: Duration, what: &str) -> Result<Finished, RunnerError> {
        let log = tempfile::NamedTempFile::new()?;
        let started = Instant::now();
        let mut child = Command::new(&self.config.mvn)
            .args(self.base_args(copy))
            .args(args)
            .current_dir(copy.root())
            .stdin(Stdio::null())
            .stdout(Stdio::from(log.reopen()?))
            .stderr(Stdio::from(log.reopen()?))
            .spawn()
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => RunnerError::Infra {
                    message: format!("build tool `{}` not found", self.config.mvn.display()),
                    hint: Some("install Maven or point FLAKEMEND_MVN at the mvn executable".into()),
                },
                _ => RunnerError::Io(e),
            })?;
        let status = loop {
            if let Some(status) = child.try_wait()? {
                break status;
            }
            if started.elapsed() > limit {
                let _ = child.kill();
                let _ = child.wait();
                return Err(RunnerError::Timeout {
                    what: what.to_string(),
                    limit,
                });
            }
            std::thread::sleep(Duration::from_millis(50));
        };
        let output = String::from_utf8_lossy(&fs::read(log.path())?).into_owned();
        log::debug!("mvn {what} exited with {status}");
        Ok(Finished {
            status,
            output,
            elapsed: started.elapsed(),
        })
    }

    fn infra_from(output: &str, what: &str) -> RunnerError {
        let tail: Vec<&str> = output.lines().rev().take(20).collect();
        let tail: Vec<&str> = tail.into_iter().rev().collect();
        RunnerError::infra(format!("{what} failed without compiler diagnostics:\n{}", tail.join("\n")))
    }

    fn uses_jupiter(copy: &WorkingCopy, tests: &[TestId]) -> bool {
        tests.iter().any(|t| {
            copy.read(&t.source_path())
                .map(|s| s.contains("org.junit.jupiter"))
                .unwrap_or(false)
        })
    }
}

fn decode(b64: &str) -> String {
    base64::engine::general_purpose::STANDARD
        .decode(b64.trim())
        .map(|b| String::from_utf8_lossy(&b).into_owned())
        .unwrap_or_default()
}

/// Parses the driver's `results.txt`.
pub(crate) fn parse_driver_results(text: &str, sequence: &[TestId]) -> Result<OrderedResults, RunnerError> {
    let mut out = OrderedResults::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let cols: Vec<&str> = line.split('\t').collect();
        let Some(test) = cols.get(1).and_then(|id| sequence.iter().find(|t| t.to_string() == *id)) else {
            continue;
        };
        let seconds: f64 = cols.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.0);
        let result = match cols[0] {
            "PASS" => RunResult::pass(),
            "FAIL" => {
                let message = cols.get(3).map(|m| decode(m)).unwrap_or_default();
                let trace = cols.get(4).map(|t| decode(t)).unwrap_or_default();
                let frames = trace.lines().filter_map(StackFrame::parse_jvm_line).collect();
                RunResult::failure(message, frames)
            }
            "NOTFOUND" => return Err(RunnerError::TestNotFound(test.clone())),
            other => return Err(RunnerError::infra(format!("unexpected driver status {other}"))),
        };
        out.insert(test.clone(), result.with_duration(seconds));
    }
    if let Some(missing) = sequence.iter().find(|t| !out.contains_key(t)) {
        return Err(RunnerError::infra(format!("ordered run produced no result for {missing}")));
    }
    Ok(out)
}

/// Run directories under `.nondex`, baseline (`clean_*`) first, then by
/// modification time, restricted to those written after `since`.
fn nondex_runs(module_dir: &Path, since: SystemTime) -> Vec<PathBuf> {
    let Ok(entries) = fs::read_dir(module_dir.join(".nondex")) else {
        return Vec::new();
    };
    let mut dirs: Vec<(bool, SystemTime, PathBuf)> = entries
        .flatten()
        .filter(|e| e.path().is_dir())
        .filter_map(|e| {
            let modified = e.metadata().ok()?.modified().ok()?;
            (modified >= since).then(|| {
                let clean = e.file_name().to_string_lossy().starts_with("clean_");
                (!clean, modified, e.path())
            })
        })
        .collect();
    dirs.sort();
    dirs.into_iter().map(|d| d.2).collect()
}

fn result_in_dir(dir: &Path, test: &TestId) -> Option<RunResult> {
    for entry in WalkDir::new(dir).into_iter().flatten() {
        let name = entry.file_name().to_string_lossy();
        if !(name.starts_with("TEST-") && name.ends_with(".xml")) {
            continue;
        }
        let xml = fs::read_to_string(entry.path()).ok()?;
        if let Ok(cases) = parse_report(&xml) {
            if let Some(c) = cases
                .into_iter()
                .find(|c| c.class_name == test.class_fqn && c.name == test.method)
            {
                return Some(c.result);
            }
        }
    }
    None
}

impl Runner for MavenRunner {
    fn backend(&self) -> RunnerBackend {
        RunnerBackend {
            kind: BackendKind::Maven,
            supports_ordered_runs: true,
            supports_shaker: true,
        }
    }

    fn compile(&mut self, copy: &mut WorkingCopy) -> Result<RunResult, RunnerError> {
        let done = self.mvn(copy, &["test-compile".into()], self.config.compile_timeout, "compile")?;
        let secs = done.elapsed.as_secs_f64();
        if done.status.success() {
            return Ok(RunResult::pass().with_duration(secs));
        }
        let diagnostics = parse_compiler_output(&done.output, copy.root());
        if diagnostics.is_empty() {
            return Err(Self::infra_from(&done.output, "compile"));
        }
        Ok(RunResult::compilation_error(diagnostics).with_duration(secs))
    }

    fn run_ordered(&mut self, copy: &mut WorkingCopy, sequence: &[TestId]) -> Result<OrderedResults, RunnerError> {
        check_sequence(sequence)?;
        let module = PathBuf::from(copy.module_path());
        let driver_rel = module.join(DRIVER_PATH);
        let driver = if Self::uses_jupiter(copy, sequence) { DRIVER_JUNIT5 } else { DRIVER_JUNIT4 };
        copy.write(&driver_rel, driver)?;
        let state_dir = copy.module_dir().join("target/flakemend");
        fs::create_dir_all(&state_dir)?;
        let _ = fs::remove_file(state_dir.join("results.txt"));
        let listing: Vec<String> = sequence.iter().map(TestId::to_string).collect();
        fs::write(state_dir.join("sequence.txt"), listing.join("\n") + "\n")?;

        let args = vec![
            "test-compile".to_string(),
            "surefire:test".into(),
            format!("-Dtest={DRIVER_CLASS}"),
            "-DfailIfNoTests=false".into(),
            "-Dsurefire.failIfNoSpecifiedTests=false".into(),
        ];
        let outcome = self.mvn(copy, &args, self.config.test_timeout, "ordered run");
        let _ = fs::remove_file(copy.path_of(&driver_rel));
        let _ = fs::remove_dir(copy.path_of(&driver_rel).parent().unwrap_or(Path::new("")));
        let done = outcome?;
        match fs::read_to_string(state_dir.join("results.txt")) {
            Ok(text) => parse_driver_results(&text, sequence),
            Err(_) => Err(Self::infra_from(&done.output, "ordered run")),
        }
    }

    fn run_shaken(
        &mut self,
        copy: &mut WorkingCopy,
        test: &TestId,
        rounds: u32,
        seed: u64,
    ) -> Result<Vec<RunResult>, RunnerError> {
        if rounds == 0 {
            return Err(RunnerError::InvalidRequest("rounds must be at least 1".into()));
        }
        let since = SystemTime::now() - Duration::from_secs(1);
        let args = vec![
            "test-compile".to_string(),
            format!("edu.illinois:nondex-maven-plugin:{}:nondex", self.config.nondex_version),
            format!("-Dtest={test}"),
            format!("-DnondexRuns={rounds}"),
            format!("-DnondexSeed={seed}"),
            "-DfailIfNoTests=false".into(),
        ];
        let done = self.mvn(copy, &args, self.config.shaker_timeout, "shaken run")?;
        let plugin_missing = ["No plugin found for prefix", "nondex-maven-plugin", "PluginResolutionException"]
            .iter()
            .any(|p| done.output.contains(p))
            && (done.output.contains("could not be resolved") || done.output.contains("No plugin found"));
        if plugin_missing {
            return Err(RunnerError::Infra {
                message: "NonDex plugin unavailable".into(),
                hint: Some(format!(
                    "make edu.illinois:nondex-maven-plugin:{} resolvable (online build or local repository)",
                    self.config.nondex_version
                )),
            });
        }
        let runs = nondex_runs(&copy.module_dir(), since);
        let mut results: Vec<RunResult> = runs.iter().filter_map(|d| result_in_dir(d, test)).collect();
        if results.is_empty() {
            if done.output.contains("No tests were executed") || done.output.contains("No tests to run") {
                return Err(RunnerError::TestNotFound(test.clone()));
            }
            return Err(Self::infra_from(&done.output, "shaken run"));
        }
        let per_run = done.elapsed.as_secs_f64() / results.len() as f64;
        for r in &mut results {
            if r.duration_s <= 0.0 {
                r.duration_s = per_run;
            }
        }
        Ok(results)
    }
}
