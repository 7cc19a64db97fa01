use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use flakemend::inspector::DEFAULT_SHAKER_ROUNDS;
use flakemend::model::MAX_ITERATIONS;
use flakemend::orchestrator::DEFAULT_IDENTICAL_ERROR_LIMIT;
use flakemend::prompt::{DEFAULT_CHAR_BUDGET, DEFAULT_MAX_DIAGNOSTICS};
use flakemend::stitcher::DEFAULT_PROBE_BUDGET;

/// Repairs flaky Java tests with a language model in the loop.
#[derive(Debug, Parser)]
#[command(name = "flakemend", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run repair sessions for every row of an input list.
    ///
    /// Writes `<class>.<method>.session.json` for each session, a
    /// `<class>.<method>.patch` unified diff for each fixed test, and
    /// `campaign.json` into the output directory. Exits 0 when every test
    /// was fixed, 1 when some were not, and 2 on input, configuration or
    /// infrastructure failures.
    Repair(RepairArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderName {
    /// OpenAI-compatible chat completion endpoint.
    Http,
    /// Recorded responses keyed by prompt digest.
    Replay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Backend {
    Maven,
    /// Deterministic runner driven by a JSON script; for tests and demos.
    Scripted,
}

#[derive(Debug, Args)]
pub struct RepairArgs {
    /// Project checkout; also the base for relative project columns.
    #[arg(long)]
    pub project: PathBuf,
    /// CSV list: project_dir_or_url,sha,module,test_fqn#method,category,polluters
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "http")]
    pub provider: ProviderName,
    /// Directory for session reports, diffs and the campaign summary.
    #[arg(long)]
    pub out: PathBuf,

    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Environment variable that holds the API key.
    #[arg(long, default_value = "FLAKEMEND_API_KEY")]
    pub api_key_env: String,
    #[arg(long, default_value_t = 0.0)]
    pub temperature: f64,
    /// Request timeout in seconds.
    #[arg(long)]
    pub request_timeout: Option<u64>,
    /// Append every completion to this replay fixture.
    #[arg(long, conflicts_with = "replay")]
    pub record: Option<PathBuf>,
    /// Answer prompts from this replay fixture instead of calling a model.
    #[arg(long)]
    pub replay: Option<PathBuf>,

    #[arg(long, default_value_t = MAX_ITERATIONS)]
    pub max_iterations: u32,
    #[arg(long, default_value_t = DEFAULT_IDENTICAL_ERROR_LIMIT)]
    pub identical_error_limit: u32,
    #[arg(long, default_value_t = DEFAULT_SHAKER_ROUNDS)]
    pub nondex_rounds: u32,
    /// Shaker seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sessions run in parallel.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub keep_workdirs: bool,
    /// Where kept working copies go.
    #[arg(long)]
    pub workdir_root: Option<PathBuf>,

    /// Prompt size limit in characters.
    #[arg(long, default_value_t = DEFAULT_CHAR_BUDGET)]
    pub prompt_budget: usize,
    /// Compiler errors listed in a feedback prompt.
    #[arg(long, default_value_t = DEFAULT_MAX_DIAGNOSTICS)]
    pub max_diagnostics: usize,
    /// Directory holding od_victim.txt, od_brittle.txt, id.txt and rules.txt.
    #[arg(long)]
    pub templates: Option<PathBuf>,

    /// Compile probes allowed per stitching pass.
    #[arg(long, default_value_t = DEFAULT_PROBE_BUDGET)]
    pub probe_budget: u32,
    /// Extra `package.prefix -> group:artifact:version` lines.
    #[arg(long)]
    pub coordinates: Option<PathBuf>,

    #[arg(long, value_enum, default_value = "maven")]
    pub backend: Backend,
    /// Runner script for the scripted backend.
    #[arg(long, required_if_eq("backend", "scripted"))]
    pub script: Option<PathBuf>,
    /// Maven executable.
    #[arg(long)]
    pub mvn: Option<PathBuf>,
    /// Pass `--offline` to Maven.
    #[arg(long)]
    pub offline: bool,
}
