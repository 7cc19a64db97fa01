mod args;

use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;

use args::{Backend, Cli, Command, ProviderName, RepairArgs};
use flakemend::llm::{Provider, ProviderConfig, RecordingProvider};
use flakemend::orchestrator::{run_campaign_with, CampaignConfig, RepairConfig, CAMPAIGN_REPORT_FILE};
use flakemend::prompt::{PromptConfig, TemplateSet};
use flakemend::runner::{MavenConfig, MavenRunner, Runner, RunnerError, Script, ScriptedRunner};
use flakemend::stitcher::CoordinateTable;

const CONFIG_FAILURE: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let Command::Repair(repair) = Cli::parse().command;
    match run(&repair) {
        Ok(code) => ExitCode::from(code),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(CONFIG_FAILURE)
        }
    }
}

fn run(args: &RepairArgs) -> Result<u8, String> {
    let provider_config = provider_config(args)?;
    let config = CampaignConfig {
        project_dir: args.project.clone(),
        input: args.input.clone(),
        provider: provider_config.clone(),
        out_dir: args.out.clone(),
        jobs: args.jobs,
        repair: repair_config(args)?,
        coordinates: coordinates(args.coordinates.as_deref())?,
    };
    config.validate().map_err(|e| e.to_string())?;

    let inner = provider_config.build().map_err(|e| e.to_string())?;
    let provider: Box<dyn Provider> = match &args.record {
        Some(path) => Box::new(RecordingProvider::new(inner, path).map_err(|e| e.to_string())?),
        None => inner,
    };

    let report = match args.backend {
        Backend::Scripted => {
            let path = args.script.as_deref().ok_or("--backend scripted needs --script")?;
            let script = Arc::new(Script::load(path).map_err(|e| e.to_string())?);
            let runners = move |_: &Path| -> Result<Box<dyn Runner>, RunnerError> {
                Ok(Box::new(ScriptedRunner::shared(Arc::clone(&script))))
            };
            run_campaign_with(&config, provider.as_ref(), &runners)
        }
        Backend::Maven => {
            let mut maven = MavenConfig {
                offline: args.offline,
                ..MavenConfig::default()
            };
            if let Some(mvn) = &args.mvn {
                maven.mvn = mvn.clone();
            }
            let probe = MavenRunner::new(maven.clone());
            if !probe.available() {
                return Err(format!("cannot run `{}`; install Maven or pass --mvn", maven.mvn.display()));
            }
            let runners = move |_: &Path| -> Result<Box<dyn Runner>, RunnerError> {
                Ok(Box::new(MavenRunner::new(maven.clone())))
            };
            run_campaign_with(&config, provider.as_ref(), &runners)
        }
    }
    .map_err(|e| e.to_string())?;

    for row in &report.rows {
        let detail = row.detail.as_deref().map(|d| format!("  {d}")).unwrap_or_default();
        println!("line {:>4}  {:<26} {}{detail}", row.line, row.status.to_string(), row.test);
    }
    println!();
    print!("{}", report.render_table());
    println!("summary written to {}", args.out.join(CAMPAIGN_REPORT_FILE).display());
    Ok(u8::try_from(report.exit_code()).unwrap_or(CONFIG_FAILURE))
}

fn provider_config(args: &RepairArgs) -> Result<ProviderConfig, String> {
    let mut config = match (args.provider, &args.replay) {
        (_, Some(fixture)) => ProviderConfig::replay(fixture),
        (ProviderName::Replay, None) => return Err("--provider replay needs --replay <fixture>".into()),
        (ProviderName::Http, None) => {
            let endpoint = args.endpoint.as_deref().ok_or("--provider http needs --endpoint")?;
            let model = args.model.as_deref().unwrap_or_default();
            ProviderConfig::http(endpoint, model, Some(&args.api_key_env))
        }
    };
    config.temperature = args.temperature;
    if let Some(timeout) = args.request_timeout {
        config.request_timeout_s = timeout;
    }
    Ok(config)
}

fn repair_config(args: &RepairArgs) -> Result<RepairConfig, String> {
    let defaults = RepairConfig::default();
    let templates = match &args.templates {
        Some(dir) => TemplateSet::load(dir).map_err(|e| e.to_string())?,
        None => TemplateSet::builtin(),
    };
    Ok(RepairConfig {
        max_iterations: args.max_iterations,
        identical_error_limit: args.identical_error_limit,
        nondex_rounds: args.nondex_rounds,
        seed: args.seed.unwrap_or(defaults.seed),
        probe_budget: args.probe_budget,
        keep_workdirs: args.keep_workdirs,
        workdir_root: args.workdir_root.clone(),
        prompt: PromptConfig {
            char_budget: args.prompt_budget,
            max_diagnostics: args.max_diagnostics,
            templates,
        },
    })
}

fn coordinates(path: Option<&Path>) -> Result<CoordinateTable, String> {
    let Some(path) = path else {
        return Ok(CoordinateTable::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    CoordinateTable::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
}
