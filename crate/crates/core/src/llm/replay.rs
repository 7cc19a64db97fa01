use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{prompt_digest, Completion, LlmError, Provider};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub response: String,
    #[serde(default)]
    pub tokens_in: u64,
    #[serde(default)]
    pub tokens_out: u64,
    /// First line of the prompt, for humans browsing the fixture.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_head: Option<String>,
}

/// Prompt digest to recorded response.
pub type ReplayTable = BTreeMap<String, ReplayEntry>;

fn read_table(path: &Path) -> Result<ReplayTable, LlmError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| LlmError::Config(format!("cannot read replay fixture {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| LlmError::Config(format!("invalid replay fixture {}: {e}", path.display())))
}

fn write_table(path: &Path, table: &ReplayTable) -> Result<(), LlmError> {
    let text = serde_json::to_string_pretty(table).expect("table serializes");
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| LlmError::Config(e.to_string()))?;
    }
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, text + "\n").map_err(|e| LlmError::Config(e.to_string()))?;
    std::fs::rename(&tmp, path).map_err(|e| LlmError::Config(e.to_string()))
}

/// Answers from a recorded table keyed by [`prompt_digest`].
#[derive(Debug, Clone, Default)]
pub struct ReplayProvider {
    table: ReplayTable,
}

impl ReplayProvider {
    pub fn new(table: ReplayTable) -> Self {
        ReplayProvider { table }
    }

    pub fn load(path: &Path) -> Result<Self, LlmError> {
        Ok(ReplayProvider::new(read_table(path)?))
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl Provider for ReplayProvider {
    fn complete(&self, prompt: &str) -> Result<Completion, LlmError> {
        let digest = prompt_digest(prompt);
        let entry = self.table.get(&digest).ok_or(LlmError::FixtureMiss(digest))?;
        Ok(Completion {
            text: entry.response.clone(),
            tokens_in: entry.tokens_in,
            tokens_out: entry.tokens_out,
            latency_s: 0.0,
        })
    }
}

/// Forwards to `inner` and appends every exchange to a replay fixture file.
pub struct RecordingProvider<P> {
    inner: P,
    path: PathBuf,
    table: Mutex<ReplayTable>,
}

impl<P: Provider> RecordingProvider<P> {
    /// Extends the fixture at `path` if it exists.
    pub fn new(inner: P, path: impl Into<PathBuf>) -> Result<Self, LlmError> {
        let path = path.into();
        let table = if path.exists() { read_table(&path)? } else { ReplayTable::new() };
        Ok(RecordingProvider {
            inner,
            path,
            table: Mutex::new(table),
        })
    }

    pub fn table(&self) -> ReplayTable {
        self.table.lock().expect("poisoned").clone()
    }
}

impl<P: Provider> Provider for RecordingProvider<P> {
    fn complete(&self, prompt: &str) -> Result<Completion, LlmError> {
        let completion = self.inner.complete(prompt)?;
        let mut table = self.table.lock().expect("poisoned");
        table.insert(
            prompt_digest(prompt),
            ReplayEntry {
                response: completion.text.clone(),
                tokens_in: completion.tokens_in,
                tokens_out: completion.tokens_out,
                prompt_head: prompt.lines().next().map(str::to_string),
            },
        );
        write_table(&self.path, &table)?;
        Ok(completion)
    }
}
