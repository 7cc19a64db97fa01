//! Scripted model answers that never lead to a fix.

use flakemend::llm::SequenceProvider;
use flakemend::model::{FlakinessCategory, FlakyTestCase, RepairSession};
use flakemend::orchestrator::RepairConfig;

use super::{case, corpus_runner, repair};

pub const VICTIM: &str = "com.example.cache.LookupCacheTest#testMissingKeyIsNull";
pub const POLLUTER: &str = "com.example.cache.LookupCacheTest#testPutThenGet";

pub fn victim_case() -> FlakyTestCase {
    case(VICTIM, FlakinessCategory::OdVictim, &[POLLUTER], &[])
}

fn victim_patch(body: &str) -> String {
    format!(
        "Trying again.\n\n```java METHOD testMissingKeyIsNull\n@Test\npublic void testMissingKeyIsNull() {{\n{body}    assertNull(cache.get(\"answer\"));\n}}\n```\n"
    )
}

/// The same patch every time, with a type error no stitch step can fix.
pub fn uncompilable_patch() -> String {
    victim_patch("    int broken = \"answer\";\n")
}

/// `n` patches that compile, differ from each other, and leave the
/// polluted state in place.
pub fn distinct_failing_patches(n: usize) -> Vec<String> {
    (1..=n)
        .map(|i| victim_patch(&format!("    String attempt = \"attempt {i}\";\n    assertEquals(\"attempt {i}\", attempt);\n")))
        .collect()
}

/// Runs the cache victim against a scripted model; returns the session and
/// how many times the model was asked.
pub fn session_with(responses: Vec<String>, config: &RepairConfig) -> (RepairSession, usize) {
    let provider = SequenceProvider::new(responses);
    let mut runner = corpus_runner();
    let session = repair(&victim_case(), &mut runner, &provider, config);
    (session, provider.calls())
}
