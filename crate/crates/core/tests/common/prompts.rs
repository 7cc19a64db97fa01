//! Prompts rendered from the corpus, one per category, plus an
//! iteration-two prompt fed a flood of compiler errors.

use std::path::PathBuf;

use flakemend::model::{CompilationDiagnostic, DiagnosticKind, FlakinessCategory, IterationRecord, OutcomeKind};
use flakemend::prompt::{augment_with_feedback, build_prompt, Feedback, Prompt, PromptConfig, RULE_COUNT};

use super::case;
use super::context::{reproduce_and_extract, MAP_ORDER_TEST};

const SECTION_TITLES: [&str; 5] = [
    "### Instruction",
    "### Problem Definition",
    "### Related Code",
    "### Failure Location",
    "### Rules",
];

pub const FLOOD_SIZE: usize = 40;

fn category_case(category: FlakinessCategory) -> flakemend::model::FlakyTestCase {
    match category {
        FlakinessCategory::OdVictim => case(
            "org.apache.shardingsphere.elasticjob.tracing.BootstrapEnvironmentTest#assertWithoutEventTraceRdbConfiguration",
            category,
            &["org.apache.shardingsphere.elasticjob.tracing.BootstrapEnvironmentTest#assertGetEventTraceRdbConfigurationMap"],
            &[],
        ),
        FlakinessCategory::OdBrittle => case("com.example.config.SettingsTest#testTimeoutValue", category, &[], &[]),
        FlakinessCategory::Id => case(MAP_ORDER_TEST, category, &[], &[]),
    }
}

pub fn first_prompt(category: FlakinessCategory) -> Prompt {
    let case = category_case(category);
    let (_, bundle) = reproduce_and_extract(&case);
    build_prompt(&case, &bundle, &PromptConfig::default()).expect("prompt fits")
}

/// `(golden file name, prompt)` for every category.
pub fn category_prompts() -> Vec<(String, Prompt)> {
    [FlakinessCategory::OdVictim, FlakinessCategory::OdBrittle, FlakinessCategory::Id]
        .into_iter()
        .map(|c| (format!("prompt_{}.txt", c.as_str().to_lowercase()), first_prompt(c)))
        .collect()
}

pub fn flood() -> Vec<CompilationDiagnostic> {
    (0..FLOOD_SIZE)
        .map(|i| {
            CompilationDiagnostic::new(
                PathBuf::from("src/test/java/com/example/json/MapConverterTest.java"),
                21 + i as u32,
                DiagnosticKind::MissingSymbol,
                Some(format!("Missing{i}")),
                format!("cannot find symbol\n  symbol:   class Missing{i}"),
            )
        })
        .collect()
}

/// Iteration-two prompt after a patch that produced [`FLOOD_SIZE`]
/// compiler errors.
pub fn flooded_prompt() -> Prompt {
    let case = category_case(FlakinessCategory::Id);
    let (_, bundle) = reproduce_and_extract(&case);
    let config = PromptConfig::default();
    let first = build_prompt(&case, &bundle, &config).expect("prompt fits");
    let record = IterationRecord {
        index: 1,
        prompt_text: first.render(),
        response_text: String::new(),
        stitch_actions: Vec::new(),
        outcome: OutcomeKind::CompilationError,
        diagnostic_key: None,
        tokens_in: 0,
        tokens_out: 0,
        runner_time_s: 0.0,
    };
    let diags = flood();
    augment_with_feedback(&first, &record, &bundle.related_code, Feedback::Compilation(&diags), &config).expect("augments")
}

pub fn failure_location_entries(prompt: &Prompt) -> usize {
    prompt
        .failure_location
        .lines()
        .filter(|l| l.starts_with("Compilation error:"))
        .count()
}

/// Ways a rendered prompt departs from the five-section, six-rule layout.
pub fn layout_problems(rendered: &str) -> Vec<String> {
    let mut problems = Vec::new();
    let mut positions = Vec::new();
    for title in SECTION_TITLES {
        let hits: Vec<usize> = rendered
            .match_indices(title)
            .filter(|(i, _)| *i == 0 || rendered.as_bytes()[i - 1] == b'\n')
            .map(|(i, _)| i)
            .collect();
        match hits.as_slice() {
            [one] => positions.push(*one),
            _ => problems.push(format!("{title} appears {} times", hits.len())),
        }
    }
    if positions.windows(2).any(|w| w[0] >= w[1]) {
        problems.push(format!("sections out of order: {positions:?}"));
    }
    let rules = rendered.split("### Rules\n").nth(1).unwrap_or("");
    let numbered: Vec<&str> = rules
        .lines()
        .filter(|l| {
            let digits: String = l.chars().take_while(char::is_ascii_digit).collect();
            !digits.is_empty() && l[digits.len()..].starts_with(". ")
        })
        .collect();
    if numbered.len() != RULE_COUNT {
        problems.push(format!("{} numbered rules, expected {RULE_COUNT}", numbered.len()));
    }
    problems
}
