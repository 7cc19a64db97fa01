//! Repair prompt rendering and per-iteration feedback.
//!
//! A prompt has five sections in a fixed order: instruction, problem
//! definition, related code, failure location and a numbered list of six
//! answer rules. The instruction and problem definition come from one
//! template per flakiness category, loaded from `templates/prompts` (the
//! built-in copies are compiled in).

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inspector::ContextBundle;
use crate::java::{RelatedCode, RelatedKind, RelatedMember};
use crate::model::{CompilationDiagnostic, FlakinessCategory, FlakyTestCase, IterationRecord, OutcomeKind};

pub const DEFAULT_CHAR_BUDGET: usize = 24_000;
pub const DEFAULT_MAX_DIAGNOSTICS: usize = 5;
pub const RULE_COUNT: usize = 6;

/// Error-message caps tried, in order, when a prompt is over budget after
/// every droppable helper is gone.
const ERROR_MESSAGE_CAPS: [usize; 3] = [4000, 1000, 200];

const SECTION_TITLES: [&str; 5] = [
    "### Instruction",
    "### Problem Definition",
    "### Related Code",
    "### Failure Location",
    "### Rules",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("prompt is {len} characters, over the budget of {budget}")]
    Overflow { len: usize, budget: usize },
    #[error("template: {0}")]
    Template(String),
    #[error("feedback does not match the iteration outcome: {0}")]
    InvalidFeedback(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryTemplate {
    pub instruction: String,
    pub problem_definition: String,
}

impl CategoryTemplate {
    /// Reads `[instruction]` and `[problem_definition]` sections; lines
    /// starting with `#` are comments.
    pub fn parse(text: &str) -> Result<Self, PromptError> {
        let mut instruction = None;
        let mut problem = None;
        let mut current: Option<&mut Option<String>> = None;
        for line in text.lines() {
            if line.starts_with('#') {
                continue;
            }
            match line.trim() {
                "[instruction]" => {
                    current = Some(&mut instruction);
                    continue;
                }
                "[problem_definition]" => {
                    current = Some(&mut problem);
                    continue;
                }
                _ => {}
            }
            match current.as_deref_mut() {
                Some(slot) => {
                    let s = slot.get_or_insert_with(String::new);
                    s.push_str(line);
                    s.push('\n');
                }
                None if line.trim().is_empty() => {}
                None => return Err(PromptError::Template(format!("text outside a section: {line}"))),
            }
        }
        let finish = |s: Option<String>, name: &str| {
            s.map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .ok_or_else(|| PromptError::Template(format!("missing [{name}] section")))
        };
        Ok(CategoryTemplate {
            instruction: finish(instruction, "instruction")?,
            problem_definition: finish(problem, "problem_definition")?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    pub od_victim: CategoryTemplate,
    pub od_brittle: CategoryTemplate,
    pub id: CategoryTemplate,
    pub rules: Vec<String>,
}

fn parse_rules(text: &str) -> Result<Vec<String>, PromptError> {
    let rules: Vec<String> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| l.trim().to_string())
        .collect();
    if rules.len() != RULE_COUNT {
        return Err(PromptError::Template(format!(
            "expected {RULE_COUNT} rules, found {}",
            rules.len()
        )));
    }
    Ok(rules)
}

impl TemplateSet {
    pub fn builtin() -> Self {
        TemplateSet {
            od_victim: CategoryTemplate::parse(include_str!("../templates/prompts/od_victim.txt")).expect("builtin"),
            od_brittle: CategoryTemplate::parse(include_str!("../templates/prompts/od_brittle.txt")).expect("builtin"),
            id: CategoryTemplate::parse(include_str!("../templates/prompts/id.txt")).expect("builtin"),
            rules: parse_rules(include_str!("../templates/prompts/rules.txt")).expect("builtin"),
        }
    }

    /// Loads `od_victim.txt`, `od_brittle.txt`, `id.txt` and `rules.txt`
    /// from `dir`.
    pub fn load(dir: &Path) -> Result<Self, PromptError> {
        let read = |name: &str| {
            std::fs::read_to_string(dir.join(name))
                .map_err(|e| PromptError::Template(format!("{}: {e}", dir.join(name).display())))
        };
        Ok(TemplateSet {
            od_victim: CategoryTemplate::parse(&read("od_victim.txt")?)?,
            od_brittle: CategoryTemplate::parse(&read("od_brittle.txt")?)?,
            id: CategoryTemplate::parse(&read("id.txt")?)?,
            rules: parse_rules(&read("rules.txt")?)?,
        })
    }

    pub fn for_category(&self, category: FlakinessCategory) -> &CategoryTemplate {
        match category {
            FlakinessCategory::OdVictim => &self.od_victim,
            FlakinessCategory::OdBrittle => &self.od_brittle,
            FlakinessCategory::Id => &self.id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptConfig {
    pub char_budget: usize,
    pub max_diagnostics: usize,
    pub templates: TemplateSet,
}

impl Default for PromptConfig {
    fn default() -> Self {
        PromptConfig {
            char_budget: DEFAULT_CHAR_BUDGET,
            max_diagnostics: DEFAULT_MAX_DIAGNOSTICS,
            templates: TemplateSet::builtin(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub category: FlakinessCategory,
    pub iteration: u32,
    pub char_budget: usize,
    pub instruction: String,
    pub problem_definition: String,
    pub related_code: String,
    pub failure_location: String,
    pub rules: Vec<String>,
}

impl Prompt {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let bodies = [
            self.instruction.as_str(),
            self.problem_definition.as_str(),
            self.related_code.as_str(),
            self.failure_location.as_str(),
        ];
        for (title, body) in SECTION_TITLES.iter().zip(bodies) {
            let _ = write!(out, "{title}\n{}\n\n", body.trim_end());
        }
        out.push_str(SECTION_TITLES[4]);
        out.push('\n');
        for (i, rule) in self.rules.iter().enumerate() {
            let _ = writeln!(out, "{}. {rule}", i + 1);
        }
        out
    }

    /// Rendered length in characters.
    pub fn char_len(&self) -> usize {
        self.render().chars().count()
    }
}

fn member_label(kind: RelatedKind) -> &'static str {
    match kind {
        RelatedKind::Flaky => "Flaky test",
        RelatedKind::Polluter => "Polluter test",
        RelatedKind::Field => "Shared field",
        RelatedKind::Lifecycle => "Lifecycle method",
        RelatedKind::Helper => "Helper method",
    }
}

fn source_file(class_fqn: &str) -> String {
    let outer = class_fqn.split('$').next().unwrap_or(class_fqn);
    format!("{}.java", outer.replace('.', "/"))
}

/// Member sources start at their declaration column, so only the lines
/// after the first carry the class-level indentation.
fn dedent_member(source: &str) -> String {
    let mut lines = source.trim_end().lines();
    let first = lines.next().unwrap_or("");
    let rest: Vec<&str> = lines.collect();
    let indent = rest
        .iter()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.len() - l.trim_start().len())
        .min()
        .unwrap_or(0);
    let mut out = first.to_string();
    for line in rest {
        out.push('\n');
        out.push_str(line.get(indent..).unwrap_or(line.trim_start()));
    }
    out
}

fn render_related(members: &[&RelatedMember]) -> String {
    let mut out = String::new();
    for m in members {
        if !out.is_empty() {
            out.push('\n');
        }
        let _ = write!(
            out,
            "{} `{}` in {}:\n```java\n{}\n```\n",
            member_label(m.kind),
            m.name,
            source_file(&m.class_fqn),
            dedent_member(&m.source)
        );
    }
    out
}

fn cap_chars(text: &str, cap: usize) -> String {
    if text.chars().count() <= cap {
        return text.to_string();
    }
    let mut s: String = text.chars().take(cap).collect();
    s.push_str(" [truncated]");
    s
}

/// Failure-location content before rendering.
#[derive(Debug, Clone)]
enum FailureLines {
    Context(ContextBundle),
    Diagnostics(Vec<String>),
}

fn render_failure(failure: &FailureLines, error_cap: Option<usize>) -> String {
    let mut lines = Vec::new();
    match failure {
        FailureLines::Context(ctx) => {
            let message = match error_cap {
                Some(cap) => cap_chars(&ctx.error_message, cap),
                None => ctx.error_message.clone(),
            };
            lines.push(format!("Error message: {}", message.trim_end()));
            if let Some(a) = &ctx.failing_assertion {
                lines.push(format!(
                    "Failing statement (line {} in {}): {}",
                    a.line, a.method, a.statement
                ));
            }
            for s in &ctx.suspects {
                lines.push(format!(
                    "Possible source of flakiness (line {}): {} [{}]",
                    s.line,
                    s.source,
                    s.reason.describe()
                ));
            }
            for s in &ctx.shared_state {
                lines.push(format!("Shared state: {s}"));
            }
        }
        FailureLines::Diagnostics(entries) => {
            lines.extend(entries.iter().map(|d| format!("Compilation error: {d}")));
        }
    }
    lines.join("\n")
}

/// Fits the prompt into its budget: helpers and other non-test members are
/// dropped whole, farthest first, then the error message is shortened.
fn assemble(
    category: FlakinessCategory,
    iteration: u32,
    template: (&str, &str),
    rules: &[String],
    related: &RelatedCode,
    failure: &FailureLines,
    budget: usize,
) -> Result<Prompt, PromptError> {
    let mut kept: Vec<&RelatedMember> = related.members.iter().collect();
    let build = |kept: &[&RelatedMember], cap: Option<usize>| Prompt {
        category,
        iteration,
        char_budget: budget,
        instruction: template.0.to_string(),
        problem_definition: template.1.to_string(),
        related_code: render_related(kept),
        failure_location: render_failure(failure, cap),
        rules: rules.to_vec(),
    };
    let mut prompt = build(&kept, None);
    while prompt.char_len() > budget {
        let Some(victim) = kept
            .iter()
            .enumerate()
            .filter(|(_, m)| m.distance > 0)
            .max_by_key(|(i, m)| (m.distance, *i))
            .map(|(i, _)| i)
        else {
            break;
        };
        log::debug!("prompt over budget; dropping {} `{}`", member_label(kept[victim].kind), kept[victim].name);
        kept.remove(victim);
        prompt = build(&kept, None);
    }
    for cap in ERROR_MESSAGE_CAPS {
        if prompt.char_len() <= budget {
            break;
        }
        prompt = build(&kept, Some(cap));
    }
    let len = prompt.char_len();
    if len > budget {
        return Err(PromptError::Overflow { len, budget });
    }
    Ok(prompt)
}

fn problem_definition(template: &CategoryTemplate, case: &FlakyTestCase) -> String {
    let polluters: Vec<String> = case.polluters.iter().map(ToString::to_string).collect();
    template
        .problem_definition
        .replace("{test}", &case.test.to_string())
        .replace("{polluters}", &polluters.join(", "))
}

/// First-iteration prompt for `case`.
pub fn build_prompt(case: &FlakyTestCase, context: &ContextBundle, config: &PromptConfig) -> Result<Prompt, PromptError> {
    let template = config.templates.for_category(case.category);
    let instruction = template.instruction.replace("{test}", &case.test.to_string());
    let problem = problem_definition(template, case);
    assemble(
        case.category,
        1,
        (&instruction, &problem),
        &config.templates.rules,
        &context.related_code,
        &FailureLines::Context(context.clone()),
        config.char_budget,
    )
}

/// New information gathered after an unsuccessful iteration.
#[derive(Debug, Clone, Copy)]
pub enum Feedback<'a> {
    Compilation(&'a [CompilationDiagnostic]),
    Failure(&'a ContextBundle),
}

/// Next-iteration prompt: related code shows the latest patched members and
/// the failure location carries only what went wrong with that attempt.
pub fn augment_with_feedback(
    previous: &Prompt,
    record: &IterationRecord,
    related: &RelatedCode,
    feedback: Feedback<'_>,
    config: &PromptConfig,
) -> Result<Prompt, PromptError> {
    let failure = match (record.outcome, feedback) {
        (OutcomeKind::CompilationError, Feedback::Compilation(diags)) => FailureLines::Diagnostics(
            diags
                .iter()
                .take(config.max_diagnostics)
                .map(CompilationDiagnostic::one_line)
                .collect(),
        ),
        (OutcomeKind::TestFailure, Feedback::Failure(ctx)) => FailureLines::Context(ctx.clone()),
        (outcome, _) => {
            return Err(PromptError::InvalidFeedback(format!(
                "outcome {outcome} of iteration {}",
                record.index
            )))
        }
    };
    assemble(
        previous.category,
        previous.iteration + 1,
        (&previous.instruction, &previous.problem_definition),
        &previous.rules,
        related,
        &failure,
        previous.char_budget,
    )
}
