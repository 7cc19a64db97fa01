mod common;

use common::check_golden;
use common::prompts::{category_prompts, failure_location_entries, flooded_prompt, layout_problems, FLOOD_SIZE};
use flakemend::prompt::DEFAULT_MAX_DIAGNOSTICS;

#[test]
fn first_prompts_match_goldens() {
    let mismatches: Vec<String> = category_prompts()
        .into_iter()
        .filter_map(|(name, prompt)| check_golden(&name, &prompt.render()).err())
        .collect();
    assert!(mismatches.is_empty(), "{mismatches:#?}");
}

#[test]
fn every_prompt_has_five_sections_and_six_rules() {
    let mut prompts = category_prompts();
    prompts.push(("flooded".into(), flooded_prompt()));
    for (name, prompt) in prompts {
        let problems = layout_problems(&prompt.render());
        assert!(problems.is_empty(), "{name}: {problems:?}");
    }
}

#[test]
fn flooded_iteration_two_prompt_keeps_at_most_five_errors() {
    let prompt = flooded_prompt();
    assert_eq!(prompt.iteration, 2);
    let entries = failure_location_entries(&prompt);
    assert!(entries <= DEFAULT_MAX_DIAGNOSTICS, "{entries} entries out of {FLOOD_SIZE}");
    assert_eq!(entries, DEFAULT_MAX_DIAGNOSTICS);
    assert!(!prompt.failure_location.contains("Missing5"));
    check_golden("prompt_id_iteration2_flooded.txt", &prompt.render()).unwrap();
}

#[test]
fn prompts_show_code_and_the_error() {
    for (name, prompt) in category_prompts() {
        let rendered = prompt.render();
        assert!(rendered.contains("```java"), "{name} shows code");
        assert!(rendered.contains("Error message: "), "{name} carries the error");
    }
}
