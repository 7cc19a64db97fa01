mod common;

use common::termination::{distinct_failing_patches, session_with, uncompilable_patch};
use flakemend::model::{OutcomeKind, RepairStatus};
use flakemend::orchestrator::RepairConfig;

#[test]
fn identical_uncompilable_patch_stops_at_iteration_three() {
    let (session, calls) = session_with(vec![uncompilable_patch()], &RepairConfig::default());
    assert_eq!(session.status, RepairStatus::ExhaustedIdenticalErrors);
    assert_eq!(session.iterations.len(), 3);
    assert_eq!(calls, 3);
    assert!(session.iterations.iter().all(|r| r.outcome == OutcomeKind::CompilationError));
    let keys: Vec<_> = session.iterations.iter().map(|r| r.diagnostic_key.clone().unwrap()).collect();
    assert!(keys.windows(2).all(|w| w[0] == w[1]), "{keys:?}");
    assert!(keys[0].contains("LookupCacheTest.java|OTHER|"), "{}", keys[0]);
    assert!(session.final_patch.is_none());
}

#[test]
fn five_distinct_failing_patches_exhaust_the_iterations() {
    let (session, calls) = session_with(distinct_failing_patches(5), &RepairConfig::default());
    assert_eq!(session.status, RepairStatus::ExhaustedIterations);
    assert_eq!(calls, 5);
    assert_eq!(session.iterations.len(), 5);
    assert!(session.iterations.iter().all(|r| r.outcome == OutcomeKind::TestFailure));
    let indices: Vec<u32> = session.iterations.iter().map(|r| r.index).collect();
    assert_eq!(indices, [1, 2, 3, 4, 5]);
    for (i, record) in session.iterations.iter().enumerate() {
        assert!(record.response_text.contains(&format!("attempt {}", i + 1)));
    }
}

#[test]
fn a_test_failure_breaks_the_identical_error_streak() {
    let broken = uncompilable_patch();
    let failing = distinct_failing_patches(1).remove(0);
    let responses = vec![broken.clone(), broken.clone(), failing, broken.clone(), broken];
    let (session, calls) = session_with(responses, &RepairConfig::default());
    assert_eq!(session.status, RepairStatus::ExhaustedIterations);
    assert_eq!(calls, 5);
    let outcomes: Vec<OutcomeKind> = session.iterations.iter().map(|r| r.outcome).collect();
    assert_eq!(outcomes[2], OutcomeKind::TestFailure);
}

#[test]
fn limits_follow_the_configuration() {
    let config = RepairConfig {
        identical_error_limit: 2,
        ..RepairConfig::default()
    };
    let (session, calls) = session_with(vec![uncompilable_patch()], &config);
    assert_eq!((session.status, calls), (RepairStatus::ExhaustedIdenticalErrors, 2));

    let config = RepairConfig {
        max_iterations: 3,
        ..RepairConfig::default()
    };
    let (session, calls) = session_with(distinct_failing_patches(5), &config);
    assert_eq!((session.status, calls), (RepairStatus::ExhaustedIterations, 3));
}

#[test]
fn prompts_after_the_first_carry_feedback() {
    let (session, _) = session_with(distinct_failing_patches(2), &RepairConfig { max_iterations: 2, ..RepairConfig::default() });
    let second = &session.iterations[1].prompt_text;
    assert_ne!(&session.iterations[0].prompt_text, second);
    assert!(second.contains("attempt 1"), "the previous patch is shown");
}
