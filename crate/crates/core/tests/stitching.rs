mod common;

use common::stitching::{self, mismatches, scenarios};
use flakemend::runner::{MavenRunner, Runner};

#[test]
fn scenarios_cover_the_four_stitch_steps() {
    let names: Vec<String> = scenarios().into_iter().map(|s| s.name).collect();
    assert_eq!(
        names,
        [
            "restored public modifier",
            "added LinkedHashMap import",
            "gson build dependency",
            "conflicting assertThat import excluded"
        ]
    );
}

#[test]
fn scripted_compiler_scenarios_stitch_to_zero_diagnostics() {
    let mut failures = Vec::new();
    for scenario in scenarios() {
        let mut runner = stitching::scripted_runner();
        match stitching::run(&scenario, &mut runner) {
            Ok(run) => failures.extend(mismatches(&scenario, &run).into_iter().map(|m| format!("{}: {m}", scenario.name))),
            Err(e) => failures.push(format!("{}: {e}", scenario.name)),
        }
    }
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn stitching_does_not_touch_the_original_project() {
    let before = std::fs::read_to_string(stitching::project().join("pom.xml")).unwrap();
    for scenario in scenarios() {
        stitching::run(&scenario, &mut stitching::scripted_runner()).unwrap();
    }
    assert_eq!(std::fs::read_to_string(stitching::project().join("pom.xml")).unwrap(), before);
}

/// Needs `mvn` and a JDK on PATH plus network access (or a warm local
/// repository) for junit and gson.
#[test]
#[ignore = "requires Maven and a JDK"]
fn real_compiler_scenarios_stitch_to_zero_diagnostics() {
    let mut runner = MavenRunner::default();
    assert!(runner.available(), "mvn is not runnable");
    let mut failures = Vec::new();
    let mut total = std::time::Duration::ZERO;
    for scenario in scenarios() {
        match stitching::run(&scenario, &mut runner as &mut dyn Runner) {
            Ok(run) => {
                total += run.elapsed;
                failures.extend(mismatches(&scenario, &run).into_iter().map(|m| format!("{}: {m}", scenario.name)));
            }
            Err(e) => failures.push(format!("{}: {e}", scenario.name)),
        }
    }
    assert!(failures.is_empty(), "{failures:#?}");
    assert!(total.as_secs() < 120, "took {total:?}");
}
