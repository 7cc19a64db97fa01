//! Reproduction plus context extraction over the corpus project.

use flakemend::inspector::{extract_context, reproduce, ContextBundle, DEFAULT_SHAKER_ROUNDS};
use flakemend::java::{parse_test_class, ClassModel};
use flakemend::model::{FlakyTestCase, RunResult};
use flakemend::orchestrator::{Toolkit, DEFAULT_SEED};

use super::{corpus_copy, corpus_runner};

/// Verbatim failure message of the map-ordering example.
pub const MAP_ORDER_MESSAGE: &str =
    "expected:<{\"a\":\"1\",\"disableCheck\":\"true\"}> but was:<{\"disableCheck\":\"true\",\"a\":\"1\"}>";
pub const MAP_ORDER_TEST: &str = "com.example.json.MapConverterTest#convertToDatabaseColumn_twoElement";

fn model_of(copy: &flakemend::runner::WorkingCopy, fqn: &str) -> ClassModel {
    let rel = std::path::PathBuf::from("src/test/java").join(format!("{}.java", fqn.replace('.', "/")));
    parse_test_class(&copy.read(&rel).expect("test source")).expect("test class parses")
}

pub fn reproduce_and_extract(case: &FlakyTestCase) -> (RunResult, ContextBundle) {
    let mut copy = corpus_copy();
    let mut runner = corpus_runner();
    let result = reproduce(case, &mut runner, &mut copy, DEFAULT_SHAKER_ROUNDS, DEFAULT_SEED).expect("reproduces");
    let model = model_of(&copy, &case.test.class_fqn);
    let polluters: Vec<ClassModel> = case
        .polluters
        .iter()
        .filter(|p| p.class_fqn != case.test.class_fqn)
        .map(|p| model_of(&copy, &p.class_fqn))
        .collect();
    let toolkit = Toolkit::builtin();
    let bundle = extract_context(case, &result, &model, &polluters, &toolkit.catalog).expect("context");
    (result, bundle)
}
