use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn flakemend(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flakemend"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary starts")
}

fn scripted_repair(input: &Path, out: &Path) -> Output {
    let fixtures = corpus();
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let args = [
        "repair".to_string(),
        "--project".into(),
        s(&fixtures.join("corpus/project")),
        "--input".into(),
        s(input),
        "--out".into(),
        s(out),
        "--replay".into(),
        s(&fixtures.join("replay/corpus.json")),
        "--backend".into(),
        "scripted".into(),
        "--script".into(),
        s(&fixtures.join("corpus/runner-script.json")),
        "--jobs".into(),
        "2".into(),
    ];
    flakemend(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn corpus_campaign_is_fixed_and_exits_zero() {
    let out = tempfile::tempdir().unwrap();
    let output = scripted_repair(&corpus().join("corpus/campaign.csv"), out.path());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert_eq!(output.status.code(), Some(0), "{stdout}\n{}", String::from_utf8_lossy(&output.stderr));
    assert!(stdout.contains("FIXED_BY_COVICTIM_SWEEP"), "{stdout}");

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("campaign.json")).unwrap()).unwrap();
    let rows = summary["rows"].as_array().unwrap();
    assert!(rows.len() >= 7);
    let names: Vec<String> = std::fs::read_dir(out.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(names.iter().any(|n| n.ends_with(".session.json")));
    assert!(names.iter().any(|n| n.ends_with(".patch")));
}

#[test]
fn bad_rows_exit_two_and_the_rest_still_run() {
    let dir = tempfile::tempdir().unwrap();
    let csv = std::fs::read_to_string(corpus().join("corpus/campaign.csv")).unwrap();
    let mut lines: Vec<&str> = csv.lines().take(3).collect();
    lines.push(",,,com.example.Nope#missing,SOMETIMES,");
    let input = dir.path().join("input.csv");
    std::fs::write(&input, lines.join("\n")).unwrap();
    let out = dir.path().join("out");
    let output = scripted_repair(&input, &out);
    assert_eq!(output.status.code(), Some(2));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("ROW_ERROR"), "{stdout}");
    assert!(stdout.contains("FIXED"), "{stdout}");
}

#[test]
fn empty_input_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("empty.csv");
    std::fs::write(&input, "project_dir_or_url,sha,module,test_fqn#method,category,polluters\n").unwrap();
    let output = scripted_repair(&input, &dir.path().join("out"));
    assert_eq!(output.status.code(), Some(0), "{}", String::from_utf8_lossy(&output.stderr));
}

#[test]
fn configuration_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let replay_without_fixture = flakemend(&["repair", "--project", d, "--input", d, "--out", d, "--provider", "replay"]);
    assert_eq!(replay_without_fixture.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&replay_without_fixture.stderr).contains("--replay"));

    let too_many = flakemend(&[
        "repair", "--project", d, "--input", d, "--out", d, "--replay", d, "--max-iterations", "6",
    ]);
    assert_eq!(too_many.status.code(), Some(2));

    let both = flakemend(&["repair", "--project", d, "--input", d, "--out", d, "--replay", d, "--record", d]);
    assert_eq!(both.status.code(), Some(2));
}
