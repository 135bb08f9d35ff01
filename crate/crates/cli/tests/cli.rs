//! Black-box tests of the `migrate` binary: exit codes, stage ordering,
//! staleness detection, and locking.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn migrate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_migrate"))
        .args(args)
        .output()
        .expect("spawn migrate")
}

fn run_toy(stage: &str, out_dir: &Path) -> Output {
    migrate(&[
        stage,
        "--config",
        fixture("toy.toml").to_str().unwrap(),
        "--output",
        out_dir.to_str().unwrap(),
    ])
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

#[test]
fn missing_config_is_a_usage_error() {
    let out = migrate(&["ingest"]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr_of(&out));
}

#[test]
fn nonexistent_config_is_a_usage_error() {
    let out = migrate(&["ingest", "--config", "/no/such/config.toml"]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr_of(&out));
}

#[test]
fn malformed_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "[corpus\nthis is not toml").unwrap();
    let out = migrate(&["ingest", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr_of(&out));
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("extra.toml");
    fs::write(
        &config,
        r#"
output_dir = "out"
typo_key = 1
[corpus]
inputs = ["posts.jsonl"]
ban_time = 0
focal_community = "focal"
[textscore]
valence_lexicon = "v.tsv"
booster_lexicon = "b.tsv"
negator_lexicon = "n.txt"
anger_lexicon = "a.txt"
anxiety_lexicon = "x.txt"
[graphsim]
polar_community = "polar"
"#,
    )
    .unwrap();
    let out = migrate(&["ingest", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr_of(&out));
}

#[test]
fn missing_input_path_is_reported_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let toml = fs::read_to_string(fixture("toy.toml")).unwrap();
    let config = dir.path().join("toy.toml");
    fs::write(
        &config,
        toml.replace("toy_posts.jsonl", "no_such_posts.jsonl"),
    )
    .unwrap();
    let out = migrate(&["ingest", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr_of(&out));
    assert!(
        stderr_of(&out).contains("no_such_posts.jsonl"),
        "stderr should name the missing path: {}",
        stderr_of(&out)
    );
}

#[test]
fn stages_require_their_upstream() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = run_toy("features", &out_dir);
    assert_eq!(out.status.code(), Some(1), "stderr: {}", stderr_of(&out));
    assert!(
        stderr_of(&out).contains("migrate ingest"),
        "stderr should point at the missing stage: {}",
        stderr_of(&out)
    );
}

#[test]
fn mutated_artifacts_are_refused_downstream() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    assert!(run_toy("ingest", &out_dir).status.success());

    // Corrupt an ingest artifact behind the pipeline's back.
    let corpus = out_dir.join("corpus.jsonl");
    let mut text = fs::read_to_string(&corpus).unwrap();
    text.push('\n');
    fs::write(&corpus, text).unwrap();

    let out = run_toy("similarity", &out_dir);
    assert_eq!(out.status.code(), Some(1), "stderr: {}", stderr_of(&out));
    let err = stderr_of(&out);
    assert!(
        err.contains("corpus.jsonl") && err.contains("migrate ingest"),
        "stderr should name the artifact and the rerun: {err}"
    );
}

#[test]
fn config_changes_invalidate_upstream_stages() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    assert!(run_toy("ingest", &out_dir).status.success());

    // A different seed is a different configuration.
    let out = migrate(&[
        "similarity",
        "--config",
        fixture("toy.toml").to_str().unwrap(),
        "--output",
        out_dir.to_str().unwrap(),
        "--seed",
        "7",
    ]);
    assert_eq!(out.status.code(), Some(1), "stderr: {}", stderr_of(&out));
    let err = stderr_of(&out);
    assert!(err.contains("stale"), "stderr should flag staleness: {err}");
}

#[test]
fn concurrent_runs_are_locked_out() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    fs::create_dir_all(&out_dir).unwrap();
    fs::write(out_dir.join(".lock"), "").unwrap();
    let out = run_toy("ingest", &out_dir);
    assert_eq!(out.status.code(), Some(1), "stderr: {}", stderr_of(&out));
    assert!(
        stderr_of(&out).contains("lock"),
        "stderr should mention the lock: {}",
        stderr_of(&out)
    );
}

#[test]
fn lock_is_released_after_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    assert!(run_toy("ingest", &out_dir).status.success());
    assert!(!out_dir.join(".lock").exists(), "lock file left behind");
    // And the directory is immediately reusable.
    assert!(run_toy("ingest", &out_dir).status.success());
}

#[test]
fn ingest_reports_the_expected_label_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    assert!(run_toy("ingest", &out_dir).status.success());
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("ingest_summary.json")).unwrap())
            .unwrap();
    let labels = &summary["users_per_label"];
    assert_eq!(labels["reddit_only"], 80);
    assert_eq!(labels["coactive"], 40);
    assert_eq!(labels["fully_migrated"], 40);
    assert_eq!(labels["discarded"], 40);
}

#[test]
fn stage_metadata_carries_the_hash_chain() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    assert!(run_toy("ingest", &out_dir).status.success());
    assert!(run_toy("similarity", &out_dir).status.success());

    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("similarity.meta.json")).unwrap())
            .unwrap();
    assert!(meta["upstream"]["ingest"].is_string(), "missing upstream link: {meta}");
    assert!(meta["artifacts"]["similarity.tsv"].is_string());
    let hash = meta["config_hash"].as_str().unwrap();
    assert_eq!(hash.len(), 64, "config hash should be a sha-256 hex digest");
}
