use std::path::Path;
use std::process::{Command, Output};

fn triage(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_triage"))
        .args(args)
        .env_remove("TRIAGE_CONFIG")
        .env_remove("TRIAGE_SEED")
        .env_remove("TRIAGE_WORKERS")
        .env_remove("TRIAGE_BIND")
        .env("TRIAGE_DATA_DIR", dir)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = triage(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn generate_is_reproducible() {
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    ok(a.path(), &["generate", "--n", "1000", "--seed", "7"]);
    ok(b.path(), &["generate", "--n", "1000", "--seed", "7"]);
    let read = |d: &Path| std::fs::read(d.join("corpus.jsonl")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    let out = Command::new(env!("CARGO_BIN_EXE_triage"))
        .args(["generate", "--n", "1000"])
        .env("TRIAGE_DATA_DIR", c.path())
        .env("TRIAGE_SEED", "8")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_ne!(read(a.path()), read(c.path()));
}

#[test]
fn failures_print_one_parsable_line() {
    let d = tempfile::tempdir().unwrap();
    let out = triage(d.path(), &["eval-triage"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    let line = err.lines().last().unwrap();
    assert!(line.starts_with("error kind=config message=\""), "{line}");
    assert!(line.contains("kg.snap"));

    let out = triage(d.path(), &["generate", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    let out = triage(d.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));

    std::fs::write(d.path().join("bad.toml"), "split = [1.0]\n").unwrap();
    let cfg = d.path().join("bad.toml");
    let out = triage(d.path(), &["--config", cfg.to_str().unwrap(), "stats"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("kind=config"));
}

#[test]
fn stages_chain_through_the_data_directory() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    ok(p, &["generate", "--n", "1500"]);
    let ingest: serde_json::Value = serde_json::from_str(&ok(p, &["ingest"])).unwrap();
    assert_eq!(ingest["records"], 1500);
    ok(p, &["build-ontology"]);
    let kg: serde_json::Value = serde_json::from_str(&ok(p, &["build-kg"])).unwrap();
    assert!(kg["ground_truth"].as_u64().unwrap() > 0);
    let summary = ok(p, &["eval-triage"]);
    assert!(summary.lines().any(|l| l.starts_with("emergency recall")), "{summary}");
    let metrics: serde_json::Value = serde_json::from_slice(&std::fs::read(p.join("triage_metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["emergency_recall"], 1.0);
    let stats = ok(p, &["stats"]);
    assert!(stats.contains("edges\ttotal"), "{stats}");
    let bench = ok(p, &["bench", "--workers", "1", "--concurrency", "4", "--sessions-per-client", "2"]);
    assert!(bench.contains("workers 1 concurrency 4"), "{bench}");
    let run: serde_json::Value = serde_json::from_slice(&std::fs::read(p.join("bench.json")).unwrap()).unwrap();
    assert_eq!(run["reports"][0]["errors"], 0);
}
