use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_claimmatch"));
    cmd.env("RUST_LOG", "warn").env_remove("OPENAI_API_KEY");
    cmd
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_lines(path: &Path, lines: impl IntoIterator<Item = String>) {
    let mut text: String = lines.into_iter().map(|l| l + "\n").collect();
    if text.is_empty() {
        text.push('\n');
    }
    std::fs::write(path, text).unwrap();
}

fn pair_line(id: &str, input: &str, verified: &str, label: &str, split: &str) -> String {
    serde_json::json!({
        "pair_id": id,
        "input_claim": input,
        "verified_claim": verified,
        "label": label,
        "source_ids": [format!("in-{id}"), format!("vc-{id}")],
        "split": split,
    })
    .to_string()
}

/// 8 test pairs and 4 shots, written as JSONL.
fn workspace() -> (TempDir, PathBuf, PathBuf) {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("test.jsonl");
    let shots = tmp.path().join("shots.jsonl");
    write_lines(
        &data,
        (0..8).map(|i| {
            let label = if i % 2 == 0 { "match" } else { "no_match" };
            pair_line(
                &format!("t{i}"),
                &format!("claim number {i}"),
                &format!("verified text {i}"),
                label,
                "test",
            )
        }),
    );
    write_lines(
        &shots,
        (0..4).map(|i| {
            let label = if i < 2 { "match" } else { "no_match" };
            pair_line(
                &format!("s{i}"),
                &format!("shot claim {i}"),
                &format!("shot verified {i}"),
                label,
                "train_shots",
            )
        }),
    );
    (tmp, data, shots)
}

fn metric(dir: &Path, run_id: &str, key: &str) -> f64 {
    let text = std::fs::read_to_string(dir.join("results").join(run_id).join("metrics.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v[key].as_f64().unwrap()
}

#[test]
fn echo_gold_run_is_perfect_and_persisted() {
    let (tmp, data, shots) = workspace();
    let d = tmp.path();
    let out = ok(&run(
        d,
        &[
            "run",
            "--echo-gold",
            "--dataset",
            data.to_str().unwrap(),
            "--shots",
            shots.to_str().unwrap(),
            "--template",
            "NLI-2",
            "--system-template",
            "PD-6",
            "--shot-mode",
            "few",
            "--run-id",
            "echo",
        ],
    ));
    assert!(out.contains("NLI-2&PD-6"), "{out}");
    assert_eq!(metric(d, "echo", "f1_weighted"), 1.0);
    for f in [
        "manifest.json",
        "predictions.jsonl",
        "metrics.json",
        "transcript.jsonl",
    ] {
        assert!(d.join("results/echo").join(f).is_file(), "missing {f}");
    }
}

#[test]
fn record_then_replay_reproduces_predictions() {
    let (tmp, data, shots) = workspace();
    let d = tmp.path();
    let common = [
        "--dataset",
        data.to_str().unwrap(),
        "--shots",
        shots.to_str().unwrap(),
        "--shot-mode",
        "few",
    ];
    let mut rec = vec!["--record", "rec.jsonl", "run", "--echo-gold", "--run-id", "a"];
    rec.extend(common);
    ok(&run(d, &rec));
    let mut rep = vec![
        "--replay",
        "rec.jsonl",
        "run",
        "--model",
        "echo-gold",
        "--run-id",
        "b",
    ];
    rep.extend(common);
    ok(&run(d, &rep));
    let a = std::fs::read(d.join("results/a/predictions.jsonl")).unwrap();
    let b = std::fs::read(d.join("results/b/predictions.jsonl")).unwrap();
    assert_eq!(a, b);

    // and from the persisted manifest
    ok(&run(
        d,
        &[
            "--replay",
            "rec.jsonl",
            "run",
            "--manifest",
            "results/b/manifest.json",
        ],
    ));
    let c = std::fs::read(d.join("results/b-replay/predictions.jsonl")).unwrap();
    assert_eq!(a, c);
}

#[test]
fn sweep_evaluate_aggregate_report() {
    let (tmp, data, shots) = workspace();
    let d = tmp.path();
    let out = ok(&run(
        d,
        &[
            "sweep",
            "--echo-gold",
            "--dataset",
            data.to_str().unwrap(),
            "--shots",
            shots.to_str().unwrap(),
            "--templates",
            "CM-1,PD-6",
            "--system-templates",
            "none,PD-6",
            "--run-id",
            "sw",
        ],
    ));
    assert_eq!(
        out.lines().filter(|l| l.starts_with("echo-gold")).count(),
        8,
        "{out}"
    );
    assert!(d.join("results/sw-sweep.json").is_file());

    let preds = d.join("results/sw-CM-1-zero/predictions.jsonl");
    let eval = ok(&run(
        d,
        &[
            "evaluate",
            "--preds",
            preds.to_str().unwrap(),
            "--gold",
            data.to_str().unwrap(),
            "--out",
            "eval.json",
        ],
    ));
    assert!(eval.contains("\"accuracy\": 1.0"), "{eval}");

    let agg = ok(&run(
        d,
        &[
            "aggregate",
            "results/sw-CM-1-zero/metrics.json",
            "results/sw-PD-6-few/metrics.json",
        ],
    ));
    let v: serde_json::Value = serde_json::from_str(&agg).unwrap();
    assert_eq!(v["n_runs"], 2, "{agg}");

    let report = ok(&run(d, &["report", "--out", "table.txt"]));
    assert_eq!(
        report.lines().filter(|l| l.starts_with("echo-gold")).count(),
        8,
        "{report}"
    );
}

#[test]
fn build_dataset_calibrate_baseline() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let claims = d.join("claims.jsonl");
    let links = d.join("links.jsonl");
    let mut lines = Vec::new();
    for i in 0..12 {
        lines.push(serde_json::json!({"id": format!("in{i}"), "kind": "input_claim", "text": format!("RT @someone claim {i} https://t.co/x #news")}).to_string());
        lines.push(serde_json::json!({"id": format!("vc{i}"), "kind": "verified_claim", "text": format!("Verified story {i}")}).to_string());
    }
    write_lines(&claims, lines);
    write_lines(
        &links,
        (0..12).map(|i| {
            serde_json::json!({"input_id": format!("in{i}"), "verified_id": format!("vc{i}")}).to_string()
        }),
    );

    ok(&run(
        d,
        &[
            "--seed",
            "3",
            "build-dataset",
            "--positives",
            "links.jsonl",
            "--pool",
            "claims.jsonl",
            "--split",
            "validation",
            "--out",
            "val.jsonl",
            "--stats-out",
            "stats.json",
        ],
    ));
    let val = std::fs::read_to_string(d.join("val.jsonl")).unwrap();
    assert_eq!(val.lines().count(), 24);
    assert!(!val.contains("https://") && !val.contains("RT ") && !val.contains('#'));
    assert!(d.join("stats.json").is_file());

    ok(&run(
        d,
        &[
            "calibrate",
            "--validation",
            "val.jsonl",
            "--embedder",
            "hash-64",
            "--out",
            "threshold.json",
        ],
    ));
    ok(&run(
        d,
        &[
            "build-dataset",
            "--positives",
            "links.jsonl",
            "--pool",
            "claims.jsonl",
            "--out",
            "test.jsonl",
        ],
    ));
    ok(&run(
        d,
        &[
            "baseline",
            "--dataset",
            "test.jsonl",
            "--threshold",
            "threshold.json",
            "--run-id",
            "bl",
        ],
    ));
    let acc = metric(d, "bl", "accuracy");
    assert!((0.0..=1.0).contains(&acc));

    // threshold from one model, embeddings from another
    let out = run(
        d,
        &[
            "baseline",
            "--dataset",
            "test.jsonl",
            "--threshold",
            "threshold.json",
            "--embedder",
            "hash-other",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exit_codes_by_error_class() {
    let (tmp, data, _) = workspace();
    let d = tmp.path();
    let data = data.to_str().unwrap();

    // configuration: unknown template, missing provider, missing credentials
    assert_eq!(
        run(
            d,
            &["run", "--echo-gold", "--dataset", data, "--template", "XX-9"]
        )
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        run(d, &["run", "--dataset", data, "--model", "m"]).status.code(),
        Some(2)
    );
    std::fs::write(
        d.join("cfg.toml"),
        "[provider]\nkind = \"openai\"\nmodel_name = \"gpt-4o-mini\"\n",
    )
    .unwrap();
    let out = run(d, &["--config", "cfg.toml", "run", "--dataset", data]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("OPENAI_API_KEY"));

    // provider: replay transcript lacks the requests
    write_lines(&d.join("empty.jsonl"), []);
    assert_eq!(
        run(
            d,
            &[
                "--replay",
                "empty.jsonl",
                "run",
                "--dataset",
                data,
                "--model",
                "m"
            ]
        )
        .status
        .code(),
        Some(3)
    );

    // data: missing file, few-shot leak
    assert_eq!(
        run(d, &["run", "--echo-gold", "--dataset", "nope.jsonl"])
            .status
            .code(),
        Some(4)
    );
    let leak = d.join("leak.jsonl");
    write_lines(
        &leak,
        (0..2).map(|i| {
            pair_line(
                &format!("t{i}"),
                "x",
                "y",
                if i == 0 { "match" } else { "no_match" },
                "train_shots",
            )
        }),
    );
    let out = run(
        d,
        &[
            "run",
            "--echo-gold",
            "--dataset",
            data,
            "--shots",
            leak.to_str().unwrap(),
            "--shot-mode",
            "few",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
