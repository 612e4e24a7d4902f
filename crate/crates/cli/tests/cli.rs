use std::path::Path;
use std::process::{Command, Output};

fn spinex(args: &str, dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinex")).args(args.split_whitespace()).current_dir(dir).output().unwrap()
}

fn ok(out: Output) -> Output {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    out
}

#[test]
fn regression_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(spinex("gen --family complex_interaction --n 120 --features 4 --seed 3 --out train.csv", d));
    ok(spinex("gen --family complex_interaction --n 10 --features 4 --seed 4 --out query.csv", d));
    ok(spinex("fit --task regression --data train.csv --out model.json", d));
    ok(spinex("predict --model model.json --data query.csv --out pred.csv", d));
    let preds = std::fs::read_to_string(d.join("pred.csv")).unwrap();
    let lines: Vec<&str> = preds.lines().collect();
    assert_eq!(lines[0], "prediction");
    assert_eq!(lines.len(), 11);
    assert!(lines[1..].iter().all(|l| l.parse::<f64>().is_ok_and(f64::is_finite)));

    ok(spinex(
        "explain --model model.json --data query.csv --instance 2 --combinations 2 --out explain.json --svg charts",
        d,
    ));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("explain.json")).unwrap()).unwrap();
    assert_eq!(report["global_importance"].as_array().unwrap().len(), 4);
    assert!(d.join("charts/importance.svg").exists());
    assert!(d.join("charts/interactions.svg").exists());
}

#[test]
fn classification_predictions_carry_probabilities() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(spinex("gen --family classification --n 80 --features 3 --weights 0.7,0.3 --seed 1 --out c.csv", d));
    std::fs::write(d.join("cfg.json"), r#"{"n_neighbors": 7, "metric": "manhattan"}"#).unwrap();
    ok(spinex("fit --task classification --data c.csv --config cfg.json --out m.json", d));
    ok(spinex("predict --model m.json --data c.csv --out p.csv", d));
    let mut rows = csv::Reader::from_path(d.join("p.csv")).unwrap();
    assert_eq!(rows.headers().unwrap(), vec!["prediction", "p_0", "p_1"]);
    for r in rows.records() {
        let r = r.unwrap();
        let label: usize = r[0].parse().unwrap();
        let (p0, p1): (f64, f64) = (r[1].parse().unwrap(), r[2].parse().unwrap());
        assert!((p0 + p1 - 1.0).abs() < 1e-12);
        assert_eq!(label, usize::from(p1 > p0));
    }
}

#[test]
fn exit_codes_separate_usage_data_and_runtime_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(spinex("fit", d).status.code(), Some(1));
    assert_eq!(spinex("gen --family nope --n 5 --out x.csv", d).status.code(), Some(1));
    assert_eq!(spinex("bench --suite custom --out o", d).status.code(), Some(1));
    assert_eq!(spinex("--help", d).status.code(), Some(0));

    std::fs::write(d.join("bad.csv"), "a,target\n1,2\nx,3\n").unwrap();
    assert_eq!(spinex("fit --task regression --data bad.csv --out m.json", d).status.code(), Some(2));
    assert_eq!(spinex("fit --task regression --data missing.csv --out m.json", d).status.code(), Some(2));
}

#[test]
fn manifest_bench_writes_requested_formats() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let manifest = serde_json::json!({
        "suite": "tiny",
        "datasets": [{
            "source": "generator",
            "name": "lin",
            "generator": {"kind": "regression", "family": "linear", "n_samples": 60, "n_features": 3, "seed": 2}
        }],
        "models": [
            {"name": "SPINEX", "kind": "spinex", "config": {}},
            {"name": "KNN", "kind": "knn", "k": 3}
        ],
        "cv": {"kfold": 3},
        "seed": 5
    });
    std::fs::write(d.join("m.json"), manifest.to_string()).unwrap();
    let out = ok(spinex("bench --manifest m.json --formats json,csv,md,svg --out r --per-fold", d));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("determinism_hash: ")));
    for f in ["report.json", "results.csv", "rank_tables.md", "rank_sums_accuracy.svg", "importance_lin.svg"] {
        assert!(d.join("r").join(f).exists(), "{f} missing");
    }
    let csv = std::fs::read_to_string(d.join("r/results.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("SPINEX,lin,2,mae,")));
}
