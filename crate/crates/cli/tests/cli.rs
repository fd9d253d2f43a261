use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mlaco(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlaco"))
        .args(args)
        .current_dir(dir)
        .env("MLACO_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = mlaco(dir.path(), &["generate", "--n", "15", "--count", "3", "--seed", "7", "--out", out]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert!(String::from_utf8_lossy(&o.stdout).contains("[[configs]]"));
    }
    let mut names: Vec<_> = fs::read_dir(dir.path().join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 3);
    for name in names {
        let a = fs::read(dir.path().join("a").join(&name)).unwrap();
        let b = fs::read(dir.path().join("b").join(&name)).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&mlaco(dir.path(), &["generate", "--n", "1"])), 1);
    assert_eq!(code(&mlaco(dir.path(), &["generate", "--n", "5", "--budget", "9:3"])), 1);
    assert_eq!(code(&mlaco(dir.path(), &["no-such-command"])), 1);
    assert_eq!(code(&mlaco(dir.path(), &["--help"])), 0);
    let o = mlaco(dir.path(), &["label", "missing/*.json"]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
}

#[test]
fn data_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.json"), "{ not json").unwrap();
    let o = mlaco(dir.path(), &["solve", "bad.json"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    fs::write(dir.path().join("a.txt"), "1\n2\n").unwrap();
    fs::write(dir.path().join("b.txt"), "1\n").unwrap();
    assert_eq!(code(&mlaco(dir.path(), &["stats", "a.txt", "b.txt"])), 2);
}

#[test]
fn stats_reports_exact_p_value() {
    let dir = tempfile::tempdir().unwrap();
    let a: String = (1..=8).map(|k| format!("{}\n", 10 + k)).collect();
    let b: String = (1..=8).map(|_| "10\n").collect();
    fs::write(dir.path().join("a.txt"), a).unwrap();
    fs::write(dir.path().join("b.txt"), b).unwrap();
    let o = mlaco(dir.path(), &["stats", "a.txt", "b.txt"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("W+ = 36"), "{text}");
    assert!(text.contains("p = 0.00781"), "{text}");
}

/// label -> train -> predict -> solve -> benchmark -> compare on tiny instances.
#[test]
fn pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let ok = |args: &[&str]| {
        let o = mlaco(d, args);
        assert_eq!(code(&o), 0, "{args:?}: {}", stderr(&o));
        String::from_utf8_lossy(&o.stdout).into_owned()
    };
    ok(&["generate", "--n", "10", "--count", "4", "--seed", "1", "--out", "inst"]);
    let msg = ok(&["label", "inst/*.json", "--time-limit", "20", "--sample-factor", "20", "--out", "labels"]);
    assert!(msg.starts_with("4/4 proved"), "{msg}");
    let record: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("labels/rand-n10-s1.label.json")).unwrap()).unwrap();
    assert_eq!(record["proved"], true);
    assert_eq!(record["optimal_route"][0], 1);

    ok(&["train", "labels/labeled.csv", "--out", "model.json"]);
    let pred = ok(&["predict", "inst/rand-n10-s1.json", "--model", "model.json", "--samples", "200"]);
    assert_eq!(pred.lines().count(), 1 + 10 * 9);

    let solved = ok(&[
        "solve", "inst/rand-n10-s1.json", "--integration", "eta_hat", "--model", "model.json",
        "--budget-factor", "50", "--trace", "trace.csv",
    ]);
    let exact = ok(&["solve", "inst/rand-n10-s1.json", "--exact", "20"]);
    let objective = |s: &str| s.lines().next().unwrap().to_string();
    assert_eq!(objective(&solved), objective(&exact));
    assert!(fs::read_to_string(d.join("trace.csv")).unwrap().starts_with("constructions,best_objective"));

    fs::write(
        d.join("bench.toml"),
        r#"
        model = "model.json"
        runs = 2
        budget_factor = 20
        output = "report"
        [instances]
        glob = "inst/*.json"
        [[configs]]
        name = "MMAS"
        [[configs]]
        name = "SVM-MMAS"
        integration = "eta_hat"
        "#,
    )
    .unwrap();
    let model_before = fs::read(d.join("model.json")).unwrap();
    ok(&["benchmark", "bench.toml"]);
    assert_eq!(fs::read(d.join("model.json")).unwrap(), model_before);
    for f in ["runs.csv", "summary.csv", "comparisons.csv", "curves.csv", "report.txt", "effective.json"] {
        assert!(d.join("report").join(f).is_file(), "{f}");
    }
    let runs = fs::read_to_string(d.join("report/runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 2 * 4 * 2);
    assert_eq!(fs::read_dir(d.join("report/traces")).unwrap().count(), 16);
    let cmp = ok(&["compare", "report/runs.csv", "--baseline", "MMAS"]);
    assert!(cmp.contains("SVM-MMAS vs MMAS over 4 instances"), "{cmp}");
}

#[test]
fn single_cell_benchmark_and_sota_preset() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("one.toml"),
        r#"
        runs = 1
        budget_factor = 10
        [instances]
        generate = { n = 8, count = 1, seed = 3 }
        [[configs]]
        name = "MMAS"
        "#,
    )
    .unwrap();
    let o = mlaco(d, &["benchmark", "one.toml", "--out", "r1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = fs::read_to_string(d.join("r1/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2);

    // the preset integrates predictions, so a model is required
    let o = mlaco(d, &["benchmark", "one.toml", "--out", "r2", "--preset", "sota"]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    assert!(stderr(&o).contains("no model"));
}

#[test]
fn paper_scale_and_effective_config() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("m.toml"),
        r#"
        [instances]
        generate = { n = 5, count = 1 }
        [[configs]]
        name = "AS"
        variant = "as"
        ants = 2
        budget = 40
        "#,
    )
    .unwrap();
    let o = mlaco(d, &["benchmark", "m.toml", "--out", "r", "--paper-scale"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let runs = fs::read_to_string(d.join("r/runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 25);
    let eff: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("r/effective.json")).unwrap()).unwrap();
    let cfg = &eff["effective_configs"]["AS"]["rand-n5-s0"];
    assert_eq!(cfg["ants"], 2);
    assert_eq!(cfg["budget"], 40, "explicit budget beats --paper-scale");
    assert_eq!(cfg["variant"], "as");
}

#[test]
fn pipeline_is_reproducible_and_rejects_gcn() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let manifest = r#"
        time_limit = 20
        max_instances = 2
        sample_factor = 20
        [instances]
        generate = { n = 9, count = 3, seed = 4 }
    "#;
    fs::write(d.join("t.toml"), format!("kind = \"svm\"\n{manifest}")).unwrap();
    let mut models = Vec::new();
    for out in ["p1", "p2"] {
        let o = mlaco(d, &["pipeline", "t.toml", "--out", out]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        models.push(fs::read(d.join(out).join("model.json")).unwrap());
        let t: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(d.join(out).join("timings.json")).unwrap()).unwrap();
        assert!(t["solve"].is_number() && t["assemble"].is_number() && t["train"].is_number());
    }
    assert_eq!(models[0], models[1]);

    fs::write(d.join("g.toml"), format!("kind = \"gcn\"\n{manifest}")).unwrap();
    let o = mlaco(d, &["pipeline", "g.toml", "--out", "p3"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("unsupported model kind `gcn`"));
    assert!(!d.join("p3/model.json").exists());
}
