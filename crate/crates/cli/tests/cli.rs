use std::path::Path;
use std::process::{Command, Output};

fn crashcause(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crashcause"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = crashcause(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

const SPEC: &str = "n = 1200\nd = 6\nplanted = [1, 4]\nlag = 1\nseed = 3\n";

const LEARNERS: &str = "seed = 1
[rf]
estimators = 5
[xgb]
rounds = 5
[dnn]
layers = [8]
epochs = 2
batch = 64
";

#[test]
fn step_by_step_workflow() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("spec.toml"), SPEC).unwrap();
    std::fs::write(d.join("learners.toml"), LEARNERS).unwrap();

    ok(d, &["synth", "--spec", "spec.toml", "--out", "data.csv", "--truth", "truth.txt"]);
    let truth = std::fs::read_to_string(d.join("truth.txt")).unwrap();
    assert!(truth.contains("planted_names=x1,x4"));

    let s = ok(d, &["ingest", "--data", "data.csv", "--summary", "summary.csv", "--schema-out", "schema.csv"]);
    assert!(s.contains("rows=1200"));
    ok(d, &["split", "--data", "data.csv", "--schema", "schema.csv", "--train", "train.csv", "--test", "test.csv"]);

    let top = ok(
        d,
        &["rank", "--data", "train.csv", "--lag", "auto", "--max-lag", "3", "--top", "2", "--out", "ranking.csv", "--chart", "ranking.svg"],
    );
    let mut names: Vec<&str> = top.trim().split(',').collect();
    names.sort_unstable();
    assert_eq!(names, vec!["x1", "x4"]);
    assert!(std::fs::read_to_string(d.join("ranking.csv")).unwrap().starts_with("rank,feature,G,restricted_var,full_var"));

    let b = ok(d, &["balance", "--data", "train.csv", "--k", "5", "--seed", "2", "--out", "balanced.csv", "--report", "balance.txt"]);
    assert!(b.starts_with("PDO="));

    for algo in ["dt", "rf", "xgb", "dnn"] {
        let model = format!("{algo}.json");
        ok(
            d,
            &["train", "--algo", algo, "--data", "balanced.csv", "--features", "top:2", "--ranking", "ranking.csv", "--config", "learners.toml", "--model-out", &model],
        );
        let svg = format!("{algo}.svg");
        ok(d, &["evaluate", "--model", &model, "--test", "test.csv", "--out", "metrics.txt", "--matrix", &svg]);
        let m = std::fs::read_to_string(d.join("metrics.txt")).unwrap();
        assert!(m.contains("rows=240"));
        assert!(std::fs::read_to_string(d.join(&svg)).unwrap().contains(">KA<"));
    }
}

#[test]
fn pipeline_run_and_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("spec.toml"), SPEC).unwrap();
    ok(d, &["synth", "--spec", "spec.toml", "--out", "data.csv"]);
    let config = format!("data = \"data.csv\"\ntop_k = 3\n{}", LEARNERS.trim_start_matches("seed = 1\n"));
    std::fs::write(d.join("config.toml"), config).unwrap();
    ok(d, &["pipeline", "run", "--config", "config.toml", "--out", "out"]);
    let manifest = std::fs::read_to_string(d.join("out/manifest.txt")).unwrap();
    assert!(manifest.contains("run.status = \"ok\""));

    let defaults = ok(d, &["pipeline", "defaults"]);
    for line in ["fraction = 0.8", "lag = 4", "top_k = 17", "rf.estimators = 1000", "dnn.epochs = 150", "dnn.batch = 2048"] {
        assert!(defaults.lines().any(|l| l == line), "{line}");
    }
}

#[test]
fn errors_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let out = crashcause(d, &["ingest", "--data", "nope.csv", "--summary", "s.csv"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.csv"));

    std::fs::write(d.join("bad.toml"), "fraction = 2.0\n").unwrap();
    let out = crashcause(d, &["pipeline", "run", "--config", "bad.toml", "--out", "o"]);
    assert!(!out.status.success());

    let out = crashcause(d, &["train", "--algo", "svm", "--data", "x.csv", "--model-out", "m.json"]);
    assert!(!out.status.success());
}
