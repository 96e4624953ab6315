use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn expose(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_expose")).args(args).output().expect("spawn expose")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Two labelled clusters in 3-d: label 1 near the origin, label 0 near (4, 4, 4).
fn write_clusters(dir: &Path) -> PathBuf {
    let mut text = String::new();
    for i in 0..120 {
        let a = (i as f64 * 0.37).sin() * 0.5;
        let b = (i as f64 * 0.91).cos() * 0.5;
        let c = (i as f64 * 1.73).sin() * 0.5;
        if i % 6 == 0 {
            text.push_str(&format!("{},{},{},0\n", 4.0 + a, 4.0 + b, 4.0 + c));
        } else {
            text.push_str(&format!("{a},{b},{c},1\n"));
        }
    }
    let path = dir.join("clusters.csv");
    fs::write(&path, text).unwrap();
    path
}

fn train(dir: &Path, data: &Path, model: &str, seed: &str) -> PathBuf {
    let out = dir.join(model);
    let o = expose(&[
        "train", "--data", s(data), "--has-labels", "--normal-label", "1", "--bandwidth", "1.0", "--expansions",
        "128", "--iterations", "200", "--seed", seed, "--output", s(&out),
    ]);
    assert!(o.status.success(), "train failed: {}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn no_arguments_exits_with_usage() {
    let o = expose(&[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn iterations_and_epsilon_conflict_at_parse_time() {
    let o = expose(&[
        "train", "--data", "missing.csv", "--bandwidth", "1", "--iterations", "10", "--epsilon", "0.1", "--output",
        "m",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn epsilon_prints_derived_horizon() {
    let dir = TempDir::new().unwrap();
    let data = write_clusters(dir.path());
    let model = dir.path().join("m.bin");
    let o = expose(&[
        "train", "--data", s(&data), "--has-labels", "--epsilon", "0.005", "--bandwidth", "1.0", "--expansions",
        "64", "--output", s(&model),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).lines().any(|l| l == "T = 100"), "stdout: {}", stdout(&o));

    let o = expose(&[
        "train", "--data", s(&data), "--has-labels", "--epsilon", "0.1", "--epsilon-mode", "parameter", "--bandwidth",
        "1.0", "--expansions", "64", "--output", s(&model),
    ]);
    assert!(stdout(&o).lines().any(|l| l == "T = 100"), "stdout: {}", stdout(&o));
}

#[test]
fn train_then_score() {
    let dir = TempDir::new().unwrap();
    let data = write_clusters(dir.path());
    let model = train(dir.path(), &data, "m.bin", "5");
    let scores = dir.path().join("scores.csv");
    let o = expose(&[
        "score", "--data", s(&data), "--has-labels", "--model", s(&model), "--threshold", "0.3", "--output",
        s(&scores),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&scores).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("index,score,label,prediction"));
    let mut n = 0;
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let v: f64 = f[1].parse().unwrap();
        assert!((-1.0..=1.0).contains(&v), "score {v} out of range");
        let expected = if v >= 0.3 { "normal" } else { "anomaly" };
        assert_eq!(f[3], expected);
        // Far cluster scores low, near cluster high.
        assert_eq!(f[2] == "1", v >= 0.3, "row {line}");
        n += 1;
    }
    assert_eq!(n, 120);
}

#[test]
fn same_seed_gives_identical_model_bytes() {
    let dir = TempDir::new().unwrap();
    let data = write_clusters(dir.path());
    let a = train(dir.path(), &data, "a.bin", "9");
    let b = train(dir.path(), &data, "b.bin", "9");
    let c = train(dir.path(), &data, "c.bin", "10");
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn eval_reports_threshold_and_error() {
    let dir = TempDir::new().unwrap();
    let data = write_clusters(dir.path());
    let model = train(dir.path(), &data, "m.bin", "3");
    let out = dir.path().join("eval.csv");
    let o = expose(&["eval", "--data", s(&data), "--has-labels", "--model", s(&model), "--output", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let err: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("error = "))
        .expect("error line")
        .parse()
        .unwrap();
    assert_eq!(err, 0.0);
    assert!(fs::read_to_string(&out).unwrap().starts_with("index,score,label,prediction\n"));
}

#[test]
fn missing_file_is_io_error_and_bad_data_is_data_error() {
    let dir = TempDir::new().unwrap();
    let o = expose(&[
        "train", "--data", s(&dir.path().join("nope.csv")), "--bandwidth", "1", "--iterations", "5", "--output",
        s(&dir.path().join("m")),
    ]);
    assert_eq!(o.status.code(), Some(3));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "1,2\n3,x\n").unwrap();
    let o = expose(&[
        "train", "--data", s(&bad), "--bandwidth", "1", "--iterations", "5", "--output", s(&dir.path().join("m")),
    ]);
    assert_eq!(o.status.code(), Some(4));

    let o = expose(&[
        "train", "--data", s(&write_clusters(dir.path())), "--has-labels", "--bandwidth", "1", "--iterations", "5",
        "--theta", "0.5", "--output", s(&dir.path().join("m")),
    ]);
    assert_eq!(o.status.code(), Some(4), "θ ≤ 1/2 is rejected");
}

#[test]
fn score_rejects_dimension_mismatch() {
    let dir = TempDir::new().unwrap();
    let data = write_clusters(dir.path());
    let model = train(dir.path(), &data, "m.bin", "1");
    let two_d = dir.path().join("two.csv");
    fs::write(&two_d, "0,0\n1,1\n").unwrap();
    let o = expose(&["score", "--data", s(&two_d), "--model", s(&model), "--output", s(&dir.path().join("o.csv"))]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn features_writes_unit_norm_rows() {
    let dir = TempDir::new().unwrap();
    let data = write_clusters(dir.path());
    let out = dir.path().join("feat.csv");
    let o = expose(&[
        "features", "--data", s(&data), "--has-labels", "--bandwidth", "2", "--expansions", "16", "--output", s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 120);
    for r in &rows {
        assert_eq!(r.len(), 33);
        let norm2: f64 = r[..32].iter().map(|v| v * v).sum();
        assert!((norm2 - 1.0).abs() < 1e-12);
    }
}

#[test]
fn convergence_writes_diagnostics_and_manifest() {
    let dir = TempDir::new().unwrap();
    let data = write_clusters(dir.path());
    let out = dir.path().join("diag.csv");
    let o = expose(&[
        "convergence", "--data", s(&data), "--has-labels", "--normal-label", "1", "--bandwidth", "1", "--expansions",
        "64", "--iterations", "60", "--eval-every", "20", "--repetitions", "3", "--test-size", "30", "--seed", "4",
        "--include-bounds", "--per-run", "--output", s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,objective_gap,param_dist,mean_score_dev,err_sgd,err_full,bound_param,bound_obj");
    assert!(lines.len() >= 4);
    assert!(dir.path().join("diag.run00.csv").exists());
    assert!(dir.path().join("diag.run02.csv").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("diag.manifest.json")).unwrap()).unwrap();
    assert!(manifest.is_object());
}

fn kdd_line(duration: f64, service: &str, label: &str) -> String {
    let mut f: Vec<String> = (0..41).map(|j| format!("{}", j % 3)).collect();
    f[0] = duration.to_string();
    f[1] = "tcp".into();
    f[2] = service.into();
    f[3] = "SF".into();
    f.push(label.into());
    f.join(",")
}

#[test]
fn kdd_train_writes_preprocessor_and_score_reuses_it() {
    let dir = TempDir::new().unwrap();
    let train_file = dir.path().join("train.kdd");
    let lines: Vec<String> = (0..40)
        .map(|i| kdd_line(i as f64, if i % 2 == 0 { "http" } else { "smtp" }, if i < 35 { "normal." } else { "smurf." }))
        .collect();
    fs::write(&train_file, lines.join("\n")).unwrap();
    let model = dir.path().join("kdd.bin");
    let o = expose(&[
        "train", "--data", s(&train_file), "--format", "kdd", "--normal-label", "1", "--bandwidth", "1",
        "--expansions", "32", "--iterations", "50", "--output", s(&model),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("kdd.bin.kdd.json").exists());

    let scores = dir.path().join("s.csv");
    let o = expose(&[
        "score", "--data", s(&train_file), "--format", "kdd", "--model", s(&model), "--output", s(&scores),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let unseen = dir.path().join("unseen.kdd");
    fs::write(&unseen, kdd_line(1.0, "telnet", "normal.")).unwrap();
    let o = expose(&["score", "--data", s(&unseen), "--format", "kdd", "--model", s(&model), "--output", s(&scores)]);
    assert_eq!(o.status.code(), Some(4), "unknown category must be rejected");
}
