use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dodge::dataset::{self, CsvSchema};
use dodge::{synthetic, Matrix};

fn dodge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dodge"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn defect_csv(dir: &Path, name: &str, n: usize, seed: u64) -> PathBuf {
    let path = dir.join(name);
    let schema = CsvSchema::new("bug", "1").effort("loc").version("version");
    dataset::write_csv(&path, &synthetic::low_dim_classification(n, 4, seed), &schema).unwrap();
    path
}

fn matrix_csv(dir: &Path, name: &str, x: &Matrix) -> PathBuf {
    let path = dir.join(name);
    let mut text: String = (0..x.cols()).map(|j| format!("x{j}")).collect::<Vec<_>>().join(",");
    text.push_str(",label\n");
    for (i, row) in x.iter_rows().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        text.push_str(&format!("{},{}\n", cells.join(","), i % 2));
    }
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn optimize_writes_every_trial_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = defect_csv(dir.path(), "d.csv", 200, 1);
    let mut reports = Vec::new();
    for (i, optimizer) in ["dodge", "dodge", "tpe", "random"].iter().enumerate() {
        let out = dir.path().join(format!("r{i}.jsonl"));
        let o = dodge(&[
            "optimize", "--data", s(&data), "--target", "bug", "--positive-label", "1", "--optimizer", optimizer,
            "--budget", "30", "--seed", "7", "--out", s(&out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).starts_with("best: "));
        let text = std::fs::read_to_string(&out).unwrap();
        assert_eq!(text.lines().count(), 30);
        for line in text.lines() {
            serde_json::from_str::<serde_json::Value>(line).unwrap();
        }
        reports.push(text);
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn optimize_popt_needs_effort() {
    let dir = tempfile::tempdir().unwrap();
    let data = defect_csv(dir.path(), "d.csv", 120, 2);
    let out = dir.path().join("r.jsonl");
    let base = ["optimize", "--data", s(&data), "--target", "bug", "--goal", "popt20", "--budget", "6", "--out", s(&out)];
    assert_eq!(dodge(&base).status.code(), Some(2));
    let mut with_effort = base.to_vec();
    with_effort.extend(["--effort", "loc"]);
    assert_eq!(dodge(&with_effort).status.code(), Some(0));
}

#[test]
fn bad_flags_exit_two_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let data = defect_csv(dir.path(), "d.csv", 60, 3);
    let out = dir.path().join("r.jsonl");
    let o = dodge(&["optimize", "--data", s(&data), "--target", "bug", "--optimizer", "hyperband", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(dodge(&["optimize", "--data", s(&data), "--target", "bug", "--budget", "0", "--out", s(&out)]).status.code(), Some(2));
    assert_eq!(dodge(&["nonsense"]).status.code(), Some(2));
    assert_eq!(dodge(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_failures_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.jsonl");
    let missing = dir.path().join("nope.csv");
    let o = dodge(&["optimize", "--data", s(&missing), "--target", "bug", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(String::from_utf8_lossy(&o.stderr).lines().count(), 1);

    let data = defect_csv(dir.path(), "d.csv", 60, 4);
    let o = dodge(&["optimize", "--data", s(&data), "--target", "no_such_column", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn intrinsic_recommendations() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (synthetic::embedded_segment(2000, 4, 1), "simple optimizer (DODGE) recommended"),
        (synthetic::uniform_cube(5000, 5, 2), "inconclusive"),
        (synthetic::uniform_cube(5000, 10, 3), "simple optimizer not recommended"),
    ];
    for (i, (x, advice)) in cases.iter().enumerate() {
        let data = matrix_csv(dir.path(), &format!("m{i}.csv"), x);
        let json = dir.path().join(format!("m{i}.json"));
        let table = dir.path().join(format!("m{i}.tsv"));
        let o = dodge(&["intrinsic", "--data", s(&data), "--target", "label", "--out", s(&json), "--table", s(&table)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let text = stdout(&o);
        assert_eq!(text.lines().last().unwrap(), *advice, "{text}");
        let report: serde_json::Value = serde_json::from_slice(&std::fs::read(&json).unwrap()).unwrap();
        assert_eq!(report["radii"].as_array().unwrap().len(), 20);
        // radii where no pair is close enough have no logarithm and are left out
        let nonzero = report["corr_sums"].as_array().unwrap().iter().filter(|c| c.as_f64().unwrap() > 0.0).count();
        assert_eq!(std::fs::read_to_string(&table).unwrap().lines().count(), nonzero + 1);
    }
}

#[test]
fn intrinsic_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let data = matrix_csv(dir.path(), "m.csv", &synthetic::uniform_cube(3000, 3, 5));
    let run = |seed: &str| stdout(&dodge(&["intrinsic", "--data", s(&data), "--skip", "label", "--seed", seed]));
    assert_eq!(run("4"), run("4"));
}

fn study_spec(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("study.toml");
    std::fs::write(&path, body).unwrap();
    path
}

const SMALL_STUDY: &str = r#"
rig = "rig1"
repeats = 25
seed = 5

[[datasets]]
name = "d"
path = "d.csv"
target = "bug"
positive_label = "1"

[[optimizers]]
kind = "dodge"
budget = { n1 = 3, n2 = 3 }

[[optimizers]]
kind = "random"
budget = { n1 = 3, n2 = 3 }
"#;

#[test]
fn study_then_compare() {
    let dir = tempfile::tempdir().unwrap();
    defect_csv(dir.path(), "d.csv", 150, 6);
    let spec = study_spec(dir.path(), SMALL_STUDY);
    let out = dir.path().join("out");
    let o = dodge(&["study", "--spec", s(&spec), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let results = out.join("results.csv");
    let summary = std::fs::read_to_string(out.join("summary.tsv")).unwrap();
    assert_eq!(stdout(&o), summary);

    let mut reader = csv::Reader::from_path(&results).unwrap();
    assert_eq!(reader.records().count(), 50);

    let o = dodge(&["compare", "--results", s(&results), "--seed", "5"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), summary);
}

#[test]
fn malformed_or_incomplete_specs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    // data file never written
    let spec = study_spec(dir.path(), SMALL_STUDY);
    assert_eq!(dodge(&["study", "--spec", s(&spec), "--out", s(&out)]).status.code(), Some(2));
    let spec = study_spec(dir.path(), &SMALL_STUDY.replace("repeats = 25", "repeats = 0"));
    assert_eq!(dodge(&["study", "--spec", s(&spec), "--out", s(&out)]).status.code(), Some(2));
    let spec = study_spec(dir.path(), "rig = 3");
    assert_eq!(dodge(&["study", "--spec", s(&spec), "--out", s(&out)]).status.code(), Some(2));
}
