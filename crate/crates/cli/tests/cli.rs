use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn forestmmd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_forestmmd"))
        .args(args)
        .env("FORESTMMD_THREADS", "2")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen(dir: &TempDir, name: &str, model: &str, n: &str, p: &str) -> PathBuf {
    let out = dir.path().join(name);
    let o = forestmmd(&[
        "gen",
        "--model",
        model,
        "--n",
        n,
        "--p",
        p,
        "--seed",
        "7",
        "--out",
        path_str(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

#[test]
fn gen_writes_header_and_rows_deterministically() {
    let dir = TempDir::new().unwrap();
    let a = gen(&dir, "a.csv", "2", "100", "5");
    let b = gen(&dir, "b.csv", "2", "100", "5");
    let text = std::fs::read_to_string(&a).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x1,x2,x3,x4,x5,target");
    assert_eq!(lines.len(), 101);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 6));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn usage_and_data_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let o = forestmmd(&[
        "gen",
        "--model",
        "9",
        "--out",
        path_str(&dir.path().join("x.csv")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown model"));

    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    assert_eq!(
        forestmmd(&["importance", path_str(&empty)]).status.code(),
        Some(2)
    );

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "a,b,target\n1,2,3\n4,oops,6\n").unwrap();
    let o = forestmmd(&["importance", path_str(&bad), "--m0", "2"]);
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(msg.contains("row 2") && msg.contains("column 2"), "{msg}");

    let o = forestmmd(&["importance", path_str(&bad), "--target", "y"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`y` not found"));

    let o = forestmmd(&["benchmark", "--reps", "0"]);
    assert_eq!(o.status.code(), Some(2));

    let o = forestmmd(&["gen", "--model", "1", "--out", "/nonexistent-dir/x.csv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cannot write"));
}

#[test]
fn select_rejects_infeasible_sizes() {
    let dir = TempDir::new().unwrap();
    let csv = gen(&dir, "d.csv", "2", "100", "3");
    let o = forestmmd(&["select", path_str(&csv)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("m0 + 2*m1 + 2*m2"));
}

#[test]
fn importance_ranks_the_signal_and_min_depth_ascends() {
    let dir = TempDir::new().unwrap();
    let csv = gen(&dir, "d.csv", "2", "500", "6");
    for metric in ["bcfi", "min-depth"] {
        let json = dir.path().join(format!("{metric}.json"));
        let o = forestmmd(&[
            "importance",
            path_str(&csv),
            "--m0",
            "400",
            "--R",
            "5",
            "--B",
            "40",
            "--metric",
            metric,
            "--json-out",
            path_str(&json),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
        let ranking = report["importance"]["ranking"].as_array().unwrap();
        assert_eq!(ranking[0]["name"], "x1");
        let values: Vec<f64> = ranking
            .iter()
            .map(|r| r["value"].as_f64().unwrap())
            .collect();
        let sorted = values.windows(2).all(|w| {
            if metric == "bcfi" {
                w[0] >= w[1]
            } else {
                w[0] <= w[1]
            }
        });
        assert!(sorted, "{metric}: {values:?}");
        assert!(report.get("timings").is_none());
    }
}

#[test]
fn select_report_round_trips_and_respects_the_sequence_contract() {
    let dir = TempDir::new().unwrap();
    let csv = gen(&dir, "d.csv", "2", "700", "5");
    let json = dir.path().join("sel.json");
    let o = forestmmd(&[
        "select",
        path_str(&csv),
        "--m0",
        "150",
        "--m1",
        "100",
        "--m2",
        "150",
        "--R",
        "5",
        "--B",
        "30",
        "--n-perm",
        "50",
        "--epochs",
        "30",
        "--with-timings",
        "--json-out",
        path_str(&json),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("selected ("));
    let text = std::fs::read_to_string(&json).unwrap();
    let report: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string_pretty(&report).unwrap() + "\n", text);
    assert!(report["timings"]["total_seconds"].as_f64().unwrap() >= 0.0);

    let sel = &report["selection"];
    let steps = sel["steps"].as_array().unwrap();
    let k_hat = sel["k_hat"].as_u64().unwrap() as usize;
    assert_eq!(steps.len(), k_hat);
    assert!(steps[..k_hat - 1].iter().all(|s| s["reject"] == true));
    assert_eq!(sel["selected"].as_array().unwrap().len(), k_hat);
    assert_eq!(report["config"]["command"], "select");
    assert_eq!(report["config"]["selection"]["alpha"], 0.05);
}

#[test]
fn benchmark_writes_rows_and_summary() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("rows.csv");
    let json = dir.path().join("bench.json");
    let o = forestmmd(&[
        "benchmark",
        "--models",
        "2,5",
        "--p",
        "4",
        "--sizes",
        "60",
        "--reps",
        "2",
        "--R",
        "3",
        "--B",
        "20",
        "--n-perm",
        "30",
        "--epochs",
        "20",
        "--out",
        path_str(&csv),
        "--json-out",
        path_str(&json),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(
        rows.lines().next().unwrap(),
        "model_id,rep,hits,wrong,seconds"
    );
    assert_eq!(rows.lines().count(), 5);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let summary = report["benchmark"]["summary"].as_array().unwrap();
    assert_eq!(summary.len(), 2);
    assert!(summary
        .iter()
        .all(|s| s["reps"] == 2 && s.get("mean_seconds").is_none()));
    assert!(report["config"]["note"]
        .as_str()
        .unwrap()
        .contains("2 Monte Carlo repetitions"));
}

#[test]
fn bad_thread_variable_is_a_usage_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_forestmmd"))
        .args(["benchmark", "--reps", "1"])
        .env("FORESTMMD_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
