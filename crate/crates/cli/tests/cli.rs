use std::path::Path;
use std::process::{Command, Output};

fn groupcf(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_groupcf"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn f1(dir: &Path) {
    stdout(&groupcf(
        &["synth", "--sizes", "3,2", "--template", "f1", "--out", "f1"],
        dir,
    ));
}

#[test]
fn synth_then_audit() {
    let tmp = tempfile::tempdir().unwrap();
    f1(tmp.path());
    assert!(tmp.path().join("f1/data.csv").exists());
    let text = stdout(&groupcf(
        &["audit", "--config", "f1/config.json", "--out", "run"],
        tmp.path(),
    ));
    assert!(
        text.contains("group g0: 3 audited, 0 excluded, m=2, k0=2, d0="),
        "{text}"
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("run/report.json")).unwrap())
            .unwrap();
    assert_eq!(report["groups"]["g0"]["k0"], 2);
    assert!((report["groups"]["g0"]["d0"].as_f64().unwrap() - 0.2).abs() < 1e-12);
    for f in [
        "graph.csv",
        "graph.json",
        "tables/groups.csv",
        "tables/wcc.csv",
    ] {
        assert!(tmp.path().join("run").join(f).exists(), "{f}");
    }
    assert!(
        std::fs::read_dir(tmp.path().join("run/curves"))
            .unwrap()
            .count()
            > 0
    );
}

#[test]
fn solve_max_coverage_and_k_center() {
    let tmp = tempfile::tempdir().unwrap();
    f1(tmp.path());
    let args = [
        "solve",
        "max-coverage",
        "--config",
        "f1/config.json",
        "--k",
        "1",
        "--d",
        "0.3",
    ];
    let doc: serde_json::Value =
        serde_json::from_str(&stdout(&groupcf(&args, tmp.path()))).unwrap();
    assert_eq!(doc["solution"]["coverage"], 2);
    assert_eq!(doc["solution"]["selected"], serde_json::json!([3]));

    let args = [
        "solve",
        "k-center",
        "--config",
        "f1/config.json",
        "--k",
        "2",
        "--c",
        "1",
        "--method",
        "greedy",
        "--dp-combine",
        "max",
        "--out",
        "sol",
    ];
    let doc: serde_json::Value =
        serde_json::from_str(&stdout(&groupcf(&args, tmp.path()))).unwrap();
    let cost = doc["solution"]["max_cost"].as_f64().unwrap();
    assert!((cost - 0.2).abs() < 1e-12);
    assert!((doc["allocation"]["cost"].as_f64().unwrap() - 0.2).abs() < 1e-12);
    assert!(tmp.path().join("sol/solution.json").exists());
}

#[test]
fn encode_graph_and_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    f1(tmp.path());
    let text = stdout(&groupcf(
        &["encode", "--config", "f1/config.json", "--out", "e"],
        tmp.path(),
    ));
    assert!(text.contains("encoded 5 rows into 1 columns"), "{text}");
    let text = stdout(&groupcf(
        &["graph", "build", "--config", "f1/config.json", "--out", "g"],
        tmp.path(),
    ));
    assert!(
        text.contains("5 nodes") && text.contains("2 components"),
        "{text}"
    );
    let args = [
        "graph",
        "sweep",
        "--config",
        "f1/config.json",
        "--epsilon",
        "0.1",
        "--epsilon",
        "0.35",
        "--out",
        "s",
    ];
    let text = stdout(&groupcf(&args, tmp.path()));
    assert_eq!(text.lines().count(), 2, "{text}");
    let sweep = std::fs::read_to_string(tmp.path().join("s/sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 3);
}

#[test]
fn acf_reports_attribute() {
    let tmp = tempfile::tempdir().unwrap();
    f1(tmp.path());
    let args = ["acf", "--config", "f1/config.json", "--attribute", "v"];
    let doc: serde_json::Value =
        serde_json::from_str(&stdout(&groupcf(&args, tmp.path()))).unwrap();
    assert_eq!(doc["k0"], 2);
    assert_eq!(doc["acf"][0]["frequency"], 1.0);
}

#[test]
fn errors_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    f1(tmp.path());
    let cases: [&[&str]; 4] = [
        &["audit", "--config", "missing.json"],
        &["audit", "--config", "f1/config.json", "--epsilon=-1"],
        &[
            "solve",
            "k-center",
            "--config",
            "f1/config.json",
            "--k",
            "1",
            "--c",
            "1",
        ],
        &["synth", "--sizes", "3", "--positives", "0", "--out", "x"],
    ];
    for args in cases {
        let out = groupcf(args, tmp.path());
        assert!(!out.status.success(), "{args:?} succeeded");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.starts_with("groupcf: "), "{args:?}: {err}");
    }
    let out = groupcf(
        &[
            "solve",
            "k-center",
            "--config",
            "f1/config.json",
            "--k",
            "1",
            "--c",
            "1",
        ],
        tmp.path(),
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible"));
}
