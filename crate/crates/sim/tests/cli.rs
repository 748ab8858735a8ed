use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qrouting(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qrouting"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn emitted_grid_validates() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("grid.txt");
    let o = qrouting(&["topology-emit", "--out", path_str(&file)]);
    assert_eq!(o.status.code(), Some(0));
    let o = qrouting(&["topology-validate", path_str(&file)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "36 nodes, 56 links, connected, cut OK");
}

#[test]
fn bad_topology_files_fail_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let self_link = dir.path().join("self.txt");
    fs::write(&self_link, "3\n0 1\n# comment\n2 2\n").unwrap();
    let o = qrouting(&["topology-validate", path_str(&self_link)]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 4"), "{err}");

    let split = dir.path().join("split.txt");
    fs::write(&split, "4\n0 1\n2 3\n").unwrap();
    let o = qrouting(&["topology-validate", path_str(&split)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("connected"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("run");
    assert_eq!(qrouting(&["no-such-command"]).status.code(), Some(2));
    let bad = qrouting(&["simulate", "--out", path_str(&prefix), "--load", "-1"]);
    assert_eq!(bad.status.code(), Some(2));
    let bad = qrouting(&["simulate", "--out", path_str(&prefix), "--eta", "1.5"]);
    assert_eq!(bad.status.code(), Some(2));
    let bad = qrouting(&["simulate", "--out", path_str(&prefix), "--policy", "nope"]);
    assert_eq!(bad.status.code(), Some(2));
    let missing = qrouting(&[
        "simulate",
        "--out",
        path_str(&prefix),
        "--topology",
        "/no/such/file",
    ]);
    assert_eq!(missing.status.code(), Some(1));
    let ok = qrouting(&[
        "simulate",
        "--out",
        path_str(&prefix),
        "--steps",
        "200",
        "--policy",
        "cq",
    ]);
    assert_eq!(
        ok.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&ok.stderr)
    );
    let curve = fs::read_to_string(dir.path().join("run_curve.csv")).unwrap();
    assert!(curve.starts_with("step,injected,delivered,in_flight,window_avg_delivery_time\n"));
    assert_eq!(curve.lines().count(), 201);
    let deliveries = fs::read_to_string(dir.path().join("run_deliveries.csv")).unwrap();
    assert!(deliveries.starts_with("packet_id,src,dst,created_at,delivered_at,delivery_time,hops"));
}

#[test]
fn config_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"base": {"load": 0.5, "steps": 100}, "seeds": [4], "policies": ["shortest_path"]}"#,
    )
    .unwrap();
    let out = dir.path().join("t.csv");
    let o = qrouting(&[
        "dump-tables",
        "--config",
        path_str(&cfg),
        "--out",
        path_str(&out),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("node,neighbor,destination,q_value,c_value\n"));

    let typo = dir.path().join("typo.json");
    fs::write(&typo, r#"{"base": {"lod": 0.5}}"#).unwrap();
    let o = qrouting(&[
        "simulate",
        "--config",
        path_str(&typo),
        "--out",
        path_str(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = qrouting(&[
            "compare",
            "--seeds",
            "2",
            "--steps",
            "500",
            "--load",
            "2.15",
            "--policies",
            "q,cq",
            "--out",
            path_str(&out),
        ]);
        assert_eq!(o.status.code(), Some(0));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for file in [
        "curve_q_routing.csv",
        "curve_cq_routing.csv",
        "comparison.csv",
        "manifest.json",
    ] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn sweep_writes_one_row_per_policy_and_load() {
    let dir = tempfile::tempdir().unwrap();
    let o = qrouting(&[
        "sweep",
        "--seeds",
        "2",
        "--steps",
        "400",
        "--loads",
        "0.5,1",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "policy,load,mean,stderr");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("shortest_path,0.5,"));
    assert!(lines[4].starts_with("q_routing,1.0,"));
}
