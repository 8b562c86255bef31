use std::fs;
use std::process::{Command, Output};

fn hp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyperphase"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn threshold_and_giant() {
    let v = stdout_json(&hp(&["threshold", "--n", "100", "--k", "3", "--j", "1"]));
    assert!((v["p"].as_f64().unwrap() - 1e-4).abs() < 1e-18);
    let v = stdout_json(&hp(&["giant", "--c", "1", "--k", "3"]));
    assert!((v["fraction"].as_f64().unwrap() - 0.549236347982693).abs() < 1e-9);
    let v = stdout_json(&hp(&["constants", "--k", "3", "--j", "2", "--eps", "0.1"]));
    assert!(v.is_object());
}

#[test]
fn sample_then_components() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.txt");
    let p = path.to_str().unwrap();
    let out = hp(&["sample", "--n", "30", "--k", "3", "--p", "0.01", "--seed", "4", "--method", "dense", "--out", p]);
    assert!(out.status.success());
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("30 3 4 chacha8"));
    let v = stdout_json(&hp(&["components", "--in", p, "--j", "1"]));
    assert_eq!(v["edges"].as_u64().unwrap() as usize, text.lines().count() - 1);
}

#[test]
fn explore_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.txt");
    let events = dir.path().join("events.csv");
    let cps = dir.path().join("cp.csv");
    let v = stdout_json(&hp(&[
        "explore", "--alg", "dfs2", "--backend", "exact", "--n", "30", "--k", "3", "--j", "2",
        "--eps", "0.3", "--budget-alpha", "0.01", "--seed", "2", "--checkpoints", "50,100,270",
        "--trace-out", trace.to_str().unwrap(), "--events-out", events.to_str().unwrap(),
        "--checkpoints-out", cps.to_str().unwrap(),
    ]));
    assert_eq!(v["summary"]["queries"].as_u64().unwrap(), 270);
    let t = fs::read_to_string(trace).unwrap();
    assert_eq!(t.lines().count(), 270);
    assert!(t.lines().all(|l| l.split(' ').count() == 3));
    assert!(fs::read_to_string(events).unwrap().starts_with("ell,lset,new_starts,jumps,branchings\n"));
    let cp = fs::read_to_string(cps).unwrap();
    assert_eq!(cp.lines().next(), Some("t,ell,delta"));
    assert_eq!(cp.lines().count(), 1 + 3 * 2);
}

#[test]
fn errors_carry_categories() {
    let out = hp(&["explore", "--alg", "dfs1", "--backend", "skip", "--n", "20", "--k", "3", "--j", "1", "--p", "0.1"]);
    assert_eq!(out.status.code(), Some(5));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "config");
    let out = hp(&["explore", "--alg", "dfs2", "--n", "5000", "--k", "3", "--j", "1", "--eps", "0.3"]);
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "capacity");
    let out = hp(&["components", "--in", "/nonexistent/h.txt", "--j", "1"]);
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "io");
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn branching_csv() {
    let out = hp(&["branching", "--r", "2", "--m", "5", "--q", "0.2", "--cap", "1000", "--runs", "5", "--seed", "3"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("seed,tau,capped,generations"));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn sweep_and_summarize() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    let out = dir.path().join("runs.jsonl");
    fs::write(
        &spec,
        r#"{"schema_version":1,"kind":"subcritical-size","n":500,"k":3,"j":1,"eps":-0.3,
            "seeds":{"master":1,"runs":5}}"#,
    )
    .unwrap();
    let run = |workers: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_hyperphase"))
            .args(["sweep", "--spec", spec.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .env("HYPERPHASE_WORKERS", workers)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let text = fs::read_to_string(&out).unwrap();
        text.lines()
            .map(|l| {
                let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
                v["wall_time_ms"] = 0.into();
                v
            })
            .collect::<Vec<_>>()
    };
    let a = run("1");
    assert_eq!(a.len(), 5);
    assert_eq!(a[0]["schema_version"], 1);
    assert_eq!(a, run("3"));
    let summary = fs::read_to_string(dir.path().join("runs.jsonl.summary.csv")).unwrap();
    assert!(summary.starts_with("schema_version,kind,"));
    let s = hp(&["summarize", "--in", out.to_str().unwrap()]);
    assert_eq!(String::from_utf8(s.stdout).unwrap(), summary);

    let bad = Command::new(env!("CARGO_BIN_EXE_hyperphase"))
        .args(["sweep", "--spec", spec.to_str().unwrap()])
        .env("HYPERPHASE_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(5));
}
