use std::path::Path;
use std::process::{Command, Output};

fn epr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epr"))
        .args(args)
        .output()
        .expect("spawn epr")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn simulate_deterministic_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("c.csv");
    let o = epr(&[
        "simulate",
        "--model",
        "cycle4",
        "--forward",
        "1",
        "--backward",
        "0",
        "--rounds",
        "8",
        "--output",
        p(&csv),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    let states: Vec<usize> = text
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(states.len(), 8);
    let successor = [2, 0, 3, 1];
    for w in states.windows(2) {
        assert_eq!(w[1], successor[w[0]]);
    }
}

#[test]
fn simulate_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let path = dir.path().join(name);
        let o = epr(&[
            "simulate",
            "--model",
            "vnm",
            "--p",
            "0.3",
            "--q",
            "0.8",
            "--rounds",
            "50",
            "--treatments",
            "2",
            "--seed",
            seed,
            "--output",
            p(&path),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(path).unwrap()
    };
    assert_eq!(run("a.csv", "4"), run("b.csv", "4"));
    assert_ne!(run("a.csv", "4"), run("c.csv", "5"));
}

#[test]
fn simulate_vnm_marginals_and_minimax_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("v.csv");
    let out = dir.path().join("v.json");
    let o = epr(&[
        "simulate",
        "--model",
        "vnm",
        "--p",
        "0.7",
        "--q",
        "0.2",
        "--sessions",
        "3",
        "--rounds",
        "1000",
        "--encoding",
        "actions",
        "--output",
        p(&csv),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = epr(&[
        "minimax-test",
        "--input",
        p(&csv),
        "--output",
        p(&out),
        "--reps",
        "100",
        "--reproducible",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = read_json(&out);
    let m = &report["treatments"][0]["marginals"];
    let n = 3000.0;
    assert!((m["p"].as_f64().unwrap() - 0.7).abs() < 3.0 * (0.7f64 * 0.3 / n).sqrt());
    assert!((m["q"].as_f64().unwrap() - 0.2).abs() < 3.0 * (0.2f64 * 0.8 / n).sqrt());
    assert_eq!(report["treatments"][0]["null_models"][0]["reps"], 100);
    // stdout carries a machine-readable summary only
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["command"], "minimax-test");
}

#[test]
fn empty_file_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("empty.csv");
    std::fs::write(&csv, "").unwrap();
    let o = epr(&["analyze", "--input", p(&csv), "--output", p(&dir.path().join("r.json"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("parse error"), "{}", stderr(&o));
}

#[test]
fn out_of_range_state_names_line() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    std::fs::write(&csv, "treatment_id,session_id,round,state\nT,a,1,0\nT,a,2,7\n").unwrap();
    let o = epr(&["analyze", "--input", p(&csv), "--output", p(&dir.path().join("r.json"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn config_is_validated_before_input_is_read() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let out = dir.path().join("r.json");
    for flags in [
        vec!["--reps", "1"],
        vec!["--zero-flux-policy", "smooth=0.5"],
        vec!["--alpha", "0"],
        vec!["--space", "builtin:nothing"],
    ] {
        let mut args = vec!["cycle-test", "--input", p(&missing), "--output", p(&out)];
        args.extend(flags);
        let o = epr(&args);
        assert_eq!(o.status.code(), Some(1));
        assert!(!stderr(&o).contains("missing.csv"), "{}", stderr(&o));
    }
    let o = epr(&["analyze", "--output", p(&out)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn motion_fit_needs_three_treatments() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    let o = epr(&[
        "simulate",
        "--model",
        "driven",
        "--drive",
        "0.5",
        "--treatments",
        "2",
        "--rounds",
        "500",
        "--output",
        p(&csv),
    ]);
    assert!(o.status.success());
    let o = epr(&[
        "motion-fit",
        "--input",
        p(&csv),
        "--output",
        p(&dir.path().join("m.json")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("at least 3"), "{}", stderr(&o));
}

#[test]
fn motion_fit_on_reversible_family_reports_degenerate_x() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("b.csv");
    // 0 <-> 1 alternation has balanced flux: EPR = motion = 0
    let mut text = String::from("treatment_id,session_id,round,state\n");
    for t in 0..3 {
        for r in 0..10 {
            text.push_str(&format!("T{t},s,{},{}\n", r + 1, r % 2));
        }
    }
    std::fs::write(&csv, text).unwrap();
    let o = epr(&[
        "motion-fit",
        "--input",
        p(&csv),
        "--output",
        p(&dir.path().join("m.json")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("zero variance"), "{}", stderr(&o));
}

#[test]
fn cycle_test_flags_driven_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("c.csv");
    let out = dir.path().join("c.json");
    let o = epr(&[
        "simulate",
        "--model",
        "cycle4",
        "--forward",
        "0.85",
        "--backward",
        "0.05",
        "--stay",
        "0.10",
        "--rounds",
        "200",
        "--output",
        p(&csv),
    ]);
    assert!(o.status.success());
    let o = epr(&[
        "cycle-test",
        "--input",
        p(&csv),
        "--output",
        p(&out),
        "--reps",
        "2000",
        "--reproducible",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = read_json(&out);
    let verdict = &r["treatments"][0]["cycle"];
    assert_eq!(verdict["cycle_detected"], true);
    assert_eq!(verdict["alpha"], 0.001);
    assert!(r.get("generated_unix_secs").is_none());
}

#[test]
fn metadata_catalog_is_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("m.csv");
    let meta = dir.path().join("meta.json");
    let out = dir.path().join("r.json");
    std::fs::write(
        &csv,
        "treatment_id,session_id,round,state\n48,a,1,0\n48,a,2,1\n48,a,3,3\n",
    )
    .unwrap();
    std::fs::write(
        &meta,
        r#"{"48": {"game": "EC", "states": 4, "records_per_treatment": "~200"}}"#,
    )
    .unwrap();
    let o = epr(&["analyze", "--input", p(&csv), "--output", p(&out), "--meta", p(&meta)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = read_json(&out);
    assert_eq!(r["treatments"][0]["meta"]["game"], "EC");
    assert!(r["generated_unix_secs"].as_u64().is_some());
}

#[test]
fn custom_space_descriptor() {
    let dir = tempfile::tempdir().unwrap();
    let space = dir.path().join("space.json");
    let csv = dir.path().join("r.csv");
    let out = dir.path().join("r.json");
    std::fs::write(&space, r#"{"labels": ["a", "b", "c"], "coordinates": [[0], [1], [2]]}"#).unwrap();
    std::fs::write(
        &csv,
        "treatment_id,session_id,round,state\nT,a,1,0\nT,a,2,1\nT,a,3,2\nT,a,4,0\n",
    )
    .unwrap();
    let o = epr(&["analyze", "--input", p(&csv), "--output", p(&out), "--space", p(&space)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = read_json(&out);
    assert_eq!(
        r["treatments"][0]["observables"]["velocity"].as_array().unwrap().len(),
        3
    );
    assert_eq!(r["config"]["space"]["size"], 3);
}
