//! End-to-end checks of the binary surface: config-driven runs, bounds
//! JSON, DOT export.

use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_lcsim")
}

#[test]
fn config_run_writes_trace_and_json() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("run.cfg");
    std::fs::write(
        &cfg_path,
        "n = 4\nb = 0\np = 1.0\nrounds = 8\nstrategy = uniform\nseed = 7\n",
    )
    .unwrap();
    let out = tmp.path().join("out");
    let status = Command::new(bin())
        .args(["run", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(csv.starts_with("#schema lcsim-trace v1\n"));
    // header + schema + 8 rounds
    assert_eq!(csv.lines().count(), 10);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("trace.json")).unwrap()).unwrap();
    assert_eq!(json["schema"], "lcsim-trace-v1");
    assert_eq!(json["records"].as_array().unwrap().len(), 8);
}

#[test]
fn config_errors_are_reported_with_line_numbers() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("bad.cfg");
    std::fs::write(&cfg_path, "n = 4\nwat = 9\n").unwrap();
    let output = Command::new(bin())
        .args(["run", "--config"])
        .arg(&cfg_path)
        .output()
        .unwrap();
    assert!(!output.status.success());
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.contains("line 2"), "stderr: {err}");
    assert!(err.contains("wat"), "stderr: {err}");
}

#[test]
fn bounds_subcommand_emits_json_document() {
    let output = Command::new(bin())
        .args(["bounds", "--n", "64", "--b", "8", "--p", "0.05", "--epsilon", "0.1"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let doc: serde_json::Value =
        serde_json::from_slice(&output.stdout).expect("bounds prints JSON");
    assert_eq!(doc["n"], 64);
    let p_plus = doc["transition_probs"]["p_plus"].as_f64().unwrap();
    assert!((p_plus - 0.6502).abs() < 1e-3, "p_plus {p_plus}");
    assert!(doc["m_star"].as_f64().unwrap() > 100.0);
    assert_eq!(doc["side_condition_ok"], true);
    // infeasible corrupt majority reports a negative bound, not an error
    let output = Command::new(bin())
        .args(["bounds", "--n", "10", "--b", "7", "--p", "0.05"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert!(doc["honest_majority_p_bound"]["value"].as_f64().unwrap() < 0.0);
}

#[test]
fn fig1_exports_a_four_chain_tree() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("fig");
    let status = Command::new(bin())
        .args(["run", "--preset", "fig1", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let dot = std::fs::read_to_string(out.join("fig1.dot")).unwrap();
    // genesis + 4 miners x 8 rounds at p = 1
    assert_eq!(dot.matches("label=").count(), 33);
    assert!(dot.contains("genesis"));
    assert_eq!(dot.matches(" -> ").count(), 32);

    let dot2 = {
        let out2 = tmp.path().join("fig-dot");
        let status = Command::new(bin())
            .args(["export-dot", "--preset", "fig1", "--out"])
            .arg(out2.join("tree.dot"))
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read_to_string(out2.join("tree.dot")).unwrap()
    };
    assert_eq!(dot, dot2, "export-dot and run --preset fig1 agree");
}

#[test]
fn preset_audit_flag_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let status = Command::new(bin())
        .args([
            "run",
            "--preset",
            "warmup-scaling",
            "--scale",
            "500",
            "--audit",
            "--out",
        ])
        .arg(tmp.path())
        .status()
        .unwrap();
    assert!(status.success());
    assert!(tmp.path().join("warmup-scaling_replicas.csv").exists());
    assert!(tmp.path().join("warmup-scaling_cells.csv").exists());
}
