//! End-to-end checks of the binary: exit codes, formats, determinism.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ymneck"))
}

fn write_temp(name: &str, content: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("ymneck-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path
}

/// Boundary JSON with both triples set to the orthonormal basis in the
/// requested slots.
fn boundary_json(fl_slot: &str, fr_slot: &str) -> String {
    let zero = "[[0,0,0,0],[0,0,0,0],[0,0,0,0],[0,0,0,0]]";
    let basis = [
        "[[0,-0.5,0,0],[0.5,0,0,0],[0,0,0,-0.5],[0,0,0.5,0]]",
        "[[0,0,-0.5,0],[0,0,0,0.5],[0.5,0,0,0],[0,-0.5,0,0]]",
        "[[0,0,0,-0.5],[0,0,-0.5,0],[0,0.5,0,0],[0.5,0,0,0]]",
    ];
    let triple = |on: bool| -> String {
        if on {
            format!("[{},{},{}]", basis[0], basis[1], basis[2])
        } else {
            format!("[{zero},{zero},{zero}]")
        }
    };
    format!(
        "{{\"algebra\":\"su2\",\"FL_plus\":{},\"FL_minus\":{},\"FR_plus\":{},\"FR_minus\":{}}}",
        triple(fl_slot == "plus"),
        triple(fl_slot == "minus"),
        triple(fr_slot == "plus"),
        triple(fr_slot == "minus"),
    )
}

#[test]
fn verify_identities_passes_and_is_deterministic() {
    let run = || {
        let out = bin()
            .args(["verify-identities", "--format", "json"])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        out.stdout
    };
    let a = run();
    let b = run();
    assert_eq!(a, b, "reports must be byte-identical");
    let v: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert!(v["checks"].as_array().unwrap().len() >= 18);
}

#[test]
fn verify_identities_resolution_guard() {
    let out = bin()
        .args(["verify-identities", "--grid", "2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("quadrature below threshold"));
}

#[test]
fn balance_exit_codes() {
    // ASD limit with ASD bubble: balanced
    let path = write_temp("asd_asd.json", &boundary_json("minus", "minus"));
    let out = bin()
        .args(["balance", "--input", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("balanced"));

    // ASD limit with SD bubble: obstructed, trace 3
    let path = write_temp("asd_sd.json", &boundary_json("minus", "plus"));
    let out = bin()
        .args(["balance", "--input", path.to_str().unwrap(), "--format", "json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["trace_residual"].as_f64().unwrap() - 3.0).abs() < 1e-12);

    // malformed input
    let path = write_temp("bad.json", "{\"algebra\":\"su2\"}");
    let out = bin()
        .args(["balance", "--input", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn nogo_builtin_prints_parity_argument() {
    let out = bin().args(["nogo"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "obstruction detected");
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("infeasible"));
    assert!(text.contains("eigenvalues"));

    // zero pairing: no obstruction
    let path = write_temp("zero.json", &boundary_json("plus", "minus"));
    let out = bin()
        .args(["nogo", "--input", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("no obstruction"));
}

#[test]
fn solve_cylinder_paths() {
    let out = bin()
        .args(["solve-cylinder", "--format", "json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["residual"].as_f64().unwrap() < 1e-8);

    // resonance guard: alpha = sqrt(3) against the default rate
    let out = bin()
        .args(["solve-cylinder", "--alpha", "1.7320508075688772"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));

    // sweep table
    let out = bin()
        .args(["solve-cylinder", "--sweep", "--rate", "2.0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().count(), 3);

    // CSV ingestion
    let mut csv = String::from("t,value\n");
    let n = 501;
    for i in 0..n {
        let t = -3.0 + 6.0 * i as f64 / (n - 1) as f64;
        csv.push_str(&format!("{t},{}\n", (-1.9f64 * 3.0).exp() * (1.9 * t).exp()));
    }
    let path = write_temp("sig.csv", &csv);
    let out = bin()
        .args([
            "solve-cylinder",
            "--signal",
            path.to_str().unwrap(),
            "--rate",
            "2.0",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));

    // non-uniform grid rejected
    let path = write_temp("bad.csv", "t,value\n0,1\n0.1,1\n0.3,1\n0.4,1\n");
    let out = bin()
        .args(["solve-cylinder", "--signal", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn instanton_neck_guard_and_report() {
    let out = bin()
        .args(["instanton-neck", "--lambda", "0.5", "--delta", "0.3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4), "no neck when lambda >= delta^2");

    let out = bin()
        .args([
            "instanton-neck",
            "--lambda",
            "1e-3",
            "--delta",
            "0.3",
            "--slices",
            "9",
            "--grid",
            "6",
            "--format",
            "json",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let d_plus = v["expansion"]["d_plus"].as_array().unwrap();
    assert_eq!(d_plus.len(), 3);
    // d_plus_1 ~ -i^, whose (1,0) entry is -0.5
    let entry = d_plus[0][1][0].as_f64().unwrap();
    assert!((entry + 0.5).abs() < 0.05, "d_plus entry {entry}");
    assert!(v["decay"]["c2"].as_f64().unwrap() > 1.0);
}

#[test]
fn config_file_defaults_and_flag_override() {
    let conf = write_temp("conf.json", "{\"lambda\": 1e-2, \"delta\": 0.4}");
    let out = bin()
        .args([
            "--config",
            conf.to_str().unwrap(),
            "instanton-neck",
            "--slices",
            "9",
            "--grid",
            "6",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("1.000000e-2"));

    // flag overrides the file
    let out = bin()
        .args([
            "--config",
            conf.to_str().unwrap(),
            "instanton-neck",
            "--lambda",
            "1e-3",
            "--slices",
            "9",
            "--grid",
            "6",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("1.000000e-3"));
}
