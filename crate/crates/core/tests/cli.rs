use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sshqb(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sshqb"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

/// (metadata line, header, data rows)
fn read_csv(path: &Path) -> (String, Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let meta = lines.next().unwrap().to_string();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (meta, header, rows)
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn dynamics_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = sshqb(dir.path(), &["dynamics", "--N", "5", "--t-max", "2", "--dt", "0.05"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (meta, header, rows) = read_csv(&dir.path().join("dynamics.csv"));
    assert!(meta.starts_with("# sshqb "));
    assert!(meta.contains("params_sha256="));
    assert_eq!(header, ["t", "E_B", "dE", "ergotropy", "norm_err", "n_exc"]);
    assert_eq!(rows.len(), 41);
    assert_eq!(rows[0][0], "0");
    assert_eq!(rows[40][0], "2");
    let m = manifest(dir.path());
    assert_eq!(m["status"], "ok");
    assert_eq!(m["config"]["params"]["n_c"], 11);
    assert!(m["extra"]["tau_c"].as_f64().unwrap() > 0.0);
    assert!(m["conservation"]["max_norm_error"].as_f64().unwrap() < 1e-10);
    assert!(
        !m["warnings"].as_array().unwrap().is_empty(),
        "J = 1 ground state of N = 5 is degenerate"
    );
}

#[test]
fn sweep_delta_has_41_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = sshqb(dir.path(), &["sweep-delta", "--N", "6", "--J", "2.5"]);
    assert!(out.status.success());
    let (_, header, rows) = read_csv(&dir.path().join("sweep-delta.csv"));
    assert_eq!(header[0], "delta");
    assert_eq!(rows.len(), 41);
    assert_eq!(rows[0][0], "-1");
    assert_eq!(rows[20][0], "0");
    assert_eq!(rows[40][0], "1");
}

#[test]
fn heatmap_rows_match_delta_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let heat = dir.path().join("heat");
    let sweep = dir.path().join("sweep");
    assert!(sshqb(
        &heat,
        &[
            "heatmap",
            "--N",
            "4",
            "--grid-j",
            "0:3:0.5",
            "--grid-delta",
            "-1:1:0.25"
        ]
    )
    .status
    .success());
    assert!(sshqb(
        &sweep,
        &["sweep-delta", "--N", "4", "--J", "2.5", "--grid-delta", "-1:1:0.25"]
    )
    .status
    .success());
    let (_, hh, heat_rows) = read_csv(&heat.join("heatmap.csv"));
    let (_, sh, sweep_rows) = read_csv(&sweep.join("sweep-delta.csv"));
    let col = |h: &[String], name: &str| h.iter().position(|c| c == name).unwrap();
    let shared: Vec<&Vec<String>> = heat_rows.iter().filter(|r| r[0] == "2.5").collect();
    assert_eq!(shared.len(), sweep_rows.len());
    for (h, s) in shared.iter().zip(&sweep_rows) {
        assert_eq!(h[col(&hh, "delta")], s[col(&sh, "delta")]);
        for name in ["k_g", "tau_c", "dE_max", "ergotropy"] {
            assert_eq!(h[col(&hh, name)], s[col(&sh, name)], "{name}");
        }
    }
}

#[test]
fn output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["capacity", "--N", "4", "--J", "0.3", "--grid-delta", "-1:1:0.5"];
    assert!(sshqb(&dir.path().join("a"), &args).status.success());
    let single = Command::new(env!("CARGO_BIN_EXE_sshqb"))
        .args(args)
        .arg("--out")
        .arg(dir.path().join("b"))
        .env("SSHQB_THREADS", "1")
        .output()
        .unwrap();
    assert!(single.status.success());
    let a = fs::read(dir.path().join("a/capacity.csv")).unwrap();
    let b = fs::read(dir.path().join("b/capacity.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "N = 3\nJ = 2.5\ndelta = 0.4\ngrid-j = \"0:1:0.5\"\n").unwrap();
    let out = sshqb(
        dir.path(),
        &["sweep-j", "--config", cfg.to_str().unwrap(), "--delta", "-0.2"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(dir.path());
    assert_eq!(m["config"]["params"]["n"], 3);
    assert_eq!(m["config"]["params"]["delta"], -0.2);
    let (_, _, rows) = read_csv(&dir.path().join("sweep-j.csv"));
    assert_eq!(rows.len(), 3);

    fs::write(&cfg, "N = 3\nhopping = 2.5\n").unwrap();
    let out = sshqb(dir.path(), &["sweep-j", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("hopping"));
}

#[test]
fn invalid_values_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = sshqb(dir.path(), &["sweep-j", "--N", "5", "--delta", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[-1, 1]"));
    let out = sshqb(dir.path(), &["sweep-j", "--grid-j", "0:3"]);
    assert_eq!(out.status.code(), Some(2));
    let out = sshqb(dir.path(), &["dynamics", "--mode", "sideways"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn both_modes_are_compared() {
    let dir = tempfile::tempdir().unwrap();
    let out = sshqb(
        dir.path(),
        &["sweep-delta", "--N", "3", "--grid-delta", "-1:1:0.5", "--mode", "both"],
    );
    assert!(out.status.success());
    let m = manifest(dir.path());
    assert_eq!(m["mode_comparison"]["passed"], true);
    assert!(m["mode_comparison"]["max_abs_difference"].as_f64().unwrap() < 1e-9);
    let stages: Vec<&str> = m["stages"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["stage"].as_str().unwrap())
        .collect();
    assert!(stages.contains(&"compute:sector") && stages.contains(&"compute:full"));
}

#[test]
fn missing_peak_fails_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = sshqb(dir.path(), &["sweep-j", "--N", "2", "--g", "0", "--grid-j", "0:1:0.5"]);
    assert_eq!(out.status.code(), Some(1));
    let m = manifest(dir.path());
    assert_eq!(m["status"], "failed");
    assert!(m["error"].as_str().unwrap().contains("no local maximum"));
    assert!(!dir.path().join("sweep-j.csv").exists());
}

#[test]
fn every_command_writes_its_header() {
    let cases: &[(&str, &[&str], &[&str])] = &[
        (
            "sweep-j",
            &["--grid-j", "0:1:0.5"],
            &[
                "J",
                "k_g",
                "E_G",
                "E_max",
                "tau_c",
                "dE_max",
                "ergotropy",
                "R_Eb",
                "R_Epb",
            ],
        ),
        (
            "spectrum",
            &["--grid-j", "0:1:0.5", "--levels", "3"],
            &["J", "k_g", "level_0", "level_1", "level_2"],
        ),
        ("order-params", &["--grid-j", "0:1:0.5"], &["J", "k_g", "M_z", "xi_z"]),
        (
            "heatmap",
            &["--grid-j", "0:1:0.5", "--grid-delta", "0:1:0.5"],
            &["J", "delta", "k_g", "tau_c", "dE_max", "ergotropy"],
        ),
        (
            "occupations",
            &["--grid-delta", "0:1:0.5"],
            &["delta", "site", "occupation"],
        ),
        (
            "capacity",
            &["--grid-delta", "0:1:0.5"],
            &["delta", "R_Eb", "R_Epb", "dE_max", "ergotropy", "E_max", "E_G"],
        ),
        (
            "tau-scaling",
            &["--n-list", "1,2,3"],
            &["rule", "N", "n_c", "tau_c", "dE_max", "slope"],
        ),
    ];
    for (command, extra, expected) in cases {
        let dir = tempfile::tempdir().unwrap();
        let mut args = vec![*command, "--N", "3"];
        args.extend_from_slice(extra);
        let out = sshqb(dir.path(), &args);
        assert!(
            out.status.success(),
            "{command}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let (meta, header, rows) = read_csv(&dir.path().join(format!("{command}.csv")));
        assert!(meta.contains(&format!("command={command}")));
        assert_eq!(&header, expected, "{command}");
        assert!(!rows.is_empty());
        assert!(rows.iter().all(|r| r.len() == header.len()));
    }
}
