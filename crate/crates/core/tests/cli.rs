use fracops::cli::cli_main;
use std::path::{Path, PathBuf};
use std::process::Command;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn zero_family_config() -> String {
    r#"{
  "version": "1.0.0",
  "seeds": [1, 2],
  "scenarios": [
    {
      "name": "zero-demo",
      "check": "coifman",
      "operator": { "preset": "fractional-pair", "alpha": 0.25 },
      "grid": { "dim": 1, "box_half": 2.0, "n": 32 },
      "weight": "unit",
      "symbol": "log-abs",
      "order": 1,
      "family": "zero",
      "p": 2.0,
      "phi": { "kind": "power-log", "params": [1.0, 1.0] }
    }
  ],
  "sweep": { "grid": [16, 32, 64], "p": [2.0], "alpha": [] }
}"#
    .to_string()
}

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("../../configs/{name}"))
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fracops"))
}

#[test]
fn malformed_configs_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let truncated = write_config(dir.path(), "bad.json", "{ \"version\": \"1.0");
    let code = cli_main([
        "fracops",
        "verify",
        "--config",
        truncated.to_str().unwrap(),
    ]);
    assert_eq!(code, 2);

    let missing = dir.path().join("nope.json");
    let code = cli_main(["fracops", "verify", "--config", missing.to_str().unwrap()]);
    assert_eq!(code, 2);

    let wrong_version = write_config(
        dir.path(),
        "v9.json",
        &zero_family_config().replace("1.0.0", "9.0.0"),
    );
    let code = cli_main([
        "fracops",
        "check-kernel",
        "--config",
        wrong_version.to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
}

#[test]
fn zero_family_verify_passes_with_zero_ratios() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "zero.json", &zero_family_config());
    let out = dir.path().join("out");
    let code = cli_main([
        "fracops",
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let reports = report.as_array().unwrap();
    assert_eq!(reports.len(), 1);
    assert_eq!(reports[0]["pass"], serde_json::Value::Bool(true));
    assert_eq!(reports[0]["sup_ratio"], 0.0);
    for row in reports[0]["per_test_ratios"].as_array().unwrap() {
        assert_eq!(row["ratio"], 0.0);
    }
    assert!(out.join("ratios.csv").exists());
}

#[test]
fn reruns_emit_byte_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "zero.json", &zero_family_config());
    let mut outputs = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("out{run}"));
        let code = cli_main([
            "fracops",
            "verify",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        outputs.push((
            std::fs::read(out.join("report.json")).unwrap(),
            std::fs::read(out.join("ratios.csv")).unwrap(),
        ));
    }
    assert_eq!(outputs[0].0, outputs[1].0);
    assert_eq!(outputs[0].1, outputs[1].1);
}

#[test]
fn gated_scenario_exits_with_code_3() {
    let text = r#"{
  "version": "1.0.0",
  "seeds": [1],
  "scenarios": [
    {
      "name": "divergent-growth",
      "check": "two-weight",
      "operator": { "preset": "fractional-pair", "alpha": 0.25 },
      "grid": { "dim": 1, "box_half": 2.0, "n": 32 },
      "weight": "unit",
      "symbol": "zero",
      "order": 0,
      "family": "zero",
      "p": 3.0,
      "pairing": {
        "e": { "kind": "power", "params": [1.8] },
        "f": { "kind": "power", "params": [4.5] },
        "phi": { "kind": "linear" }
      }
    }
  ]
}"#;
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "gated.json", text);
    let out = dir.path().join("out");
    let code = cli_main([
        "fracops",
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 3);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(report[0]["gated"].as_str().unwrap().contains("growth"));
    assert!(report[0]["pass"].is_null());
}

#[test]
fn sweep_prints_one_row_per_scenario_and_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "zero.json", &zero_family_config());

    let output = bin()
        .args(["sweep", "--config", cfg.to_str().unwrap(), "--axis", "grid"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8(output.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "axis,value,scenario,sup_ratio,trend");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("grid,16,zero-demo,0,"));
    assert!(lines[2].starts_with("grid,32,zero-demo,0,"));

    let output = bin()
        .args(["sweep", "--config", cfg.to_str().unwrap(), "--axis", "p"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 2);

    let output = bin()
        .args(["sweep", "--config", cfg.to_str().unwrap(), "--axis", "alpha"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));

    let output = bin()
        .args([
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--axis",
            "lambda",
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn check_kernel_flags_non_invertible_differences() {
    let output = bin().arg("check-kernel").output().unwrap();
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("hypothesis (H): ok"));
    assert!(stdout.contains("size constant"));

    let violation = repo_config("hypothesis-violation.json");
    let output = bin()
        .args(["check-kernel", "--config", violation.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("hypothesis (H) violated"));
}

#[test]
fn out_dir_env_var_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "zero.json", &zero_family_config());
    let out = dir.path().join("env-out");
    let status = bin()
        .args(["verify", "--config", cfg.to_str().unwrap()])
        .env("FRACOPS_OUT_DIR", &out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.join("report.json").exists());
    assert!(out.join("ratios.csv").exists());
}
