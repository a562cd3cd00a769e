//! Exit-code contract and config plumbing of the `rv` binary.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rv"))
}

fn tmp(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("rv-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn missing_preset_is_a_usage_error() {
    let out = tmp("missing-preset");
    let output = bin()
        .args(["check-invariance", "--samples", "10"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&output.stderr).is_empty());
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let output = bin().args(["simulate", "--bogus"]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn malformed_body_json_is_a_usage_error() {
    let out = tmp("bad-body");
    std::fs::create_dir_all(&out).unwrap();
    let body = out.join("body.json");
    std::fs::write(&body, "{\"type\":\"box\",\"lower\":[0,0]}").unwrap();
    let output = bin()
        .args(["check-invariance", "--preset", "logistic"])
        .arg("--body")
        .arg(&body)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn invariance_verdicts_map_to_exit_codes() {
    let out = tmp("verdicts");
    let ok = bin()
        .args([
            "check-invariance",
            "--preset",
            "logistic",
            "--samples",
            "400",
        ])
        .arg("--out")
        .arg(out.join("pass"))
        .status()
        .unwrap();
    assert_eq!(ok.code(), Some(0));

    let fail = bin()
        .args([
            "check-invariance",
            "--preset",
            "outward-box",
            "--samples",
            "400",
        ])
        .arg("--out")
        .arg(out.join("fail"))
        .status()
        .unwrap();
    assert_eq!(fail.code(), Some(1));
    let report = std::fs::read_to_string(out.join("fail").join("report.json")).unwrap();
    assert!(report.contains("\"witness\""));
    assert!(report.contains("\"pass\": false"));
}

#[test]
fn body_override_is_honored() {
    let out = tmp("override");
    std::fs::create_dir_all(&out).unwrap();
    let body = out.join("ball.json");
    std::fs::write(
        &body,
        "{\"type\":\"ball\",\"center\":[0.0,0.0],\"radius\":1.0}",
    )
    .unwrap();
    // The logistic diffusion is not tangent to the sphere, so the
    // condition must fail on the overridden body.
    let status = bin()
        .args([
            "check-invariance",
            "--preset",
            "logistic",
            "--samples",
            "400",
        ])
        .arg("--body")
        .arg(&body)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn env_seed_beats_flag_and_config_file() {
    let out_env = tmp("seed-env");
    let out_flag = tmp("seed-flag");
    // Same command; one run forces the seed through RV_SEED.
    let args = [
        "simulate", "--preset", "logistic", "--paths", "1", "--steps", "64",
    ];
    bin()
        .args(args)
        .args(["--seed", "5"])
        .arg("--out")
        .arg(&out_flag)
        .status()
        .unwrap();
    bin()
        .args(args)
        .args(["--seed", "99"])
        .env("RV_SEED", "5")
        .arg("--out")
        .arg(&out_env)
        .status()
        .unwrap();
    let a = std::fs::read(out_flag.join("path_0000.csv")).unwrap();
    let b = std::fs::read(out_env.join("path_0000.csv")).unwrap();
    assert_eq!(a, b);
    let manifest = std::fs::read_to_string(out_env.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 5"));
}

#[test]
fn config_file_fills_gaps_flags_win() {
    let out = tmp("config-file");
    std::fs::create_dir_all(&out).unwrap();
    let cfg = out.join("cfg.json");
    std::fs::write(
        &cfg,
        "{\"preset\":\"logistic\",\"steps\":64,\"paths\":2,\"seed\":11}",
    )
    .unwrap();
    // --paths on the command line beats the file; preset/steps/seed come
    // from the file.
    let status = bin()
        .args(["simulate", "--paths", "1"])
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.join("path_0000.csv").exists());
    assert!(!out.join("path_0001.csv").exists());
    let manifest = std::fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 11"));
    assert!(manifest.contains("\"steps\": 64"));
}

#[test]
fn trajectory_csv_has_monitor_column() {
    let out = tmp("columns");
    bin()
        .args([
            "simulate", "--preset", "logistic", "--paths", "1", "--steps", "32", "--seed", "3",
        ])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    let text = std::fs::read_to_string(out.join("path_0000.csv")).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header, "t,y1,y2,dist_K");
    assert_eq!(text.lines().count(), 34);
}
