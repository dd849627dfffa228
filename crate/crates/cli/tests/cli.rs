use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evt-suprema"))
        .args(args)
        .env_remove("EVT_SUPREMA_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const BM: [&str; 6] = ["--hurst", "0.5", "--hurst-common", "0.5", "--beta", "1"];

#[test]
fn constants_for_brownian_model() {
    let mut args = vec!["constants"];
    args.extend(BM);
    args.extend(["--log-n", "10"]);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("5.0000000000"), "{text}");
    assert!(text.contains("0.5000000000"));
    assert!(text.contains("NORMAL_LIMIT"));
}

#[test]
fn constants_json_reports_mixture_coefficient() {
    let o = run(&[
        "--json", "constants", "--hurst", "0.75", "--hurst-common", "0.5", "--beta", "1", "--pickands", "1.0",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["regime"], "MIXTURE_LIMIT");
    let coeff = v["mixture_coeff"].as_f64().unwrap();
    assert!((coeff - 4.0 / 3.0).abs() < 1e-12);
}

#[test]
fn invalid_beta_exits_with_validation_code() {
    let o = run(&["constants", "--hurst", "0.5", "--hurst-common", "0.5", "--beta", "0.4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("beta > max(H, H0)"), "{}", stderr(&o));
}

#[test]
fn unknown_suite_lists_the_suites() {
    let o = run(&["check", "nosuch"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    for suite in ["oracle-bm", "iid-weibull", "limits", "constants", "pickands"] {
        assert!(err.contains(suite), "{err}");
    }
}

#[test]
fn pickands_rejects_alpha_above_two() {
    assert_eq!(run(&["pickands", "--alpha", "2.5"]).status.code(), Some(2));
}

#[test]
fn pickands_brownian_estimate() {
    let o = run(&[
        "--json", "pickands", "--alpha", "1", "--horizons", "16", "--reps", "2000", "--cells-per-unit", "64",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let est = v["estimates"][0]["estimate"].as_f64().unwrap();
    assert!((est - 1.0).abs() < 0.15, "{est}");
}

#[test]
fn missing_output_dir_is_an_io_error() {
    let mut args = vec!["--out", "/definitely/not/here", "simulate"];
    args.extend(BM);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("/definitely/not/here"));
}

#[test]
fn missing_config_file_is_an_io_error() {
    assert_eq!(run(&["--config", "/no/such.toml", "constants"]).status.code(), Some(3));
}

#[test]
fn malformed_config_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[model]\nhurts = 0.5\n").unwrap();
    assert_eq!(run(&["--config", path.to_str().unwrap(), "constants"]).status.code(), Some(2));
}

fn simulate_into(dir: &Path, config: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["--config", config.to_str().unwrap(), "--seed", "42", "--out", dir.to_str().unwrap()];
    args.extend(extra);
    args.push("simulate");
    run(&args)
}

#[test]
fn simulate_is_reproducible_and_reports_thinned_normalizers() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("bm.toml");
    std::fs::write(
        &config,
        "[model]\nhurst = 0.5\nhurst_common = 0.5\nbeta = 1.0\np = 0.5\n\n[plan]\nn = 400\nk = 2\nreps = 100\nn_points = 256\n",
    )
    .unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    std::fs::create_dir(&a).unwrap();
    std::fs::create_dir(&b).unwrap();
    let first = simulate_into(&a, &config, &["--threads", "1"]);
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    let line = stdout(&first);
    assert!(line.contains("m_n=200") && line.contains("b_m="), "{line}");
    assert_eq!(simulate_into(&b, &config, &["--threads", "2"]).status.code(), Some(0));
    for file in ["result.json", "normalized_stats.csv", "exceed_counts.csv"] {
        assert_eq!(std::fs::read(a.join(file)).unwrap(), std::fs::read(b.join(file)).unwrap(), "{file}");
    }
    assert!(a.join("timing.json").exists());
}

#[test]
fn check_writes_verdict_json() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["--out", tmp.path().to_str().unwrap(), "check", "constants"]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("check-constants.json")).unwrap()).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["checks"].as_array().unwrap().len(), 3);
}
