use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("free-stein-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_free-stein"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("FREE_STEIN_CONFIG")
        .env_remove("FREE_STEIN_OUT")
        .env_remove("FREE_STEIN_SEED")
        .env_remove("FREE_STEIN_THREADS")
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn verify_succeeds() {
    let out = scratch("verify");
    let res = run(&["verify", "--seed", "3"], &out);
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let json = read_json(&out.join("verify.json"));
    assert_eq!(json["command"], "verify");
    assert_eq!(json["seed"], 3);
    assert!(json["result"]["checks"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["pass"] == true));
    let csv = std::fs::read_to_string(out.join("verify.csv")).unwrap();
    assert!(csv.starts_with("check,cases,worst,tolerance,pass,config_digest,seed\n"));
    assert!(!csv.contains('\r'));
    std::fs::remove_dir_all(out).ok();
}

#[test]
fn bounds_fixture_reports_closed_form() {
    let out = scratch("bounds");
    let cfg = fixture("bounds_ee.json");
    let res = run(&["bounds", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let json = read_json(&out.join("bounds.json"));
    let m = json["result"]["m_of_f"].as_f64().unwrap();
    assert!((m - 2f64.powf(0.75)).abs() <= 1e-12, "{m}");
    let s = json["result"]["stein_upper"].as_f64().unwrap();
    assert!((s * s - 2.0).abs() <= 1e-10);
    assert!(
        json["result"]["hsi_rhs"].as_f64().unwrap() <= json["result"]["lsi_rhs"].as_f64().unwrap()
    );
    let digest = json["config_digest"].as_str().unwrap();
    assert_eq!(digest.len(), 64);
    let csv = std::fs::read_to_string(out.join("bounds.csv")).unwrap();
    assert!(csv
        .lines()
        .skip(1)
        .all(|l| l.ends_with(&format!("{digest},0"))));
    std::fs::remove_dir_all(out).ok();
}

#[test]
fn moments_agree_with_pairing_sum() {
    let out = scratch("moments");
    let cfg = fixture("moments_pair.json");
    let res = run(
        &["moments", "--config", cfg.to_str().unwrap(), "--seed", "1"],
        &out,
    );
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let json = read_json(&out.join("moments.json"));
    let rows = json["result"].as_array().unwrap();
    assert_eq!(rows.len(), 5);
    assert!((rows[0]["re"].as_f64().unwrap() - 1.0).abs() < 1e-14);
    assert!((rows[1]["re"].as_f64().unwrap() - 3.0).abs() < 1e-12);
    assert_eq!(rows[2]["re"].as_f64().unwrap(), 0.0);
    for r in rows {
        assert!(r["pairing_abs_diff"].as_f64().unwrap() <= 1e-9);
    }
    std::fs::remove_dir_all(out).ok();
}

#[test]
fn mc_and_breuer_major_write_tables() {
    let out = scratch("tables");
    let mc = fixture("mc_small.json");
    let res = run(&["mc", "--config", mc.to_str().unwrap()], &out);
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    assert_eq!(read_json(&out.join("mc.json"))["seed"], 3);

    let bm = fixture("breuer_major_small.json");
    let res = run(&["breuer-major", "--config", bm.to_str().unwrap()], &out);
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let csv = std::fs::read_to_string(out.join("breuer_major.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("n,x_1,x_2,M,dw_thm8,slope,config_digest,seed")
    );
    assert_eq!(lines.count(), 4);
    std::fs::remove_dir_all(out).ok();
}

#[test]
fn seed_flag_and_environment_agree() {
    let a = scratch("seed-flag");
    let b = scratch("seed-env");
    assert!(run(&["verify", "--seed", "5"], &a).status.success());
    let res = Command::new(env!("CARGO_BIN_EXE_free-stein"))
        .args(["verify", "--out"])
        .arg(&b)
        .env("FREE_STEIN_SEED", "5")
        .env_remove("FREE_STEIN_CONFIG")
        .env_remove("FREE_STEIN_OUT")
        .output()
        .unwrap();
    assert!(res.status.success());
    assert_eq!(
        std::fs::read(a.join("verify.json")).unwrap(),
        std::fs::read(b.join("verify.json")).unwrap()
    );
    std::fs::remove_dir_all(a).ok();
    std::fs::remove_dir_all(b).ok();
}

#[test]
fn malformed_config_names_the_key() {
    let out = scratch("malformed");
    let cfg = fixture("malformed.json");
    let res = run(&["bounds", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("fisher_info"), "{err}");
    std::fs::remove_dir_all(out).ok();
}

#[test]
fn missing_config_is_an_io_error() {
    let out = scratch("missing");
    let res = run(
        &["bounds", "--config", "/nonexistent/free-stein.json"],
        &out,
    );
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn invalid_inputs_fail_validation() {
    let out = scratch("invalid");
    std::fs::create_dir_all(&out).unwrap();
    let cfg = out.join("bm.json");
    // H = 0.9 violates H < 1 - 1/(2q) for q = 3.
    std::fs::write(&cfg, r#"{"H": 0.9, "q": 3, "n_list": [32, 64]}"#).unwrap();
    let res = run(&["breuer-major", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(
        res.status.code(),
        Some(1),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    std::fs::write(
        &cfg,
        r#"{"covariance": [[1.0, 2.0], [2.0, 1.0]], "words": [[0, 1]], "n": 8, "reps": 2}"#,
    )
    .unwrap();
    let res = run(&["mc", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(res.status.code(), Some(1));
    std::fs::remove_dir_all(out).ok();
}
