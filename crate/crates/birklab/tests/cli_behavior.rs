//! End-to-end behavior of the `birklab` binary: output schemas, exit
//! codes, caching, and byte-level reproducibility.

use std::path::Path;
use std::process::{Command, Output};

fn birklab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_birklab"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    birklab()
        .args(args)
        .env("BIRKLAB_CACHE_DIR", dir.join("cache"))
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "exit {:?}, stderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn gaussian_subcommand_reports_bracketed_scaled_sum() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["gaussian", "--rho", "0.1"]);
    let v = stdout_json(&out);
    let scaled = v["scaled"].as_f64().unwrap();
    assert!((0.5..=0.51).contains(&scaled), "scaled = {scaled}");
    assert!(v["truncation_n"].as_u64().unwrap() > 0);

    // with tail and log-weighted extras
    let out = run_in(
        dir.path(),
        &["gaussian", "--rho", "0.1", "--k", "8", "--eps", "0.001"],
    );
    let v = stdout_json(&out);
    assert!(v["tail_sum"]["scaled"].as_f64().unwrap() < scaled);
    let normalized = v["log_weighted"]["normalized"].as_f64().unwrap();
    assert!((0.8..=1.2).contains(&normalized));
}

#[test]
fn cf_subcommand_emits_digit_and_convergent_lines() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["cf", "--input", "2/5", "--digits", "10"]);
    assert!(out.status.success());
    let lines: Vec<serde_json::Value> = String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).expect("JSON line"))
        .collect();
    assert_eq!(lines[0]["type"], "digits");
    assert_eq!(lines[0]["digits"], serde_json::json!(["2", "2"]));
    assert_eq!(lines[1]["type"], "convergent");
    assert_eq!(
        (
            lines[1]["p"].as_str().unwrap(),
            lines[1]["q"].as_str().unwrap()
        ),
        ("1", "2")
    );
    assert_eq!(
        (
            lines[2]["p"].as_str().unwrap(),
            lines[2]["q"].as_str().unwrap()
        ),
        ("2", "5")
    );

    // named constant with diophantine records
    let out = run_in(
        dir.path(),
        &["cf", "--input", "golden", "--digits", "8", "--diophantine"],
    );
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(text.lines().any(|l| l.contains("\"type\":\"diophantine\"")));
    assert!(!text.contains("\"passed\":false"));
}

#[test]
fn iid_baseline_bernoulli_heyde_limit() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "iid-baseline",
            "--dist",
            "bernoulli",
            "--eps-grid",
            "0.1,0.05,0.02",
        ],
    );
    let v = stdout_json(&out);
    let limit = v["heyde"]["extrapolated"].as_f64().unwrap();
    assert!((limit - 0.25).abs() < 0.025, "limit = {limit}");
    // artifacts landed
    let hash = v["config_hash"].as_str().unwrap();
    let run_dir = dir
        .path()
        .join("birklab-runs")
        .join(format!("iid-baseline-{}", &hash[..12]));
    assert!(run_dir.join("per_n.csv").exists());
    assert!(run_dir.join("summary.json").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run_dir.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["subcommand"], "iid-baseline");
    assert_eq!(manifest["config_hash"].as_str().unwrap(), hash);
}

fn quick_config() -> &'static str {
    r#"
[experiment]
map = "binary"
observable = "bit"
eps_grid = [0.1, 0.05]
n_max = 100000
samples = 5000
seed = 11

[ld]
rate = "bernoulli"
"#
}

#[test]
fn asymptotics_cache_roundtrip_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("exp.toml");
    std::fs::write(&cfg_path, quick_config()).unwrap();
    let cfg = cfg_path.to_str().unwrap();

    let out1 = run_in(
        dir.path(),
        &["asymptotics", "--config", cfg, "--threads", "1"],
    );
    let v1 = stdout_json(&out1);
    let hash = v1["config_hash"].as_str().unwrap().to_string();
    assert_eq!(hash.len(), 64);
    let run_dir = dir
        .path()
        .join("birklab-runs")
        .join(format!("asymptotics-{}", &hash[..12]));
    let csv1 = std::fs::read(run_dir.join("per_n.csv")).unwrap();
    let summary1: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run_dir.join("summary.json")).unwrap())
            .unwrap();

    // Rerun with a different worker count: cached payload, byte-identical
    // CSV, summary equal except the timestamp.
    let out2 = run_in(
        dir.path(),
        &["asymptotics", "--config", cfg, "--threads", "4"],
    );
    let v2 = stdout_json(&out2);
    assert_eq!(v2["config_hash"].as_str().unwrap(), hash);
    let csv2 = std::fs::read(run_dir.join("per_n.csv")).unwrap();
    assert_eq!(csv1, csv2, "per-n CSV must be byte-identical across reruns");
    let summary2: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run_dir.join("summary.json")).unwrap())
            .unwrap();
    let strip = |mut v: serde_json::Value| {
        v.as_object_mut().unwrap().remove("timestamp");
        v
    };
    assert_eq!(strip(summary1), strip(summary2));

    // Fresh compute (no cache) at another thread count: still identical.
    let out3 = run_in(
        dir.path(),
        &[
            "asymptotics",
            "--config",
            cfg,
            "--threads",
            "2",
            "--no-cache",
        ],
    );
    let _ = stdout_json(&out3);
    let csv3 = std::fs::read(run_dir.join("per_n.csv")).unwrap();
    assert_eq!(
        csv1, csv3,
        "no-cache rerun with different threads must match bytes"
    );
}

#[test]
fn exit_codes_match_error_classes() {
    let dir = tempfile::tempdir().unwrap();

    // 2: config errors (bad flag domain, unknown config key)
    let out = run_in(dir.path(), &["gaussian", "--rho", "-1"]);
    assert_eq!(out.status.code(), Some(2));
    let bad_cfg = dir.path().join("bad.toml");
    std::fs::write(&bad_cfg, "[experiment]\nmap = \"binary\"\nwat = 1\n").unwrap();
    let out = run_in(
        dir.path(),
        &["asymptotics", "--config", bad_cfg.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());

    // 3: certification errors (precision exhaustion names the certified count)
    let out = run_in(
        dir.path(),
        &["cf", "--input", "golden", "--bits", "32", "--digits", "150"],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("certified"));

    // 4: cache corruption
    let cfg_path = dir.path().join("exp.toml");
    std::fs::write(&cfg_path, quick_config()).unwrap();
    let cfg = cfg_path.to_str().unwrap();
    let out = run_in(dir.path(), &["asymptotics", "--config", cfg]);
    let v = stdout_json(&out);
    let hash = v["config_hash"].as_str().unwrap();
    let entry = dir.path().join("cache").join(format!("{hash}.json"));
    assert!(entry.exists());
    std::fs::write(&entry, "{broken").unwrap();
    let out = run_in(dir.path(), &["asymptotics", "--config", cfg]);
    assert_eq!(out.status.code(), Some(4));
    // --no-cache sidesteps the corruption
    let out = run_in(dir.path(), &["asymptotics", "--config", cfg, "--no-cache"]);
    assert!(out.status.success());
}

#[test]
fn flag_overrides_change_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("exp.toml");
    std::fs::write(&cfg_path, quick_config()).unwrap();
    let cfg = cfg_path.to_str().unwrap();
    let a = stdout_json(&run_in(dir.path(), &["asymptotics", "--config", cfg]));
    let b = stdout_json(&run_in(
        dir.path(),
        &["asymptotics", "--config", cfg, "--seed", "12"],
    ));
    assert_ne!(a["config_hash"], b["config_hash"]);
}
