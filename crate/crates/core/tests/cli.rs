use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use glse::harness::{read_csv, run_sweep, Family, GridPoint, ScenarioTemplate, SweepConfig};

fn glse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_glse")).args(args).output().unwrap()
}

/// Runs a command line without paths; splits on whitespace.
fn glse_line(line: &str) -> Output {
    glse(&line.split_whitespace().collect::<Vec<_>>())
}

fn config_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("sweep.toml");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn shipped_configs_parse_and_round_trip() {
    for name in ["l0_sweep.toml", "bpsk_replica.toml"] {
        let c = SweepConfig::load(&config_dir().join(name)).unwrap();
        c.validate().unwrap();
        let again = SweepConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(again, c, "{name}");
    }
}

#[test]
fn unknown_keys_are_rejected() {
    let text =
        "spec_version = \"1\"\n[scenario]\nfamily = \"l0\"\ncolour = 3\n[[grid]]\nalpha_inv = 2.0\npower = 0.5\n";
    assert!(SweepConfig::from_toml(text).is_err());
}

#[test]
fn replica_only_sweep_leaves_mc_columns_empty() {
    let mut c = SweepConfig::new(ScenarioTemplate::new(Family::L0), vec![GridPoint::new(2.0, 0.7, 0.5)]);
    c.mc = None;
    let r = run_sweep(&c).unwrap();
    assert!(r[0].is_ok() && r[0].mc.is_none() && r[0].rs.is_some());
}

#[test]
fn sweep_writes_csv_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let cfg = config_dir().join("bpsk_replica.toml");
    let out = glse(&["sweep", cfg.to_str().unwrap(), "--csv", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv(&csv).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows
        .iter()
        .all(|r| r.status == "ok" && r.d_rsb.is_some() && r.d_lemma2.is_some()));
}

#[test]
fn bad_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "spec_version = \"9\"\n[scenario]\nfamily = \"l0\"\n[[grid]]\nalpha_inv = 2.0\npower = 0.5\n",
    );
    assert_eq!(glse(&["sweep", cfg.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(
        glse_line("replica --family nope --alpha-inv 2 --power 0.5")
            .status
            .code(),
        Some(2)
    );
    let papr_missing = glse_line("replica --family papr_l0 --alpha-inv 2 --power 0.5");
    assert_eq!(papr_missing.status.code(), Some(2));
}

#[test]
fn failed_points_exit_three_only_when_strict() {
    let dir = tempfile::tempdir().unwrap();
    // ℓ0 with p = 0.5, η = 0.7 has no RS solution at α⁻¹ = 4
    let cfg = write_config(
        dir.path(),
        "spec_version = \"1\"\n[scenario]\nfamily = \"l0\"\n[[grid]]\nalpha_inv = 4.0\neta = 0.7\npower = 0.5\n",
    );
    let cfg = cfg.to_str().unwrap();
    let lax = glse(&["sweep", cfg, "--csv", "-"]);
    assert_eq!(lax.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&lax.stdout).contains("infeasible"));
    assert_eq!(glse(&["--strict", "sweep", cfg, "--csv", "-"]).status.code(), Some(3));
}

#[test]
fn point_commands_print_json() {
    let out = glse_line("tune --family l1 --alpha-inv 2 --eta 0.7 --power 0.5");
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["penalty"]["lambda1"].as_f64().unwrap() > 0.0);
    assert!((v["solution"]["eta"].as_f64().unwrap() - 0.7).abs() < 1e-6);

    let out = glse_line("bound --alpha-inv 1 --eta 0.5 --peak-power 2 --distortion 0.5");
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let r = v["lemma2_ratio"].as_f64().unwrap();
    assert!((v["d_lemma2"].as_f64().unwrap() - 2.0 * r).abs() < 1e-12);
    assert!((v["rate_lb"].as_f64().unwrap() - (1.0f64 / 1.5).ln()).abs() < 1e-12);
}

#[test]
fn simulate_reports_monte_carlo() {
    let out = glse_line("simulate --family l0 --alpha-inv 2 --eta 0.7 --power 0.5 --n-tx 12 --channels 10 --seed 3");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["mc"]["n_trials"].as_u64(), Some(10));
    assert_eq!(v["mc"]["n_users"].as_u64(), Some(6));
    let odd = glse_line("simulate --family l0 --alpha-inv 2.5 --eta 0.7 --power 0.5 --n-tx 12 --channels 2");
    assert_eq!(odd.status.code(), Some(2));
}
