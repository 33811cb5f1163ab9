//! End-to-end runs of the binary: exit codes, output precedence, manifest
//! integrity and golden files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn binary() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_quotecurve"));
    // Keep the ambient environment from steering output locations.
    cmd.env_remove("QUOTECURVE_OUT");
    cmd
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawning the binary");
    assert!(
        out.status.success(),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, body).unwrap();
    path
}

const TINY_HEDGE: &str = r#"
[experiment]
kind = "hedge"
seed = 11

[market]
initial_mid = 100.0
sigma_per_sqrt_year = 0.2
gamma_per_share = 0.05
delta_per_share = 0.05

[grid]
horizon_years = 1.0
cells = 32

[hedge]
strike = 100.0
maturity_years = 1.0
n_paths = 16
"#;

/// Frozen outputs of the committed ledger config. The files were produced
/// by this same code path; the test pins them against accidental format
/// or numeric drift.
#[test]
fn golden_ledger_run_is_stable() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok(binary()
        .arg("--config")
        .arg(golden_dir().join("ledger_config.toml"))
        .arg("--out")
        .arg(tmp.path()));
    for name in ["ledger.csv", "decomposition.csv", "manifest.csv"] {
        let got = std::fs::read(tmp.path().join(name)).unwrap();
        let want = std::fs::read(golden_dir().join(name)).unwrap();
        assert_eq!(got, want, "{name} drifted from the golden copy");
    }
}

#[test]
fn manifest_lists_every_output_with_its_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), TINY_HEDGE);
    let out_dir = tmp.path().join("out");
    run_ok(binary().arg("--config").arg(&config).arg("--out").arg(&out_dir));

    let mut reader = csv::Reader::from_path(out_dir.join("manifest.csv")).unwrap();
    let mut meta = BTreeMap::new();
    let mut files = BTreeMap::new();
    for record in reader.records() {
        let record = record.unwrap();
        match &record[0] {
            "meta" => meta.insert(record[1].to_string(), record[2].to_string()),
            "file" => files.insert(record[1].to_string(), record[2].to_string()),
            kind => panic!("unexpected manifest row kind {kind}"),
        };
    }
    assert_eq!(meta["experiment"], "hedge");
    assert_eq!(meta["seed"], "11");
    assert_eq!(meta["format_version"], "1");
    assert!(meta.contains_key("cli_version"));
    assert!(meta.contains_key("core_version"));
    let config_hash = sha256_hex(&std::fs::read(&config).unwrap());
    assert_eq!(meta["config_sha256"], config_hash);

    // Every file in the directory except the manifest itself is listed,
    // and each listed hash matches the bytes on disk.
    let mut on_disk = Vec::new();
    for entry in std::fs::read_dir(&out_dir).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        if name != "manifest.csv" {
            on_disk.push(name);
        }
    }
    on_disk.sort();
    let listed: Vec<String> = files.keys().cloned().collect();
    assert_eq!(on_disk, listed);
    for (name, hash) in &files {
        let bytes = std::fs::read(out_dir.join(name)).unwrap();
        assert_eq!(&sha256_hex(&bytes), hash, "{name} hash mismatch");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), TINY_HEDGE);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_ok(binary().arg("--config").arg(&config).arg("--out").arg(&a));
    run_ok(binary().arg("--config").arg(&config).arg("--out").arg(&b));
    for name in ["hedge_paths.csv", "hedge_report.csv", "manifest.csv"] {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
            "{name} differs between reruns"
        );
    }
}

#[test]
fn seed_flag_overrides_config_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), TINY_HEDGE);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_ok(binary().arg("--config").arg(&config).arg("--out").arg(&a));
    run_ok(binary().arg("--config").arg(&config).arg("--seed").arg("99").arg("--out").arg(&b));
    assert_ne!(
        std::fs::read(a.join("hedge_paths.csv")).unwrap(),
        std::fs::read(b.join("hedge_paths.csv")).unwrap(),
        "a different seed must change the paths"
    );
    let manifest = std::fs::read_to_string(b.join("manifest.csv")).unwrap();
    assert!(manifest.contains("meta,seed,99"));
}

#[test]
fn output_directory_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let env_dir = tmp.path().join("from_env");
    let config_dir = tmp.path().join("from_config");
    let flag_dir = tmp.path().join("from_flag");

    // Environment variable is the fallback when nothing else is given.
    let plain = write_config(&{
        let d = tmp.path().join("c1");
        std::fs::create_dir(&d).unwrap();
        d
    }, TINY_HEDGE);
    run_ok(binary().arg("--config").arg(&plain).env("QUOTECURVE_OUT", &env_dir));
    assert!(env_dir.join("manifest.csv").exists());

    // The config's output_dir beats the environment.
    let with_dir = TINY_HEDGE.replace(
        "seed = 11",
        &format!("seed = 11\noutput_dir = \"{}\"", config_dir.display()),
    );
    let cfg2 = write_config(&{
        let d = tmp.path().join("c2");
        std::fs::create_dir(&d).unwrap();
        d
    }, &with_dir);
    run_ok(binary().arg("--config").arg(&cfg2).env("QUOTECURVE_OUT", &env_dir));
    assert!(config_dir.join("manifest.csv").exists());

    // --out beats both.
    run_ok(binary()
        .arg("--config")
        .arg(&cfg2)
        .arg("--out")
        .arg(&flag_dir)
        .env("QUOTECURVE_OUT", &env_dir));
    assert!(flag_dir.join("manifest.csv").exists());
}

#[test]
fn bad_config_exits_2_and_names_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        &TINY_HEDGE.replace("sigma_per_sqrt_year = 0.2", "sigma_per_sqrt_year = -0.2"),
    );
    let out = binary().arg("--config").arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("market.sigma_per_sqrt_year"), "stderr: {stderr}");
    assert!(stderr.contains("[0, inf)"), "stderr: {stderr}");
}

/// A downward-sloping ask curve is a detectable free lunch: the run
/// completes, writes its files, names the failing checks and exits 1.
#[test]
fn failing_invariant_checks_exit_1_with_names() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        r#"
[experiment]
kind = "diagnostics"
seed = 5

[market]
initial_mid = 100.0
sigma_per_sqrt_year = 0.0
gamma_per_share = -0.01
delta_per_share = 0.0

[grid]
horizon_years = 1.0
cells = 16

[strategy]
family = "buy_and_hold"
size = 5.0

[diagnostics]
n_candidates = 2
n_paths = 4
alpha = 100.0
"#,
    );
    let out_dir = tmp.path().join("out");
    let out = binary().arg("--config").arg(&config).arg("--out").arg(&out_dir).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("FAILED no_arbitrage"), "stderr: {stderr}");
    // Artifacts still land on disk so the failure can be inspected.
    assert!(out_dir.join("diagnostics.csv").exists());
    let rows = std::fs::read_to_string(out_dir.join("diagnostics.csv")).unwrap();
    assert!(rows.contains("arbitrage_flags,2,0,0,false"), "rows: {rows}");
}

/// Frictionless driftless economy: both diagnostics pass and the run
/// exits 0.
#[test]
fn frictionless_diagnostics_pass() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        r#"
[experiment]
kind = "diagnostics"
seed = 9

[market]
initial_mid = 100.0
sigma_per_sqrt_year = 0.2
gamma_per_share = 0.0
delta_per_share = 0.0

[grid]
horizon_years = 1.0
cells = 32

[strategy]
family = "piecewise_constant"
trades = 3
max_size = 1.0

[diagnostics]
n_candidates = 20
n_paths = 64
"#,
    );
    let out = run_ok(binary().arg("--config").arg(&config).arg("--out").arg(tmp.path().join("out")));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("check supermartingale: ok"), "stdout: {stdout}");
    assert!(stdout.contains("check no_arbitrage: ok"), "stdout: {stdout}");
}
