use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn anholonomy(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anholonomy"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn report(dir: &Path, name: &str) -> toml::Table {
    fs::read_to_string(dir.join(name)).unwrap().parse().unwrap()
}

#[test]
fn list_presets_names_all_presets() {
    let out = Command::new(env!("CARGO_BIN_EXE_anholonomy"))
        .arg("list-presets")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["twolevel-pi", "twolevel-tilted", "random-cyclic", "random-broken"] {
        assert!(text.contains(name), "{name} missing");
    }
}

#[test]
fn sweep_writes_tracks_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = anholonomy(dir.path(), &["sweep", "--preset", "twolevel-pi", "--steps", "64"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let csv = fs::read_to_string(dir.path().join("twolevel-pi_flow.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "lambda,E_0,E_1,w_0,w_1,s_0,s_1");
    assert_eq!(lines.count(), 65);

    let r = report(dir.path(), "twolevel-pi_sweep.toml");
    assert_eq!(r["permutation"].as_array().unwrap().len(), 2);
    assert_eq!(r["permutation"][0].as_integer(), Some(1));
    assert_eq!(r["certified"].as_bool(), Some(true));
    assert_eq!(r["shift"].as_integer(), Some(1));
}

#[test]
fn random_preset_without_seed_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = anholonomy(dir.path(), &["sweep", "--random", "4"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn unknown_preset_and_missing_scenario_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(anholonomy(dir.path(), &["sweep", "--preset", "nope"]).status.code(), Some(2));
    assert_eq!(anholonomy(dir.path(), &["analyze"]).status.code(), Some(2));
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, "bad.toml", "preset = \"twolevel-pi\"\nstepz = 10\n");
    let out = anholonomy(dir.path(), &["sweep", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn custom_config_is_named_after_file_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        "three.toml",
        "dimension = 3\nh0_diagonal = [0.0, 1.0, 2.5]\nv_real = [1.0, 1.0, 1.0]\nsteps = 32\n",
    );
    let out = anholonomy(dir.path(), &["sweep", "--config", &cfg, "--steps", "128"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path(), "three_sweep.toml");
    assert_eq!(r["steps"].as_integer(), Some(128));
    assert_eq!(r["dimension"].as_integer(), Some(3));
    let perm: Vec<i64> = r["permutation"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_integer().unwrap())
        .collect();
    assert_eq!(perm, [1, 2, 0]);
}

#[test]
fn eigenvector_kick_fails_certification_unless_waived() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        "eig.toml",
        "dimension = 3\nh0_diagonal = [0.0, 1.0, 2.0]\nv_real = [1.0, 0.0, 0.0]\nsteps = 64\n",
    );
    let out = anholonomy(dir.path(), &["sweep", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(3));
    assert!(dir.path().join("eig_sweep.toml").exists());
    let out = anholonomy(dir.path(), &["sweep", "--config", &cfg, "--no-certify"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(dir.path(), "eig_sweep.toml")["certified"].as_bool(), Some(false));
}

#[test]
fn coarse_grid_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = anholonomy(dir.path(), &["sweep", "--random", "8", "--seed", "1", "--steps", "4"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("match floor"));
}

#[test]
fn broken_preset_sweeps_on_reduced_space() {
    let dir = tempfile::tempdir().unwrap();
    let out = anholonomy(dir.path(), &["sweep", "--preset", "random-broken", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("trivial"));
    let r = report(dir.path(), "random-broken-n5-s3_sweep.toml");
    assert_eq!(r["certified_dimension"].as_integer(), Some(3));
    assert_eq!(r["trivial_levels"].as_integer(), Some(2));
    assert_eq!(r["full_permutation"].as_array().unwrap().len(), 5);
}

#[test]
fn analyze_reports_krylov_rank() {
    let dir = tempfile::tempdir().unwrap();
    let out = anholonomy(dir.path(), &["analyze", "--preset", "random-broken", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(dir.path(), "random-broken-n5-s3_analysis.toml");
    assert_eq!(r["cyclicity"]["krylov_rank"].as_integer(), Some(3));
    assert_eq!(r["cyclicity"]["is_cyclic"].as_bool(), Some(false));
    assert_eq!(r["reduction"]["reduced_dimension"].as_integer(), Some(3));
}

#[test]
fn adiabatic_zero_steps_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let out = anholonomy(dir.path(), &["adiabatic", "--preset", "twolevel-pi", "--M", "0"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path(), "twolevel-pi_adiabatic.toml");
    assert_eq!(r["identity"].as_bool(), Some(true));
    assert!((r["run"]["fidelity"].as_float().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn adiabatic_cycles_follow_the_shift() {
    let dir = tempfile::tempdir().unwrap();
    let out = anholonomy(
        dir.path(),
        &["adiabatic", "--random", "3", "--seed", "5", "--M", "400,800", "--cycles", "3"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path(), "random-cyclic-n3-s5_adiabatic.toml");
    let cycles = r["per_cycle"].as_array().unwrap();
    assert_eq!(cycles.len(), 3);
    for c in cycles {
        assert_eq!(c["dominant_level"].as_integer(), c["expected_level"].as_integer());
    }
    assert_eq!(r["convergence"].as_array().unwrap().len(), 2);
}

#[test]
fn out_directory_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_anholonomy"))
        .args(["sweep", "--preset", "twolevel-tilted", "--steps", "64"])
        .env("ANHOLONOMY_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("twolevel-tilted_flow.csv").exists());
}
