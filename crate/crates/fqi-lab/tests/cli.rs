//! End-to-end checks of the `fqi-lab` binary: exit codes, config rejection,
//! dry runs, and bitwise agreement between the reference command and the
//! library helper it mirrors.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fqi_core::eval::build_reference_policy;
use fqi_lab::commands::{cmd_build_reference, load_reference, Ctx};
use fqi_lab::config::ExperimentConfig;
use fqi_lab::runio::weights_from_bin;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fqi-lab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn fqi-lab")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// The reference command persists its fit history, so it spells out the same
/// pipeline the library helper runs. Pin the two to bitwise agreement on both
/// the fitted weights and the evaluated mean.
#[test]
fn reference_command_matches_library_helper_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let toml_text = "[features]\npos_components = 3\nvel_components = 2\nforce_degree = 1\n\
                     [fqi]\nmax_iterations = 40\n\
                     [sweep]\nreference_n = 300\n\
                     [eval]\ngrid_points = 4\ntrajectories_per_start = 2\nsteps = 30\n";
    let ctx = Ctx {
        cfg: ExperimentConfig::from_toml(toml_text).unwrap(),
        config_text: toml_text.to_owned(),
        seed: 99,
        out: dir.path().to_path_buf(),
        threads: 0,
        dry_run: false,
    };
    cmd_build_reference(&ctx).unwrap();

    let params = ctx.cfg.env.params().unwrap();
    let spec = ctx.cfg.features.spec(&params).unwrap();
    let fqi_cfg = ctx.cfg.fqi.config().unwrap();
    let eval_cfg = ctx.cfg.eval.reference_config(params.gamma, 99).unwrap();
    let (expect_w, expect_est) =
        build_reference_policy(&params, &spec, 300, &fqi_cfg, &eval_cfg, 99).unwrap();

    let bin = fs::read(dir.path().join("reference_weights.bin")).unwrap();
    let got_w = weights_from_bin(&bin).unwrap();
    assert_eq!(expect_w.len(), got_w.len());
    for (a, b) in expect_w.iter().zip(&got_w) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    let reference = load_reference(dir.path()).unwrap();
    assert_eq!(reference.mean.to_bits(), expect_est.mean.to_bits());
    assert_eq!(reference.big_n, 300);
    assert_eq!(reference.trajectories, expect_est.trajectories);
}

#[test]
fn missing_seed_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["generate-data", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("a master seed is required"));
}

#[test]
fn missing_out_dir_is_a_config_error() {
    let out = run(&["generate-data", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("an output directory is required"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("bad.toml");
    fs::write(&cfg_path, "seed = 1\nout = \"runs\"\nbananas = 3\n").unwrap();
    let out = run(&["generate-data", "--config", cfg_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("config error"));
}

#[test]
fn unreadable_config_is_a_config_error() {
    let out = run(&[
        "generate-data",
        "--seed",
        "1",
        "--out",
        "x",
        "--config",
        "/nonexistent/config.toml",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("cannot read config"));
}

#[test]
fn sweep_without_reference_fails_and_names_the_fix() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "sweep",
        "--seed",
        "7",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr_of(&out).contains("build-reference"));
}

#[test]
fn sweep_dry_run_prints_the_plan_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("plan.toml");
    fs::write(
        &cfg_path,
        "[sweep]\nsizes = [50, 100]\ntrials = 2\n",
    )
    .unwrap();
    let target = dir.path().join("never-created");
    let out = run(&[
        "sweep",
        "--dry-run",
        "--seed",
        "7",
        "--out",
        target.to_str().unwrap(),
        "--config",
        cfg_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(text.contains("sweep plan: 2 sizes x 2 trials = 4 units, feature dim 640"));
    assert!(text.contains("n=50 trial=0"));
    assert!(text.contains("n=100 trial=1"));
    assert!(!target.exists(), "dry run must not create the output dir");
}

#[test]
fn generate_data_subprocess_leaves_dataset_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("tiny.toml");
    fs::write(&cfg_path, "[dataset]\nn = 25\n").unwrap();
    let target = dir.path().join("run");
    let out = run(&[
        "generate-data",
        "--seed",
        "11",
        "--out",
        target.to_str().unwrap(),
        "--config",
        cfg_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    assert!(target.join("mc_dataset.csv").exists());
    let manifest = fqi_lab::runio::read_manifest(Path::new(&target)).unwrap();
    assert_eq!(manifest.command, "generate-data");
    assert_eq!(manifest.seed, 11);
    assert!(manifest.artifacts.contains_key("mc_dataset.csv"));
}
