//! End-to-end runs of the binary: determinism of artifacts, exit codes,
//! manifest writing, environment overrides, strict config errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sausage-sym"))
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str], out_dir: &Path) -> Output {
    bin()
        .args(args)
        .arg("--out")
        .arg(out_dir)
        .env_remove("SAUSAGE_SYM_OUT")
        .output()
        .expect("binary runs")
}

#[test]
fn polarize_writes_identical_artifacts_on_rerun() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("polarize_blocks.cfg");
    let out1 = tmp.path().join("a");
    let out2 = tmp.path().join("b");
    for out in [&out1, &out2] {
        let res = run(&["polarize", "--config", cfg.to_str().unwrap()], out);
        assert!(
            res.status.success(),
            "{}",
            String::from_utf8_lossy(&res.stderr)
        );
    }
    let a = fs::read(out1.join("polarized.set")).unwrap();
    let b = fs::read(out2.join("polarized.set")).unwrap();
    assert_eq!(a, b);
    // manifest + config echo present
    assert!(out1.join("manifest.txt").exists());
    let echo = fs::read(out1.join("config_echo.txt")).unwrap();
    assert_eq!(echo, fs::read(&cfg).unwrap());
    // the polarized raster parses back as a set file
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("grid dim=2"));
}

#[test]
fn check_exits_zero_on_the_ball_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("check_ball.cfg");
    let res = run(&["check", "--config", cfg.to_str().unwrap()], tmp.path());
    assert!(
        res.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&res.stderr)
    );
    let summary = fs::read_to_string(tmp.path().join("summary.csv")).unwrap();
    assert!(summary.contains("ball_fixed_point"));
    assert!(!summary.contains("violated"));
    // margins at zero for the symmetric fixed point
    let report = fs::read_to_string(tmp.path().join("ball_fixed_point/report.csv")).unwrap();
    assert!(report.lines().count() >= 3);
}

#[test]
fn solve_writes_rasters_and_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("problem_interval.cfg");
    let res = run(&["solve", "--config", cfg.to_str().unwrap()], tmp.path());
    assert!(
        res.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&res.stderr)
    );
    let csv = fs::read_to_string(tmp.path().join("solve.csv")).unwrap();
    assert!(csv.starts_with("t,mass,residual_max,shell_leak\n"));
    assert_eq!(csv.lines().count(), 3);
    for i in 0..2 {
        let raster = fs::read_to_string(tmp.path().join(format!("field_t{i}.txt"))).unwrap();
        assert!(raster.starts_with("field dim=1"));
    }
}

#[test]
fn sausage_csv_has_both_estimators_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("sausage_interval.cfg");
    let out1 = tmp.path().join("a");
    let out2 = tmp.path().join("b");
    for out in [&out1, &out2] {
        let res = run(&["sausage", "--config", cfg.to_str().unwrap()], out);
        assert!(
            res.status.success(),
            "{}",
            String::from_utf8_lossy(&res.stderr)
        );
    }
    let a = fs::read_to_string(out1.join("sausage.csv")).unwrap();
    let b = fs::read_to_string(out2.join("sausage.csv")).unwrap();
    assert_eq!(a, b);
    assert!(a.starts_with("method,T,delta,n_paths,mean,ci_half_width,seed\n"));
    assert!(a.contains("\nstamp,"));
    assert!(a.contains("\nhitting_integral,"));
}

#[test]
fn battery_summary_is_bitwise_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("default_battery.cfg");
    let out1 = tmp.path().join("a");
    let out2 = tmp.path().join("b");
    for out in [&out1, &out2] {
        let res = run(&["battery", "--config", cfg.to_str().unwrap()], out);
        assert!(
            res.status.success(),
            "stderr: {}",
            String::from_utf8_lossy(&res.stderr)
        );
    }
    let a = fs::read_to_string(out1.join("summary.csv")).unwrap();
    let b = fs::read_to_string(out2.join("summary.csv")).unwrap();
    assert_eq!(a, b);
    // one row per scenario, none violated
    assert_eq!(a.lines().count(), 5);
    assert!(!a.contains("violated"));
    // per-scenario artifacts reproduce too
    for name in [
        "ball_polarization",
        "two_intervals_mass",
        "square_isoperimetry",
        "interval_representation",
    ] {
        let ra = fs::read(out1.join(name).join("report.csv")).unwrap();
        let rb = fs::read(out2.join(name).join("report.csv")).unwrap();
        assert_eq!(ra, rb, "{name}");
    }
}

#[test]
fn violated_scenario_exits_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    // a representation check with an absurdly tight band must report a
    // violation through the exit code
    let cfg_dir = tmp.path().join("cfg");
    fs::create_dir_all(cfg_dir.join("sets")).unwrap();
    fs::copy(
        configs_dir().join("sets/interval.set"),
        cfg_dir.join("sets/interval.set"),
    )
    .unwrap();
    fs::write(
        cfg_dir.join("tight.cfg"),
        "seed 1\n\n[scenario impossible]\ntheorem representation\nset sets/interval.set\ntimes 0.1\ndelta 1e-2\nn_paths 200\nband 1e-6\n",
    )
    .unwrap();
    let res = run(
        &[
            "check",
            "--config",
            cfg_dir.join("tight.cfg").to_str().unwrap(),
        ],
        &tmp.path().join("out"),
    );
    assert_eq!(
        res.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
}

#[test]
fn config_errors_exit_one_with_line_numbers() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.cfg");
    fs::write(
        &bad,
        "seed 1\n\n[scenario x]\ntheorem polarization\nwobble 3\n",
    )
    .unwrap();
    let res = run(
        &["check", "--config", bad.to_str().unwrap()],
        &tmp.path().join("out"),
    );
    assert_eq!(res.status.code(), Some(1));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("line 5"), "stderr: {err}");
    assert!(err.contains("wobble"), "stderr: {err}");
}

#[test]
fn environment_variable_overrides_out_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let env_out = tmp.path().join("env_out");
    let flag_out = tmp.path().join("flag_out");
    let cfg = configs_dir().join("polarize_blocks.cfg");
    let res = bin()
        .args(["polarize", "--config", cfg.to_str().unwrap(), "--out"])
        .arg(&flag_out)
        .env("SAUSAGE_SYM_OUT", &env_out)
        .output()
        .unwrap();
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    assert!(env_out.join("polarized.set").exists());
    assert!(!flag_out.exists());
}

#[test]
fn refine_adds_ladder_rows_for_sausage_runs() {
    let tmp = tempfile::tempdir().unwrap();
    // small, fast sausage config
    let cfg_dir = tmp.path().join("cfg");
    fs::create_dir_all(cfg_dir.join("sets")).unwrap();
    fs::write(
        cfg_dir.join("sets/tiny.set"),
        "grid dim=1 h=0.1 extent=81\nbox min=-0.5 max=0.5\n",
    )
    .unwrap();
    fs::write(
        cfg_dir.join("s.cfg"),
        "set sets/tiny.set\nT 0.1\ndelta 1e-3\nn_paths 500\nmethod stamp\nseed 3\n",
    )
    .unwrap();
    let res = run(
        &[
            "sausage",
            "--config",
            cfg_dir.join("s.cfg").to_str().unwrap(),
            "--refine",
        ],
        &tmp.path().join("out"),
    );
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let csv = fs::read_to_string(tmp.path().join("out/sausage.csv")).unwrap();
    assert!(csv.contains("\nstamp,"));
    assert!(csv.contains("\nstamp_refined,"));
}

#[test]
fn sausage_can_emit_the_hitting_field_raster() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_dir = tmp.path().join("cfg");
    fs::create_dir_all(cfg_dir.join("sets")).unwrap();
    fs::write(
        cfg_dir.join("sets/tiny.set"),
        "grid dim=1 h=0.1 extent=81\nbox min=-0.5 max=0.5\n",
    )
    .unwrap();
    fs::write(
        cfg_dir.join("s.cfg"),
        "set sets/tiny.set\nT 0.1\ndelta 1e-3\nn_paths 300\nmethod hitting\nseed 5\nfield_raster true\n",
    )
    .unwrap();
    let res = run(
        &[
            "sausage",
            "--config",
            cfg_dir.join("s.cfg").to_str().unwrap(),
        ],
        &tmp.path().join("out"),
    );
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let raster = fs::read_to_string(tmp.path().join("out/hitting_field.txt")).unwrap();
    assert!(raster.starts_with("field dim=1"));
}
