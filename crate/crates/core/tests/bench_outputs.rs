//! Harness outputs: sampler statistics, determinism, CSV cross-checks and the CLI.

use std::fs;
use std::path::Path;
use std::process::Command;

use lie_mpc::bench::runner::{read_aggregate_csv, read_trial_csv, trial_file_name, write_results};
use lie_mpc::bench::{run_scenario, sample_initial_poses, Dispersion, Scenario};
use lie_mpc::lie::log_so3;

const SHORT_SPIRAL: &str = r#"
name = "short_spiral"

[plant]
mass = 1.0
inertia_diag = [0.1, 0.15, 0.2]

[reference]
kind = "constant_twist"
twist = [0.0, 0.0, 1.0, 2.0, 0.0, 0.2]

[mpc]
horizon = 12
dt = 0.05
q_diag = [10.0, 10.0, 10.0, 10.0, 10.0, 10.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]
r_diag = [0.02]
input_bound = 50.0

[experiment]
trials = 4
seed = 5
duration = 2.0
"#;

fn short_spiral() -> Scenario {
    Scenario::from_toml_str(SHORT_SPIRAL).unwrap()
}

#[test]
fn sampled_angles_are_uniform() {
    let d = Dispersion::default();
    let n = 10_000;
    let mut angles: Vec<f64> = sample_initial_poses(n, 2024, d)
        .iter()
        .map(|p| log_so3(&p.rotation).norm() / d.theta_max)
        .collect();
    angles.sort_by(f64::total_cmp);
    let ks = angles
        .iter()
        .enumerate()
        .map(|(i, &x)| ((i + 1) as f64 / n as f64 - x).max(x - i as f64 / n as f64))
        .fold(0.0, f64::max);
    // critical value at the 1% level
    assert!(ks < 1.628 / (n as f64).sqrt(), "KS statistic {ks}");
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn identical_runs_write_identical_files() {
    let s = short_spiral();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_results(a.path(), &s, &run_scenario(&s).unwrap()).unwrap();
    write_results(b.path(), &s, &run_scenario(&s).unwrap()).unwrap();
    let (fa, fb) = (read_dir_bytes(a.path()), read_dir_bytes(b.path()));
    assert_eq!(fa.len(), 4 + 3);
    assert_eq!(fa, fb);
}

#[test]
fn aggregates_recompute_from_trial_files() {
    let s = short_spiral();
    let dir = tempfile::tempdir().unwrap();
    let results = run_scenario(&s).unwrap();
    write_results(dir.path(), &s, &results).unwrap();

    let sums: Vec<(f64, f64)> = (0..s.experiment.trials)
        .map(|i| {
            let rows = read_trial_csv(&dir.path().join(trial_file_name(i))).unwrap();
            assert_eq!(rows.len(), (s.experiment.duration / s.mpc.dt).round() as usize);
            (rows.iter().map(|r| r.psi_rot_norm).sum(), rows.iter().map(|r| r.pos_err_norm).sum())
        })
        .collect();
    let aggregates = read_aggregate_csv(&dir.path().join("aggregate.csv")).unwrap();
    let find = |m: &str| aggregates.iter().find(|a| a.metric == m).unwrap().clone();
    let rot = find("acc_psi_rot");
    let pos = find("acc_pos_err");
    let n = sums.len() as f64;
    assert_eq!(rot.count, sums.len());
    assert!((rot.mean - sums.iter().map(|s| s.0).sum::<f64>() / n).abs() < 1e-9);
    assert!((pos.mean - sums.iter().map(|s| s.1).sum::<f64>() / n).abs() < 1e-9);
    let max_rot = sums.iter().map(|s| s.0).fold(f64::MIN, f64::max);
    assert!((rot.max - max_rot).abs() < 1e-9);

    let hist = fs::read_to_string(dir.path().join("histogram.csv")).unwrap();
    let counted: usize = hist
        .lines()
        .skip(1)
        .filter(|l| l.starts_with("acc_psi_rot,"))
        .map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(counted, sums.len());
}

#[test]
fn trajectories_stay_on_the_group() {
    for r in run_scenario(&short_spiral()).unwrap() {
        assert!(r.status.is_ok());
        assert!(r.max_orthogonality_defect < 1e-8);
        assert!(r.poses.iter().all(|p| p.rotation.orthogonality_defect() < 1e-8));
    }
}

#[test]
fn scenario_files_reject_typos() {
    let typo = SHORT_SPIRAL.replace("input_bound", "input_bund");
    assert!(Scenario::from_toml_str(&typo).is_err());
    let bad_kind = SHORT_SPIRAL.replace("constant_twist", "lissajous");
    let s = Scenario::from_toml_str(&bad_kind);
    assert!(s.is_err() || s.unwrap().reference().is_err());
    let bad_dt = SHORT_SPIRAL.replace("dt = 0.05", "dt = 0.0505");
    assert!(Scenario::from_toml_str(&bad_dt).is_err());
}

#[test]
fn tabulated_reference_from_a_knot_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("knots.csv"),
        "t,roll_deg,pitch_deg,yaw_deg,x,y,z\n0,0,0,0,0,0,0\n1,0,0,30,0.2,0,0\n2,0,0,30,0.2,0,0\n",
    )
    .unwrap();
    let text = SHORT_SPIRAL
        .replace("kind = \"constant_twist\"\ntwist = [0.0, 0.0, 1.0, 2.0, 0.0, 0.2]", "kind = \"tabulated\"\nfile = \"knots.csv\"")
        .replace("trials = 4", "trials = 1\ntheta_max = 0.0\np_max = 0.0")
        .replace("duration = 2.0", "duration = 4.0");
    let path = dir.path().join("tab.toml");
    fs::write(&path, text).unwrap();
    let s = Scenario::from_file(&path).unwrap();
    let r = run_scenario(&s).unwrap().remove(0);
    assert!(r.status.is_ok());
    let last = r.rows.last().unwrap();
    assert!(last.psi_rot_norm < 0.05 && last.pos_err_norm < 0.05);
}

fn bench() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bench"))
}

#[test]
fn cli_lists_bundled_scenarios() {
    let out = bench().arg("list-scenarios").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["spiral", "spiral_simplified", "quadruped_stance", "quadruped_roll"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name} missing");
    }
}

#[test]
fn cli_sweep_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("sweep.csv");
    let out = bench().args(["sweep-error-scale", "--out"]).arg(&file).output().unwrap();
    assert!(out.status.success());
    let text = fs::read_to_string(&file).unwrap();
    assert_eq!(text.lines().next(), Some("theta,e_R_norm,log_norm"));
    assert_eq!(text.lines().count(), 182);
}

#[test]
fn cli_run_honours_output_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("short.toml");
    fs::write(&scenario, SHORT_SPIRAL).unwrap();
    let from_env = dir.path().join("env");
    let from_flag = dir.path().join("flag");

    let out = bench()
        .arg("run")
        .arg(&scenario)
        .args(["--trials", "2", "--seed", "9", "--controller", "simplified"])
        .env("BENCH_OUT_DIR", &from_env)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(from_env.join("trial_001.csv").exists());
    assert!(!from_env.join("trial_002.csv").exists());

    let out = bench()
        .arg("run")
        .arg(&scenario)
        .args(["--trials", "1", "--out"])
        .arg(&from_flag)
        .env("BENCH_OUT_DIR", &from_env)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(from_flag.join("summary.csv").exists());
}

#[test]
fn cli_exit_code_reflects_failed_trials() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("starved.toml");
    fs::write(&scenario, SHORT_SPIRAL.replace("input_bound = 50.0", "input_bound = 50.0\nmax_iter = 1\npolish = false")).unwrap();
    let out = bench()
        .arg("run")
        .arg(&scenario)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let summary = fs::read_to_string(dir.path().join("out/summary.csv")).unwrap();
    assert!(summary.contains("failed"));

    let out = bench().args(["run", "no-such-scenario"]).output().unwrap();
    assert!(!out.status.success());
}
