use std::fs;
use std::path::Path;
use std::process::Command;

use crawlfv::config::{Config, InitialCondition};
use crawlfv::driver::{run_simulation, OutputMode};
use crawlfv::output::{self, SWEEP_HEADER, TIMESERIES_HEADER};
use crawlfv::state::PhysParams;
use crawlfv::sweep::run_configured_sweep;

fn small(dir: &Path) -> Config {
    Config {
        n_r: 5,
        n_theta: 16,
        dt: 1e-2,
        t_max: 0.5,
        snapshot_every: 10,
        output_dir: dir.to_path_buf(),
        ..Config::default()
    }
}

fn read(path: impl AsRef<Path>) -> String {
    fs::read_to_string(path).unwrap()
}

#[test]
fn run_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let out = run_simulation(&cfg, OutputMode::Full).unwrap();
    assert_eq!(out.report.steps, 50);
    let meta = read(output::meta_path(dir.path()));
    assert_eq!(Config::parse_str(&meta).unwrap(), cfg);
    let ts = read(output::timeseries_path(dir.path()));
    let mut lines = ts.lines();
    assert_eq!(lines.next(), Some(TIMESERIES_HEADER));
    assert_eq!(lines.count(), 51);
    for step in [0, 10, 20, 30, 40, 50] {
        assert!(output::field_path(dir.path(), step).exists(), "field {step}");
        assert!(output::mu_path(dir.path(), step).exists(), "mu {step}");
    }
}

#[test]
fn identical_configs_give_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_simulation(&small(a.path()), OutputMode::Full).unwrap();
    run_simulation(&small(b.path()), OutputMode::Full).unwrap();
    for name in ["timeseries.csv", "field_00000050.csv", "mu_00000050.csv"] {
        assert_eq!(read(a.path().join(name)), read(b.path().join(name)), "{name}");
    }
}

#[test]
fn restart_from_snapshot_continues_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let full = run_simulation(&cfg, OutputMode::Full).unwrap();

    // Restart from the step-20 snapshot and run the remaining 30 steps.
    let restart_dir = dir.path().join("restart");
    let restart = Config {
        initial: InitialCondition::Table {
            field: output::field_path(dir.path(), 20),
            mu: output::mu_path(dir.path(), 20),
        },
        t_max: 0.3,
        output_dir: restart_dir,
        ..cfg.clone()
    };
    let tail = run_simulation(&restart, OutputMode::None).unwrap();
    assert_eq!(tail.final_state.c_tilde, full.final_state.c_tilde);
    assert_eq!(tail.final_state.mu_tilde, full.final_state.mu_tilde);
}

#[test]
fn sweep_csv_is_sorted_and_complete() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Config {
        n_theta: 12,
        t_max: 0.05,
        dr_list: vec![0.25, 0.5, 0.3],
        dt_list: vec![0.01, 0.005],
        kon_list: vec![3.0, 0.3],
        sweep_workers: 1,
        output_dir: dir.path().to_path_buf(),
        ..Config::default()
    };
    let records = run_configured_sweep(&cfg).unwrap();
    assert_eq!(records.len(), 12);
    let text = read(output::sweep_path(dir.path()));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(SWEEP_HEADER));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    assert_eq!(rows.len(), 12);
    let keys: Vec<(f64, f64, f64)> = rows
        .iter()
        .map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap(), r[2].parse().unwrap()))
        .collect();
    let mut sorted = keys.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(keys, sorted);
    assert!(rows.iter().filter(|r| r[1] == "3e-1").all(|r| r[8] == "skipped" && r[3] == "none"));
    assert!(rows.iter().filter(|r| r[1] != "3e-1").all(|r| r[8] == "not_steady"));

    // Reordering the lists does not change the output apart from timings.
    let other = tempfile::tempdir().unwrap();
    let swapped = Config {
        dr_list: vec![0.3, 0.5, 0.25],
        dt_list: vec![0.005, 0.01],
        kon_list: vec![0.3, 3.0],
        output_dir: other.path().to_path_buf(),
        ..cfg
    };
    let again = run_configured_sweep(&swapped).unwrap();
    for (a, b) in records.iter().zip(&again) {
        assert_eq!((a.k_on, a.dr, a.dt, a.n_r), (b.k_on, b.dr, b.dt, b.n_r));
        assert_eq!(a.pol_steady.to_bits(), b.pol_steady.to_bits());
        assert_eq!(a.status, b.status);
    }
}

#[test]
fn k_on_zero_polarization_scales_with_tolerance() {
    // With no activation μ̃ decays geometrically, so the steady-state stopping
    // time, and the residual |v| there, is set by the tolerance alone.
    let pol = |eps: f64| {
        let cfg = Config {
            r_max: 1.0,
            n_r: 5,
            n_theta: 32,
            dt: 1e-3,
            eps_ss: eps,
            params: PhysParams {
                k_on: 0.0,
                ..PhysParams::default()
            },
            ..Config::default()
        };
        run_simulation(&cfg, OutputMode::None).unwrap().report.polarization
    };
    let (a, b) = (pol(1e-4), pol(1e-6));
    let ratio = a / b;
    assert!((ratio - 100.0).abs() < 1.0, "ratio {ratio}");
    assert!((a / 1e-4 - 9.94).abs() < 0.1, "pol/eps {}", a / 1e-4);
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_crawlfv"))
}

#[test]
fn cli_run_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.cfg");
    fs::write(&cfg_path, "n_r = 4\nn_theta = 12\nt_max = 0.05\noutput_dir = unused\n").unwrap();
    let out_dir = dir.path().join("from_env");
    let status = cli()
        .args(["run", cfg_path.to_str().unwrap()])
        .env(crawlfv::config::OUTDIR_ENV, &out_dir)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    assert!(output::timeseries_path(&out_dir).exists());

    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "k_onn = 3\n").unwrap();
    let status = cli().args(["run", bad.to_str().unwrap()]).output().unwrap();
    assert_eq!(status.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&status.stderr).contains("k_onn"));

    let missing = cli().args(["mass-check", "/nonexistent/cfg"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));

    let mass = cli()
        .args(["mass-check", cfg_path.to_str().unwrap(), "--steps", "5"])
        .output()
        .unwrap();
    assert!(mass.status.success());
    assert!(String::from_utf8_lossy(&mass.stdout).contains("max relative mass drift"));

    let poisson = cli()
        .args(["poisson-check", cfg_path.to_str().unwrap(), "--n-r", "4,8"])
        .output()
        .unwrap();
    assert!(poisson.status.success());
    let text = String::from_utf8_lossy(&poisson.stdout);
    assert!(text.contains("mode paper") && text.contains("mode face"));
}

#[test]
fn cli_reports_divergence_as_solver_failure() {
    // A huge time step with strong advection blows the explicit half-step up.
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("blow.cfg");
    fs::write(
        &cfg_path,
        format!(
            "n_r = 8\nn_theta = 64\ndt = 50\nt_max = 5000\ngamma = 50\nk_d = 40\noutput_dir = {}\n",
            dir.path().join("o").display()
        ),
    )
    .unwrap();
    let out = cli().args(["run", cfg_path.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    // Diagnostics up to the failure are still on disk.
    assert!(output::timeseries_path(&dir.path().join("o")).exists());
}
