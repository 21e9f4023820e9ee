//! Integration tests for the `cul` binary: file outputs, exit codes,
//! determinism, and config round-trips.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn cul() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cul"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = cul().args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "command {:?} failed\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("cul_cli_tests").join(name);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

#[test]
fn sweep_writes_front_with_boundary_and_interior_rows() {
    let dir = temp_dir("sweep_rows");
    let front = dir.join("front.csv");
    run_ok(&[
        "sweep",
        "--problem",
        "quad",
        "--fractions",
        "0.25,0.5,0.75",
        "--seed",
        "1",
        "--out",
        front.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(&front).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 6, "header + 2 boundary + 3 interior rows");
    assert_eq!(lines[0], "phase,epsilon,iter,f1,f2,grad_f1_norm,g_norm,eta,psi,wall_ms");
    assert!(lines[1].starts_with("phase1-high,"));
    assert!(lines[2].starts_with("phase2,"));
    assert!(lines[5].starts_with("phase1-low,"));
}

#[test]
fn identical_seeds_give_byte_identical_outputs() {
    let dir = temp_dir("determinism");
    let a = dir.join("a.csv");
    let b = dir.join("b.csv");
    let aj = dir.join("a.json");
    let bj = dir.join("b.json");
    for (path, format) in [(&a, "csv"), (&b, "csv"), (&aj, "json"), (&bj, "json")] {
        run_ok(&[
            "sweep",
            "--problem",
            "quad",
            "--seed",
            "9",
            "--format",
            format,
            "--out",
            path.to_str().unwrap(),
        ]);
    }
    assert_eq!(read(&a), read(&b), "csv outputs differ across identical runs");
    assert_eq!(read(&aj), read(&bj), "json outputs differ across identical runs");
    assert_ne!(read(&a), read(&aj));
}

#[test]
fn missing_out_flag_exits_2_without_writing() {
    let dir = temp_dir("missing_out");
    let before: Vec<_> = std::fs::read_dir(&dir).unwrap().collect();
    let out = cul()
        .current_dir(&dir)
        .args(["sweep", "--problem", "quad"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let after: Vec<_> = std::fs::read_dir(&dir).unwrap().collect();
    assert_eq!(before.len(), after.len(), "files were written on config error");
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = temp_dir("bad_config");
    let cfg = dir.join("bad.json");
    std::fs::write(&cfg, r#"{"step.mu": 0.05, "not_a_key": true}"#).unwrap();
    let out = cul()
        .args([
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.join("x.csv").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not_a_key"));
}

#[test]
fn unknown_problem_exits_2() {
    let out = cul()
        .args(["sweep", "--problem", "rosenbrock", "--out", "/tmp/never.csv"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn constraint_violation_exits_4() {
    let dir = temp_dir("violation");
    // boundaries converge, but the controllable phase takes zero-length
    // steps from an infeasible cold start, so every point ends above epsilon
    let out = cul()
        .args([
            "sweep",
            "--problem",
            "quad",
            "--max-iters",
            "200",
            "--mu-phase2",
            "0",
            "--warm-start",
            "false",
            "--constraint-tol",
            "0.001",
            "--out",
            dir.join("v.csv").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(4),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn numeric_failure_exits_3() {
    let dir = temp_dir("diverge");
    // a step size this large overflows the quadratic within a few iterations
    let out = cul()
        .args([
            "solve-boundaries",
            "--problem",
            "quad",
            "--mu",
            "1e160",
            "--out",
            dir.join("d.csv").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(3),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn rates_writes_one_row_per_delta() {
    let dir = temp_dir("rates");
    let out_path = dir.join("rates.csv");
    run_ok(&[
        "rates",
        "--problem",
        "quad",
        "--delta",
        "1,2,3,4",
        "--mu",
        "0.01",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(&out_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(
        lines[0],
        "delta,slope_grad_f1_norm,expected_grad_slope,slope_g_norm,expected_g_slope"
    );
}

#[test]
fn show_config_round_trips_to_identical_results() {
    let dir = temp_dir("round_trip");
    let flags = [
        "--problem",
        "quad",
        "--mu",
        "0.07",
        "--mu-phase2",
        "0.004",
        "--seed",
        "5",
        "--fractions",
        "0.3,0.6",
    ];
    let echo = run_ok(&[&["report", "--show-config"], &flags[..]].concat());
    let cfg_path = dir.join("echoed.json");
    std::fs::write(&cfg_path, &echo.stdout).unwrap();

    let direct = dir.join("direct.csv");
    run_ok(&[&["sweep"], &flags[..], &["--out", direct.to_str().unwrap()]].concat());
    let from_config = dir.join("from_config.csv");
    run_ok(&[
        "sweep",
        "--config",
        cfg_path.to_str().unwrap(),
        "--out",
        from_config.to_str().unwrap(),
    ]);
    assert_eq!(
        read(&direct),
        read(&from_config),
        "config echoed by report --show-config did not reproduce the run"
    );
}

#[test]
fn pretrain_checkpoint_feeds_the_toy_pipeline() {
    let dir = temp_dir("toy_pipeline");
    let ckpt = dir.join("model.ckpt");
    let toy_flags = [
        "--classes",
        "2",
        "--per-class",
        "4",
        "--size",
        "6",
        "--batch",
        "2",
        "--seed",
        "3",
    ];
    run_ok(&[
        &["pretrain"],
        &toy_flags[..],
        &[
            "--pretrain-epochs",
            "40",
            "--pretrain-lr",
            "0.005",
            "--out",
            ckpt.to_str().unwrap(),
        ],
    ]
    .concat());
    assert!(ckpt.exists());

    let boundaries = dir.join("boundaries.csv");
    run_ok(&[
        &["solve-boundaries", "--problem", "unlearn-toy"],
        &toy_flags[..],
        &[
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--epochs",
            "2",
            "--out",
            boundaries.to_str().unwrap(),
        ],
    ]
    .concat());
    let text = std::fs::read_to_string(&boundaries).unwrap();
    assert_eq!(text.lines().count(), 3, "header + 2 boundary rows");

    let metrics = dir.join("baselines.csv");
    run_ok(&[
        &["baselines", "--problem", "unlearn-toy"],
        &toy_flags[..],
        &[
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--epochs",
            "2",
            "--out",
            metrics.to_str().unwrap(),
        ],
    ]
    .concat());
    let text = std::fs::read_to_string(&metrics).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "method,forget_err,retain_err,noise_prox,retain_degradation,forget_err_gain"
    );
    // original + 4 baselines + the constrained solver
    assert_eq!(lines.len(), 7);
    assert!(lines.iter().any(|l| l.starts_with("constrained,")));
}

#[test]
fn report_expands_front_and_trajectory_files() {
    let dir = temp_dir("report");
    let front = dir.join("front.csv");
    let traj = dir.join("traj.csv");
    run_ok(&[
        "sweep",
        "--problem",
        "quad",
        "--seed",
        "2",
        "--out",
        front.to_str().unwrap(),
        "--trajectories",
        traj.to_str().unwrap(),
    ]);
    run_ok(&[
        "report",
        "--front",
        front.to_str().unwrap(),
        "--trajectory",
        traj.to_str().unwrap(),
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    let f1 = std::fs::read_to_string(dir.join("eps_f1.csv")).unwrap();
    assert!(f1.starts_with("epsilon,f1\n"));
    assert_eq!(f1.lines().count(), 4, "three interior points");
    let f2 = std::fs::read_to_string(dir.join("eps_f2.csv")).unwrap();
    assert!(f2.starts_with("epsilon,f2\n"));
    let loglog = std::fs::read_to_string(dir.join("loglog_grad_f1.csv")).unwrap();
    assert!(loglog.starts_with("log_t,log_runmin_grad_f1_norm\n"));
    assert!(loglog.lines().count() > 10);
}

#[test]
fn timing_flag_controls_wall_ms_column() {
    let dir = temp_dir("timing");
    let plain = dir.join("plain.csv");
    run_ok(&[
        "solve-boundaries",
        "--problem",
        "quad",
        "--out",
        plain.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(&plain).unwrap();
    for line in text.lines().skip(1) {
        assert!(line.ends_with(",0"), "wall_ms must be zero without --timing: {line}");
    }
}
