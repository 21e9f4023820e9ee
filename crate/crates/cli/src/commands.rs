//! Pipelines behind each subcommand.

use cul_core::unlearn::*;
use cul_core::*;

use crate::config::Config;

/// A problem instance plus the start point and tolerance class of its runs.
pub struct ProblemInstance {
    pub problem: Box<dyn BiObjectiveProblem>,
    pub theta0: ParamVector,
    /// Stochastic problems get the looser sweep tolerance (1% of the range).
    pub stochastic: bool,
    pub phase1_iters: u64,
    pub phase2_iters: u64,
}

pub fn build_toy_task(cfg: &Config) -> Result<UnlearnTask> {
    let dataset_cfg = DatasetConfig {
        n_classes: cfg.classes,
        per_class: cfg.per_class,
        size: cfg.size,
        seed: cfg.seed,
    };
    let (forget, retain) = build_dataset(&dataset_cfg)?;
    let crop_spec = CropSpec::new(cfg.crop_pattern, cfg.crop_ratio)?.with_seed(cfg.mask_seed);
    let model = match &cfg.checkpoint {
        Some(path) => load_checkpoint(path)?,
        None => {
            let all: Vec<ToyImage> = forget.iter().chain(&retain).cloned().collect();
            let (model, loss) = pretrain(
                &all,
                &crop_spec,
                ArchConfig::for_image_dim(cfg.size * cfg.size),
                &PretrainConfig {
                    epochs: cfg.pretrain_epochs,
                    learning_rate: cfg.pretrain_lr,
                    seed: derive_seed(cfg.seed, 0x5052_4554),
                    target_rel_err: cfg.pretrain_target_rel_err,
                },
            )?;
            println!("pretrain: images={} epochs<={} final_loss={loss:.6}", all.len(), cfg.pretrain_epochs);
            model
        }
    };
    let mut task = UnlearnTask::new(model, forget, retain, crop_spec, cfg.batch, cfg.noise_mode)?;
    if cfg.proxy_retain_fraction > 0.0 {
        let count = ((task.retain.len() as f64) * cfg.proxy_retain_fraction).round() as usize;
        let proxies = generate_proxy_classes(
            &DatasetConfig {
                seed: derive_seed(cfg.seed, 0x5052_5859),
                ..dataset_cfg
            },
            cfg.classes as u32,
            cfg.classes.max(1),
            count,
        );
        task.substitute_proxy_retain(proxies, cfg.proxy_retain_fraction)?;
    }
    Ok(task)
}

pub fn build_instance(cfg: &Config) -> Result<ProblemInstance> {
    match cfg.problem.as_str() {
        "quad" => {
            let problem = build_problem(ProblemSpec::Quad {
                a: cfg.quad_a.clone(),
                b: cfg.quad_b.clone(),
            })?;
            Ok(ProblemInstance {
                problem,
                theta0: ParamVector::new(cfg.quad_theta0.clone())?,
                stochastic: false,
                phase1_iters: cfg.max_iters,
                phase2_iters: cfg.max_iters,
            })
        }
        "unlearn-toy" => {
            let task = build_toy_task(cfg)?;
            let theta0 = task.original.flatten();
            let iters = if cfg.max_iters > 0 {
                cfg.max_iters
            } else {
                cfg.toy_max_iters(task.forget.len())
            };
            Ok(ProblemInstance {
                problem: build_problem(ProblemSpec::UnlearnToy(Box::new(task)))?,
                theta0,
                stochastic: true,
                phase1_iters: iters,
                phase2_iters: iters,
            })
        }
        other => Err(CoreError::invalid(format!("unknown problem '{other}'"))),
    }
}

fn phase1_step_config(cfg: &Config, iters: u64) -> StepConfig {
    StepConfig {
        step_size: cfg.mu,
        max_iters: iters,
        grad_tol: cfg.grad_tol,
        omega: cfg.omega,
        precondition: cfg.precondition,
        eta_warn: cfg.eta_warn,
    }
}

fn phase2_step_config(cfg: &Config, iters: u64) -> StepConfig {
    StepConfig {
        step_size: cfg.mu_phase2,
        ..phase1_step_config(cfg, iters)
    }
}

fn require_out(cfg: &Config) -> Result<&str> {
    cfg.out
        .as_deref()
        .ok_or_else(|| CoreError::invalid("missing output path (--out or config key 'out')"))
}

fn summary_row(
    phase: &str,
    epsilon: Option<f64>,
    f1: f64,
    f2: f64,
    traj: &Trajectory,
    timing: bool,
) -> ResultRow {
    let last = traj.last();
    ResultRow {
        phase: phase.to_string(),
        epsilon,
        iter: last.map(|r| r.iter).unwrap_or(0),
        f1,
        f2,
        grad_f1_norm: last.map(|r| r.norm_grad_f1).unwrap_or(0.0),
        g_norm: last.map(|r| r.norm_g).unwrap_or(0.0),
        eta: last.map(|r| r.eta).unwrap_or(0.0),
        psi: last.map(|r| r.psi).unwrap_or(0.0),
        wall_ms: if timing {
            last.map(|r| r.wall_ms).unwrap_or(0)
        } else {
            0
        },
    }
}

fn trajectory_rows(
    phase: &str,
    epsilon: Option<f64>,
    traj: &Trajectory,
    timing: bool,
    rows: &mut Vec<ResultRow>,
) {
    for r in &traj.records {
        rows.push(ResultRow {
            phase: phase.to_string(),
            epsilon,
            iter: r.iter,
            f1: r.f1,
            f2: r.f2,
            grad_f1_norm: r.norm_grad_f1,
            g_norm: r.norm_g,
            eta: r.eta,
            psi: r.psi,
            wall_ms: if timing { r.wall_ms } else { 0 },
        });
    }
}

struct BoundaryRuns {
    boundaries: Boundaries,
    high_traj: Trajectory,
    low_traj: Trajectory,
}

fn solve_boundaries(cfg: &Config, instance: &ProblemInstance) -> Result<BoundaryRuns> {
    let sc = phase1_step_config(cfg, instance.phase1_iters);
    let params = Phase1Params {
        alpha: cfg.alpha,
        delta: cfg.phase1_delta,
    };
    let (high, high_traj) = solve_boundary_high(
        instance.problem.as_ref(),
        &sc,
        &params,
        instance.theta0.clone(),
        derive_seed(cfg.seed, 1),
    )?;
    println!(
        "phase1-high: iters={} f1={:.6e} f2={:.6e}",
        high_traj.len(),
        high.f1_at,
        high.f2_at
    );
    let (low, low_traj) = solve_boundary_low(
        instance.problem.as_ref(),
        &sc,
        &params,
        instance.theta0.clone(),
        derive_seed(cfg.seed, 2),
    )?;
    println!(
        "phase1-low: iters={} f1={:.6e} f2={:.6e}",
        low_traj.len(),
        low.f1_at,
        low.f2_at
    );
    Ok(BoundaryRuns {
        boundaries: Boundaries { high, low },
        high_traj,
        low_traj,
    })
}

pub fn cmd_solve_boundaries(cfg: &Config) -> Result<()> {
    let out = require_out(cfg)?.to_string();
    let instance = build_instance(cfg)?;
    let runs = solve_boundaries(cfg, &instance)?;
    let rows = vec![
        summary_row(
            "phase1-high",
            None,
            runs.boundaries.high.f1_at,
            runs.boundaries.high.f2_at,
            &runs.high_traj,
            cfg.timing,
        ),
        summary_row(
            "phase1-low",
            None,
            runs.boundaries.low.f1_at,
            runs.boundaries.low.f2_at,
            &runs.low_traj,
            cfg.timing,
        ),
    ];
    write_results(&rows, &out, cfg.format)?;
    if let Some(traj_out) = &cfg.trajectories_out {
        let mut rows = Vec::new();
        trajectory_rows("phase1-high", None, &runs.high_traj, cfg.timing, &mut rows);
        trajectory_rows("phase1-low", None, &runs.low_traj, cfg.timing, &mut rows);
        write_results(&rows, traj_out, cfg.format)?;
    }
    println!("boundaries -> {out}");
    Ok(())
}

pub fn cmd_sweep(cfg: &Config) -> Result<()> {
    let out = require_out(cfg)?.to_string();
    let instance = build_instance(cfg)?;
    let runs = solve_boundaries(cfg, &instance)?;
    let constraint_tol = cfg.constraint_tol.unwrap_or_else(|| {
        if instance.stochastic {
            runs.boundaries
                .epsilon_range()
                .map(|(lo, hi)| 0.01 * (hi - lo))
                .unwrap_or(1e-3)
        } else {
            1e-3
        }
    });
    let opts = SweepOptions {
        cold_start_from: (!cfg.warm_start).then(|| instance.theta0.clone()),
        constraint_tol,
    };
    let outcome = sweep(
        instance.problem.as_ref(),
        &phase2_step_config(cfg, instance.phase2_iters),
        &Phase2Params {
            beta: cfg.beta,
            delta: cfg.phase2_delta,
            scaled: cfg.scaled,
        },
        &runs.boundaries,
        &cfg.fractions,
        &opts,
        derive_seed(cfg.seed, 3),
    )?;
    let mut rows = vec![summary_row(
        "phase1-high",
        None,
        runs.boundaries.high.f1_at,
        runs.boundaries.high.f2_at,
        &runs.high_traj,
        cfg.timing,
    )];
    for (entry, traj) in outcome.points.iter().zip(&outcome.trajectories) {
        println!(
            "phase2 eps={:.6e}: iters={} f1={:.6e} f2={:.6e}",
            entry.epsilon,
            traj.len(),
            entry.f1,
            entry.f2
        );
        rows.push(summary_row(
            "phase2",
            Some(entry.epsilon),
            entry.f1,
            entry.f2,
            traj,
            cfg.timing,
        ));
    }
    rows.push(summary_row(
        "phase1-low",
        None,
        runs.boundaries.low.f1_at,
        runs.boundaries.low.f2_at,
        &runs.low_traj,
        cfg.timing,
    ));
    write_results(&rows, &out, cfg.format)?;
    if let Some(traj_out) = &cfg.trajectories_out {
        let mut traj_rows = Vec::new();
        trajectory_rows("phase1-high", None, &runs.high_traj, cfg.timing, &mut traj_rows);
        for (entry, traj) in outcome.points.iter().zip(&outcome.trajectories) {
            trajectory_rows("phase2", Some(entry.epsilon), traj, cfg.timing, &mut traj_rows);
        }
        trajectory_rows("phase1-low", None, &runs.low_traj, cfg.timing, &mut traj_rows);
        write_results(&traj_rows, traj_out, cfg.format)?;
    }
    println!(
        "front: {} interior points ({} nondominated), 2 boundaries -> {out}",
        outcome.points.len(),
        outcome.front.entries.len()
    );
    Ok(())
}

pub fn cmd_rates(cfg: &Config) -> Result<()> {
    let out = require_out(cfg)?.to_string();
    let instance = build_instance(cfg)?;
    let mut lines = vec!["delta,slope_grad_f1_norm,expected_grad_slope,slope_g_norm,expected_g_slope".to_string()];
    for &delta in &cfg.rates_deltas {
        let cf = ControlFunction::phase1(cfg.alpha, delta)?;
        let sc = StepConfig {
            grad_tol: 0.0,
            ..phase1_step_config(cfg, cfg.rates_iters)
        };
        let outcome = run(
            instance.problem.as_ref(),
            &cf,
            &sc,
            instance.theta0.clone(),
            derive_seed(cfg.seed, delta.to_bits()),
        );
        let (slope_grad, slope_g) = match outcome {
            Ok((_, traj)) => {
                let grad_series: Vec<(f64, f64)> = traj
                    .records
                    .iter()
                    .map(|r| ((r.iter + 1) as f64, r.norm_grad_f1))
                    .collect();
                let g_series: Vec<(f64, f64)> = traj
                    .records
                    .iter()
                    .map(|r| ((r.iter + 1) as f64, r.norm_g))
                    .collect();
                (
                    rate_exponent(&grad_series, cfg.rates_window).unwrap_or(f64::NAN),
                    rate_exponent(&g_series, cfg.rates_window).unwrap_or(f64::NAN),
                )
            }
            Err(CoreError::NumericFailure { iter, what }) => {
                eprintln!("warning: delta={delta}: diverged at iteration {iter} ({what}); recording NaN");
                (f64::NAN, f64::NAN)
            }
            Err(e) => return Err(e),
        };
        let expected_grad = -1.0 / delta;
        let expected_g = -(0.5 - 0.5 / delta);
        println!(
            "rates delta={delta}: slope_grad={slope_grad:.4} (bound {expected_grad:.4}) slope_g={slope_g:.4} (bound {expected_g:.4})"
        );
        lines.push(format!(
            "{},{},{},{},{}",
            persistence_fmt(delta),
            persistence_fmt(slope_grad),
            persistence_fmt(expected_grad),
            persistence_fmt(slope_g),
            persistence_fmt(expected_g)
        ));
    }
    std::fs::write(&out, lines.join("\n") + "\n").map_err(|e| CoreError::io(&out, e))?;
    println!("rates -> {out}");
    Ok(())
}

fn persistence_fmt(x: f64) -> String {
    cul_core::persistence::format_f64(x)
}

pub fn cmd_baselines(cfg: &Config) -> Result<()> {
    let out = require_out(cfg)?.to_string();
    if cfg.problem != "unlearn-toy" {
        return Err(CoreError::invalid("baselines requires --problem unlearn-toy"));
    }
    let task = build_toy_task(cfg)?;
    let problem = UnlearnProblem::new(task.clone());
    let iters = if cfg.max_iters > 0 {
        cfg.max_iters
    } else {
        cfg.toy_max_iters(task.forget.len())
    };
    let (boundary, _) = solve_boundary_high(
        &problem,
        &phase1_step_config(cfg, iters),
        &Phase1Params {
            alpha: cfg.alpha,
            delta: cfg.phase1_delta,
        },
        task.original.flatten(),
        derive_seed(cfg.seed, 1),
    )?;
    let constrained = problem.model_at(&boundary.theta_star)?;
    let reports = compare_methods(
        &task,
        cfg.unlearn_epochs,
        cfg.mu,
        cfg.lambda,
        cfg.noise_std,
        derive_seed(cfg.seed, 4),
        &[("constrained".to_string(), constrained)],
    )?;
    let mut lines =
        vec!["method,forget_err,retain_err,noise_prox,retain_degradation,forget_err_gain".to_string()];
    for r in &reports {
        println!(
            "{}: forget_err={:.4} retain_err={:.4} noise_prox={:.4} retain_degradation={:+.4} forget_err_gain={:+.4}",
            r.method,
            r.metrics.forget_err,
            r.metrics.retain_err,
            r.metrics.noise_prox,
            r.metrics.retain_degradation,
            r.forget_err_gain
        );
        lines.push(format!(
            "{},{},{},{},{},{}",
            r.method,
            persistence_fmt(r.metrics.forget_err),
            persistence_fmt(r.metrics.retain_err),
            persistence_fmt(r.metrics.noise_prox),
            persistence_fmt(r.metrics.retain_degradation),
            persistence_fmt(r.forget_err_gain)
        ));
    }
    std::fs::write(&out, lines.join("\n") + "\n").map_err(|e| CoreError::io(&out, e))?;
    println!("baselines -> {out}");
    Ok(())
}

pub fn cmd_pretrain(cfg: &Config) -> Result<()> {
    let out = require_out(cfg)?.to_string();
    let dataset_cfg = DatasetConfig {
        n_classes: cfg.classes,
        per_class: cfg.per_class,
        size: cfg.size,
        seed: cfg.seed,
    };
    let (forget, retain) = build_dataset(&dataset_cfg)?;
    let crop_spec = CropSpec::new(cfg.crop_pattern, cfg.crop_ratio)?.with_seed(cfg.mask_seed);
    let all: Vec<ToyImage> = forget.iter().chain(&retain).cloned().collect();
    let (model, loss) = pretrain(
        &all,
        &crop_spec,
        ArchConfig::for_image_dim(cfg.size * cfg.size),
        &PretrainConfig {
            epochs: cfg.pretrain_epochs,
            learning_rate: cfg.pretrain_lr,
            seed: derive_seed(cfg.seed, 0x5052_4554),
            target_rel_err: cfg.pretrain_target_rel_err,
        },
    )?;
    let rel_forget = mean_relative_error(&model, &forget, &crop_spec)?;
    let rel_retain = mean_relative_error(&model, &retain, &crop_spec)?;
    save_checkpoint(&model, &out)?;
    println!(
        "pretrain: images={} epochs<={} final_loss={loss:.6} rel_forget={rel_forget:.4} rel_retain={rel_retain:.4} -> {out}",
        all.len(),
        cfg.pretrain_epochs
    );
    Ok(())
}

/// Inputs of the `report` subcommand.
pub struct ReportRequest {
    pub show_config: bool,
    pub front: Option<String>,
    pub trajectory: Option<String>,
    pub out_dir: String,
}

pub fn cmd_report(cfg: &Config, req: &ReportRequest) -> Result<()> {
    if req.show_config {
        println!("{}", cfg.to_flat_json());
    }
    if let Some(front_path) = &req.front {
        let rows = read_results_csv(front_path)?;
        let dir = std::path::Path::new(&req.out_dir);
        std::fs::create_dir_all(dir).map_err(|e| CoreError::io(&req.out_dir, e))?;
        let mut f1_lines = vec!["epsilon,f1".to_string()];
        let mut f2_lines = vec!["epsilon,f2".to_string()];
        for row in rows.iter().filter(|r| r.epsilon.is_some()) {
            let eps = row.epsilon.unwrap();
            f1_lines.push(format!("{},{}", persistence_fmt(eps), persistence_fmt(row.f1)));
            f2_lines.push(format!("{},{}", persistence_fmt(eps), persistence_fmt(row.f2)));
        }
        let f1_path = dir.join("eps_f1.csv");
        let f2_path = dir.join("eps_f2.csv");
        std::fs::write(&f1_path, f1_lines.join("\n") + "\n")
            .map_err(|e| CoreError::io(f1_path.display().to_string(), e))?;
        std::fs::write(&f2_path, f2_lines.join("\n") + "\n")
            .map_err(|e| CoreError::io(f2_path.display().to_string(), e))?;
        println!("report: {} epsilon rows -> eps_f1.csv, eps_f2.csv", f1_lines.len() - 1);
    }
    if let Some(traj_path) = &req.trajectory {
        let rows = read_results_csv(traj_path)?;
        let dir = std::path::Path::new(&req.out_dir);
        std::fs::create_dir_all(dir).map_err(|e| CoreError::io(&req.out_dir, e))?;
        let mut lines = vec!["log_t,log_runmin_grad_f1_norm".to_string()];
        let mut running = f64::INFINITY;
        for (i, row) in rows.iter().enumerate() {
            running = running.min(row.grad_f1_norm);
            if running > 0.0 {
                let t = (i + 1) as f64;
                lines.push(format!(
                    "{},{}",
                    persistence_fmt(t.ln()),
                    persistence_fmt(running.ln())
                ));
            }
        }
        let path = dir.join("loglog_grad_f1.csv");
        std::fs::write(&path, lines.join("\n") + "\n")
            .map_err(|e| CoreError::io(path.display().to_string(), e))?;
        println!("report: {} log-log rows -> loglog_grad_f1.csv", lines.len() - 1);
    }
    Ok(())
}
