//! `cul` — constrained bi-objective optimization experiments.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numeric failure,
//! 4 constraint violation.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use cul_core::CoreError;

use commands::ReportRequest;
use config::{Config, RawConfig};

#[derive(Parser)]
#[command(
    name = "cul",
    version,
    about = "Constrained bi-objective optimization: boundary solves, epsilon sweeps, rate studies, and a toy image unlearning benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pretrain the toy original model and save a checkpoint
    Pretrain(RunFlags),
    /// Solve both trade-off boundaries
    SolveBoundaries(RunFlags),
    /// Solve boundaries, then sweep epsilon across the valid range
    Sweep(RunFlags),
    /// Fit convergence-rate exponents for a set of control exponents
    Rates(RunFlags),
    /// Compare the constrained solver against the four baseline methods
    Baselines(RunFlags),
    /// Echo the resolved config and emit plot-ready two-column files
    Report(ReportFlags),
}

/// Flags shared by every run-style subcommand; each overrides the matching
/// config key, and unset flags fall back to the config file, then defaults.
#[derive(Args, Debug, Default)]
struct RunFlags {
    /// JSON config file with flat dotted keys (flags win)
    #[arg(long)]
    config: Option<String>,
    /// Problem name: quad | unlearn-toy
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file for results
    #[arg(long)]
    out: Option<String>,
    /// Also write every trajectory record to this file
    #[arg(long)]
    trajectories: Option<String>,
    /// Result format: csv | json
    #[arg(long)]
    format: Option<String>,
    /// Record real wall-clock milliseconds (breaks byte-reproducibility)
    #[arg(long)]
    timing: Option<bool>,
    /// Quadratic problem: minimizer of the constraint objective, e.g. "0,0"
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    quad_a: Option<Vec<f64>>,
    /// Quadratic problem: minimizer of the utility objective
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    quad_b: Option<Vec<f64>>,
    /// Start point for quadratic runs
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta0: Option<Vec<f64>>,
    /// Boundary-phase control coefficient
    #[arg(long)]
    alpha: Option<f64>,
    /// Boundary-phase control exponent (>= 1)
    #[arg(long)]
    phase1_delta: Option<f64>,
    /// Controllable-phase control coefficient
    #[arg(long)]
    beta: Option<f64>,
    /// Controllable-phase control exponent (odd integer)
    #[arg(long)]
    phase2_delta: Option<u32>,
    /// Scale the controllable-phase control by ||grad_f1||^2
    #[arg(long)]
    scaled: Option<bool>,
    /// Sweep fractions in (0,1), e.g. "0.25,0.5,0.75"
    #[arg(long, value_delimiter = ',')]
    fractions: Option<Vec<f64>>,
    /// Accept swept solutions with f1 <= epsilon + tol (default: 1e-3
    /// analytic, 1% of the epsilon range on stochastic tasks)
    #[arg(long)]
    constraint_tol: Option<f64>,
    /// Warm-start each sweep point from the previous solution
    #[arg(long)]
    warm_start: Option<bool>,
    /// Step size for boundary-phase runs
    #[arg(long)]
    mu: Option<f64>,
    /// Step size for controllable-phase runs (defaults to --mu)
    #[arg(long)]
    mu_phase2: Option<f64>,
    /// Iteration cap per run (0 on the toy task means epochs * steps/epoch)
    #[arg(long)]
    max_iters: Option<u64>,
    /// Stop when ||g|| drops below this (0 disables)
    #[arg(long)]
    grad_tol: Option<f64>,
    /// Dual denominator regularizer
    #[arg(long)]
    omega: Option<f64>,
    /// Rescale g by an Adam-style second-moment estimate
    #[arg(long)]
    precondition: Option<bool>,
    /// Warn when the dual multiplier exceeds this
    #[arg(long)]
    eta_warn: Option<f64>,
    /// Epochs per unlearn run on the toy task
    #[arg(long)]
    epochs: Option<usize>,
    /// Toy task: number of classes (even; half forget, half retain)
    #[arg(long)]
    classes: Option<usize>,
    /// Toy task: images per class
    #[arg(long)]
    per_class: Option<usize>,
    /// Toy task: image side length
    #[arg(long)]
    size: Option<usize>,
    /// Crop pattern: center|top|bottom|left|right|random|keep-center
    #[arg(long)]
    crop_pattern: Option<String>,
    /// Fraction of the area removed (or kept, for keep-center)
    #[arg(long)]
    crop_ratio: Option<f64>,
    /// Seed for the random crop pattern
    #[arg(long)]
    mask_seed: Option<u64>,
    /// Minibatch size
    #[arg(long)]
    batch: Option<usize>,
    /// Noise target mode: through-original | direct-noise
    #[arg(long)]
    noise_mode: Option<String>,
    /// Replace this fraction of the retain set with held-out proxy classes
    #[arg(long)]
    proxy_retain_fraction: Option<f64>,
    /// Pretraining epochs
    #[arg(long)]
    pretrain_epochs: Option<usize>,
    /// Pretraining learning rate
    #[arg(long)]
    pretrain_lr: Option<f64>,
    /// Stop pretraining once mean relative error drops below this
    #[arg(long)]
    pretrain_target: Option<f64>,
    /// Load the original model from a checkpoint instead of pretraining
    #[arg(long)]
    checkpoint: Option<String>,
    /// Rate study: control exponents, e.g. "1,2,3,4"
    #[arg(long, value_delimiter = ',')]
    delta: Option<Vec<f64>>,
    /// Rate study: trailing fraction of points used for the fit
    #[arg(long)]
    window: Option<f64>,
    /// Rate study: iterations per run
    #[arg(long)]
    iters: Option<u64>,
    /// Composite-loss baseline weight
    #[arg(long)]
    lambda: Option<f64>,
    /// Noisy-label baseline noise standard deviation
    #[arg(long)]
    noise_std: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct ReportFlags {
    #[command(flatten)]
    run: RunFlags,
    /// Print the fully resolved configuration as flat JSON
    #[arg(long)]
    show_config: bool,
    /// Front file to expand into epsilon-vs-objective columns
    #[arg(long)]
    front: Option<String>,
    /// Trajectory file to expand into log-log running-minimum columns
    #[arg(long)]
    trajectory: Option<String>,
    /// Directory for the emitted two-column files
    #[arg(long, default_value = ".")]
    out_dir: String,
}

impl RunFlags {
    fn to_raw(&self) -> RawConfig {
        RawConfig {
            problem: self.problem.clone(),
            seed: self.seed,
            format: self.format.clone(),
            timing: self.timing,
            out: self.out.clone(),
            trajectories_out: self.trajectories.clone(),
            quad_a: self.quad_a.clone(),
            quad_b: self.quad_b.clone(),
            quad_theta0: self.theta0.clone(),
            alpha: self.alpha,
            phase1_delta: self.phase1_delta,
            beta: self.beta,
            phase2_delta: self.phase2_delta,
            scaled: self.scaled,
            fractions: self.fractions.clone(),
            constraint_tol: self.constraint_tol,
            warm_start: self.warm_start,
            mu: self.mu,
            mu_phase2: self.mu_phase2,
            max_iters: self.max_iters,
            grad_tol: self.grad_tol,
            omega: self.omega,
            precondition: self.precondition,
            eta_warn: self.eta_warn,
            unlearn_epochs: self.epochs,
            classes: self.classes,
            per_class: self.per_class,
            size: self.size,
            crop_pattern: self.crop_pattern.clone(),
            crop_ratio: self.crop_ratio,
            mask_seed: self.mask_seed,
            batch: self.batch,
            noise_mode: self.noise_mode.clone(),
            proxy_retain_fraction: self.proxy_retain_fraction,
            pretrain_epochs: self.pretrain_epochs,
            pretrain_lr: self.pretrain_lr,
            pretrain_target_rel_err: self.pretrain_target,
            checkpoint: self.checkpoint.clone(),
            rates_deltas: self.delta.clone(),
            rates_window: self.window,
            rates_iters: self.iters,
            lambda: self.lambda,
            noise_std: self.noise_std,
        }
    }

    fn resolve(&self) -> cul_core::Result<Config> {
        let base = match &self.config {
            Some(path) => RawConfig::from_file(path)?,
            None => RawConfig::default(),
        };
        Config::resolve(base.overlay(self.to_raw()))
    }
}

fn exit_code_for(err: &CoreError) -> i32 {
    match err {
        CoreError::NumericFailure { .. } | CoreError::DegenerateSeries(_) => 3,
        CoreError::ConstraintViolation { .. } => 4,
        CoreError::InvalidArgument(_)
        | CoreError::OutOfRange(_)
        | CoreError::Format { .. }
        | CoreError::Io { .. }
        | CoreError::Json(_) => 2,
    }
}

fn main() {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Pretrain(flags) => flags.resolve().and_then(|cfg| commands::cmd_pretrain(&cfg)),
        Command::SolveBoundaries(flags) => flags
            .resolve()
            .and_then(|cfg| commands::cmd_solve_boundaries(&cfg)),
        Command::Sweep(flags) => flags.resolve().and_then(|cfg| commands::cmd_sweep(&cfg)),
        Command::Rates(flags) => flags.resolve().and_then(|cfg| commands::cmd_rates(&cfg)),
        Command::Baselines(flags) => flags.resolve().and_then(|cfg| commands::cmd_baselines(&cfg)),
        Command::Report(flags) => flags.run.resolve().and_then(|cfg| {
            commands::cmd_report(
                &cfg,
                &ReportRequest {
                    show_config: flags.show_config,
                    front: flags.front.clone(),
                    trajectory: flags.trajectory.clone(),
                    out_dir: flags.out_dir.clone(),
                },
            )
        }),
    };
    if let Err(err) = outcome {
        eprintln!("error: {err}");
        std::process::exit(exit_code_for(&err));
    }
}
