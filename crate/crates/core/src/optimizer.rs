//! Gradient-based constrained solver: control function, closed-form dual
//! multiplier, update direction, and the step loop with trajectory recording.
//!
//! Each step solves the per-iterate quadratic subproblem
//!
//! ```text
//! min_g ||grad_f2 - g||^2   s.t.   grad_f1' g >= psi(theta)
//! ```
//!
//! whose dual has the closed form
//! `eta = max((psi - grad_f2' grad_f1) / (||grad_f1||^2 + omega), 0)`,
//! giving the update direction `g = grad_f2 + eta * grad_f1`. The iterate
//! moves against g: `theta <- theta - mu * g`. The sign condition
//! `sign(psi) = sign(f1 - eps)` in the controllable phase forces descent of
//! f1 outside the feasible set and permits controlled increase inside it.

use std::time::Instant;

use crate::error::{CoreError, Result};
use crate::numerics::{derive_seed, ParamVector};
use crate::objective::BiObjectiveProblem;

/// Scalar control function steering the constraint force of the subproblem.
///
/// The boundary phase uses `alpha * ||grad_f1||^delta` (always nonnegative),
/// the controllable phase `beta * (f1 - eps)^delta`, optionally scaled by
/// `||grad_f1||^2`. The controllable exponent must be an odd integer so the
/// sign of the output tracks the sign of the constraint violation.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlFunction {
    Phase1 {
        alpha: f64,
        delta: f64,
    },
    Phase2 {
        beta: f64,
        delta: u32,
        scaled: bool,
        epsilon: f64,
    },
}

impl ControlFunction {
    pub fn phase1(alpha: f64, delta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(CoreError::invalid("phase 1 control: alpha must be positive"));
        }
        if !(delta >= 1.0 && delta.is_finite()) {
            return Err(CoreError::invalid("phase 1 control: delta must be >= 1"));
        }
        Ok(ControlFunction::Phase1 { alpha, delta })
    }

    pub fn phase2(beta: f64, delta: u32, scaled: bool, epsilon: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(CoreError::invalid("phase 2 control: beta must be positive"));
        }
        if delta.is_multiple_of(2) {
            // An even exponent would break sign(psi) = sign(f1 - eps).
            return Err(CoreError::invalid(format!(
                "phase 2 control: delta must be an odd integer, got {delta}"
            )));
        }
        if !epsilon.is_finite() {
            return Err(CoreError::invalid("phase 2 control: epsilon must be finite"));
        }
        Ok(ControlFunction::Phase2 {
            beta,
            delta,
            scaled,
            epsilon,
        })
    }

    /// Evaluates the control value from the current `f1` and `||grad_f1||`.
    pub fn value(&self, f1: f64, norm_grad_f1: f64) -> f64 {
        match *self {
            ControlFunction::Phase1 { alpha, delta } => alpha * norm_grad_f1.powf(delta),
            ControlFunction::Phase2 {
                beta,
                delta,
                scaled,
                epsilon,
            } => {
                let base = beta * (f1 - epsilon).powi(delta as i32);
                if scaled {
                    base * norm_grad_f1 * norm_grad_f1
                } else {
                    base
                }
            }
        }
    }

    pub fn epsilon(&self) -> Option<f64> {
        match *self {
            ControlFunction::Phase1 { .. } => None,
            ControlFunction::Phase2 { epsilon, .. } => Some(epsilon),
        }
    }
}

/// Closed-form solution of the dual of the per-step subproblem.
///
/// `omega` regularizes the denominator; with `omega = 0` and a vanishing
/// constraint gradient the multiplier is defined as zero (inactive).
pub fn dual_multiplier(
    grad_f1: &ParamVector,
    grad_f2: &ParamVector,
    psi: f64,
    omega: f64,
) -> f64 {
    assert_eq!(grad_f1.len(), grad_f2.len(), "dual_multiplier: length mismatch");
    let denom = grad_f1.norm_squared() + omega;
    if denom <= 0.0 {
        return 0.0;
    }
    ((psi - grad_f2.dot(grad_f1)) / denom).max(0.0)
}

/// Update direction `g = grad_f2 + eta * grad_f1`.
///
/// With `eta > 0` and `omega = 0` the constraint is active:
/// `grad_f1' g = psi` exactly up to rounding.
pub fn update_direction(grad_f1: &ParamVector, grad_f2: &ParamVector, eta: f64) -> ParamVector {
    grad_f2.add_scaled(grad_f1, eta)
}

/// Step-loop configuration.
#[derive(Debug, Clone)]
pub struct StepConfig {
    /// Constant step size mu.
    pub step_size: f64,
    pub max_iters: u64,
    /// Stop once `||g|| < grad_tol`; zero disables early stopping (fixed
    /// epoch-style runs).
    pub grad_tol: f64,
    /// Dual denominator regularizer.
    pub omega: f64,
    /// Rescale g coordinatewise by an Adam-style second-moment estimate.
    /// Off by default; excluded from the property suites.
    pub precondition: bool,
    /// Warn (once per run, on stderr) when the recorded dual multiplier
    /// exceeds this threshold. The solver never fails on large eta.
    pub eta_warn: f64,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig {
            step_size: 0.05,
            max_iters: 5000,
            grad_tol: 1e-6,
            omega: 1e-7,
            precondition: false,
            eta_warn: 1e6,
        }
    }
}

impl StepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size >= 0.0 && self.step_size.is_finite()) {
            return Err(CoreError::invalid("step config: step size must be finite and >= 0"));
        }
        if self.grad_tol.is_nan() || self.grad_tol < 0.0 {
            return Err(CoreError::invalid("step config: grad_tol must be >= 0"));
        }
        if !(self.omega >= 0.0 && self.omega.is_finite()) {
            return Err(CoreError::invalid("step config: omega must be >= 0"));
        }
        Ok(())
    }
}

/// Current iterate and iteration counter.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub theta: ParamVector,
    pub iter: u64,
}

impl OptimizerState {
    pub fn new(theta: ParamVector) -> Self {
        OptimizerState { theta, iter: 0 }
    }
}

/// Per-step diagnostics record.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub iter: u64,
    pub f1: f64,
    pub f2: f64,
    pub norm_grad_f1: f64,
    pub norm_g: f64,
    pub eta: f64,
    pub psi: f64,
    /// Milliseconds since run start. Excluded from determinism comparisons.
    pub wall_ms: u64,
}

/// Ordered step records of one solver run.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TrajectoryRecord> {
        self.records.last()
    }

    pub fn max_eta(&self) -> f64 {
        self.records.iter().map(|r| r.eta).fold(0.0, f64::max)
    }

    /// Bitwise equality of all recorded numbers, ignoring wall-clock fields.
    pub fn same_numbers(&self, other: &Trajectory) -> bool {
        self.records.len() == other.records.len()
            && self.records.iter().zip(&other.records).all(|(a, b)| {
                a.iter == b.iter
                    && a.f1.to_bits() == b.f1.to_bits()
                    && a.f2.to_bits() == b.f2.to_bits()
                    && a.norm_grad_f1.to_bits() == b.norm_grad_f1.to_bits()
                    && a.norm_g.to_bits() == b.norm_g.to_bits()
                    && a.eta.to_bits() == b.eta.to_bits()
                    && a.psi.to_bits() == b.psi.to_bits()
            })
    }

    /// Returns a copy with the f1/f2 columns exchanged. Used to report runs
    /// that were executed on a swapped problem in the original orientation;
    /// `norm_grad_f1`, `eta`, and `psi` keep their as-run meaning (they refer
    /// to the run's own constraint objective).
    pub fn swap_objectives(&self) -> Trajectory {
        Trajectory {
            records: self
                .records
                .iter()
                .map(|r| TrajectoryRecord {
                    f1: r.f2,
                    f2: r.f1,
                    ..r.clone()
                })
                .collect(),
        }
    }
}

/// Adam-style diagonal second-moment preconditioner (optional).
#[derive(Debug, Clone)]
pub struct Preconditioner {
    v: Vec<f64>,
    t: u64,
    beta2: f64,
    eps: f64,
}

impl Preconditioner {
    pub fn new(dim: usize) -> Self {
        Preconditioner {
            v: vec![0.0; dim],
            t: 0,
            beta2: 0.95,
            eps: 1e-8,
        }
    }

    fn apply(&mut self, g: &ParamVector) -> ParamVector {
        self.t += 1;
        let correction = 1.0 - self.beta2.powi(self.t as i32);
        let out: Vec<f64> = g
            .iter()
            .zip(self.v.iter_mut())
            .map(|(gi, vi)| {
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                let v_hat = *vi / correction;
                gi / (v_hat.sqrt() + self.eps)
            })
            .collect();
        ParamVector::new(out).expect("preconditioned direction is finite")
    }
}

/// One solver step: evaluate, solve the dual, move against g, record.
pub fn step(
    state: &OptimizerState,
    problem: &dyn BiObjectiveProblem,
    cf: &ControlFunction,
    sc: &StepConfig,
    run_seed: u64,
    pre: Option<&mut Preconditioner>,
) -> Result<(OptimizerState, TrajectoryRecord)> {
    if state.theta.len() != problem.dim() {
        return Err(CoreError::invalid(format!(
            "step: state dimension {} does not match problem dimension {}",
            state.theta.len(),
            problem.dim()
        )));
    }
    let step_seed = derive_seed(run_seed, state.iter);
    let ev = problem.eval(&state.theta, step_seed)?;
    if !ev.is_finite() {
        return Err(CoreError::NumericFailure {
            iter: state.iter,
            what: "objective or gradient is non-finite".into(),
        });
    }
    let norm_grad_f1 = ev.grad_f1.norm();
    let psi = cf.value(ev.f1, norm_grad_f1);
    let eta = dual_multiplier(&ev.grad_f1, &ev.grad_f2, psi, sc.omega);
    let mut g = update_direction(&ev.grad_f1, &ev.grad_f2, eta);
    if let Some(p) = pre {
        g = p.apply(&g);
    }
    let theta_next = state.theta.add_scaled(&g, -sc.step_size);
    if !theta_next.is_finite() {
        return Err(CoreError::NumericFailure {
            iter: state.iter,
            what: "updated iterate is non-finite".into(),
        });
    }
    let record = TrajectoryRecord {
        iter: state.iter,
        f1: ev.f1,
        f2: ev.f2,
        norm_grad_f1,
        norm_g: g.norm(),
        eta,
        psi,
        wall_ms: 0,
    };
    Ok((
        OptimizerState {
            theta: theta_next,
            iter: state.iter + 1,
        },
        record,
    ))
}

/// Iterates [`step`] until `max_iters` or `||g|| < grad_tol`.
pub fn run(
    problem: &dyn BiObjectiveProblem,
    cf: &ControlFunction,
    sc: &StepConfig,
    theta0: ParamVector,
    run_seed: u64,
) -> Result<(OptimizerState, Trajectory)> {
    sc.validate()?;
    let started = Instant::now();
    let mut state = OptimizerState::new(theta0);
    let mut pre = if sc.precondition {
        Some(Preconditioner::new(problem.dim()))
    } else {
        None
    };
    let mut records = Vec::new();
    for _ in 0..sc.max_iters {
        let (next, mut rec) = step(&state, problem, cf, sc, run_seed, pre.as_mut())?;
        rec.wall_ms = started.elapsed().as_millis() as u64;
        let stop = rec.norm_g < sc.grad_tol;
        records.push(rec);
        state = next;
        if stop {
            break;
        }
    }
    let trajectory = Trajectory { records };
    let max_eta = trajectory.max_eta();
    if max_eta > sc.eta_warn {
        eprintln!("warning: dual multiplier reached {max_eta:.3e} (threshold {:.1e})", sc.eta_warn);
    }
    Ok((state, trajectory))
}
