//! Two-phase orchestration: boundary solves, the epsilon sweep, and Pareto
//! front assembly.
//!
//! The boundary phase finds the two extreme trade-off points — the iterate
//! minimizing the constraint objective (highest unlearning completeness) and
//! the one minimizing the utility objective (lowest). Their f1 values bound
//! the valid range for the constraint level; the sweep then solves the
//! controllable problem at interior levels, warm-starting each run from the
//! previous solution.

use crate::error::{CoreError, Result};
use crate::numerics::ParamVector;
use crate::objective::{BiObjectiveProblem, SwappedProblem};
use crate::optimizer::{run, ControlFunction, StepConfig, Trajectory};

/// Which extreme of the trade-off a boundary solution represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    /// Constraint objective minimized (strongest unlearning).
    HighestCompleteness,
    /// Utility objective minimized (weakest unlearning).
    LowestCompleteness,
}

/// One boundary solution with its full-data objective values.
#[derive(Debug, Clone)]
pub struct BoundaryResult {
    pub theta_star: ParamVector,
    pub f1_at: f64,
    pub f2_at: f64,
    pub which: BoundaryKind,
}

/// The two boundary solutions.
#[derive(Debug, Clone)]
pub struct Boundaries {
    pub high: BoundaryResult,
    pub low: BoundaryResult,
}

impl Boundaries {
    /// Valid open interval for the constraint level, if nondegenerate.
    pub fn epsilon_range(&self) -> Option<(f64, f64)> {
        (self.high.f1_at < self.low.f1_at).then_some((self.high.f1_at, self.low.f1_at))
    }
}

/// Boundary-phase control parameters (`psi = alpha ||grad||^delta`).
#[derive(Debug, Clone, Copy)]
pub struct Phase1Params {
    pub alpha: f64,
    pub delta: f64,
}

/// Controllable-phase control template; the sweep fills in each epsilon.
#[derive(Debug, Clone, Copy)]
pub struct Phase2Params {
    pub beta: f64,
    pub delta: u32,
    pub scaled: bool,
}

impl Phase2Params {
    pub fn control(&self, epsilon: f64) -> Result<ControlFunction> {
        ControlFunction::phase2(self.beta, self.delta, self.scaled, epsilon)
    }
}

/// Solves for the highest-completeness boundary: runs the boundary-phase
/// control on the problem as given, driving f1 to its infimum.
pub fn solve_boundary_high(
    problem: &dyn BiObjectiveProblem,
    sc: &StepConfig,
    params: &Phase1Params,
    theta0: ParamVector,
    seed: u64,
) -> Result<(BoundaryResult, Trajectory)> {
    let cf = ControlFunction::phase1(params.alpha, params.delta)?;
    let (state, traj) = run(problem, &cf, sc, theta0, seed)?;
    let full = problem.eval_full(&state.theta)?;
    Ok((
        BoundaryResult {
            theta_star: state.theta,
            f1_at: full.f1,
            f2_at: full.f2,
            which: BoundaryKind::HighestCompleteness,
        },
        traj,
    ))
}

/// Solves for the lowest-completeness boundary by exchanging the objectives
/// and rerunning the boundary phase, so the constraint force is built from
/// the utility gradient. Reported f1/f2 are in the original orientation.
pub fn solve_boundary_low(
    problem: &dyn BiObjectiveProblem,
    sc: &StepConfig,
    params: &Phase1Params,
    theta0: ParamVector,
    seed: u64,
) -> Result<(BoundaryResult, Trajectory)> {
    let swapped = SwappedProblem::new(problem);
    let cf = ControlFunction::phase1(params.alpha, params.delta)?;
    let (state, traj) = run(&swapped, &cf, sc, theta0, seed)?;
    let full = problem.eval_full(&state.theta)?;
    Ok((
        BoundaryResult {
            theta_star: state.theta,
            f1_at: full.f1,
            f2_at: full.f2,
            which: BoundaryKind::LowestCompleteness,
        },
        traj.swap_objectives(),
    ))
}

/// Interior constraint levels `lo + fraction_k * (hi - lo)`; endpoints are
/// excluded by the open-interval fraction requirement.
pub fn epsilon_grid(boundaries: &Boundaries, fractions: &[f64]) -> Result<Vec<f64>> {
    let (lo, hi) = boundaries.epsilon_range().ok_or_else(|| {
        CoreError::invalid(format!(
            "epsilon grid: degenerate front, boundary f1 values are inverted or equal ({} vs {})",
            boundaries.high.f1_at, boundaries.low.f1_at
        ))
    })?;
    for w in fractions.windows(2) {
        if w[0] >= w[1] {
            return Err(CoreError::invalid(
                "epsilon grid: fractions must be strictly increasing",
            ));
        }
    }
    if fractions.iter().any(|f| !(0.0 < *f && *f < 1.0)) {
        return Err(CoreError::invalid("epsilon grid: fractions must lie in (0, 1)"));
    }
    Ok(fractions.iter().map(|f| lo + f * (hi - lo)).collect())
}

/// One swept solution.
#[derive(Debug, Clone)]
pub struct FrontEntry {
    pub epsilon: f64,
    pub theta: ParamVector,
    pub f1: f64,
    pub f2: f64,
}

/// Assembled front: dominance-filtered entries between the two boundaries.
#[derive(Debug, Clone)]
pub struct ParetoFront {
    pub entries: Vec<FrontEntry>,
    pub boundaries: Boundaries,
}

/// Sweep options.
#[derive(Debug, Clone)]
pub struct SweepOptions {
    /// Start each run from the previous solution (first from the
    /// highest-completeness boundary). When `Some`, every run cold-starts
    /// from the given point instead.
    pub cold_start_from: Option<ParamVector>,
    /// Accept a solution only if `f1 <= epsilon + constraint_tol`.
    pub constraint_tol: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            cold_start_from: None,
            constraint_tol: 1e-3,
        }
    }
}

/// Everything a sweep produces: the filtered front, every accepted grid
/// point in grid order, and the per-point trajectories.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub front: ParetoFront,
    pub points: Vec<FrontEntry>,
    pub trajectories: Vec<Trajectory>,
}

/// Runs the controllable phase across the epsilon grid.
///
/// A degenerate range (non-conflicting objectives) yields an empty front
/// with both boundaries rather than an error.
pub fn sweep(
    problem: &dyn BiObjectiveProblem,
    sc: &StepConfig,
    params: &Phase2Params,
    boundaries: &Boundaries,
    fractions: &[f64],
    opts: &SweepOptions,
    seed: u64,
) -> Result<SweepOutcome> {
    if boundaries.epsilon_range().is_none() {
        return Ok(SweepOutcome {
            front: ParetoFront {
                entries: Vec::new(),
                boundaries: boundaries.clone(),
            },
            points: Vec::new(),
            trajectories: Vec::new(),
        });
    }
    let grid = epsilon_grid(boundaries, fractions)?;
    let mut points = Vec::with_capacity(grid.len());
    let mut trajectories = Vec::with_capacity(grid.len());
    let mut warm = boundaries.high.theta_star.clone();
    for (k, &eps) in grid.iter().enumerate() {
        let cf = params.control(eps)?;
        let theta0 = opts
            .cold_start_from
            .clone()
            .unwrap_or_else(|| warm.clone());
        let (state, traj) = run(problem, &cf, sc, theta0, seed.wrapping_add(k as u64))?;
        let full = problem.eval_full(&state.theta)?;
        if full.f1 > eps + opts.constraint_tol {
            return Err(CoreError::ConstraintViolation {
                index: k,
                epsilon: eps,
                f1: full.f1,
            });
        }
        warm = state.theta.clone();
        points.push(FrontEntry {
            epsilon: eps,
            theta: state.theta,
            f1: full.f1,
            f2: full.f2,
        });
        trajectories.push(traj);
    }
    let keep = nondominated_indices(
        &points.iter().map(|p| (p.f1, p.f2)).collect::<Vec<_>>(),
    );
    let entries = keep.iter().map(|&i| points[i].clone()).collect();
    Ok(SweepOutcome {
        front: ParetoFront {
            entries,
            boundaries: boundaries.clone(),
        },
        points,
        trajectories,
    })
}

/// True iff `p` dominates `q`: no worse in both objectives, strictly better
/// in at least one.
pub fn dominates(p: (f64, f64), q: (f64, f64)) -> bool {
    p.0 <= q.0 && p.1 <= q.1 && (p.0 < q.0 || p.1 < q.1)
}

/// Indices of the nondominated points, in input order.
///
/// Sort-and-scan skyline: points are visited in f1-major order while
/// tracking the best f2 over strictly smaller f1 groups, so the whole filter
/// is O(n log n) rather than the quadratic pairwise check the tests compare
/// against.
pub fn nondominated_indices(points: &[(f64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .partial_cmp(&points[b])
            .expect("finite objective values")
    });
    let mut dominated = vec![false; points.len()];
    let mut best_f2_before = f64::INFINITY; // over groups with strictly smaller f1
    let mut i = 0;
    while i < order.len() {
        let f1 = points[order[i]].0;
        let mut j = i;
        let mut group_min_f2 = f64::INFINITY;
        while j < order.len() && points[order[j]].0 == f1 {
            group_min_f2 = group_min_f2.min(points[order[j]].1);
            j += 1;
        }
        for &idx in &order[i..j] {
            let f2 = points[idx].1;
            if best_f2_before <= f2 || group_min_f2 < f2 {
                dominated[idx] = true;
            }
        }
        best_f2_before = best_f2_before.min(group_min_f2);
        i = j;
    }
    (0..points.len()).filter(|&i| !dominated[i]).collect()
}

/// Nondominated subset of the input, order preserved.
pub fn filter_nondominated(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    nondominated_indices(points)
        .into_iter()
        .map(|i| points[i])
        .collect()
}
