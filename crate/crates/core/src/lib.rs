//! Constrained bi-objective optimization with a controllable trade-off knob.
//!
//! The solver minimizes a utility objective subject to a constraint
//! objective staying below a level `epsilon`, using a gradient method whose
//! per-step subproblem has a closed-form dual. Two boundary solves find the
//! extreme trade-off points; sweeping `epsilon` between them traces a Pareto
//! front of solutions. A self-contained toy image unlearning task (synthetic
//! textures, masking crops, a small hand-differentiated encoder-decoder, and
//! four baseline methods) exercises the machinery end to end, and the
//! diagnostics module provides penalty/KKT monitors plus a convergence-rate
//! estimator.
//!
//! Everything is deterministic: one seeded generator backs all sampling, and
//! identical configurations produce bitwise-identical trajectories, result
//! files, and checkpoints.

pub mod diagnostics;
pub mod error;
pub mod numerics;
pub mod objective;
pub mod optimizer;
pub mod parallel;
pub mod pareto;
pub mod persistence;
pub mod registry;
pub mod unlearn;

pub use error::{CoreError, Result};
pub use numerics::{
    derive_seed, estimate_covariance, sample_gaussian, DiagCovariance, ParamVector, Rng64,
};
pub use objective::{
    finite_difference_grad, make_quadratic_pair, quadratic_front_oracle, BiObjectiveProblem,
    ObjectiveEval, QuadraticPair, SwappedProblem,
};
pub use optimizer::{
    dual_multiplier, run, step, update_direction, ControlFunction, OptimizerState, StepConfig,
    Trajectory, TrajectoryRecord,
};
pub use pareto::{
    dominates, epsilon_grid, filter_nondominated, solve_boundary_high, solve_boundary_low, sweep,
    Boundaries, BoundaryKind, BoundaryResult, FrontEntry, ParetoFront, Phase1Params, Phase2Params,
    SweepOptions, SweepOutcome,
};
pub use diagnostics::{
    kkt_first_order, kkt_phase1, penalty, rate_exponent, spearman, KktConfig, PenaltyConfig,
};
pub use persistence::{
    load_checkpoint, read_results_csv, save_checkpoint, write_results, ResultFormat, ResultRow,
    RESULT_HEADER,
};
pub use registry::{build_problem, check_problem_name, ProblemSpec, PROBLEM_NAMES};
