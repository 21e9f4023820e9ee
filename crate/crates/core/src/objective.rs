//! Differentiable bi-objective problems and the analytic test suite.
//!
//! A problem exposes two scalar losses with gradient oracles: `f1` is the
//! constraint objective (unlearning loss) and `f2` the utility objective
//! (retain loss). The quadratic pair has a known Pareto front and anchors
//! every solver test; `finite_difference_grad` is the independent gradient
//! oracle the analytic gradients are checked against.

use crate::error::{CoreError, Result};
use crate::numerics::ParamVector;

/// One evaluation of both objectives and their gradients at a point.
#[derive(Debug, Clone)]
pub struct ObjectiveEval {
    pub f1: f64,
    pub f2: f64,
    pub grad_f1: ParamVector,
    pub grad_f2: ParamVector,
}

impl ObjectiveEval {
    pub fn is_finite(&self) -> bool {
        self.f1.is_finite()
            && self.f2.is_finite()
            && self.grad_f1.is_finite()
            && self.grad_f2.is_finite()
    }
}

/// Seed used by `eval_full` for problems whose full-data evaluation still
/// needs a noise draw.
pub const FULL_EVAL_SEED: u64 = 0x4556_414C;

/// A pair of differentiable objectives over a flat parameter vector.
///
/// `eval` must be deterministic given `(theta, step_seed)`; stochastic
/// problems key their minibatch selection off the seed. `eval_full` evaluates
/// on the full data with a fixed internal seed and defaults to `eval`.
pub trait BiObjectiveProblem: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, theta: &ParamVector, step_seed: u64) -> Result<ObjectiveEval>;

    fn eval_full(&self, theta: &ParamVector) -> Result<ObjectiveEval> {
        self.eval(theta, FULL_EVAL_SEED)
    }
}

/// Analytic convex instance: `f1 = ||theta - a||^2`, `f2 = ||theta - b||^2`.
#[derive(Debug, Clone)]
pub struct QuadraticPair {
    a: ParamVector,
    b: ParamVector,
}

impl QuadraticPair {
    pub fn new(a: ParamVector, b: ParamVector) -> Result<Self> {
        if a.len() != b.len() {
            return Err(CoreError::invalid(format!(
                "quadratic pair: minimizer lengths differ ({} vs {})",
                a.len(),
                b.len()
            )));
        }
        if a.is_empty() {
            return Err(CoreError::invalid("quadratic pair: dimension must be positive"));
        }
        Ok(QuadraticPair { a, b })
    }

    pub fn a(&self) -> &ParamVector {
        &self.a
    }

    pub fn b(&self) -> &ParamVector {
        &self.b
    }

    /// Squared distance between the two minimizers, the extent of the front.
    pub fn separation_squared(&self) -> f64 {
        self.a.sub(&self.b).norm_squared()
    }
}

/// Builds the quadratic-pair problem with exact gradients `2(theta - a)`
/// and `2(theta - b)`.
pub fn make_quadratic_pair(a: ParamVector, b: ParamVector) -> Result<QuadraticPair> {
    QuadraticPair::new(a, b)
}

impl BiObjectiveProblem for QuadraticPair {
    fn dim(&self) -> usize {
        self.a.len()
    }

    fn eval(&self, theta: &ParamVector, _step_seed: u64) -> Result<ObjectiveEval> {
        if theta.len() != self.dim() {
            return Err(CoreError::invalid(format!(
                "quadratic eval: theta has length {}, expected {}",
                theta.len(),
                self.dim()
            )));
        }
        let da = theta.sub(&self.a);
        let db = theta.sub(&self.b);
        Ok(ObjectiveEval {
            f1: da.norm_squared(),
            f2: db.norm_squared(),
            grad_f1: da.scale(2.0),
            grad_f2: db.scale(2.0),
        })
    }
}

/// Minimal feasible `f2` on the quadratic front for a given `f1` level:
/// `(||a - b|| - sqrt(f1))^2`.
pub fn quadratic_front_oracle(pair: &QuadraticPair, f1_value: f64) -> Result<f64> {
    let sep_sq = pair.separation_squared();
    if !(0.0..=sep_sq).contains(&f1_value) {
        return Err(CoreError::OutOfRange(format!(
            "front oracle: f1 value {f1_value} outside [0, {sep_sq}]"
        )));
    }
    let d = sep_sq.sqrt() - f1_value.sqrt();
    Ok(d * d)
}

/// Central-difference gradient approximations of both objectives.
///
/// The step seed is held fixed across perturbations so stochastic problems
/// see identical minibatches on both sides of each difference.
pub fn finite_difference_grad(
    problem: &dyn BiObjectiveProblem,
    theta: &ParamVector,
    h: f64,
    step_seed: u64,
) -> Result<(ParamVector, ParamVector)> {
    if h <= 0.0 || !h.is_finite() {
        return Err(CoreError::invalid("finite differences: h must be positive"));
    }
    if !theta.is_finite() {
        return Err(CoreError::invalid("finite differences: theta must be finite"));
    }
    let dim = theta.len();
    let mut g1 = vec![0.0; dim];
    let mut g2 = vec![0.0; dim];
    let mut probe = theta.as_slice().to_vec();
    for i in 0..dim {
        let orig = probe[i];
        probe[i] = orig + h;
        let plus = problem.eval(&ParamVector::new(probe.clone())?, step_seed)?;
        probe[i] = orig - h;
        let minus = problem.eval(&ParamVector::new(probe.clone())?, step_seed)?;
        probe[i] = orig;
        let d1 = (plus.f1 - minus.f1) / (2.0 * h);
        let d2 = (plus.f2 - minus.f2) / (2.0 * h);
        if !d1.is_finite() || !d2.is_finite() {
            return Err(CoreError::NumericFailure {
                iter: 0,
                what: format!("finite differences produced non-finite value at coordinate {i}"),
            });
        }
        g1[i] = d1;
        g2[i] = d2;
    }
    Ok((ParamVector::from_raw(g1), ParamVector::from_raw(g2)))
}

/// View over a problem with the roles of `f1` and `f2` exchanged.
///
/// Used for the low-completeness boundary, which minimizes the original `f1`
/// subject to the original `f2` staying at its infimum.
pub struct SwappedProblem<'a> {
    inner: &'a dyn BiObjectiveProblem,
}

impl<'a> SwappedProblem<'a> {
    pub fn new(inner: &'a dyn BiObjectiveProblem) -> Self {
        SwappedProblem { inner }
    }
}

impl BiObjectiveProblem for SwappedProblem<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, theta: &ParamVector, step_seed: u64) -> Result<ObjectiveEval> {
        let e = self.inner.eval(theta, step_seed)?;
        Ok(ObjectiveEval {
            f1: e.f2,
            f2: e.f1,
            grad_f1: e.grad_f2,
            grad_f2: e.grad_f1,
        })
    }

    fn eval_full(&self, theta: &ParamVector) -> Result<ObjectiveEval> {
        let e = self.inner.eval_full(theta)?;
        Ok(ObjectiveEval {
            f1: e.f2,
            f2: e.f1,
            grad_f1: e.grad_f2,
            grad_f2: e.grad_f1,
        })
    }
}

/// Relative L2 error between an approximation and a reference vector.
pub fn relative_error(approx: &ParamVector, reference: &ParamVector) -> f64 {
    let denom = reference.norm().max(1e-12);
    approx.sub(reference).norm() / denom
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng64;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn coincident_minimizers_collapse_the_front() {
        let p = make_quadratic_pair(pv(&[0.0, 0.0]), pv(&[0.0, 0.0])).unwrap();
        let mut rng = Rng64::new(5);
        for _ in 0..20 {
            let theta = pv(&[rng.next_gaussian(), rng.next_gaussian()]);
            let e = p.eval(&theta, 0).unwrap();
            assert_eq!(e.f1, e.f2);
        }
        assert_eq!(p.separation_squared(), 0.0);
    }

    #[test]
    fn midpoint_evaluation_matches_formula() {
        let p = make_quadratic_pair(pv(&[0.0, 0.0]), pv(&[1.0, 0.0])).unwrap();
        let e = p.eval(&pv(&[0.5, 0.0]), 0).unwrap();
        assert_eq!(e.f1, 0.25);
        assert_eq!(e.f2, 0.25);
        assert_eq!(e.grad_f1.as_slice(), &[1.0, 0.0]);
        assert_eq!(e.grad_f2.as_slice(), &[-1.0, 0.0]);
    }

    #[test]
    fn rejects_length_mismatch() {
        assert!(make_quadratic_pair(pv(&[0.0]), pv(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn front_oracle_endpoints() {
        let p = make_quadratic_pair(pv(&[0.0, 0.0]), pv(&[1.0, 0.0])).unwrap();
        assert_eq!(quadratic_front_oracle(&p, 0.0).unwrap(), 1.0);
        assert!(quadratic_front_oracle(&p, 1.0).unwrap().abs() < 1e-15);
        assert!(quadratic_front_oracle(&p, -0.01).is_err());
        assert!(quadratic_front_oracle(&p, 1.01).is_err());
    }

    /// 1-D minimization along the segment [a, b]: for each t the point
    /// a + t(b - a) has f1 = t^2 * sep_sq; the oracle must return the minimal
    /// f2 over all segment points satisfying the constraint.
    #[test]
    fn front_oracle_matches_segment_minimization() {
        let p = make_quadratic_pair(pv(&[0.0, 0.0]), pv(&[1.0, 0.0])).unwrap();
        let f1_cap = 0.25;
        let mut best_f2 = f64::INFINITY;
        let n = 200_001;
        for k in 0..n {
            let t = k as f64 / (n - 1) as f64;
            let theta = pv(&[t, 0.0]);
            let e = p.eval(&theta, 0).unwrap();
            if e.f1 <= f1_cap && e.f2 < best_f2 {
                best_f2 = e.f2;
            }
        }
        let oracle = quadratic_front_oracle(&p, f1_cap).unwrap();
        assert!((best_f2 - oracle).abs() < 1e-4, "grid {best_f2} vs oracle {oracle}");
        assert!((oracle - 0.25).abs() < 1e-12);
    }

    /// No lattice point off the segment dominates the analytic front.
    #[test]
    fn no_off_segment_point_dominates_the_front() {
        let p = make_quadratic_pair(pv(&[0.0, 0.0]), pv(&[1.0, 0.0])).unwrap();
        let front: Vec<(f64, f64)> = (0..=10)
            .map(|k| {
                let f1 = k as f64 / 10.0;
                (f1, quadratic_front_oracle(&p, f1).unwrap())
            })
            .collect();
        let step = 0.01;
        let mut x = -0.5;
        while x <= 1.5 {
            let mut y = -0.5;
            while y <= 0.5 {
                let e = p.eval(&pv(&[x, y]), 0).unwrap();
                for &(f1, f2) in &front {
                    let dominates = e.f1 <= f1 && e.f2 <= f2 && (e.f1 < f1 - 1e-9 || e.f2 < f2 - 1e-9);
                    assert!(!dominates, "({x},{y}) dominates front point ({f1},{f2})");
                }
                y += step;
            }
            x += step;
        }
    }

    #[test]
    fn front_oracle_is_monotone_nonincreasing() {
        let p = make_quadratic_pair(pv(&[1.0, 2.0]), pv(&[-1.0, 0.5])).unwrap();
        let sep = p.separation_squared();
        let mut prev = f64::INFINITY;
        for k in 0..=100 {
            let f1 = sep * k as f64 / 100.0;
            let f2 = quadratic_front_oracle(&p, f1).unwrap();
            assert!(f2 <= prev + 1e-12);
            prev = f2;
        }
    }

    #[test]
    fn finite_differences_match_quadratic_gradients() {
        let p = make_quadratic_pair(pv(&[0.0, 0.0]), pv(&[1.0, 0.0])).unwrap();
        let theta = pv(&[0.5, 0.0]);
        let (fd1, fd2) = finite_difference_grad(&p, &theta, 1e-5, 0).unwrap();
        let e = p.eval(&theta, 0).unwrap();
        assert!(relative_error(&fd1, &e.grad_f1) < 1e-6);
        assert!(relative_error(&fd2, &e.grad_f2) < 1e-6);
    }

    #[test]
    fn finite_differences_on_random_quadratic_points() {
        let p = make_quadratic_pair(pv(&[0.3, -0.7, 1.1]), pv(&[-0.2, 0.4, 0.0])).unwrap();
        let mut rng = Rng64::new(17);
        for _ in 0..100 {
            let theta = pv(&[
                2.0 * rng.next_gaussian(),
                2.0 * rng.next_gaussian(),
                2.0 * rng.next_gaussian(),
            ]);
            let (fd1, fd2) = finite_difference_grad(&p, &theta, 1e-5, 0).unwrap();
            let e = p.eval(&theta, 0).unwrap();
            assert!(relative_error(&fd1, &e.grad_f1) < 1e-6);
            assert!(relative_error(&fd2, &e.grad_f2) < 1e-6);
        }
    }

    struct ConstantProblem;

    impl BiObjectiveProblem for ConstantProblem {
        fn dim(&self) -> usize {
            2
        }
        fn eval(&self, _theta: &ParamVector, _seed: u64) -> Result<ObjectiveEval> {
            Ok(ObjectiveEval {
                f1: 3.0,
                f2: -1.5,
                grad_f1: ParamVector::zeros(2),
                grad_f2: ParamVector::zeros(2),
            })
        }
    }

    #[test]
    fn constant_objective_has_zero_gradient() {
        let (fd1, fd2) = finite_difference_grad(&ConstantProblem, &pv(&[0.3, 0.4]), 1e-4, 0).unwrap();
        assert_eq!(fd1.as_slice(), &[0.0, 0.0]);
        assert_eq!(fd2.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn swapped_problem_exchanges_objectives() {
        let p = make_quadratic_pair(pv(&[0.0, 0.0]), pv(&[1.0, 0.0])).unwrap();
        let s = SwappedProblem::new(&p);
        let theta = pv(&[0.2, 0.1]);
        let e = p.eval(&theta, 0).unwrap();
        let se = s.eval(&theta, 0).unwrap();
        assert_eq!(se.f1, e.f2);
        assert_eq!(se.f2, e.f1);
        assert_eq!(se.grad_f1.as_slice(), e.grad_f2.as_slice());
    }
}
