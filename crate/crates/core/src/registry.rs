//! Problem registry: string names to problem instances, so drivers select
//! problems without code changes.

use crate::error::{CoreError, Result};
use crate::numerics::ParamVector;
use crate::objective::{make_quadratic_pair, BiObjectiveProblem};
use crate::unlearn::{UnlearnProblem, UnlearnTask};

/// Names accepted by [`build_problem`].
pub const PROBLEM_NAMES: &[&str] = &["quad", "unlearn-toy"];

/// Everything needed to instantiate a registered problem.
pub enum ProblemSpec {
    Quad { a: Vec<f64>, b: Vec<f64> },
    UnlearnToy(Box<UnlearnTask>),
}

impl ProblemSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemSpec::Quad { .. } => "quad",
            ProblemSpec::UnlearnToy(_) => "unlearn-toy",
        }
    }
}

pub fn is_known_problem(name: &str) -> bool {
    PROBLEM_NAMES.contains(&name)
}

/// Instantiates a problem from its spec.
pub fn build_problem(spec: ProblemSpec) -> Result<Box<dyn BiObjectiveProblem>> {
    match spec {
        ProblemSpec::Quad { a, b } => {
            let pair = make_quadratic_pair(ParamVector::new(a)?, ParamVector::new(b)?)?;
            Ok(Box::new(pair))
        }
        ProblemSpec::UnlearnToy(task) => Ok(Box::new(UnlearnProblem::new(*task))),
    }
}

/// Validates a problem name against the registry.
pub fn check_problem_name(name: &str) -> Result<()> {
    if is_known_problem(name) {
        Ok(())
    } else {
        Err(CoreError::invalid(format!(
            "unknown problem '{name}' (registered: {})",
            PROBLEM_NAMES.join(", ")
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quad_is_registered() {
        assert!(is_known_problem("quad"));
        assert!(is_known_problem("unlearn-toy"));
        assert!(!is_known_problem("rosenbrock"));
        let p = build_problem(ProblemSpec::Quad {
            a: vec![0.0, 0.0],
            b: vec![1.0, 0.0],
        })
        .unwrap();
        assert_eq!(p.dim(), 2);
    }
}
