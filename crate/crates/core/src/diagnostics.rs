//! Penalty and KKT residuals used as run-time monitors and test oracles,
//! plus the log-log slope estimator for convergence-rate studies.

use crate::error::{CoreError, Result};
use crate::numerics::ParamVector;

/// L1 penalty configuration: scale `xi` and constraint level `epsilon`.
#[derive(Debug, Clone, Copy)]
pub struct PenaltyConfig {
    pub xi: f64,
    pub epsilon: f64,
}

impl PenaltyConfig {
    pub fn new(xi: f64, epsilon: f64) -> Result<Self> {
        if !(xi >= 0.0 && xi.is_finite()) {
            return Err(CoreError::invalid("penalty: xi must be finite and >= 0"));
        }
        Ok(PenaltyConfig { xi, epsilon })
    }
}

/// KKT residual weight.
#[derive(Debug, Clone, Copy)]
pub struct KktConfig {
    pub tau: f64,
}

impl Default for KktConfig {
    fn default() -> Self {
        KktConfig { tau: 1.0 }
    }
}

impl KktConfig {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(CoreError::invalid("kkt: tau must be positive"));
        }
        Ok(KktConfig { tau })
    }
}

/// Exact penalty `f2 + xi * max(f1 - epsilon, 0)`.
///
/// Along the solver dynamics this is nonincreasing whenever `xi` dominates
/// the dual multiplier, which the monotonicity tests exploit.
pub fn penalty(f1: f64, f2: f64, pc: &PenaltyConfig) -> f64 {
    f2 + pc.xi * (f1 - pc.epsilon).max(0.0)
}

/// First-order KKT residual
/// `||grad_f2 + eta grad_f1||^2 + tau [psi]+ + eta [-psi]+`.
///
/// Zero exactly at points satisfying stationarity, feasibility, and
/// complementary slackness of the constrained problem.
pub fn kkt_first_order(
    grad_f1: &ParamVector,
    grad_f2: &ParamVector,
    eta: f64,
    psi: f64,
    kc: &KktConfig,
) -> f64 {
    let g = grad_f2.add_scaled(grad_f1, eta);
    g.norm_squared() + kc.tau * psi.max(0.0) + eta * (-psi).max(0.0)
}

/// Boundary-phase residual `||grad_f2 + eta grad_f1||^2 + tau psi`, defined
/// for nonnegative control values only. Vanishing means the iterate is
/// stationary for f1 and locally optimal for f2 on the stationary manifold.
pub fn kkt_phase1(
    grad_f1: &ParamVector,
    grad_f2: &ParamVector,
    eta: f64,
    psi: f64,
    kc: &KktConfig,
) -> Result<f64> {
    if psi < 0.0 {
        return Err(CoreError::invalid(format!(
            "kkt_phase1: psi must be >= 0 (got {psi}); the boundary-phase control guarantees this"
        )));
    }
    let g = grad_f2.add_scaled(grad_f1, eta);
    Ok(g.norm_squared() + kc.tau * psi)
}

/// Least-squares slope of `log(running-min value)` against `log(t)` over the
/// trailing `window_fraction` of usable points.
///
/// The running-minimum transform is applied first because the rate results
/// bound the best value seen so far, not the instantaneous one. Points with
/// `t <= 0` or nonpositive running minimum are discarded.
pub fn rate_exponent(series: &[(f64, f64)], window_fraction: f64) -> Result<f64> {
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(CoreError::invalid(
            "rate_exponent: window_fraction must be in (0, 1]",
        ));
    }
    let mut running = f64::INFINITY;
    let mut usable: Vec<(f64, f64)> = Vec::with_capacity(series.len());
    for &(t, v) in series {
        running = running.min(v);
        if t > 0.0 && running > 0.0 {
            usable.push((t.ln(), running.ln()));
        }
    }
    if usable.is_empty() {
        return Err(CoreError::DegenerateSeries(
            "no positive points after running-minimum transform".into(),
        ));
    }
    if usable.len() < 10 {
        return Err(CoreError::invalid(format!(
            "rate_exponent: need at least 10 usable points, got {}",
            usable.len()
        )));
    }
    let start = usable.len() - ((usable.len() as f64 * window_fraction).ceil() as usize).max(2);
    let window = &usable[start..];
    let n = window.len() as f64;
    let mean_x = window.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = window.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(x, y) in window {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    if sxx == 0.0 {
        return Err(CoreError::DegenerateSeries(
            "window has no spread in log t".into(),
        ));
    }
    Ok(sxy / sxx)
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(CoreError::invalid(
            "spearman: need two equal-length series of at least 2 points",
        ));
    }
    let rx = ranks(xs);
    let ry = ranks(ys);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(CoreError::DegenerateSeries("constant ranks".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).expect("finite values"));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            out[idx[k]] = avg;
        }
        i = j + 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::ParamVector;
    use crate::objective::{make_quadratic_pair, BiObjectiveProblem};
    use crate::optimizer::{run, ControlFunction, StepConfig};

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn penalty_direct_formula() {
        let pc = PenaltyConfig::new(3.0, 1.0).unwrap();
        assert_eq!(penalty(2.0, 1.0, &pc), 4.0);
    }

    #[test]
    fn penalty_hinge_inactive_below_epsilon() {
        let pc = PenaltyConfig::new(10.0, 1.0).unwrap();
        assert_eq!(penalty(0.5, 2.5, &pc), 2.5);
        assert_eq!(penalty(1.0, 2.5, &pc), 2.5);
    }

    #[test]
    fn penalty_dominates_f2() {
        let pc = PenaltyConfig::new(2.0, 0.3).unwrap();
        for &(f1, f2) in &[(0.1, 5.0), (0.3, -1.0), (0.9, 0.0)] {
            let p = penalty(f1, f2, &pc);
            assert!(p >= f2);
            assert_eq!(p == f2, f1 <= pc.epsilon);
        }
    }

    #[test]
    fn kkt_zero_at_kkt_point() {
        let kc = KktConfig::default();
        let zero = ParamVector::zeros(2);
        assert_eq!(kkt_first_order(&zero, &zero, 1.0, 0.0, &kc), 0.0);
    }

    #[test]
    fn kkt_direct_formula() {
        let kc = KktConfig::default();
        let v = kkt_first_order(&ParamVector::zeros(2), &pv(&[1.0, 0.0]), 0.0, 0.2, &kc);
        assert!((v - 1.2).abs() < 1e-15);
    }

    /// The interior solution for epsilon = 0.25 on the unit quadratic pair is
    /// theta = (0.5, 0) with eta = 1; substitution gives a vanishing residual.
    #[test]
    fn kkt_vanishes_at_analytic_sweep_solution() {
        let p = make_quadratic_pair(pv(&[0.0, 0.0]), pv(&[1.0, 0.0])).unwrap();
        let e = p.eval(&pv(&[0.5, 0.0]), 0).unwrap();
        let kc = KktConfig::default();
        let psi = 0.0; // constraint exactly active
        let v = kkt_first_order(&e.grad_f1, &e.grad_f2, 1.0, psi, &kc);
        assert!(v < 1e-12);
    }

    #[test]
    fn kkt_phase1_contract() {
        let kc = KktConfig::default();
        let zero = ParamVector::zeros(3);
        assert_eq!(kkt_phase1(&zero, &zero, 0.0, 0.0, &kc).unwrap(), 0.0);
        assert!(kkt_phase1(&zero, &zero, 0.0, -0.1, &kc).is_err());
        // linear in tau
        let g1 = pv(&[0.5, 0.0, 0.0]);
        let g2 = pv(&[0.0, 1.0, 0.0]);
        let base = kkt_phase1(&g1, &g2, 0.3, 0.4, &KktConfig::new(1.0).unwrap()).unwrap();
        let doubled = kkt_phase1(&g1, &g2, 0.3, 0.4, &KktConfig::new(2.0).unwrap()).unwrap();
        let stationary = kkt_phase1(&g1, &g2, 0.3, 0.0, &KktConfig::new(1.0).unwrap()).unwrap();
        assert!(((doubled - stationary) - 2.0 * (base - stationary)).abs() < 1e-12);
    }

    #[test]
    fn kkt_phase1_decreases_along_boundary_run() {
        let p = make_quadratic_pair(pv(&[0.0, 0.0]), pv(&[1.0, 0.0])).unwrap();
        let cf = ControlFunction::phase1(1.0, 2.0).unwrap();
        let sc = StepConfig {
            step_size: 0.001,
            max_iters: 10_000,
            grad_tol: 1e-6,
            omega: 0.0,
            eta_warn: f64::INFINITY,
            ..Default::default()
        };
        let (_, traj) = run(&p, &cf, &sc, pv(&[2.0, 1.0]), 0).unwrap();
        let last = traj.last().unwrap();
        // psi = ||grad_f1||^2 for alpha = 1, delta = 2
        let final_k = last.norm_g * last.norm_g + last.psi;
        assert!(final_k < 1e-6, "terminal residual {final_k}");
    }

    #[test]
    fn rate_exponent_recovers_synthetic_slope() {
        let series: Vec<(f64, f64)> = (1..=1000)
            .map(|t| (t as f64, (t as f64).powf(-0.5)))
            .collect();
        let slope = rate_exponent(&series, 0.5).unwrap();
        assert!((slope - -0.5).abs() <= 0.01, "slope {slope}");
    }

    #[test]
    fn rate_exponent_constant_series_is_flat() {
        let series: Vec<(f64, f64)> = (1..=100).map(|t| (t as f64, 2.0)).collect();
        let slope = rate_exponent(&series, 1.0).unwrap();
        assert!(slope.abs() < 1e-12);
    }

    #[test]
    fn rate_exponent_degenerate_and_short_series() {
        let zeros: Vec<(f64, f64)> = (1..=50).map(|t| (t as f64, 0.0)).collect();
        assert!(matches!(
            rate_exponent(&zeros, 0.5),
            Err(crate::error::CoreError::DegenerateSeries(_))
        ));
        let short: Vec<(f64, f64)> = (1..=5).map(|t| (t as f64, 1.0 / t as f64)).collect();
        assert!(rate_exponent(&short, 0.5).is_err());
    }

    /// Running-minimum transform: a noisy series whose lower envelope decays
    /// like t^-1 must fit close to -1 even though raw values fluctuate.
    #[test]
    fn rate_exponent_uses_running_minimum() {
        let series: Vec<(f64, f64)> = (1..=2000)
            .map(|t| {
                let tf = t as f64;
                let bump = if t % 7 == 0 { 5.0 } else { 1.0 };
                (tf, bump / tf)
            })
            .collect();
        let slope = rate_exponent(&series, 0.5).unwrap();
        assert!((slope - -1.0).abs() < 0.1, "slope {slope}");
    }

    #[test]
    fn spearman_detects_monotone_trends() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let down = [10.0, 8.0, 5.0, 2.0, 1.0];
        let up = [1.0, 2.0, 4.0, 8.0, 16.0];
        assert!((spearman(&xs, &down).unwrap() - -1.0).abs() < 1e-12);
        assert!((spearman(&xs, &up).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_handles_ties() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [1.0, 1.0, 2.0, 3.0];
        let rho = spearman(&xs, &ys).unwrap();
        assert!(rho > 0.9);
    }

    /// Lemma-style bound check in continuous time (t = mu * iter): the scaled
    /// minimum of the positive control part stays within an order of
    /// magnitude of the initial violation.
    #[test]
    fn hinge_min_bound_along_phase2_run() {
        let p = make_quadratic_pair(pv(&[0.0, 0.0]), pv(&[1.0, 0.0])).unwrap();
        let eps = 0.25;
        let mu = 0.002;
        let cf = ControlFunction::phase2(5.0, 1, true, eps).unwrap();
        let sc = StepConfig {
            step_size: mu,
            max_iters: 20_000,
            grad_tol: 1e-7,
            ..Default::default()
        };
        let (_, traj) = run(&p, &cf, &sc, pv(&[2.0, 1.0]), 0).unwrap();
        let f1_0 = traj.records[0].f1;
        let bound = 10.0 * (f1_0 - eps).max(0.0);
        let mut min_pos_psi = f64::INFINITY;
        for r in &traj.records {
            min_pos_psi = min_pos_psi.min(r.psi.max(0.0));
            let t = mu * (r.iter + 1) as f64;
            assert!(
                t * min_pos_psi <= bound,
                "t*min[psi]+ = {} exceeds {bound} at iter {}",
                t * min_pos_psi,
                r.iter
            );
        }
    }
}
