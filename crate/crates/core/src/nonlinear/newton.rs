use alloc::format;
use alloc::vec::Vec;

use super::lu::LuSolver;
use super::sparse::{norm2, CsrMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Step shrink factor used by the backtracking line search.
    pub damping: f64,
    pub max_halvings: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig { abs_tol: 1e-8, rel_tol: 1e-10, max_iter: 50, damping: 0.5, max_halvings: 20 }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.abs_tol > 0.0
            && self.rel_tol > 0.0
            && self.max_iter >= 1
            && self.damping > 0.0
            && self.damping < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("newton config {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// Residual norms, starting with the initial guess.
    pub residuals: Vec<f64>,
    /// Number of step halvings per iteration.
    pub damping_events: Vec<usize>,
}

impl SolveStats {
    /// Estimated convergence order from the last three residuals.
    pub fn observed_order(&self) -> Option<f64> {
        let r = &self.residuals;
        if r.len() < 3 {
            return None;
        }
        let (a, b, c) = (r[r.len() - 3], r[r.len() - 2], r[r.len() - 1]);
        if !(a > 0.0 && b > 0.0 && c > 0.0) || a == b {
            return None;
        }
        Some(libm::log(c / b) / libm::log(b / a))
    }
}

pub fn newton_solve<R, J>(residual: R, jacobian: J, x0: Vec<f64>, cfg: &NewtonConfig) -> Result<(Vec<f64>, SolveStats)>
where
    R: FnMut(&[f64]) -> Result<Vec<f64>>,
    J: FnMut(&[f64]) -> Result<CsrMatrix>,
{
    newton_solve_with(&mut LuSolver::new(), residual, jacobian, x0, cfg)
}

/// Damped Newton iteration reusing the factorisation ordering of `solver`.
///
/// A step is accepted as soon as it strictly lowers the Euclidean residual
/// norm; otherwise it is shrunk by `cfg.damping` up to `cfg.max_halvings`
/// times.
pub fn newton_solve_with<R, J>(
    solver: &mut LuSolver,
    mut residual: R,
    mut jacobian: J,
    mut x: Vec<f64>,
    cfg: &NewtonConfig,
) -> Result<(Vec<f64>, SolveStats)>
where
    R: FnMut(&[f64]) -> Result<Vec<f64>>,
    J: FnMut(&[f64]) -> Result<CsrMatrix>,
{
    cfg.validate()?;
    let mut r = residual(&x)?;
    if r.len() != x.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), found: r.len() });
    }
    let mut norm = norm2(&r);
    let target = cfg.abs_tol.max(cfg.rel_tol * norm);
    let mut stats = SolveStats { iterations: 0, residuals: alloc::vec![norm], damping_events: Vec::new() };
    let fail = |stats: &SolveStats, reason: &str| Error::NewtonFailure {
        iterations: stats.iterations,
        residuals: stats.residuals.clone(),
        reason: reason.into(),
    };

    while norm > target {
        if !norm.is_finite() {
            return Err(fail(&stats, "non-finite residual"));
        }
        if stats.iterations == cfg.max_iter {
            return Err(fail(&stats, "maximum number of iterations reached"));
        }
        let jac = jacobian(&x)?;
        let dx = solver.solve(&jac, &r)?;

        let mut step = 1.0;
        let mut halvings = 0;
        loop {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(xi, di)| xi - step * di).collect();
            let rt = residual(&trial)?;
            let nt = norm2(&rt);
            if nt < norm {
                x = trial;
                r = rt;
                norm = nt;
                break;
            }
            if halvings == cfg.max_halvings {
                stats.damping_events.push(halvings);
                return Err(fail(&stats, "line search found no decrease"));
            }
            step *= cfg.damping;
            halvings += 1;
        }
        stats.iterations += 1;
        stats.residuals.push(norm);
        stats.damping_events.push(halvings);
    }
    Ok((x, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn scalar(v: f64) -> Result<CsrMatrix> {
        CsrMatrix::from_triplets(1, 1, &[(0, 0, v)])
    }

    #[test]
    fn square_root_of_four() {
        let (x, stats) = newton_solve(|x| Ok(vec![x[0] * x[0] - 4.0]), |x| scalar(2.0 * x[0]), vec![3.0], &NewtonConfig::default()).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-8);
        assert!(stats.iterations <= 6);
        assert_eq!(stats.residuals.len(), stats.iterations + 1);
        assert!(stats.residuals.windows(2).all(|w| w[1] < w[0]));
        // quadratic decay: r_{k+1} ≈ r_k² / 4 near the root
        let r = &stats.residuals;
        assert!(r[r.len() - 2] < 1e-2 * r[r.len() - 3].max(1e-4));
    }

    #[test]
    fn linear_converges_in_one_step() {
        let (x, stats) = newton_solve(|x| Ok(vec![x[0]]), |_| scalar(1.0), vec![5.0], &NewtonConfig::default()).unwrap();
        assert_eq!(x, vec![0.0]);
        assert_eq!(stats.iterations, 1);
    }

    #[test]
    fn converged_start_does_nothing() {
        let (_, stats) = newton_solve(|x| Ok(vec![x[0]]), |_| scalar(1.0), vec![0.0], &NewtonConfig::default()).unwrap();
        assert_eq!(stats.iterations, 0);
    }

    #[test]
    fn damping_rescues_overshoot() {
        // arctan has a tiny basin for the undamped iteration
        let (x, stats) = newton_solve(
            |x| Ok(vec![libm::atan(x[0])]),
            |x| scalar(1.0 / (1.0 + x[0] * x[0])),
            vec![10.0],
            &NewtonConfig::default(),
        )
        .unwrap();
        assert!(x[0].abs() < 1e-8);
        assert!(stats.damping_events.iter().any(|&d| d > 0));
    }

    #[test]
    fn iteration_cap_reports_history() {
        let cfg = NewtonConfig { max_iter: 2, ..NewtonConfig::default() };
        let err = newton_solve(|x| Ok(vec![libm::exp(x[0]) - 1.0]), |x| scalar(libm::exp(x[0])), vec![30.0], &cfg).unwrap_err();
        match err {
            Error::NewtonFailure { iterations, residuals, .. } => {
                assert_eq!(iterations, 2);
                assert_eq!(residuals.len(), 3);
            }
            e => panic!("{e}"),
        }
    }
}
