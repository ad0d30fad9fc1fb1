//! Projected-gradient search for alpha-stationary points.
//!
//! Each iteration takes a gradient step on `f` and then restores
//! feasibility. In [`AffineMode::ExactProjection`] the step is followed by
//! alternating projections onto `L` and `M(r)`; in
//! [`AffineMode::QuadraticPenalty`] the constraints enter the gradient as
//! `rho A*(A(X) - b)` and only the rank projection is applied. Neither
//! variant carries a convergence guarantee for nonempty constraints.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::affine::AffineMap;
use crate::cones::project_tangent_fixed_rank;
use crate::error::{Error, Result};
use crate::linalg::{
    lstsq_min_norm, orient_svd, project_low_rank, spectral_norm, unvec_row_major, Mat,
};
use crate::model::ProblemSpec;
use crate::stationarity::{check_f_stationary, classify_first_order, StationarityReport};

/// Objective values above this abort the run.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AffineMode {
    ExactProjection,
    QuadraticPenalty(f64),
}

#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub alpha: f64,
    pub max_iters: usize,
    /// Threshold on both the stationarity and the feasibility residual.
    pub stop_tol: f64,
    pub affine_mode: AffineMode,
    /// Alternating projections per iteration: at least `min_alternations`,
    /// then until the two projections agree, at most `max_alternations`.
    pub min_alternations: usize,
    pub max_alternations: usize,
    /// Seed for [`random_start`].
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            max_iters: 10_000,
            stop_tol: 1e-10,
            affine_mode: AffineMode::ExactProjection,
            min_alternations: 3,
            max_alternations: 1000,
            seed: 0,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::InvalidAlpha(self.alpha));
        }
        if let AffineMode::QuadraticPenalty(rho) = self.affine_mode {
            if !(rho.is_finite() && rho > 0.0) {
                return Err(Error::InvalidInput(format!("penalty weight must be positive, got {rho}")));
            }
        }
        if !(self.stop_tol > 0.0) {
            return Err(Error::InvalidInput("stop tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Frobenius-nearest point of `{Y : A(Y) = b}`; the least-squares solution
/// when the constraints are inconsistent.
pub fn project_affine(a: &AffineMap, x: &Mat) -> Result<Mat> {
    if a.is_empty() {
        return Ok(x.clone());
    }
    let defect = a.apply(x)? - a.rhs();
    let (m, n) = a.shape();
    let d = lstsq_min_norm(&a.stack(), &defect, 1e-12);
    Ok(x - unvec_row_major(d.as_slice(), m, n))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct IterRecord {
    pub iter: usize,
    pub f: f64,
    pub feas_residual: f64,
    pub stat_residual: f64,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub x: Mat,
    pub iterations: usize,
    pub converged: bool,
    pub report: StationarityReport,
    pub log: Vec<IterRecord>,
}

/// The iterate log as comma-separated text with a header line.
pub fn format_log(log: &[IterRecord]) -> String {
    let mut out = String::from("iter,f,feas_residual,stat_residual\n");
    for r in log {
        let _ = writeln!(out, "{},{:e},{:e},{:e}", r.iter, r.f, r.feas_residual, r.stat_residual);
    }
    out
}

/// Residual of the alpha-stationarity characterization at the recovered
/// multiplier: `||P_T(grad L)|| + max(0, ||grad L||_2 - sigma_r / alpha)`
/// for full rank and `||grad L||` otherwise.
pub fn alpha_residual(prob: &ProblemSpec, x: &Mat, alpha: f64) -> Result<f64> {
    let f = check_f_stationary(prob, x)?;
    let svd = orient_svd(x, prob.rank_tol)?;
    let g = &f.grad_lagrangian;
    if svd.rank() < prob.r() {
        return Ok(g.norm());
    }
    let excess = (spectral_norm(g) - svd.sigma_at(prob.r()) / alpha).max(0.0);
    Ok(project_tangent_fixed_rank(&svd, g)?.norm() + excess)
}

fn restore(prob: &ProblemSpec, z: Mat, cfg: &SolverConfig) -> Result<Mat> {
    let r = prob.r();
    if prob.affine.is_empty() {
        return Ok(project_low_rank(&z, r, prob.rank_tol)?.0);
    }
    let mut x = z;
    for k in 0..cfg.max_alternations.max(1) {
        let on_affine = project_affine(&prob.affine, &x)?;
        let (low, _) = project_low_rank(&on_affine, r, prob.rank_tol)?;
        let gap = (&low - &on_affine).norm();
        x = low;
        if k + 1 >= cfg.min_alternations && gap <= 1e-14 * x.norm().max(1.0) {
            break;
        }
    }
    Ok(x)
}

/// Gaussian matrix with entries scaled by the objective's gradient scale at
/// the origin, pulled onto the feasible set by the restoration step.
pub fn random_start(prob: &ProblemSpec, cfg: &SolverConfig) -> Result<Mat> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (m, n) = prob.shape();
    let scale = prob.objective.gradient(&Mat::zeros(m, n)).norm().max(1.0) / ((m * n) as f64).sqrt();
    let z = Mat::from_fn(m, n, |_, _| rng.sample::<f64, _>(StandardNormal) * scale);
    restore(prob, z, cfg)
}

/// Runs the projected-gradient iteration from `x0`.
pub fn solve(prob: &ProblemSpec, x0: &Mat, cfg: &SolverConfig) -> Result<SolveOutcome> {
    cfg.validate()?;
    prob.check_point(x0)?;
    let mut x = x0.clone();
    let mut log = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for iter in 1..=cfg.max_iters {
        iterations = iter;
        let grad = prob.objective.gradient(&x);
        x = match cfg.affine_mode {
            AffineMode::ExactProjection => restore(prob, &x - grad * cfg.alpha, cfg)?,
            AffineMode::QuadraticPenalty(rho) => {
                let defect = prob.affine.apply(&x)? - prob.affine.rhs();
                let step = grad + prob.affine.adjoint(&defect)? * rho;
                project_low_rank(&(&x - step * cfg.alpha), prob.r(), prob.rank_tol)?.0
            }
        };
        let f = prob.objective.value(&x);
        if !f.is_finite() || f > DIVERGENCE_LIMIT {
            return Err(Error::Divergence { iter, value: f });
        }
        let feas_residual = prob.affine.feasibility_residual(&x)?;
        let stat_residual = alpha_residual(prob, &x, cfg.alpha)?;
        log.push(IterRecord { iter, f, feas_residual, stat_residual });
        let scale = prob.objective.gradient(&x).norm().max(1.0);
        if stat_residual <= cfg.stop_tol * scale && feas_residual <= cfg.stop_tol {
            converged = true;
            break;
        }
    }
    let x = project_affine(&prob.affine, &x)?;
    let report = classify_first_order(prob, &x, Some(cfg.alpha))?;
    Ok(SolveOutcome { x, iterations, converged, report, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag, unit, Vector};
    use crate::model::ObjectiveModel;

    fn trace_problem() -> ProblemSpec {
        let a = AffineMap::new(4, 4, vec![Mat::identity(4, 4)], Vector::from_element(1, 2.0))
            .unwrap();
        ProblemSpec::new(ObjectiveModel::frobenius_distance(-unit(4, 4, 2, 2)), a, 3).unwrap()
    }

    #[test]
    fn affine_projection_of_feasible_point_is_identity() {
        let p = trace_problem();
        let x = diag(4, 4, &[1.0, 1.0, 0.0, 0.0]);
        assert!((project_affine(&p.affine, &x).unwrap() - &x).norm() < 1e-14);
        let y = project_affine(&p.affine, &Mat::zeros(4, 4)).unwrap();
        assert!((y - Mat::identity(4, 4) * 0.5).norm() < 1e-14);
    }

    #[test]
    fn unconstrained_projection_is_identity() {
        let a = AffineMap::unconstrained(2, 3);
        let x = Mat::from_element(2, 3, 1.5);
        assert_eq!(project_affine(&a, &x).unwrap(), x);
    }

    #[test]
    fn trace_instance_reaches_unique_minimizer() {
        let p = trace_problem();
        let out = solve(&p, &-unit(4, 4, 2, 2), &SolverConfig::default()).unwrap();
        assert!(out.converged);
        let x4 = diag(4, 4, &[2.0, 2.0, 0.0, 2.0]) / 3.0;
        assert!((&out.x - x4).norm() < 1e-6, "{}", out.x);
        assert!(out.report.is_f);
    }

    #[test]
    fn stationary_start_stops_after_one_iteration() {
        let h = diag(3, 3, &[2.0, 1.0, 0.0]);
        let p = ProblemSpec::new(
            ObjectiveModel::frobenius_distance(h.clone()),
            AffineMap::unconstrained(3, 3),
            2,
        )
        .unwrap();
        let out = solve(&p, &h, &SolverConfig::default()).unwrap();
        assert_eq!(out.iterations, 1);
        assert_eq!(out.x, h);
    }

    #[test]
    fn penalty_mode_and_divergence() {
        let p = trace_problem();
        let cfg = SolverConfig {
            affine_mode: AffineMode::QuadraticPenalty(10.0),
            alpha: 0.02,
            max_iters: 2000,
            ..Default::default()
        };
        let out = solve(&p, &Mat::zeros(4, 4), &cfg).unwrap();
        assert!(p.affine.feasibility_residual(&out.x).unwrap() < 1e-12);
        assert!(out.log.last().unwrap().feas_residual < 0.1);
        let bad = SolverConfig { alpha: 5.0, ..Default::default() };
        assert!(matches!(solve(&p, &Mat::zeros(4, 4), &bad), Err(Error::Divergence { .. })));
        let bad = SolverConfig { alpha: -1.0, ..Default::default() };
        assert!(matches!(solve(&p, &Mat::zeros(4, 4), &bad), Err(Error::InvalidAlpha(_))));
    }

    #[test]
    fn random_start_is_seeded_and_feasible() {
        let p = trace_problem();
        let cfg = SolverConfig { seed: 11, ..Default::default() };
        let a = random_start(&p, &cfg).unwrap();
        assert_eq!(a, random_start(&p, &cfg).unwrap());
        assert!(p.affine.feasibility_residual(&a).unwrap() < 1e-10);
        let other = random_start(&p, &SolverConfig { seed: 12, ..cfg }).unwrap();
        assert!((a - other).norm() > 1e-6);
    }

    #[test]
    fn log_is_comma_delimited() {
        let log = [IterRecord { iter: 1, f: 0.5, feas_residual: 0.0, stat_residual: 1e-3 }];
        let text = format_log(&log);
        assert!(text.starts_with("iter,f,feas_residual,stat_residual\n1,"));
        assert_eq!(text.lines().nth(1).unwrap().split(',').count(), 4);
    }
}
