//! First-order optimality: the Lagrangian, F-, alpha- and M-stationarity
//! with multiplier recovery, the step bound beta and the resulting
//! classification of a candidate point.
//!
//! With `L(X; y) = f(X) + sum_i y_i (<A^i, X> - b_i)` and `s = rank(X)`:
//!
//! * F-stationary: `-grad L` lies in the Frechet normal cone of `M(r)`, i.e.
//!   `P_T(grad L) = 0` when `s = r` and `grad L = 0` when `s < r`;
//! * alpha-stationary: `X` is a fixed point of `Pi_{M(r)}(X - alpha grad L)`,
//!   equivalently F-stationary with `||grad L||_2 <= sigma_r(X) / alpha` when
//!   `s = r`, and `grad L = 0` when `s < r`;
//! * M-stationary: `-grad L` lies in the Mordukhovich normal cone.
//!
//! Every residual is compared against `tol * max(1, ||grad f(X)||_F)`.

use serde::{Serialize, Serializer};

use crate::cones::{project_normal_fixed_rank, project_tangent_fixed_rank};
use crate::error::{Error, Result};
use crate::linalg::{
    lstsq_min_norm, orient_svd, project_low_rank, rank_with_floor, serialize_rows, singular_values,
    spectral_norm, stack_rows, vec_row_major, Mat, ThinSvd, Vector,
};
use crate::model::ProblemSpec;
use crate::qualification::{bq_certificates, IntersectionRuleCase, QualificationReport};

/// Largest step for which an F-stationary full-rank point is alpha-stationary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beta(pub f64);

impl Beta {
    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }
}

impl Serialize for Beta {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            ser.serialize_str("inf")
        } else {
            ser.serialize_f64(self.0)
        }
    }
}

impl std::fmt::Display for Beta {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// Feasibility of a point: `||A(X) - b|| <= tol * max(1, ||b||)` and `rank(X) <= r`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Feasibility {
    pub residual: f64,
    pub rank: usize,
    pub feasible: bool,
}

pub fn feasibility(prob: &ProblemSpec, x: &Mat) -> Result<Feasibility> {
    prob.check_point(x)?;
    let residual = prob.affine.feasibility_residual(x)?;
    let rank = orient_svd(x, prob.rank_tol)?.rank();
    let feasible = residual <= prob.tol * prob.affine.rhs().norm().max(1.0) && rank <= prob.r();
    Ok(Feasibility { residual, rank, feasible })
}

/// `L(X; y)`.
pub fn lagrangian(prob: &ProblemSpec, x: &Mat, y: &Vector) -> Result<f64> {
    prob.check_point(x)?;
    let c = prob.affine.apply(x)? - prob.affine.rhs();
    if y.len() != c.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("multiplier of length {}", c.len()),
            found: format!("length {}", y.len()),
        });
    }
    Ok(prob.objective.value(x) + y.dot(&c))
}

/// `grad f(X) + A* y`.
pub fn lagrangian_grad(prob: &ProblemSpec, x: &Mat, y: &Vector) -> Result<Mat> {
    prob.check_point(x)?;
    Ok(prob.objective.gradient(x) + prob.affine.adjoint(y)?)
}

fn scale_of(prob: &ProblemSpec, x: &Mat) -> f64 {
    prob.objective.gradient(x).norm().max(1.0)
}

/// Minimum-norm `y` minimizing `||P(grad f + A* y)||_F`, where `P` is the
/// tangent projection of `M^s` when `tangent` is set and the identity
/// otherwise. Returns `y` and the optimal residual.
fn fit_multiplier(
    prob: &ProblemSpec,
    svd: &ThinSvd,
    grad: &Mat,
    tangent: bool,
) -> Result<(Vector, f64)> {
    let project = |z: &Mat| -> Result<Mat> {
        if tangent {
            project_tangent_fixed_rank(svd, z)
        } else {
            Ok(z.clone())
        }
    };
    let (m, n) = prob.shape();
    let target = project(grad)?;
    let y = if prob.affine.is_empty() {
        Vector::zeros(0)
    } else {
        let cols: Vec<Mat> = prob.affine.mats().iter().map(&project).collect::<Result<_>>()?;
        let lhs = stack_rows(&cols, m, n).transpose();
        -lstsq_min_norm(&lhs, &vec_row_major(&target), prob.rank_tol)
    };
    let residual = project(&(grad + prob.affine.adjoint(&y)?))?.norm();
    Ok((y, residual))
}

/// Outcome of the F-stationarity test.
#[derive(Debug, Clone, Serialize)]
pub struct FCheck {
    pub feasible: bool,
    pub s: usize,
    pub y: Vec<f64>,
    #[serde(serialize_with = "serialize_rows")]
    pub grad_lagrangian: Mat,
    /// Optimal least-squares residual of the stationarity system.
    pub residual: f64,
    pub is_f: bool,
}

impl FCheck {
    pub fn multiplier(&self) -> Vector {
        Vector::from_column_slice(&self.y)
    }
}

/// Recovers the minimum-norm multiplier and decides F-stationarity.
///
/// Infeasible points are reported with `is_f = false`.
pub fn check_f_stationary(prob: &ProblemSpec, x: &Mat) -> Result<FCheck> {
    let feas = feasibility(prob, x)?;
    let svd = orient_svd(x, prob.rank_tol)?;
    let s = svd.rank();
    let grad = prob.objective.gradient(x);
    let (y, residual) = fit_multiplier(prob, &svd, &grad, s >= prob.r())?;
    let is_f = feas.feasible && residual <= prob.tol * scale_of(prob, x);
    Ok(FCheck {
        feasible: feas.feasible,
        s,
        grad_lagrangian: &grad + prob.affine.adjoint(&y)?,
        y: y.iter().copied().collect(),
        residual,
        is_f,
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    Ok(())
}

/// Alpha-stationarity at the multiplier `y` through its closed-form
/// characterization. The spectral bound is relative:
/// `||grad L||_2 <= (sigma_r / alpha) (1 + tol)`.
pub fn check_alpha_stationary(prob: &ProblemSpec, x: &Mat, y: &Vector, alpha: f64) -> Result<bool> {
    check_alpha(alpha)?;
    if !feasibility(prob, x)?.feasible {
        return Ok(false);
    }
    let svd = orient_svd(x, prob.rank_tol)?;
    let g = lagrangian_grad(prob, x, y)?;
    let bound = prob.tol * scale_of(prob, x);
    if svd.rank() < prob.r() {
        return Ok(g.norm() <= bound);
    }
    if project_tangent_fixed_rank(&svd, &g)?.norm() > bound {
        return Ok(false);
    }
    let sigma_r = svd.sigma_at(prob.r());
    Ok(spectral_norm(&g) <= sigma_r / alpha * (1.0 + prob.tol))
}

/// Result of the fixed-point test `X in Pi_{M(r)}(X - alpha grad L)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DirectAlphaCheck {
    pub holds: bool,
    /// The projection of the trial point is not unique.
    pub tie: bool,
}

/// Alpha-stationarity decided by recomputing the projection.
///
/// Without a tie the unique projection is compared with `X`. With a tie,
/// `X` is accepted when it has rank at most `r` and attains the distance
/// from the trial point to `M(r)`.
pub fn check_alpha_stationary_direct(
    prob: &ProblemSpec,
    x: &Mat,
    y: &Vector,
    alpha: f64,
) -> Result<DirectAlphaCheck> {
    check_alpha(alpha)?;
    if !feasibility(prob, x)?.feasible {
        return Ok(DirectAlphaCheck { holds: false, tie: false });
    }
    let z = x - lagrangian_grad(prob, x, y)? * alpha;
    let (p, tie) = project_low_rank(&z, prob.r(), prob.rank_tol)?;
    let scale = x.norm().max(1.0);
    let holds = if tie {
        let sv = singular_values(&z);
        let mut tail: Vec<f64> = sv.iter().copied().collect();
        tail.sort_by(|a, b| b.total_cmp(a));
        let dist2: f64 = tail.iter().skip(prob.r()).map(|v| v * v).sum();
        ((z - x).norm_squared() - dist2).abs() <= prob.tol * scale * scale
    } else {
        (p - x).norm() <= prob.tol * scale
    };
    Ok(DirectAlphaCheck { holds, tie })
}

/// `sigma_r(X) / ||grad L||_2`, infinite when `grad L` vanishes.
pub fn beta_bound(prob: &ProblemSpec, x: &Mat, y: &Vector) -> Result<Beta> {
    let g = lagrangian_grad(prob, x, y)?;
    if g.norm() <= prob.tol * scale_of(prob, x) {
        return Ok(Beta(f64::INFINITY));
    }
    let svd = orient_svd(x, prob.rank_tol)?;
    Ok(Beta(svd.sigma_at(prob.r()) / spectral_norm(&g)))
}

/// Outcome of the M-stationarity test.
#[derive(Debug, Clone, Serialize)]
pub struct MCheck {
    pub is_m: bool,
    /// The multiplier at which the verdict was reached.
    pub y: Vec<f64>,
    pub tangent_residual: f64,
    pub normal_rank: usize,
}

fn m_test(prob: &ProblemSpec, svd: &ThinSvd, x: &Mat, y: &Vector) -> Result<MCheck> {
    let g = lagrangian_grad(prob, x, y)?;
    let floor = prob.tol * scale_of(prob, x);
    let tangent_residual = project_tangent_fixed_rank(svd, &g)?.norm();
    let normal_rank = rank_with_floor(&project_normal_fixed_rank(svd, &g)?, prob.rank_tol, floor);
    let (m, n) = prob.shape();
    let is_m = tangent_residual <= floor && normal_rank <= m.min(n) - prob.r();
    Ok(MCheck { is_m, y: y.iter().copied().collect(), tangent_residual, normal_rank })
}

/// M-stationarity at `y_hint`, or else at the minimum-norm minimizers of
/// `||P_T(grad L)||` and `||grad L||`.
///
/// The multipliers form an affine family and the rank condition is not
/// convex in `y`, so a negative verdict only refutes the tested values.
pub fn check_m_stationary(prob: &ProblemSpec, x: &Mat, y_hint: Option<&Vector>) -> Result<MCheck> {
    let feasible = feasibility(prob, x)?.feasible;
    let svd = orient_svd(x, prob.rank_tol)?;
    let candidates = match y_hint {
        Some(y) => vec![y.clone()],
        None => {
            let grad = prob.objective.gradient(x);
            vec![fit_multiplier(prob, &svd, &grad, true)?.0, fit_multiplier(prob, &svd, &grad, false)?.0]
        }
    };
    let mut first = None;
    for y in &candidates {
        let mut check = m_test(prob, &svd, x, y)?;
        check.is_m &= feasible;
        if check.is_m {
            return Ok(check);
        }
        first.get_or_insert(check);
    }
    Ok(first.expect("at least one candidate"))
}

/// An optimality conclusion backed by the first-order theory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Conclusion {
    /// Convex objective, F-stationary, `s < r`.
    GlobalMinimizer,
    /// Convex objective, F-stationary, `s = r`: global over the subspace `M_X(Gamma)`.
    GlobalMinimizerOnSubspace,
    /// Strongly convex objective, alpha-stationary with `alpha >= 1 / l_f`.
    UniqueGlobalMinimizer,
    /// F-stationarity holds, as any local minimizer's must under the certified qualification.
    NecessaryConditionsSatisfied { assumption: u8 },
    /// F-stationarity fails under a certified qualification: not a local minimizer.
    NecessaryConditionsViolated { assumption: u8 },
}

impl Conclusion {
    pub fn describe(&self) -> String {
        match self {
            Self::GlobalMinimizer => "global minimizer (convexity + F-stationarity, s < r)".into(),
            Self::GlobalMinimizerOnSubspace => {
                "global minimizer restricted on M_X(Gamma) (convexity + F-stationarity, s = r)".into()
            }
            Self::UniqueGlobalMinimizer => {
                "unique global minimizer (strong convexity + alpha-stationarity, alpha >= 1/l_f)".into()
            }
            Self::NecessaryConditionsSatisfied { assumption } => format!(
                "first-order necessary conditions satisfied under assumption {assumption}"
            ),
            Self::NecessaryConditionsViolated { assumption } => format!(
                "first-order necessary conditions violated under assumption {assumption}: not a local minimizer"
            ),
        }
    }
}

/// Every first-order verdict for a point.
#[derive(Debug, Clone, Serialize)]
pub struct StationarityReport {
    pub feasible: bool,
    pub feasibility_residual: f64,
    pub s: usize,
    pub r: usize,
    pub y: Vec<f64>,
    #[serde(serialize_with = "serialize_rows")]
    pub grad_lagrangian: Mat,
    pub f_residual: f64,
    pub is_f: bool,
    pub is_m: bool,
    pub m_multiplier: Vec<f64>,
    pub alpha_tested: Option<f64>,
    pub is_alpha: Option<bool>,
    pub beta: Beta,
    pub qualification: Option<QualificationReport>,
    pub classification: Vec<Conclusion>,
}

/// Runs every first-order test and derives the conclusions they support.
///
/// `alpha` defaults to `1 / l_f` for strongly convex objectives and to 1
/// otherwise.
pub fn classify_first_order(
    prob: &ProblemSpec,
    x: &Mat,
    alpha: Option<f64>,
) -> Result<StationarityReport> {
    let feas = feasibility(prob, x)?;
    let f = check_f_stationary(prob, x)?;
    let y = f.multiplier();
    let alpha = alpha.unwrap_or_else(|| prob.objective.strong_convexity.map_or(1.0, |l| 1.0 / l));
    check_alpha(alpha)?;
    if !feas.feasible {
        return Ok(StationarityReport {
            feasible: false,
            feasibility_residual: feas.residual,
            s: f.s,
            r: prob.r(),
            y: f.y,
            grad_lagrangian: f.grad_lagrangian,
            f_residual: f.residual,
            is_f: false,
            is_m: false,
            m_multiplier: Vec::new(),
            alpha_tested: None,
            is_alpha: None,
            beta: Beta(0.0),
            qualification: None,
            classification: Vec::new(),
        });
    }
    let m = check_m_stationary(prob, x, None)?;
    let is_alpha = f.is_f && check_alpha_stationary(prob, x, &y, alpha)?;
    let beta = beta_bound(prob, x, &y)?;
    let svd = orient_svd(x, prob.rank_tol)?;
    let qual = bq_certificates(&svd, &prob.affine, prob.r())?;

    let mut classification = Vec::new();
    let obj = &prob.objective;
    if obj.convex && f.is_f {
        classification.push(if f.s < prob.r() {
            Conclusion::GlobalMinimizer
        } else {
            Conclusion::GlobalMinimizerOnSubspace
        });
    }
    if let Some(lf) = obj.strong_convexity {
        if is_alpha && alpha * lf >= 1.0 - prob.tol {
            classification.push(Conclusion::UniqueGlobalMinimizer);
        }
    }
    let assumption = match qual.intersection_rule_case {
        IntersectionRuleCase::EqFullRank => Some(1),
        IntersectionRuleCase::EqRankDeficient => Some(2),
        IntersectionRuleCase::NotCertified => None,
    };
    if let Some(assumption) = assumption {
        classification.push(if f.is_f {
            Conclusion::NecessaryConditionsSatisfied { assumption }
        } else {
            Conclusion::NecessaryConditionsViolated { assumption }
        });
    }

    Ok(StationarityReport {
        feasible: true,
        feasibility_residual: feas.residual,
        s: f.s,
        r: prob.r(),
        y: f.y,
        grad_lagrangian: f.grad_lagrangian,
        f_residual: f.residual,
        is_f: f.is_f,
        is_m: m.is_m,
        m_multiplier: m.y,
        alpha_tested: Some(alpha),
        is_alpha: Some(is_alpha),
        beta,
        qualification: Some(qual),
        classification,
    })
}
