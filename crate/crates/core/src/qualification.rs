//! Constraint qualifications at a feasible point and the normal-cone
//! intersection rule they certify.
//!
//! With `X = U diag(sigma) V^T` and `s = rank(X)`, each constraint matrix is
//! compressed two ways:
//!
//! ```text
//! T^i = [ U_G^T A^i V_G    U_G^T A^i V_perp ]      R^i = U^T A^i V_G   (m x s)
//!       [ U_perp^T A^i V_G        0         ]
//! ```
//!
//! Linear independence of the `T^i` (`assumption1`) is the qualification for
//! full-rank points; independence of the `R^i` (`assumption2`) covers
//! rank-deficient points. Under the applicable one, the Frechet normal cone
//! of the feasible set equals `range A* + N^F_{M(r)}(X)`.

use serde::Serialize;

use crate::affine::AffineMap;
use crate::cones::project_tangent_fixed_rank;
use crate::error::{shape_err, Error, Result};
use crate::linalg::{lstsq_min_norm, span_rank, stack_rows, vec_row_major, Mat, ThinSvd, Vector};

/// Relative singular-value threshold used to decide linear independence.
pub const INDEPENDENCE_TOL: f64 = 1e-8;

/// Which form of the intersection rule is certified at the point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IntersectionRuleCase {
    /// `s = r` and the `T^i` are independent.
    EqFullRank,
    /// `s < r` and the `R^i` are independent.
    EqRankDeficient,
    NotCertified,
}

#[derive(Debug, Clone, Serialize)]
pub struct QualificationReport {
    pub s: usize,
    pub r: usize,
    pub l: usize,
    pub t_rank: usize,
    pub r_rank: usize,
    /// The compressed matrices `T^i` are linearly independent.
    pub assumption1: bool,
    /// The compressed matrices `R^i` are linearly independent.
    pub assumption2: bool,
    /// `N^M_{M(r)}(X) and range A*` meet only at zero.
    pub bq_mordukhovich: bool,
    /// `y -> P_T(A* y)` is injective.
    pub bq_subspace: bool,
    pub intersection_rule_case: IntersectionRuleCase,
    pub warnings: Vec<String>,
}

fn check_shapes(svd: &ThinSvd, a: &AffineMap) -> Result<()> {
    if a.shape() != (svd.rows(), svd.cols()) {
        return Err(shape_err((svd.rows(), svd.cols()), a.shape()));
    }
    Ok(())
}

/// `U^T A^i V` with the `(m-s) x (n-s)` lower-right block set to zero.
pub fn build_t(svd: &ThinSvd, a: &AffineMap) -> Result<Vec<Mat>> {
    check_shapes(svd, a)?;
    let s = svd.rank();
    let (m, n) = a.shape();
    Ok(a.mats()
        .iter()
        .map(|ai| {
            let mut t = svd.u.transpose() * ai * &svd.v;
            t.view_mut((s, s), (m - s, n - s)).fill(0.0);
            t
        })
        .collect())
}

/// `U^T A^i V_Gamma`, each `m x s`.
pub fn build_r(svd: &ThinSvd, a: &AffineMap) -> Result<Vec<Mat>> {
    check_shapes(svd, a)?;
    let ut = svd.u.transpose();
    let vg = svd.v_gamma();
    Ok(a.mats().iter().map(|ai| &ut * ai * &vg).collect())
}

fn independence_rank(mats: &[Mat]) -> usize {
    if mats.is_empty() {
        return 0;
    }
    let (m, n) = mats[0].shape();
    if m * n == 0 {
        return 0;
    }
    span_rank(mats, INDEPENDENCE_TOL)
}

/// Verdict, stack rank and diagnostics for one qualification.
#[derive(Debug, Clone)]
pub struct IndependenceCheck {
    pub holds: bool,
    pub rank: usize,
    pub warnings: Vec<String>,
}

/// Linear independence of the `T^i`.
pub fn assumption1_holds(svd: &ThinSvd, a: &AffineMap) -> Result<IndependenceCheck> {
    let t = build_t(svd, a)?;
    let rank = independence_rank(&t);
    let (m, n) = a.shape();
    let s = svd.rank();
    let bound = m * n - (m - s) * (n - s);
    let mut warnings = Vec::new();
    if a.len() > bound {
        warnings.push(format!(
            "{} constraints exceed the tangent dimension {bound}; T-independence is impossible",
            a.len()
        ));
    }
    Ok(IndependenceCheck { holds: rank == a.len(), rank, warnings })
}

/// Linear independence of the `R^i`.
pub fn assumption2_holds(svd: &ThinSvd, a: &AffineMap) -> Result<IndependenceCheck> {
    let r = build_r(svd, a)?;
    let rank = independence_rank(&r);
    let bound = a.shape().0 * svd.rank();
    let mut warnings = Vec::new();
    if a.len() > bound {
        warnings.push(format!(
            "{} constraints exceed m*s = {bound}; R-independence is impossible",
            a.len()
        ));
    }
    Ok(IndependenceCheck { holds: rank == a.len(), rank, warnings })
}

/// Evaluates both qualifications and the basic qualification, and decides
/// which form of the intersection rule applies.
pub fn bq_certificates(svd: &ThinSvd, a: &AffineMap, r: usize) -> Result<QualificationReport> {
    let s = svd.rank();
    if s > r {
        return Err(Error::InvalidInput(format!("point has rank {s} above the bound {r}")));
    }
    let a1 = assumption1_holds(svd, a)?;
    let a2 = assumption2_holds(svd, a)?;
    // injectivity of y -> P_T(A* y), computed in the ambient coordinates
    let projected: Vec<Mat> = a
        .mats()
        .iter()
        .map(|ai| project_tangent_fixed_rank(svd, ai))
        .collect::<Result<_>>()?;
    let bq_subspace = independence_rank(&projected) == a.len();
    let case = if s == r && a1.holds {
        IntersectionRuleCase::EqFullRank
    } else if s < r && a2.holds {
        IntersectionRuleCase::EqRankDeficient
    } else {
        IntersectionRuleCase::NotCertified
    };
    let mut warnings = a1.warnings;
    warnings.extend(a2.warnings);
    if bq_subspace != a1.holds {
        warnings.push("tangent-projection injectivity disagrees with T-independence".into());
    }
    if rank_fragile(svd) {
        warnings.push(format!(
            "rank-fragile: singular values near the rank threshold {:.3e}",
            svd.threshold()
        ));
    }
    Ok(QualificationReport {
        s,
        r,
        l: a.len(),
        t_rank: a1.rank,
        r_rank: a2.rank,
        assumption1: a1.holds,
        assumption2: a2.holds,
        bq_mordukhovich: bq_subspace,
        bq_subspace,
        intersection_rule_case: case,
        warnings,
    })
}

/// True when a singular value sits within two decades of the rank threshold.
fn rank_fragile(svd: &ThinSvd) -> bool {
    let thr = svd.threshold();
    if thr == 0.0 {
        return false;
    }
    let s = svd.rank();
    let kept = s > 0 && svd.sigma[s - 1] < 100.0 * thr;
    let dropped = s < svd.sigma.len() && svd.sigma[s] > 0.01 * thr;
    kept || dropped
}

/// Outcome of testing `W in range A* + N^F_{M(r)}(X)`.
#[derive(Debug, Clone, Serialize)]
pub struct FeasibleNormalFit {
    pub member: bool,
    pub y: Vec<f64>,
    pub residual: f64,
}

/// Membership of `W` in the Frechet normal cone of the feasible set, using
/// the certified intersection rule.
///
/// For `s = r` the remainder `W - A* y` must lie in the normal space of `M^r`
/// (its tangent projection vanishes); for `s < r` it must vanish outright.
/// `y` is the minimum-norm least-squares multiplier.
pub fn frechet_normal_of_feasible_set(
    svd: &ThinSvd,
    a: &AffineMap,
    r: usize,
    w: &Mat,
    tol: f64,
) -> Result<FeasibleNormalFit> {
    let report = bq_certificates(svd, a, r)?;
    if w.shape() != a.shape() {
        return Err(shape_err(a.shape(), w.shape()));
    }
    let (m, n) = a.shape();
    let (target, columns): (Mat, Vec<Mat>) = match report.intersection_rule_case {
        IntersectionRuleCase::NotCertified => {
            return Err(Error::NotCertified(format!(
                "s = {}, r = {r}, T-independence {}, R-independence {}",
                report.s, report.assumption1, report.assumption2
            )))
        }
        IntersectionRuleCase::EqFullRank => (
            project_tangent_fixed_rank(svd, w)?,
            a.mats()
                .iter()
                .map(|ai| project_tangent_fixed_rank(svd, ai))
                .collect::<Result<_>>()?,
        ),
        IntersectionRuleCase::EqRankDeficient => (w.clone(), a.mats().to_vec()),
    };
    let y = if a.is_empty() {
        Vector::zeros(0)
    } else {
        let lhs = stack_rows(&columns, m, n).transpose();
        lstsq_min_norm(&lhs, &vec_row_major(&target), INDEPENDENCE_TOL)
    };
    let remainder = w - a.adjoint(&y)?;
    // s = r: the remainder must be normal to M^r; s < r: it must vanish
    let residual = match report.intersection_rule_case {
        IntersectionRuleCase::EqFullRank => project_tangent_fixed_rank(svd, &remainder)?.norm(),
        _ => remainder.norm(),
    };
    let member = residual <= tol * w.norm().max(1.0);
    Ok(FeasibleNormalFit { member, y: y.iter().copied().collect(), residual })
}
