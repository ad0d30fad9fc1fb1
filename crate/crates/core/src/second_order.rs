//! Second-order tests at an F-stationary point.
//!
//! For `s = r` the feasible set is locally the manifold `L cap M^r` and the
//! test is the spectrum of the Riemannian quadratic form
//! `grad^2 f[Xi, Xi] - 2 <grad L, Xi X^+ Xi>` on `ker A cap T_{M^r}(X)`.
//!
//! For `s < r` the Bouligand tangent cone is not a subspace. Two tiers are
//! reported:
//! * certificate: `grad^2 f` positive definite on all of `ker A`, which
//!   contains the tangent cone of the feasible set;
//! * falsification: random subspaces `T_{M^s}(X) + U_perp P C Q^T V_perp^T`
//!   with `P`, `Q` of `r - s` columns lie inside the cone; a negative
//!   eigenvalue of `grad^2 f` on one of them, intersected with `ker A`,
//!   refutes the necessary condition.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::affine::AffineMap;
use crate::cones::{project_normal_fixed_rank, project_tangent_fixed_rank, ConeQuery};
use crate::error::{Error, Result};
use crate::linalg::{
    extreme_eigenvalues, null_space, orient_svd, pseudo_inverse, stack_rows, unvec_row_major,
    vec_row_major, Mat, ThinSvd, Vector, DEFAULT_RANK_TOL,
};
use crate::model::ProblemSpec;
use crate::stationarity::{feasibility, lagrangian_grad};

/// Sign of the curvature term in the Riemannian quadratic form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureSign {
    /// `grad^2 f[Xi, Xi] - 2 <grad L, Xi X^+ Xi>`.
    #[default]
    Minus,
    /// `grad^2 f[Xi, Xi] + 2 <P_N(grad L), Xi X^+ Xi>`, the second derivative
    /// of `L` along a curve in `M^r` with velocity `Xi`.
    Plus,
}

impl CurvatureSign {
    pub fn flipped(self) -> Self {
        match self {
            Self::Minus => Self::Plus,
            Self::Plus => Self::Minus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SecondOrderCase {
    FullRank,
    RankDeficient,
}

#[derive(Debug, Clone, Copy)]
pub struct SecondOrderOptions {
    pub samples: usize,
    pub seed: u64,
    pub sign: CurvatureSign,
}

impl Default for SecondOrderOptions {
    fn default() -> Self {
        Self { samples: 2000, seed: 0, sign: CurvatureSign::Minus }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SecondOrderReport {
    pub case: SecondOrderCase,
    /// Dimension of the subspace carrying the main quadratic form:
    /// `ker A cap T_{M^r}` for full rank, `ker A` for rank-deficient points.
    pub basis_dim: usize,
    pub min_eig: Option<f64>,
    pub max_eig: Option<f64>,
    pub necessary_ok: bool,
    pub sufficient_ok: bool,
    pub sign: CurvatureSign,
    /// Full rank: smallest eigenvalue with the curvature sign flipped.
    pub alternate_sign_min_eig: Option<f64>,
    /// Rank-deficient: smallest eigenvalue on `ker A cap T_{M^s}`.
    pub subspace_min_eig: Option<f64>,
    pub cone_samples_tested: usize,
    pub cone_violations: usize,
    pub verdict: String,
}

/// Riemannian quadratic form at a full-rank point.
///
/// Errors with [`Error::WrongCase`] when `s < r` and with
/// [`Error::InvalidInput`] when `Xi` is not tangent to `M^r`.
pub fn riemannian_quad(
    prob: &ProblemSpec,
    x: &Mat,
    svd: &ThinSvd,
    y: &Vector,
    xi: &Mat,
    sign: CurvatureSign,
) -> Result<f64> {
    let (s, r) = (svd.rank(), prob.r());
    if s != r {
        return Err(Error::WrongCase { expected: "full-rank (s = r)", s, r });
    }
    let off = project_normal_fixed_rank(svd, xi)?.norm();
    if off > prob.tol * xi.norm().max(1.0) {
        return Err(Error::InvalidInput(format!(
            "direction is not tangent to the fixed-rank manifold (normal part {off:.3e})"
        )));
    }
    let g = lagrangian_grad(prob, x, y)?;
    let curve = xi * pseudo_inverse(svd) * xi;
    let hess = prob.objective.hess_quad(x, xi);
    Ok(match sign {
        CurvatureSign::Minus => hess - 2.0 * g.dot(&curve),
        CurvatureSign::Plus => hess + 2.0 * project_normal_fixed_rank(svd, &g)?.dot(&curve),
    })
}

/// `grad^2 f(X)[Xi, Xi]`.
pub fn plain_quad(prob: &ProblemSpec, x: &Mat, xi: &Mat) -> f64 {
    prob.objective.hess_quad(x, xi)
}

/// Orthonormal basis of `T_{M^s}(X)`: `u_i v_j^T` with `i < s` or `j < s`.
fn fixed_rank_tangent_basis(svd: &ThinSvd) -> Vec<Mat> {
    let (m, n, s) = (svd.rows(), svd.cols(), svd.rank());
    let mut out = Vec::with_capacity(m * n - (m - s) * (n - s));
    for i in 0..m {
        for j in 0..n {
            if i < s || j < s {
                out.push(svd.u.column(i) * svd.v.column(j).transpose());
            }
        }
    }
    out
}

/// Intersects the span of the Frobenius-orthonormal `basis` with `ker A`.
fn intersect_kernel(basis: &[Mat], a: &AffineMap) -> Vec<Mat> {
    let (m, n) = a.shape();
    if basis.is_empty() {
        return Vec::new();
    }
    let b = stack_rows(basis, m, n).transpose();
    if a.is_empty() {
        return basis.to_vec();
    }
    let coeffs = null_space(&(a.stack() * &b), DEFAULT_RANK_TOL);
    let combined = b * coeffs;
    combined.column_iter().map(|c| unvec_row_major(c.as_slice(), m, n)).collect()
}

/// Orthonormal basis of `ker A cap T_{M^r}(X)` at a full-rank point.
pub fn tangent_intersection_basis(svd: &ThinSvd, a: &AffineMap, r: usize) -> Result<Vec<Mat>> {
    if svd.rank() != r {
        return Err(Error::WrongCase { expected: "full-rank (s = r)", s: svd.rank(), r });
    }
    Ok(intersect_kernel(&fixed_rank_tangent_basis(svd), a))
}

/// Symmetric matrix of the quadratic form `q` on `basis`, by polarization.
pub fn assemble_form(basis: &[Mat], q: impl Fn(&Mat) -> Result<f64>) -> Result<Mat> {
    let k = basis.len();
    let mut out = Mat::zeros(k, k);
    for i in 0..k {
        out[(i, i)] = q(&basis[i])?;
        for j in 0..i {
            let v = (q(&(&basis[i] + &basis[j]))? - q(&(&basis[i] - &basis[j]))?) / 4.0;
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

fn orthonormalize(mats: &[Mat], rows: usize, cols: usize) -> Vec<Mat> {
    if mats.is_empty() {
        return Vec::new();
    }
    let stack = stack_rows(mats, rows, cols).transpose();
    let svd = crate::linalg::thin_svd(&stack, DEFAULT_RANK_TOL).expect("finite basis");
    (0..svd.rank())
        .map(|c| unvec_row_major(svd.u.column(c).as_slice(), rows, cols))
        .collect()
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Second-order verdicts at an F-stationary point with multiplier `y`.
///
/// Errors with [`Error::NotStationary`] when `(X, y)` fails the
/// F-stationarity system.
pub fn check_second_order(
    prob: &ProblemSpec,
    x: &Mat,
    y: &Vector,
    opts: &SecondOrderOptions,
) -> Result<SecondOrderReport> {
    if !feasibility(prob, x)?.feasible {
        return Err(Error::InvalidInput("second-order test needs a feasible point".into()));
    }
    let svd = orient_svd(x, prob.rank_tol)?;
    let (s, r) = (svd.rank(), prob.r());
    let g = lagrangian_grad(prob, x, y)?;
    let residual = if s == r { project_tangent_fixed_rank(&svd, &g)?.norm() } else { g.norm() };
    let scale = prob.objective.gradient(x).norm().max(1.0);
    if residual > prob.tol * scale {
        return Err(Error::NotStationary { residual });
    }
    if s == r {
        full_rank(prob, x, &svd, y, opts)
    } else {
        rank_deficient(prob, x, &svd, opts)
    }
}

fn full_rank(
    prob: &ProblemSpec,
    x: &Mat,
    svd: &ThinSvd,
    y: &Vector,
    opts: &SecondOrderOptions,
) -> Result<SecondOrderReport> {
    let basis = tangent_intersection_basis(svd, &prob.affine, prob.r())?;
    let spectrum = |sign| -> Result<Option<(f64, f64)>> {
        let q = assemble_form(&basis, |xi| riemannian_quad(prob, x, svd, y, xi, sign))?;
        Ok(extreme_eigenvalues(&q))
    };
    let main = spectrum(opts.sign)?;
    let alt = spectrum(opts.sign.flipped())?;
    let min_eig = main.map(|e| e.0);
    let necessary_ok = min_eig.is_none_or(|e| e >= -prob.tol);
    let sufficient_ok = min_eig.is_none_or(|e| e > prob.tol);
    let verdict = if sufficient_ok {
        "strict local minimizer restricted on M^r"
    } else if necessary_ok {
        "second-order necessary condition holds on M^r; sufficiency not certified"
    } else {
        "second-order necessary condition fails: not a local minimizer restricted on M^r"
    };
    Ok(SecondOrderReport {
        case: SecondOrderCase::FullRank,
        basis_dim: basis.len(),
        min_eig,
        max_eig: main.map(|e| e.1),
        necessary_ok,
        sufficient_ok,
        sign: opts.sign,
        alternate_sign_min_eig: alt.map(|e| e.0),
        subspace_min_eig: None,
        cone_samples_tested: 0,
        cone_violations: 0,
        verdict: verdict.into(),
    })
}

fn rank_deficient(
    prob: &ProblemSpec,
    x: &Mat,
    svd: &ThinSvd,
    opts: &SecondOrderOptions,
) -> Result<SecondOrderReport> {
    let (m, n) = prob.shape();
    let (s, r) = (svd.rank(), prob.r());
    let q = |xi: &Mat| Ok(plain_quad(prob, x, xi));
    let min_on = |basis: &[Mat]| -> Result<Option<(f64, f64)>> {
        Ok(extreme_eigenvalues(&assemble_form(basis, q)?))
    };

    let kernel = prob.affine.kernel_basis();
    let on_kernel = min_on(&kernel)?;
    let tangent = fixed_rank_tangent_basis(svd);
    let on_subspace = min_on(&intersect_kernel(&tangent, &prob.affine))?;

    let cone = ConeQuery::new(svd, r, prob.tol)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (up, vp) = (svd.u_perp(), svd.v_perp());
    let k = r - s;
    let mut violations = 0;
    for _ in 0..opts.samples {
        let p = &up * gaussian(&mut rng, m - s, k);
        let qm = &vp * gaussian(&mut rng, n - s, k);
        let mut span = tangent.clone();
        for a in 0..k {
            for b in 0..k {
                span.push(p.column(a) * qm.column(b).transpose());
            }
        }
        let sub = intersect_kernel(&orthonormalize(&span, m, n), &prob.affine);
        if sub.is_empty() {
            continue;
        }
        let coeffs: Vec<f64> = (0..sub.len()).map(|_| rng.sample(StandardNormal)).collect();
        let probe = sub.iter().zip(&coeffs).fold(Mat::zeros(m, n), |acc, (b, c)| acc + b * *c);
        let in_kernel = prob.affine.apply(&probe)?.norm() <= prob.tol * probe.norm().max(1.0);
        if !(in_kernel && cone.in_tangent_bouligand(&probe)?) {
            continue;
        }
        if let Some((lo, _)) = min_on(&sub)? {
            if lo < -prob.tol {
                violations += 1;
            }
        }
    }

    let subspace_ok = on_subspace.is_none_or(|e| e.0 >= -prob.tol);
    let necessary_ok = subspace_ok && violations == 0;
    let sufficient_ok = on_kernel.is_none_or(|e| e.0 > prob.tol);
    let verdict = if sufficient_ok {
        "strict local minimizer (Hessian positive definite on ker A)"
    } else if necessary_ok {
        "no second-order violation found; sufficiency not certified"
    } else {
        "second-order necessary condition fails: not a local minimizer"
    };
    Ok(SecondOrderReport {
        case: SecondOrderCase::RankDeficient,
        basis_dim: kernel.len(),
        min_eig: on_kernel.map(|e| e.0),
        max_eig: on_kernel.map(|e| e.1),
        necessary_ok,
        sufficient_ok,
        sign: opts.sign,
        alternate_sign_min_eig: None,
        subspace_min_eig: on_subspace.map(|e| e.0),
        cone_samples_tested: opts.samples,
        cone_violations: violations,
        verdict: verdict.into(),
    })
}

/// Vectorized form of a basis, for callers that need coordinates.
pub fn basis_matrix(basis: &[Mat]) -> Mat {
    match basis.first() {
        Some(b) => {
            let (m, n) = b.shape();
            let mut out = Mat::zeros(m * n, basis.len());
            for (k, b) in basis.iter().enumerate() {
                out.set_column(k, &vec_row_major(b));
            }
            out
        }
        None => Mat::zeros(0, 0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag, unit};
    use crate::model::ObjectiveModel;

    fn unconstrained(target: Mat, r: usize) -> ProblemSpec {
        let (m, n) = target.shape();
        ProblemSpec::new(ObjectiveModel::frobenius_distance(target), AffineMap::unconstrained(m, n), r)
            .unwrap()
    }

    #[test]
    fn tangent_dimension_without_constraints() {
        let x = diag(3, 3, &[2.0, 1.0, 0.0]);
        let svd = orient_svd(&x, DEFAULT_RANK_TOL).unwrap();
        let b = tangent_intersection_basis(&svd, &AffineMap::unconstrained(3, 3), 2).unwrap();
        assert_eq!(b.len(), 8);
        let g = basis_matrix(&b);
        assert!((g.transpose() * &g - Mat::identity(8, 8)).norm() < 1e-10);
    }

    #[test]
    fn full_space_constraints_leave_nothing() {
        let x = diag(2, 2, &[1.0, 0.0]);
        let svd = orient_svd(&x, DEFAULT_RANK_TOL).unwrap();
        let mats = vec![unit(2, 2, 0, 0), unit(2, 2, 0, 1), unit(2, 2, 1, 0), unit(2, 2, 1, 1)];
        let a = AffineMap::new(2, 2, mats, Vector::from_vec(vec![1.0, 0.0, 0.0, 0.0])).unwrap();
        assert!(tangent_intersection_basis(&svd, &a, 1).unwrap().is_empty());
    }

    #[test]
    fn wrong_case_is_reported() {
        let x = diag(3, 3, &[1.0, 0.0, 0.0]);
        let svd = orient_svd(&x, DEFAULT_RANK_TOL).unwrap();
        let p = unconstrained(x.clone(), 2);
        assert!(matches!(
            riemannian_quad(&p, &x, &svd, &Vector::zeros(0), &unit(3, 3, 0, 0), CurvatureSign::Minus),
            Err(Error::WrongCase { .. })
        ));
        assert!(tangent_intersection_basis(&svd, &p.affine, 2).is_err());
    }

    #[test]
    fn zero_gradient_reduces_to_hessian() {
        let x = diag(3, 3, &[2.0, 1.0, 0.0]);
        let p = unconstrained(x.clone(), 2);
        let svd = orient_svd(&x, DEFAULT_RANK_TOL).unwrap();
        let xi = unit(3, 3, 0, 2) + unit(3, 3, 1, 1);
        for sign in [CurvatureSign::Minus, CurvatureSign::Plus] {
            let v = riemannian_quad(&p, &x, &svd, &Vector::zeros(0), &xi, sign).unwrap();
            assert!((v - xi.norm_squared()).abs() < 1e-12);
        }
        assert!(riemannian_quad(&p, &x, &svd, &Vector::zeros(0), &unit(3, 3, 2, 2), CurvatureSign::Minus)
            .is_err());
    }

    #[test]
    fn plus_sign_matches_curve_second_derivative() {
        // f = 1/2 ||X - H||^2 at X = diag(1, 0), H = diag(1, c): grad f = -c e2 e2^T.
        let c = 0.3;
        let h = diag(2, 2, &[1.0, c]);
        let x = diag(2, 2, &[1.0, 0.0]);
        let p = unconstrained(h.clone(), 1);
        let svd = orient_svd(&x, DEFAULT_RANK_TOL).unwrap();
        let xi = unit(2, 2, 0, 1) + unit(2, 2, 1, 0);
        // curve (e1 + t e2)(e1 + t e2)^T stays in M^1 with velocity xi
        let curve = |t: f64| {
            let v = nalgebra::DVector::from_vec(vec![1.0, t]);
            &v * v.transpose()
        };
        let f = |t: f64| p.objective.value(&curve(t));
        let eps = 1e-4;
        let fd = (f(eps) - 2.0 * f(0.0) + f(-eps)) / (eps * eps);
        let plus = riemannian_quad(&p, &x, &svd, &Vector::zeros(0), &xi, CurvatureSign::Plus).unwrap();
        let minus = riemannian_quad(&p, &x, &svd, &Vector::zeros(0), &xi, CurvatureSign::Minus).unwrap();
        assert!((fd - plus).abs() < 1e-5, "fd {fd} plus {plus}");
        assert!((fd - minus).abs() > 0.1);
    }

    #[test]
    fn linear_objective_is_only_necessary() {
        // <I, X> subject to <I, X> = 2: grad L vanishes at y = -1
        let i3 = Mat::identity(3, 3);
        let a = AffineMap::new(3, 3, vec![i3.clone()], Vector::from_element(1, 2.0)).unwrap();
        let p = ProblemSpec::new(ObjectiveModel::linear_trace(i3), a, 2).unwrap();
        let x = diag(3, 3, &[1.0, 1.0, 0.0]);
        let y = Vector::from_element(1, -1.0);
        let rep = check_second_order(&p, &x, &y, &SecondOrderOptions::default()).unwrap();
        assert_eq!(rep.case, SecondOrderCase::FullRank);
        assert_eq!(rep.basis_dim, 7);
        assert!(rep.min_eig.unwrap().abs() < 1e-12);
        assert!(rep.necessary_ok && !rep.sufficient_ok);
    }

    #[test]
    fn rejects_non_stationary_point() {
        let p = unconstrained(Mat::identity(3, 3), 2);
        let x = diag(3, 3, &[1.0, 1.0, 0.0]);
        assert!(check_second_order(&p, &x, &Vector::zeros(0), &SecondOrderOptions::default()).is_ok());
        let x = diag(3, 3, &[2.0, 1.0, 0.0]);
        let err = check_second_order(&p, &x, &Vector::zeros(0), &SecondOrderOptions::default());
        assert!(matches!(err, Err(Error::NotStationary { .. })));
    }

    #[test]
    fn rank_deficient_strongly_convex_is_sufficient() {
        let p = unconstrained(Mat::zeros(3, 3), 2);
        let opts = SecondOrderOptions { samples: 50, ..Default::default() };
        let rep = check_second_order(&p, &Mat::zeros(3, 3), &Vector::zeros(0), &opts).unwrap();
        assert_eq!(rep.case, SecondOrderCase::RankDeficient);
        assert!(rep.sufficient_ok && rep.necessary_ok);
        assert_eq!(rep.cone_violations, 0);
        assert_eq!(rep.basis_dim, 9);
    }

    #[test]
    fn indefinite_objective_is_refuted_by_sampling() {
        // 1/2 sum_i x_i B x_i^T with B = diag(1, -1, 1) has a saddle at O
        let b = diag(3, 3, &[1.0, -1.0, 1.0]);
        let obj = ObjectiveModel::row_quadratic(vec![b.clone(), b.clone(), b]).unwrap();
        let p = ProblemSpec::new(obj, AffineMap::unconstrained(3, 3), 1).unwrap();
        let opts = SecondOrderOptions { samples: 20, ..Default::default() };
        let rep = check_second_order(&p, &Mat::zeros(3, 3), &Vector::zeros(0), &opts).unwrap();
        assert!(!rep.sufficient_ok);
        assert!(!rep.necessary_ok);
        assert!(rep.cone_violations > 0);
    }
}
