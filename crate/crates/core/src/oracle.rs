//! Brute-force verifiers that share no projection or cone code with the
//! modules they check, plus random instance generators for property suites.

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::affine::AffineMap;
use crate::cones::{project_normal_fixed_rank, ConeQuery};
use crate::error::Result;
use crate::linalg::{diag, orient_svd, project_low_rank, spectral_norm, Mat, Vector, DEFAULT_RANK_TOL};
use crate::model::{ObjectiveModel, ProblemSpec};
use crate::qualification::{assumption1_holds, assumption2_holds, bq_certificates, IntersectionRuleCase};
use crate::stationarity::{lagrangian, lagrangian_grad};

/// Default finite-difference step.
pub const FD_STEP: f64 = 1e-4;

/// Central-difference gradient of `f`.
pub fn fd_gradient(f: impl Fn(&Mat) -> f64, x: &Mat, h: f64) -> Mat {
    let mut g = Mat::zeros(x.nrows(), x.ncols());
    let mut probe = x.clone();
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            let orig = probe[(i, j)];
            probe[(i, j)] = orig + h;
            let up = f(&probe);
            probe[(i, j)] = orig - h;
            let down = f(&probe);
            probe[(i, j)] = orig;
            g[(i, j)] = (up - down) / (2.0 * h);
        }
    }
    g
}

/// Central second difference of `f` along `xi`: approximates `grad^2 f[xi, xi]`.
pub fn fd_quad(f: impl Fn(&Mat) -> f64, x: &Mat, xi: &Mat, h: f64) -> f64 {
    (f(&(x + xi * h)) - 2.0 * f(x) + f(&(x - xi * h))) / (h * h)
}

/// Rank-`r` projection computed from the eigendecomposition of `Z^T Z`.
fn projection_by_gram(z: &Mat, r: usize) -> (Mat, Vec<f64>) {
    let eig = SymmetricEigen::new(z.transpose() * z);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vr = eig.eigenvectors.select_columns(order.iter().take(r));
    let values = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    (z * &vr * vr.transpose(), values)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProjectionCheck {
    /// `||P_svd - P_gram||_F`, or the gap in distance to `Z` when tied.
    pub discrepancy: f64,
    pub tie: bool,
}

/// Compares the SVD projection onto `M(r)` with an independent route.
///
/// Under a tie the projections may legitimately differ, so only their
/// distances to `Z` are compared.
pub fn projection_cross_check(z: &Mat, r: usize) -> Result<ProjectionCheck> {
    let (p, _) = project_low_rank(z, r, DEFAULT_RANK_TOL)?;
    let (q, eigs) = projection_by_gram(z, r);
    let k = z.nrows().min(z.ncols());
    let sv: Vec<f64> = eigs.iter().take(k).map(|e| e.sqrt()).collect();
    let tie = r > 0 && r < k && (sv[r - 1] - sv[r]).abs() <= 1e-6 * sv[0].max(1.0);
    let discrepancy = if tie {
        ((z - &p).norm() - (z - &q).norm()).abs()
    } else {
        (p - q).norm()
    };
    Ok(ProjectionCheck { discrepancy, tie })
}

/// Which rank-one Hankel family attains the minimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum Rank1Family {
    /// `c u u^T` with `u = (1, q, q^2)`.
    Geometric { q: f64 },
    /// `t e3 e3^T`, the limit `q -> infinity`.
    E3Line,
}

#[derive(Debug, Clone, Serialize)]
pub struct Rank1HankelMin {
    pub value: f64,
    #[serde(serialize_with = "crate::linalg::serialize_rows")]
    pub x: Mat,
    pub family: Rank1Family,
    /// Minimum over the three lines `t e1e1^T`, `t ee^T`, `t e3e3^T` alone.
    pub lines_value: f64,
}

/// `(1/2) min_c ||H - c u u^T||^2` and the optimal point.
fn best_on_ray(h: &Mat, u: &Vector) -> (f64, Mat) {
    let g = u * u.transpose();
    let c = h.dot(&g) / g.norm_squared();
    let x = g * c;
    (0.5 * (h - &x).norm_squared(), x)
}

fn geometric(q: f64) -> Vector {
    Vector::from_vec(vec![1.0, q, q * q])
}

/// Global minimum of `1/2 ||H - X||^2` over rank-one 3x3 Hankel matrices,
/// by a `grid`-point scan of `q in [-10, 10]`, golden-section refinement of
/// the best cell and the closed-form `e3` line.
pub fn rank1_hankel_min(h: &Mat, grid: usize, refine_iters: usize) -> Rank1HankelMin {
    let grid = grid.max(2);
    let step = 20.0 / (grid - 1) as f64;
    let eval = |q: f64| best_on_ray(h, &geometric(q)).0;
    let (mut best_q, mut best_v) = (0.0, f64::INFINITY);
    for k in 0..grid {
        let q = -10.0 + step * k as f64;
        let v = eval(q);
        if v < best_v {
            best_q = q;
            best_v = v;
        }
    }
    let (mut lo, mut hi) = (best_q - step, best_q + step);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..refine_iters {
        let a = hi - phi * (hi - lo);
        let b = lo + phi * (hi - lo);
        if eval(a) < eval(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let q = 0.5 * (lo + hi);
    if eval(q) < best_v {
        best_q = q;
    }
    let (gv, gx) = best_on_ray(h, &geometric(best_q));
    let e3 = Vector::from_vec(vec![0.0, 0.0, 1.0]);
    let (ev, ex) = best_on_ray(h, &e3);
    let lines_value = [geometric(0.0), geometric(1.0), e3]
        .iter()
        .map(|u| best_on_ray(h, u).0)
        .fold(f64::INFINITY, f64::min);
    if ev < gv {
        Rank1HankelMin { value: ev, x: ex, family: Rank1Family::E3Line, lines_value }
    } else {
        Rank1HankelMin { value: gv, x: gx, family: Rank1Family::Geometric { q: best_q }, lines_value }
    }
}

/// A sparse-vector feasibility instance `a_i^T x = b_i`, `||x||_0 <= r`.
#[derive(Debug, Clone)]
pub struct SparseInstance {
    pub a: Vec<Vector>,
    pub x: Vector,
    pub r: usize,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DiagEmbedding {
    pub assumption1: bool,
    pub assumption2: bool,
    /// The restrictions of the `a_i` to the support of `x` are independent.
    pub vector_condition: bool,
}

impl DiagEmbedding {
    pub fn equivalent(&self) -> bool {
        self.assumption1 == self.assumption2 && self.assumption2 == self.vector_condition
    }
}

fn independent(vectors: &[Vec<f64>]) -> bool {
    let l = vectors.len();
    if l == 0 {
        return true;
    }
    let gram = Mat::from_fn(l, l, |i, j| {
        vectors[i].iter().zip(&vectors[j]).map(|(a, b)| a * b).sum()
    });
    let scale = gram.diagonal().max().max(f64::MIN_POSITIVE);
    let eig = SymmetricEigen::new(gram);
    eig.eigenvalues.min() > 1e-12 * scale
}

/// Embeds the sparse instance as `Diag(x)` with constraints `Diag(a_i)` and
/// compares both matrix qualifications with the vector condition.
pub fn diag_embedding_equivalence(inst: &SparseInstance) -> Result<DiagEmbedding> {
    let n = inst.x.len();
    let support: Vec<usize> = (0..n).filter(|&i| inst.x[i] != 0.0).collect();
    let restricted: Vec<Vec<f64>> =
        inst.a.iter().map(|a| support.iter().map(|&i| a[i]).collect()).collect();
    let mats: Vec<Mat> = inst.a.iter().map(|a| diag(n, n, a.as_slice())).collect();
    let b = Vector::from_iterator(inst.a.len(), inst.a.iter().map(|a| a.dot(&inst.x)));
    let affine = AffineMap::new(n, n, mats, b)?;
    let svd = orient_svd(&diag(n, n, inst.x.as_slice()), DEFAULT_RANK_TOL)?;
    Ok(DiagEmbedding {
        assumption1: assumption1_holds(&svd, &affine)?.holds,
        assumption2: assumption2_holds(&svd, &affine)?.holds,
        vector_condition: independent(&restricted),
    })
}

// ---- random generators -------------------------------------------------

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// `rows x cols` matrix with orthonormal columns (`cols <= rows`).
pub fn random_orthonormal(rng: &mut impl Rng, rows: usize, cols: usize) -> Mat {
    let q = gaussian_matrix(rng, rows, rows).qr().q();
    q.columns(0, cols).into_owned()
}

/// Random matrix of exact rank `s` with singular values in `[1, 3]`.
pub fn random_rank(rng: &mut impl Rng, rows: usize, cols: usize, s: usize) -> Mat {
    let u = random_orthonormal(rng, rows, s);
    let v = random_orthonormal(rng, cols, s);
    let sig: Vec<f64> = (0..s).map(|_| rng.random_range(1.0..3.0)).collect();
    u * Mat::from_diagonal(&Vector::from_vec(sig)) * v.transpose()
}

/// Sparse instance with `n` in 3..=6, random support of size at most `r`
/// and `l` constraints, some supported off the pattern.
pub fn random_sparse_instance(rng: &mut impl Rng) -> SparseInstance {
    let n = rng.random_range(3..=6);
    let r = rng.random_range(1..n);
    let s = rng.random_range(0..=r);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        idx.swap(i, rng.random_range(0..=i));
    }
    let mut x = Vector::zeros(n);
    for &i in idx.iter().take(s) {
        x[i] = rng.random_range(0.5..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    }
    let l = rng.random_range(0..=s.max(1) + 1);
    let a = (0..l)
        .map(|_| {
            let mut a: Vector = Vector::from_fn(n, |_, _| rng.sample(StandardNormal));
            if rng.random_bool(0.25) {
                for &i in idx.iter().take(s) {
                    a[i] = 0.0;
                }
            }
            a
        })
        .collect();
    SparseInstance { a, x, r }
}

/// How a random instance's point relates to the stationarity notions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlantedKind {
    /// `-grad L` planted in the Frechet normal cone.
    Frechet,
    /// `-grad L` planted in the Mordukhovich but not the Frechet cone.
    Mordukhovich,
    /// No planted structure.
    Generic,
}

/// A certified random instance with a point of known stationarity type.
#[derive(Debug, Clone)]
pub struct PlantedInstance {
    pub problem: ProblemSpec,
    pub x: Mat,
    pub y: Vector,
    /// The planted `grad L(X; y)`.
    pub grad_lagrangian: Mat,
    pub kind: PlantedKind,
}

/// Random instance with `m, n` in 2..=5 whose point `X` satisfies the
/// applicable qualification (T-independence when `full_rank`, else
/// R-independence). The objective is `1/2 ||X - H||^2` with `H` chosen so
/// that `grad L(X; y)` equals a planted matrix.
pub fn random_certified_instance(rng: &mut impl Rng, full_rank: bool) -> Result<PlantedInstance> {
    loop {
        let m = rng.random_range(2..=5);
        let n = rng.random_range(2..=5);
        let k = m.min(n);
        let r = rng.random_range(1..k);
        let s = if full_rank { r } else { rng.random_range(0..r) };
        let x = random_rank(rng, m, n, s);
        let cap = if full_rank { m * n - (m - s) * (n - s) } else { m * s };
        let l = rng.random_range(0..=cap.min(3));
        let mats: Vec<Mat> = (0..l).map(|_| gaussian_matrix(rng, m, n)).collect();
        let b = Vector::from_iterator(l, mats.iter().map(|a| a.dot(&x)));
        let affine = AffineMap::new(m, n, mats, b)?;
        let svd = orient_svd(&x, DEFAULT_RANK_TOL)?;
        let qual = bq_certificates(&svd, &affine, r)?;
        if qual.intersection_rule_case == IntersectionRuleCase::NotCertified {
            continue;
        }
        let kind = match rng.random_range(0..3) {
            0 => PlantedKind::Frechet,
            1 if s < r => PlantedKind::Mordukhovich,
            1 => PlantedKind::Frechet,
            _ => PlantedKind::Generic,
        };
        let g = match kind {
            PlantedKind::Frechet if s == r => {
                // scale so that beta = sigma_r / ||W||_2 spans both sides of 1
                let w = project_normal_fixed_rank(&svd, &gaussian_matrix(rng, m, n))?;
                let nrm = spectral_norm(&w);
                if nrm > 0.0 {
                    w * (svd.sigma_at(r) * rng.random_range(0.2..3.0) / nrm)
                } else {
                    w
                }
            }
            PlantedKind::Frechet => Mat::zeros(m, n),
            PlantedKind::Mordukhovich => {
                let c = gaussian_matrix(rng, m - s, k - r) * gaussian_matrix(rng, k - r, n - s);
                svd.u_perp() * c * svd.v_perp().transpose()
            }
            PlantedKind::Generic => gaussian_matrix(rng, m, n),
        };
        let y = Vector::from_fn(l, |_, _| rng.sample(StandardNormal));
        let grad_f = &g - affine.adjoint(&y)?;
        let target = &x - &grad_f;
        let problem = ProblemSpec::new(ObjectiveModel::frobenius_distance(target), affine, r)?;
        return Ok(PlantedInstance { problem, x, y, grad_lagrangian: g, kind });
    }
}

/// A random smooth objective of one of the built-in kinds on `m x n`
/// (row-quadratic objectives force a square shape).
pub fn random_objective(rng: &mut impl Rng) -> ObjectiveModel {
    let m = rng.random_range(1..=5);
    let n = rng.random_range(1..=5);
    match rng.random_range(0..3) {
        0 => ObjectiveModel::frobenius_distance(gaussian_matrix(rng, m, n)),
        1 => ObjectiveModel::linear_trace(gaussian_matrix(rng, m, n)),
        _ => {
            let blocks = (0..m).map(|_| gaussian_matrix(rng, m, m)).collect();
            ObjectiveModel::row_quadratic(blocks).expect("square blocks")
        }
    }
}

/// Relative errors of the analytic gradient and Hessian form against
/// central differences at a random point and direction.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FdCheck {
    pub gradient_rel_err: f64,
    pub hessian_rel_err: f64,
}

pub fn fd_check_objective(rng: &mut impl Rng, obj: &ObjectiveModel, h: f64) -> FdCheck {
    let (m, n) = obj.shape();
    let x = gaussian_matrix(rng, m, n);
    let xi = gaussian_matrix(rng, m, n);
    let g = obj.gradient(&x);
    let fd = fd_gradient(|z| obj.value(z), &x, h);
    let hq = obj.hess_quad(&x, &xi);
    let fq = fd_quad(|z| obj.value(z), &x, &xi, h);
    FdCheck {
        gradient_rel_err: (&g - fd).norm() / g.norm().max(1.0),
        hessian_rel_err: (hq - fq).abs() / hq.abs().max(1.0),
    }
}

/// Relative error of the Lagrangian gradient against central differences.
pub fn fd_check_lagrangian(prob: &ProblemSpec, x: &Mat, y: &Vector, h: f64) -> Result<f64> {
    let g = lagrangian_grad(prob, x, y)?;
    let fd = fd_gradient(|z| lagrangian(prob, z, y).unwrap_or(f64::NAN), x, h);
    Ok((&g - fd).norm() / g.norm().max(1.0))
}

/// Eckart-Young sampling: the largest excess of `||Z - P||` over
/// `||Z - Y||` across `samples` rank-`r` matrices `Y`, half of them small
/// perturbations of the projection `P`. Nonpositive means no violation.
pub fn eckart_young_margin(rng: &mut impl Rng, z: &Mat, r: usize, samples: usize) -> Result<f64> {
    let (m, n) = z.shape();
    let (p, _) = project_low_rank(z, r, DEFAULT_RANK_TOL)?;
    let best = (z - &p).norm();
    let svd = orient_svd(z, DEFAULT_RANK_TOL)?;
    let ur = svd.u.columns(0, r).into_owned();
    let vr = svd.v.columns(0, r).into_owned();
    let sr = Mat::from_diagonal(&svd.sigma.rows(0, r).into_owned());
    let mut worst = f64::NEG_INFINITY;
    for k in 0..samples {
        let y = if k % 2 == 0 {
            gaussian_matrix(rng, m, r) * gaussian_matrix(rng, r, n)
        } else {
            let eps = 10f64.powf(rng.random_range(-6.0..-1.0));
            (&ur + gaussian_matrix(rng, m, r) * eps) * &sr * (&vr + gaussian_matrix(rng, n, r) * eps).transpose()
        };
        worst = worst.max(best - (z - y).norm());
    }
    Ok(worst)
}

/// Largest normalized inner product `<W, H> / (||W|| ||H||)` between
/// a Frechet normal `W` and `samples` Bouligand tangent directions at a
/// random point of rank `s <= r`. Also returns whether every sample passed
/// the membership predicates it was built to satisfy.
pub fn polarity_margin(rng: &mut impl Rng, samples: usize) -> Result<(f64, bool)> {
    let m = rng.random_range(2..=5);
    let n = rng.random_range(2..=5);
    let k = m.min(n);
    let r = rng.random_range(1..k);
    let s = rng.random_range(0..=r);
    let x = random_rank(rng, m, n, s);
    let svd = orient_svd(&x, DEFAULT_RANK_TOL)?;
    let q = ConeQuery::new(&svd, r, 1e-8)?;
    let w = if s == r {
        project_normal_fixed_rank(&svd, &gaussian_matrix(rng, m, n))?
    } else {
        Mat::zeros(m, n)
    };
    let mut consistent = q.in_normal_frechet(&w)? && q.in_normal_mordukhovich(&w)?;
    let (up, vp) = (svd.u_perp(), svd.v_perp());
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let g = gaussian_matrix(rng, m, n);
        let tangent = &g - project_normal_fixed_rank(&svd, &g)?;
        let normal = &up * gaussian_matrix(rng, m - s, r - s) * gaussian_matrix(rng, r - s, n - s) * vp.transpose();
        let h = tangent + normal;
        consistent &= q.in_tangent_bouligand(&h)?;
        let denom = w.norm() * h.norm();
        if denom > 0.0 {
            worst = worst.max(w.dot(&h) / denom);
        } else {
            worst = worst.max(0.0);
        }
    }
    Ok((worst, consistent))
}

/// Outcome of a named oracle suite.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: usize,
    pub violations: Vec<String>,
}

impl SuiteReport {
    fn new(suite: &str) -> Self {
        Self { suite: suite.to_string(), checks: 0, violations: Vec::new() }
    }

    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.violations.push(msg());
        }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

pub const SUITES: [&str; 4] = ["fd", "projection", "hankel-rank1", "diag-embed"];

/// Runs one of [`SUITES`] with a deterministic seed.
pub fn run_suite(name: &str, seed: u64) -> Result<SuiteReport> {
    let mut rng = rng_from_seed(seed);
    let mut rep = SuiteReport::new(name);
    match name {
        "fd" => {
            for i in 0..100 {
                let obj = random_objective(&mut rng);
                let c = fd_check_objective(&mut rng, &obj, FD_STEP);
                rep.check(c.gradient_rel_err <= 1e-5 && c.hessian_rel_err <= 1e-5, || {
                    format!("instance {i} ({}): {c:?}", obj.kind.name())
                });
            }
        }
        "projection" => {
            for i in 0..200 {
                let m = rng.random_range(1..=6);
                let n = rng.random_range(1..=6);
                let r = rng.random_range(0..=m.min(n));
                let z = gaussian_matrix(&mut rng, m, n);
                let c = projection_cross_check(&z, r)?;
                rep.check(c.discrepancy <= 1e-8 * z.norm().max(1.0), || {
                    format!("instance {i}: {m}x{n} r={r} discrepancy {:.3e}", c.discrepancy)
                });
                let margin = eckart_young_margin(&mut rng, &z, r, 50)?;
                rep.check(margin <= 1e-9, || format!("instance {i}: Eckart-Young excess {margin:.3e}"));
            }
        }
        "hankel-rank1" => {
            let h = Mat::from_row_slice(3, 3, &[112.0, 7.5, 0.0, 7.5, 0.0, 0.0, 0.0, 0.0, 1e-6]);
            let res = rank1_hankel_min(&h, 10_000, 100);
            let fbar = 0.5e-12;
            rep.check(fbar < res.value, || format!("f(Xbar) {fbar:e} not below {}", res.value));
            rep.check((res.lines_value - (56.25 + 0.5e-12)).abs() < 1e-9, || {
                format!("line-family minimum {} differs from 56.25", res.lines_value)
            });
            let ones = Mat::from_element(3, 3, 1.0);
            let r1 = rank1_hankel_min(&ones, 10_000, 100);
            rep.check(r1.value < 1e-12, || format!("ones target leaves {}", r1.value));
            let e3 = crate::linalg::unit(3, 3, 2, 2);
            let r3 = rank1_hankel_min(&e3, 10_000, 100);
            rep.check(r3.value < 1e-12, || format!("e3 target leaves {}", r3.value));
        }
        "diag-embed" => {
            for i in 0..100 {
                let inst = random_sparse_instance(&mut rng);
                let d = diag_embedding_equivalence(&inst)?;
                rep.check(d.equivalent(), || format!("instance {i}: {d:?}"));
            }
        }
        other => {
            return Err(crate::Error::InvalidInput(format!(
                "unknown oracle suite '{other}' (expected one of {})",
                SUITES.join(", ")
            )))
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::unit;

    #[test]
    fn fd_matches_frobenius_gradient() {
        let h = Mat::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let obj = ObjectiveModel::frobenius_distance(h.clone());
        let x = Mat::identity(2, 2);
        let g = fd_gradient(|z| obj.value(z), &x, FD_STEP);
        assert!((g - (&x - &h)).norm() < 1e-6);
    }

    #[test]
    fn linear_objective_has_zero_curvature() {
        let obj = ObjectiveModel::linear_trace(Mat::from_element(2, 3, 0.7));
        let x = Mat::from_element(2, 3, 1.3);
        assert!(fd_quad(|z| obj.value(z), &x, &Mat::from_element(2, 3, 1.0), FD_STEP).abs() < 1e-6);
    }

    #[test]
    fn projection_routes_agree_on_diagonal() {
        let c = projection_cross_check(&diag(3, 3, &[3.0, 2.0, 1.0]), 2).unwrap();
        assert!(!c.tie);
        assert!(c.discrepancy < 1e-12);
        let c = projection_cross_check(&Mat::identity(3, 3), 2).unwrap();
        assert!(c.tie);
        assert!(c.discrepancy < 1e-12);
    }

    #[test]
    fn rank1_hankel_trivial_targets() {
        let r = rank1_hankel_min(&Mat::from_element(3, 3, 1.0), 10_000, 60);
        assert!(r.value < 1e-12);
        let r = rank1_hankel_min(&unit(3, 3, 2, 2), 10_000, 60);
        assert!(r.value < 1e-12);
        assert_eq!(r.family, Rank1Family::E3Line);
    }

    #[test]
    fn diag_embedding_trivial_and_off_pattern() {
        let x = Vector::from_vec(vec![1.0, 0.0, 0.0]);
        let d = diag_embedding_equivalence(&SparseInstance { a: vec![], x: x.clone(), r: 1 }).unwrap();
        assert!(d.equivalent() && d.assumption1);
        let off = Vector::from_vec(vec![0.0, 1.0, 1.0]);
        let d = diag_embedding_equivalence(&SparseInstance { a: vec![off], x, r: 1 }).unwrap();
        assert!(d.equivalent());
        assert!(!d.assumption1 && !d.assumption2 && !d.vector_condition);
    }

    #[test]
    fn named_suites_pass() {
        for name in SUITES {
            let rep = run_suite(name, 7).unwrap();
            assert!(rep.passed(), "{name}: {:?}", rep.violations);
            assert!(rep.checks > 0);
        }
    }

    #[test]
    fn unknown_suite_is_rejected() {
        assert!(run_suite("nope", 0).is_err());
    }
}
