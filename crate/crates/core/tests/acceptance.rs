//! Acceptance criteria. Each test prints one PASS/FAIL line per criterion,
//! followed by the individual checks, then asserts.

use rand::Rng;
use rankmoa::analysis::{analyze, AnalysisOptions};
use rankmoa::cones::{project_normal_fixed_rank, ConeQuery};
use rankmoa::linalg::{orient_svd, project_low_rank, Mat, Vector, DEFAULT_RANK_TOL};
use rankmoa::oracle::{
    diag_embedding_equivalence, eckart_young_margin, fd_check_objective, gaussian_matrix,
    polarity_margin, random_certified_instance, random_objective, random_sparse_instance,
    rank1_hankel_min, rng_from_seed, PlantedKind, FD_STEP,
};
use rankmoa::problems::{builtin, build_example_laf, build_example_tr, hankel_3x3, lrr_identity};
use rankmoa::qualification::{
    assumption1_holds, assumption2_holds, bq_certificates, build_r, build_t,
    frechet_normal_of_feasible_set,
};
use rankmoa::second_order::{check_second_order, CurvatureSign, SecondOrderOptions};
use rankmoa::solver::{solve, SolverConfig};
use rankmoa::stationarity::{
    beta_bound, check_alpha_stationary, check_f_stationary, check_m_stationary,
    classify_first_order, Conclusion,
};

// Tolerances pinned by the acceptance criteria.
const STATIONARY_TOL: f64 = 1e-8;
const SINGULAR_VALUE_TOL: f64 = 1e-9;
const ZERO_BLOCK_TOL: f64 = 1e-10;
const LAF_MIN_RESIDUAL: f64 = 0.9;
const MULTIPLIER_TOL: f64 = 1e-8;
const LRR_GRAD_TOL: f64 = 1e-10;
const POLARITY_TOL: f64 = 1e-8;
const FD_REL_TOL: f64 = 1e-5;
const DECOMPOSITION_TOL: f64 = 1e-8;
const SOLVER_DIST_TOL: f64 = 1e-6;
const SOLVER_MAX_ITERS: usize = 10_000;

struct Criterion {
    label: &'static str,
    checks: Vec<(String, bool)>,
}

impl Criterion {
    fn new(label: &'static str) -> Self {
        Self { label, checks: Vec::new() }
    }

    fn check(&mut self, what: impl Into<String>, ok: bool) {
        self.checks.push((what.into(), ok));
    }

    fn finish(self) {
        let failed: Vec<&str> =
            self.checks.iter().filter(|(_, ok)| !ok).map(|(w, _)| w.as_str()).collect();
        let status = if failed.is_empty() { "PASS" } else { "FAIL" };
        println!("{status} {}", self.label);
        for (what, ok) in &self.checks {
            println!("    [{}] {what}", if *ok { "ok" } else { "FAILED" });
        }
        assert!(failed.is_empty(), "{}: failed checks {failed:?}", self.label);
    }
}

/// Compressions in the eigenvector basis `(-a e1 - b e2, b e1 - a e2, e3)`
/// used for both sides. That basis is not an SVD (the second eigenvalue is
/// -1/2), so a valid SVD matches it only up to column signs.
fn hankel_reference_t() -> Vec<Mat> {
    let a = (112.5f64 / 113.0).sqrt();
    let b = (0.5f64 / 113.0).sqrt();
    vec![
        Mat::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
        Mat::from_row_slice(3, 3, &[b * b, a * b, a, a * b, a * a, -b, 0.0, 0.0, 0.0]),
        Mat::from_row_slice(3, 3, &[-b * b, -a * b, 0.0, -a * b, -a * a, 0.0, -a, b, 0.0]),
        Mat::from_row_slice(3, 3, &[0.0, 0.0, b, 0.0, 0.0, a, -b, -a, 0.0]),
    ]
}

/// Largest entrywise gap between `computed` and `D_U reference D_V`,
/// minimized over the sign diagonals.
fn t_gap_up_to_signs(computed: &[Mat], reference: &[Mat]) -> f64 {
    let signs = |mask: usize| Mat::from_fn(3, 3, |i, j| if i != j { 0.0 } else if mask >> i & 1 == 1 { -1.0 } else { 1.0 });
    let mut best = f64::INFINITY;
    for du in 0..8 {
        for dv in 0..8 {
            let gap = computed
                .iter()
                .zip(reference)
                .map(|(c, r)| (c - signs(du) * r * signs(dv)).amax())
                .fold(0.0, f64::max);
            best = best.min(gap);
        }
    }
    best
}

#[test]
fn criterion_1_hankel() {
    let mut c = Criterion::new("criterion 1: 3x3 Hankel instance");
    let file = hankel_3x3(2).unwrap();
    let prob = &file.problem;
    let xbar = file.point("Xbar").unwrap();
    let rep = analyze(prob, xbar, &AnalysisOptions::default()).unwrap();
    let st = &rep.stationarity;
    let y_norm = st.y.iter().map(|v| v * v).sum::<f64>().sqrt();
    c.check(format!("Xbar F-stationary (residual {:.2e})", st.f_residual), st.is_f && st.f_residual <= STATIONARY_TOL);
    c.check(format!("Xbar multiplier is zero (|y| = {y_norm:.2e})"), y_norm <= STATIONARY_TOL);
    let sv = &rep.singular_values;
    c.check(
        format!("singular values {:?}", sv),
        sv.len() == 3
            && (sv[0] - 112.5).abs() <= SINGULAR_VALUE_TOL
            && (sv[1] - 0.5).abs() <= SINGULAR_VALUE_TOL
            && sv[2].abs() <= SINGULAR_VALUE_TOL,
    );
    let qual = st.qualification.as_ref().unwrap();
    c.check(format!("T-independence holds with t_rank {}", qual.t_rank), qual.assumption1 && qual.t_rank == 4);

    let svd = orient_svd(xbar, DEFAULT_RANK_TOL).unwrap();
    let t = build_t(&svd, &prob.affine).unwrap();
    let gap = t_gap_up_to_signs(&t, &hankel_reference_t());
    c.check(format!("T matrices match the reference up to column signs (gap {gap:.2e})"), gap <= 1e-9);

    let so = rep.second_order.as_ref().unwrap();
    c.check(
        format!("second-order sufficient on the fixed-rank manifold (min_eig {:?})", so.min_eig),
        so.sufficient_ok && so.min_eig.is_some_and(|e| e > 0.0),
    );

    let fbar = prob.objective.value(xbar);
    let h = file.point("H").unwrap();
    let rank1 = rank1_hankel_min(h, 10_000, 100);
    c.check(format!("f(Xbar) = {fbar:.3e} equals 5e-13"), (fbar - 0.5e-12).abs() <= 1e-20);
    c.check(
        format!("f(Xbar) below the rank-one Hankel minimum {:.6} (family {:?})", rank1.value, rank1.family),
        fbar < rank1.value,
    );
    c.check(
        format!("rank-one minimum over the three lines is 56.25 ({:.9})", rank1.lines_value),
        (rank1.lines_value - 56.25).abs() <= 1e-9,
    );

    let r1 = hankel_3x3(1).unwrap();
    let xt = r1.point("Xtilde").unwrap();
    let svd_t = orient_svd(xt, DEFAULT_RANK_TOL).unwrap();
    let a1 = assumption1_holds(&svd_t, &r1.problem.affine).unwrap();
    let tt = build_t(&svd_t, &r1.problem.affine).unwrap();
    let t4 = tt[3].norm();
    c.check(format!("Xtilde: T-independence fails (rank {})", a1.rank), !a1.holds);
    c.check(format!("Xtilde: ||T^4|| = {t4:.2e}"), t4 <= ZERO_BLOCK_TOL);
    let ft = check_f_stationary(&r1.problem, xt).unwrap();
    c.check(format!("Xtilde not F-stationary for r = 1 (residual {:.3e})", ft.residual), !ft.is_f);
    c.finish();
}

#[test]
fn criterion_1_curvature_sign_insensitivity() {
    let mut c = Criterion::new("criterion 1 (curvature sign): Hankel verdict under both signs");
    let file = hankel_3x3(2).unwrap();
    let xbar = file.point("Xbar").unwrap();
    let y = Vector::zeros(file.problem.affine.len());
    for sign in [CurvatureSign::Minus, CurvatureSign::Plus] {
        let opts = SecondOrderOptions { sign, ..Default::default() };
        let rep = check_second_order(&file.problem, xbar, &y, &opts).unwrap();
        c.check(format!("{sign:?}: sufficient_ok (min_eig {:?})", rep.min_eig), rep.sufficient_ok);
    }
    c.finish();
}

#[test]
fn criterion_2_laf() {
    let mut c = Criterion::new("criterion 2: diagonal instance with linear objective");
    let file = build_example_laf().unwrap();
    let prob = &file.problem;
    let xbar = file.point("Xbar").unwrap();
    let feas = prob.affine.feasibility_residual(xbar).unwrap();
    c.check(format!("Xbar feasible (residual {feas:.1e})"), feas <= STATIONARY_TOL);
    let f = check_f_stationary(prob, xbar).unwrap();
    c.check("Xbar not F-stationary", !f.is_f);
    c.check(
        format!("least-squares residual {:.6} >= {LAF_MIN_RESIDUAL}", f.residual),
        f.residual >= LAF_MIN_RESIDUAL,
    );
    let svd = orient_svd(xbar, DEFAULT_RANK_TOL).unwrap();
    let a2 = assumption2_holds(&svd, &prob.affine).unwrap();
    let r1 = build_r(&svd, &prob.affine).unwrap()[0].norm();
    c.check("R-independence fails", !a2.holds);
    c.check(format!("||R^1|| = {r1:.2e}"), r1 <= ZERO_BLOCK_TOL);
    c.finish();
}

#[test]
fn criterion_3_trace() {
    let mut c = Criterion::new("criterion 3: 4x4 trace instance");
    let file = build_example_tr().unwrap();
    let prob = &file.problem;
    let minus_one = Vector::from_element(1, -1.0);
    for label in ["X1", "X2", "X3"] {
        let x = file.point(label).unwrap();
        let m = check_m_stationary(prob, x, Some(&minus_one)).unwrap();
        let f = check_f_stationary(prob, x).unwrap();
        c.check(format!("{label}: M-stationary at y = -1"), m.is_m);
        c.check(format!("{label}: not F-stationary (residual {:.3e})", f.residual), !f.is_f);
    }
    let x4 = file.point("X4").unwrap();
    let f4 = check_f_stationary(prob, x4).unwrap();
    c.check("X4 F-stationary", f4.is_f);
    c.check(format!("X4 multiplier {:?}", f4.y), (f4.y[0] + 2.0 / 3.0).abs() <= MULTIPLIER_TOL);
    let y = Vector::from_element(1, -2.0 / 3.0);
    let beta = beta_bound(prob, x4, &y).unwrap();
    c.check(format!("beta = {beta}"), (beta.0 - 2.0).abs() <= MULTIPLIER_TOL);
    for alpha in [0.5, 1.0, 1.9] {
        c.check(format!("alpha-stationary at alpha = {alpha}"), check_alpha_stationary(prob, x4, &y, alpha).unwrap());
    }
    for alpha in [2.1, 3.0] {
        c.check(format!("not alpha-stationary at alpha = {alpha}"), !check_alpha_stationary(prob, x4, &y, alpha).unwrap());
    }
    let rep = classify_first_order(prob, x4, Some(1.0)).unwrap();
    c.check(
        format!("classified as {}", Conclusion::UniqueGlobalMinimizer.describe()),
        prob.objective.strong_convexity == Some(1.0) && rep.classification.contains(&Conclusion::UniqueGlobalMinimizer),
    );
    let f4v = prob.objective.value(x4);
    let others = ["X1", "X2", "X3"].map(|l| prob.objective.value(file.point(l).unwrap()));
    c.check(format!("f(X4) = {f4v:.6} below {others:?}"), others.iter().all(|&v| f4v < v));
    c.finish();
}

#[test]
fn criterion_4_low_rank_representation() {
    let mut c = Criterion::new("criterion 4: low-rank representation with identity blocks");
    for n in [3usize, 5] {
        let file = lrr_identity(n).unwrap();
        let prob = &file.problem;
        let w = file.point("Wbar").unwrap();
        let rep = analyze(prob, w, &AnalysisOptions::default()).unwrap();
        let st = &rep.stationarity;
        let grad = st.grad_lagrangian.norm();
        c.check(format!("N = {n}: F-stationary with ||grad L|| = {grad:.2e}"), st.is_f && grad <= LRR_GRAD_TOL);
        let y_gap = st.y.iter().map(|v| (v + 1.0 / n as f64).abs()).fold(0.0, f64::max);
        c.check(format!("N = {n}: multiplier -e/N (gap {y_gap:.2e})"), st.y.len() == n && y_gap <= LRR_GRAD_TOL);
        let qual = st.qualification.as_ref().unwrap();
        c.check(format!("N = {n}: R-independence holds"), qual.assumption2);
        let so = rep.second_order.as_ref().unwrap();
        c.check(format!("N = {n}: second-order sufficient on ker A (min_eig {:?})", so.min_eig), so.sufficient_ok);
        c.check(
            format!("N = {n}: classified as {}", Conclusion::GlobalMinimizer.describe()),
            st.classification.contains(&Conclusion::GlobalMinimizer),
        );
    }
    c.finish();
}

#[test]
fn criterion_5_property_suites() {
    let mut c = Criterion::new("criterion 5: property suites");
    let mut rng = rng_from_seed(5);

    let mut worst_ey = f64::NEG_INFINITY;
    for _ in 0..200 {
        let m = rng.random_range(1..=6);
        let n = rng.random_range(1..=6);
        let r = rng.random_range(0..=m.min(n));
        let z = gaussian_matrix(&mut rng, m, n);
        let margin = eckart_young_margin(&mut rng, &z, r, 100).unwrap() / z.norm().max(1.0);
        worst_ey = worst_ey.max(margin);
    }
    c.check(format!("Eckart-Young on 200 instances (worst relative excess {worst_ey:.2e})"), worst_ey <= 1e-12);

    let mut worst_pol = f64::NEG_INFINITY;
    let mut consistent = true;
    for _ in 0..100 {
        let (w, ok) = polarity_margin(&mut rng, 500).unwrap();
        worst_pol = worst_pol.max(w);
        consistent &= ok;
    }
    c.check(format!("polarity on 100 instances (worst normalized inner product {worst_pol:.2e})"), worst_pol <= POLARITY_TOL);
    c.check("sampled normals and tangents pass their own membership tests", consistent);

    let mut chain_violations = 0;
    let mut planted_mismatch = 0;
    for k in 0..200 {
        let inst = random_certified_instance(&mut rng, k % 2 == 0).unwrap();
        let prob = &inst.problem;
        let f = check_f_stationary(prob, &inst.x).unwrap();
        let m = check_m_stationary(prob, &inst.x, None).unwrap();
        for alpha in [0.5, 1.0, 2.0] {
            let a = check_alpha_stationary(prob, &inst.x, &f.multiplier(), alpha).unwrap();
            if (a && !f.is_f) || (f.is_f && !m.is_m) {
                chain_violations += 1;
            }
        }
        let expected = match inst.kind {
            PlantedKind::Frechet => f.is_f,
            PlantedKind::Mordukhovich => m.is_m,
            PlantedKind::Generic => true,
        };
        planted_mismatch += usize::from(!expected);
    }
    c.check(format!("alpha => F => M on 200 certified points ({chain_violations} violations)"), chain_violations == 0);
    c.check(format!("planted stationarity recovered ({planted_mismatch} misses)"), planted_mismatch == 0);

    let mut worst_fd = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let obj = random_objective(&mut rng);
        let e = fd_check_objective(&mut rng, &obj, FD_STEP);
        worst_fd = (worst_fd.0.max(e.gradient_rel_err), worst_fd.1.max(e.hessian_rel_err));
    }
    c.check(
        format!("finite differences on 100 objectives (gradient {:.2e}, Hessian {:.2e})", worst_fd.0, worst_fd.1),
        worst_fd.0 <= FD_REL_TOL && worst_fd.1 <= FD_REL_TOL,
    );

    let mismatches = (0..100)
        .filter(|_| !diag_embedding_equivalence(&random_sparse_instance(&mut rng)).unwrap().equivalent())
        .count();
    c.check(format!("diagonal embedding equivalence on 100 sparse instances ({mismatches} mismatches)"), mismatches == 0);
    c.finish();
}

#[test]
fn criterion_6_intersection_rule() {
    let mut c = Criterion::new("criterion 6: intersection rule on certified instances");
    let mut rng = rng_from_seed(6);
    let (mut rejected_members, mut bad_decompositions, mut accepted_generic, mut tested) = (0, 0, 0, 0);
    for k in 0..50 {
        let inst = random_certified_instance(&mut rng, k % 2 == 0).unwrap();
        let prob = &inst.problem;
        let (m, n) = prob.shape();
        let svd = orient_svd(&inst.x, prob.rank_tol).unwrap();
        let full = svd.rank() == prob.r();
        let cone = ConeQuery::new(&svd, prob.r(), 1e-8).unwrap();
        assert!(bq_certificates(&svd, &prob.affine, prob.r()).unwrap().intersection_rule_case
            != rankmoa::qualification::IntersectionRuleCase::NotCertified);
        for j in 0..20 {
            let y = Vector::from_fn(prob.affine.len(), |_, _| rng.random::<f64>() * 4.0 - 2.0);
            let normal = if full {
                project_normal_fixed_rank(&svd, &gaussian_matrix(&mut rng, m, n)).unwrap()
            } else {
                Mat::zeros(m, n)
            };
            let member = prob.affine.adjoint(&y).unwrap() + normal;
            // half the probes are generic matrices, most of which lie outside
            let w = if j % 2 == 0 { member } else { gaussian_matrix(&mut rng, m, n) };
            let fit = frechet_normal_of_feasible_set(&svd, &prob.affine, prob.r(), &w, 1e-8).unwrap();
            tested += 1;
            if j % 2 == 0 && !fit.member {
                rejected_members += 1;
            }
            if j % 2 == 1 && fit.member {
                accepted_generic += 1;
            }
            if fit.member {
                let rest = &w - prob.affine.adjoint(&Vector::from_vec(fit.y.clone())).unwrap();
                let ok = fit.residual <= DECOMPOSITION_TOL && cone.in_normal_frechet(&rest).unwrap();
                bad_decompositions += usize::from(!ok);
            }
        }
    }
    c.check(format!("every sampled member accepted ({rejected_members} rejected of {})", tested / 2), rejected_members == 0);
    c.check(format!("every accepted W decomposes with residual <= {DECOMPOSITION_TOL:e} ({bad_decompositions} failures)"), bad_decompositions == 0);
    println!("    (generic probes accepted: {accepted_generic} of {})", tested / 2);
    c.finish();
}

#[test]
fn criterion_7_solver_reproduction() {
    let mut c = Criterion::new("criterion 7: solver reproduces the known minimizers (empirical)");
    let cfg = SolverConfig { max_iters: SOLVER_MAX_ITERS, ..Default::default() };

    let hankel = builtin("hankel33").unwrap();
    let h = hankel.point("H").unwrap();
    let (x0, _) = project_low_rank(h, 2, DEFAULT_RANK_TOL).unwrap();
    let out = solve(&hankel.problem, &x0, &cfg).unwrap();
    let dist = (&out.x - hankel.point("Xbar").unwrap()).norm();
    c.check(format!("Hankel: distance {dist:.2e} after {} iterations", out.iterations), dist <= SOLVER_DIST_TOL && out.iterations < SOLVER_MAX_ITERS);

    let tr = build_example_tr().unwrap();
    let out = solve(&tr.problem, tr.point("H").unwrap(), &cfg).unwrap();
    let dist = (&out.x - tr.point("X4").unwrap()).norm();
    c.check(format!("trace: distance {dist:.2e} after {} iterations", out.iterations), dist <= SOLVER_DIST_TOL && out.iterations < SOLVER_MAX_ITERS);
    c.finish();
}
