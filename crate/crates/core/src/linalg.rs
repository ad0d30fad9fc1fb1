//! Dense-matrix primitives: full SVD with a tolerance-based rank, the
//! deterministic sign convention used by every cone formula, low-rank
//! projection and the Moore-Penrose inverse.
//!
//! Matrices are `nalgebra::DMatrix<f64>`. Vectorization is row-major
//! throughout the crate (see [`vec_row_major`]).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Default relative threshold for numerical rank: `sigma_i > 1e-8 * sigma_1`.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Upper bound on the rank of feasible points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RankBound(pub usize);

impl RankBound {
    pub fn get(self) -> usize {
        self.0
    }

    /// Checks `r < min(m, n)`.
    pub fn validate(self, rows: usize, cols: usize) -> Result<Self> {
        if self.0 >= rows.min(cols) {
            return Err(Error::RankOutOfRange { r: self.0, rows, cols });
        }
        Ok(self)
    }
}

/// Full singular value decomposition `X = U diag(sigma) V^T` with square
/// orthogonal factors and a numerical rank.
///
/// The leading `rank` columns of `u`/`v` span the column/row space of `X`
/// (the index set Gamma is always the prefix `0..rank` because `sigma` is
/// sorted nonincreasing); the remaining columns are orthonormal complements.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: Mat,
    pub v: Mat,
    pub sigma: Vector,
    rank: usize,
    rel_tol: f64,
    threshold: f64,
}

impl ThinSvd {
    pub fn rows(&self) -> usize {
        self.u.nrows()
    }

    pub fn cols(&self) -> usize {
        self.v.nrows()
    }

    /// Numerical rank `s = |Gamma|`.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Relative tolerance the rank was computed with.
    pub fn rel_tol(&self) -> f64 {
        self.rel_tol
    }

    /// Absolute singular-value cutoff, `rel_tol * sigma_1`.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Zero-based indices of Gamma.
    pub fn gamma(&self) -> std::ops::Range<usize> {
        0..self.rank
    }

    /// `i`-th largest singular value (1-based), zero past the end.
    pub fn sigma_at(&self, i: usize) -> f64 {
        if i == 0 || i > self.sigma.len() {
            0.0
        } else {
            self.sigma[i - 1]
        }
    }

    pub fn u_gamma(&self) -> Mat {
        self.u.columns(0, self.rank).into_owned()
    }

    pub fn v_gamma(&self) -> Mat {
        self.v.columns(0, self.rank).into_owned()
    }

    pub fn u_perp(&self) -> Mat {
        let m = self.rows();
        self.u.columns(self.rank, m - self.rank).into_owned()
    }

    pub fn v_perp(&self) -> Mat {
        let n = self.cols();
        self.v.columns(self.rank, n - self.rank).into_owned()
    }

    /// Columns of `V` selected by `idx` (zero-based).
    pub fn v_cols(&self, idx: &[usize]) -> Mat {
        self.v.select_columns(idx.iter())
    }

    /// Columns of `U` selected by `idx` (zero-based).
    pub fn u_cols(&self, idx: &[usize]) -> Mat {
        self.u.select_columns(idx.iter())
    }

    /// `U diag(sigma) V^T`.
    pub fn reconstruct(&self) -> Mat {
        let (m, n) = (self.rows(), self.cols());
        let mut s = Mat::zeros(m, n);
        for (i, &val) in self.sigma.iter().enumerate() {
            s[(i, i)] = val;
        }
        &self.u * s * self.v.transpose()
    }

    /// Flips the sign of singular pair `i` (column `i` of both `U` and `V`).
    /// The result is another valid SVD of the same matrix.
    pub fn flip_pair(&mut self, i: usize) {
        assert!(i < self.sigma.len(), "pair index out of range");
        self.u.column_mut(i).neg_mut();
        self.v.column_mut(i).neg_mut();
    }

    /// Applies the deterministic sign convention: in every column of `U` the
    /// entry of largest magnitude is nonnegative (ties go to the lowest row);
    /// paired `V` columns follow the `U` column. Complement columns of the
    /// larger factor are normalized on their own.
    pub fn oriented(mut self) -> Self {
        let k = self.sigma.len();
        for i in 0..k {
            if leading_entry_negative(&self.u, i) {
                self.u.column_mut(i).neg_mut();
                self.v.column_mut(i).neg_mut();
            }
        }
        for i in k..self.rows() {
            if leading_entry_negative(&self.u, i) {
                self.u.column_mut(i).neg_mut();
            }
        }
        for i in k..self.cols() {
            if leading_entry_negative(&self.v, i) {
                self.v.column_mut(i).neg_mut();
            }
        }
        self
    }
}

fn leading_entry_negative(m: &Mat, col: usize) -> bool {
    let c = m.column(col);
    let max = c.amax();
    if max == 0.0 {
        return false;
    }
    // near-ties within rounding go to the lowest row index
    let cutoff = max * (1.0 - 1e-12);
    let idx = c.iter().position(|x| x.abs() >= cutoff).unwrap_or(0);
    c[idx] < 0.0
}

fn check_finite(x: &Mat) -> Result<()> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::InvalidInput("empty matrix".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    Ok(())
}

/// Extends the orthonormal columns of `cols` to an orthonormal basis of
/// `R^dim`, filling with Gram-Schmidt on the standard basis.
fn complete_basis(cols: &Mat, dim: usize) -> Mat {
    let mut basis: Vec<Vector> = Vec::with_capacity(dim);
    let push = |cand: Vector, basis: &mut Vec<Vector>| {
        let mut v = cand;
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for b in basis.iter() {
                let p = b.dot(&v);
                v.axpy(-p, b, 1.0);
            }
        }
        let nrm = v.norm();
        if nrm > 1e-10 {
            basis.push(v / nrm);
        }
    };
    // degenerate input columns are dropped and refilled from the standard basis
    for j in 0..cols.ncols() {
        push(cols.column(j).into_owned(), &mut basis);
    }
    let mut e = 0;
    while basis.len() < dim && e < dim {
        let mut cand = Vector::zeros(dim);
        cand[e] = 1.0;
        push(cand, &mut basis);
        e += 1;
    }
    Mat::from_columns(&basis)
}

type Svd = nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>;

fn faer_svd(x: &Mat) -> Option<Svd> {
    let fx = faer::Mat::<f64>::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)]);
    let svd = fx.svd().ok()?;
    let k = x.nrows().min(x.ncols());
    let (u, v) = (svd.U(), svd.V());
    let s = svd.S().column_vector();
    Some(Svd {
        u: Some(Mat::from_fn(x.nrows(), k, |i, j| u[(i, j)])),
        v_t: Some(Mat::from_fn(k, x.ncols(), |i, j| v[(j, i)])),
        singular_values: Vector::from_fn(k, |i, _| s[i]),
    })
}

/// nalgebra's SVD occasionally returns factors that do not reconstruct an
/// exactly rank-deficient input. Its result is verified and, on failure,
/// replaced by faer's.
fn checked_svd(x: &Mat) -> Result<Svd> {
    let scale = x.norm();
    let accept = |svd: &Svd| {
        let err = (svd.clone().recompose().expect("U and V^T requested") - x).norm();
        err <= 1e-12 * scale
    };
    let direct = x.clone().svd(true, true);
    if accept(&direct) {
        return Ok(direct);
    }
    match faer_svd(x) {
        Some(svd) if accept(&svd) => Ok(svd),
        _ => Err(Error::InvalidInput("singular value decomposition did not reconstruct its input".into())),
    }
}

/// Full SVD of `x` with numerical rank `|{i : sigma_i > rel_tol * sigma_1}|`.
pub fn thin_svd(x: &Mat, rel_tol: f64) -> Result<ThinSvd> {
    check_finite(x)?;
    let (m, n) = x.shape();
    let k = m.min(n);
    let svd = checked_svd(x)?;
    let u_thin = svd.u.expect("U requested");
    let v_t = svd.v_t.expect("V^T requested");
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let sigma = Vector::from_iterator(k, order.iter().map(|&i| svd.singular_values[i].max(0.0)));
    let u_sorted = u_thin.select_columns(order.iter());
    let v_sorted = v_t.transpose().select_columns(order.iter());
    let u = complete_basis(&u_sorted, m);
    let v = complete_basis(&v_sorted, n);
    let threshold = if k > 0 { rel_tol * sigma[0] } else { 0.0 };
    let rank = sigma.iter().filter(|&&s| s > threshold).count();
    Ok(ThinSvd { u, v, sigma, rank, rel_tol, threshold })
}

/// [`thin_svd`] followed by the deterministic sign convention.
pub fn orient_svd(x: &Mat, rel_tol: f64) -> Result<ThinSvd> {
    Ok(thin_svd(x, rel_tol)?.oriented())
}

/// `V_Gamma diag(sigma_Gamma)^-1 U_Gamma^T`; the zero matrix when Gamma is empty.
pub fn pseudo_inverse(svd: &ThinSvd) -> Mat {
    let s = svd.rank();
    let mut out = Mat::zeros(svd.cols(), svd.rows());
    for i in 0..s {
        let vi = svd.v.column(i);
        let ui = svd.u.column(i);
        out += (vi * ui.transpose()) / svd.sigma[i];
    }
    out
}

/// Best rank-`r` approximation of `z` from the oriented SVD, plus a flag that
/// is set when the projection is not unique (`sigma_r` ties `sigma_{r+1}`).
pub fn project_low_rank(z: &Mat, r: usize, rel_tol: f64) -> Result<(Mat, bool)> {
    let (m, n) = z.shape();
    if r > m.min(n) {
        return Err(Error::RankOutOfRange { r, rows: m, cols: n });
    }
    let svd = orient_svd(z, rel_tol)?;
    let k = svd.sigma.len();
    if r == k {
        return Ok((z.clone(), false));
    }
    let mut out = Mat::zeros(m, n);
    for i in 0..r {
        out += svd.sigma[i] * svd.u.column(i) * svd.v.column(i).transpose();
    }
    let tie = r > 0 && {
        let sr = svd.sigma[r - 1];
        let next = svd.sigma[r];
        // a tie among zero singular values leaves the projection unique
        sr > svd.threshold() && sr <= next + svd.threshold()
    };
    Ok((out, tie))
}

/// Singular values (unsorted), from the verified decomposition.
pub fn singular_values(x: &Mat) -> Vector {
    match checked_svd(x) {
        Ok(svd) => svd.singular_values,
        Err(_) => x.singular_values(),
    }
}

/// Largest singular value.
pub fn spectral_norm(x: &Mat) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    singular_values(x).max()
}

/// Number of singular values above `rel_tol * sigma_1`.
pub fn rank_estimate(x: &Mat, rel_tol: f64) -> usize {
    rank_with_floor(x, rel_tol, 0.0)
}

/// Number of singular values above `max(rel_tol * sigma_1, floor)`.
///
/// The absolute floor keeps round-off sized matrices at rank zero, which a
/// purely relative cutoff cannot do.
pub fn rank_with_floor(x: &Mat, rel_tol: f64, floor: f64) -> usize {
    if x.is_empty() {
        return 0;
    }
    let sv = singular_values(x);
    let top = sv.max();
    let cut = (rel_tol * top).max(floor);
    sv.iter().filter(|&&s| s > cut).count()
}

/// Row-major vectorization.
pub fn vec_row_major(x: &Mat) -> Vector {
    let (m, n) = x.shape();
    Vector::from_iterator(m * n, (0..m).flat_map(|i| (0..n).map(move |j| x[(i, j)])))
}

/// Inverse of [`vec_row_major`].
pub fn unvec_row_major(v: &[f64], rows: usize, cols: usize) -> Mat {
    Mat::from_row_slice(rows, cols, v)
}

/// Nested row-major representation used in serialized documents.
pub fn to_rows(x: &Mat) -> Vec<Vec<f64>> {
    x.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Serializes a matrix as an array of rows.
pub fn serialize_rows<S: serde::Serializer>(x: &Mat, ser: S) -> std::result::Result<S::Ok, S::Error> {
    to_rows(x).serialize(ser)
}

/// Stacks `mats` as the rows of an `l x (mn)` matrix.
pub fn stack_rows(mats: &[Mat], rows: usize, cols: usize) -> Mat {
    let mut out = Mat::zeros(mats.len(), rows * cols);
    for (i, a) in mats.iter().enumerate() {
        out.row_mut(i).copy_from(&vec_row_major(a).transpose());
    }
    out
}

/// Rank of the span of `mats` using the relative tolerance on the stacked
/// matrix.
pub fn span_rank(mats: &[Mat], rel_tol: f64) -> usize {
    if mats.is_empty() {
        return 0;
    }
    let (m, n) = mats[0].shape();
    rank_estimate(&stack_rows(mats, m, n), rel_tol)
}

/// Orthonormal basis (as columns) of the null space of `a`.
pub fn null_space(a: &Mat, rel_tol: f64) -> Mat {
    let n = a.ncols();
    if a.nrows() == 0 || a.iter().all(|&v| v == 0.0) {
        return Mat::identity(n, n);
    }
    let svd = thin_svd(a, rel_tol).expect("finite matrix");
    let s = svd.rank();
    svd.v.columns(s, n - s).into_owned()
}

/// Minimum-norm least-squares solution of `a x = b`.
pub fn lstsq_min_norm(a: &Mat, b: &Vector, rel_tol: f64) -> Vector {
    if a.nrows() == 0 || a.ncols() == 0 || a.iter().all(|&v| v == 0.0) {
        return Vector::zeros(a.ncols());
    }
    let svd = thin_svd(a, rel_tol).expect("finite matrix");
    pseudo_inverse(&svd) * b
}

/// Extreme eigenvalues `(min, max)` of a symmetric matrix; `None` when empty.
pub fn extreme_eigenvalues(q: &Mat) -> Option<(f64, f64)> {
    if q.nrows() == 0 {
        return None;
    }
    let eig = SymmetricEigen::new(q.clone());
    Some((eig.eigenvalues.min(), eig.eigenvalues.max()))
}

/// `diag(d)` of the given shape.
pub fn diag(rows: usize, cols: usize, d: &[f64]) -> Mat {
    let mut out = Mat::zeros(rows, cols);
    for (i, &v) in d.iter().enumerate().take(rows.min(cols)) {
        out[(i, i)] = v;
    }
    out
}

/// `e_i e_j^T` (zero-based) of the given shape.
pub fn unit(rows: usize, cols: usize, i: usize, j: usize) -> Mat {
    let mut out = Mat::zeros(rows, cols);
    out[(i, j)] = 1.0;
    out
}
