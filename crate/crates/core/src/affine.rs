//! The affine manifold `{X : <A^i, X> = b_i, i = 1..l}`.

use crate::error::{shape_err, Error, Result};
use crate::linalg::{
    lstsq_min_norm, null_space, span_rank, stack_rows, unvec_row_major, vec_row_major, Mat,
    Vector, DEFAULT_RANK_TOL,
};

/// Linear map `X -> (<A^1, X>, ..., <A^l, X>)` together with its right-hand side.
///
/// The constraint matrices may be linearly dependent; [`AffineMap::stack_rank`]
/// reports how many are independent.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    rows: usize,
    cols: usize,
    mats: Vec<Mat>,
    rhs: Vector,
}

/// Result of fitting a matrix by `sum_i y_i A^i`.
#[derive(Debug, Clone)]
pub struct NormalFit {
    pub member: bool,
    pub y: Option<Vector>,
    pub residual: f64,
}

impl AffineMap {
    pub fn new(rows: usize, cols: usize, mats: Vec<Mat>, rhs: Vector) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput("constraint matrices must be nonempty".into()));
        }
        if mats.len() != rhs.len() {
            return Err(Error::InvalidInput(format!(
                "{} constraint matrices but {} right-hand sides",
                mats.len(),
                rhs.len()
            )));
        }
        for a in &mats {
            if a.shape() != (rows, cols) {
                return Err(shape_err((rows, cols), a.shape()));
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("constraint matrix has non-finite entries".into()));
            }
        }
        Ok(Self { rows, cols, mats, rhs })
    }

    /// No constraints (`l = 0`).
    pub fn unconstrained(rows: usize, cols: usize) -> Self {
        Self { rows, cols, mats: Vec::new(), rhs: Vector::zeros(0) }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Number of constraints `l`.
    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    pub fn mats(&self) -> &[Mat] {
        &self.mats
    }

    pub fn rhs(&self) -> &Vector {
        &self.rhs
    }

    fn check(&self, x: &Mat) -> Result<()> {
        if x.shape() != (self.rows, self.cols) {
            return Err(shape_err((self.rows, self.cols), x.shape()));
        }
        Ok(())
    }

    /// `(<A^i, X>)_i`.
    pub fn apply(&self, x: &Mat) -> Result<Vector> {
        self.check(x)?;
        Ok(Vector::from_iterator(self.len(), self.mats.iter().map(|a| a.dot(x))))
    }

    /// `sum_i y_i A^i`.
    pub fn adjoint(&self, y: &Vector) -> Result<Mat> {
        if y.len() != self.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("multiplier of length {}", self.len()),
                found: format!("length {}", y.len()),
            });
        }
        let mut out = Mat::zeros(self.rows, self.cols);
        for (a, &yi) in self.mats.iter().zip(y.iter()) {
            out += a * yi;
        }
        Ok(out)
    }

    /// `||A(X) - b||_2`.
    pub fn feasibility_residual(&self, x: &Mat) -> Result<f64> {
        Ok((self.apply(x)? - &self.rhs).norm())
    }

    /// The `l x (mn)` matrix whose rows are the vectorized `A^i`.
    pub fn stack(&self) -> Mat {
        stack_rows(&self.mats, self.rows, self.cols)
    }

    pub fn stack_rank(&self) -> usize {
        span_rank(&self.mats, DEFAULT_RANK_TOL)
    }

    /// Frobenius-orthonormal basis of `ker A`.
    pub fn kernel_basis(&self) -> Vec<Mat> {
        let ns = null_space(&self.stack(), DEFAULT_RANK_TOL);
        ns.column_iter()
            .map(|c| unvec_row_major(c.as_slice(), self.rows, self.cols))
            .collect()
    }

    /// Orthogonal projector onto `ker A`, applied to `x`.
    pub fn project_kernel(&self, x: &Mat) -> Result<Mat> {
        self.check(x)?;
        if self.is_empty() {
            return Ok(x.clone());
        }
        let y = lstsq_min_norm(&self.stack().transpose(), &vec_row_major(x), DEFAULT_RANK_TOL);
        Ok(x - self.adjoint(&y)?)
    }

    /// Decides `W in range A*` by least squares; the member flag is set when
    /// the fit residual is at most `tol * max(1, ||W||_F)`.
    pub fn normal_space_member(&self, w: &Mat, tol: f64) -> Result<NormalFit> {
        self.check(w)?;
        let scale = w.norm().max(1.0);
        if self.is_empty() {
            let residual = w.norm();
            let member = residual <= tol * scale;
            return Ok(NormalFit { member, y: member.then(|| Vector::zeros(0)), residual });
        }
        let y = lstsq_min_norm(&self.stack().transpose(), &vec_row_major(w), DEFAULT_RANK_TOL);
        let residual = (w - self.adjoint(&y)?).norm();
        let member = residual <= tol * scale;
        Ok(NormalFit { member, y: member.then_some(y), residual })
    }
}
