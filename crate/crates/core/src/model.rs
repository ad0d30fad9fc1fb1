//! Objective functions and the full problem instance.

use std::fmt::Debug;
use std::sync::Arc;

use crate::affine::AffineMap;
use crate::cones::DEFAULT_TOL;
use crate::error::{shape_err, Error, Result};
use crate::linalg::{extreme_eigenvalues, Mat, RankBound, DEFAULT_RANK_TOL};

/// A twice continuously differentiable function on `R^{m x n}`.
pub trait SmoothObjective: Send + Sync + Debug {
    fn shape(&self) -> (usize, usize);
    fn value(&self, x: &Mat) -> f64;
    fn gradient(&self, x: &Mat) -> Mat;
    /// `grad^2 f(X)[Xi, Xi]`.
    fn hess_quad(&self, x: &Mat, xi: &Mat) -> f64;
}

/// The built-in objective families plus user-registered ones.
#[derive(Debug, Clone)]
pub enum ObjectiveKind {
    /// `1/2 ||X - H||_F^2`.
    FrobeniusDistance { target: Mat },
    /// `1/2 sum_i w_i B^i w_i^T` where `w_i` is row `i` of `W`.
    RowQuadratic { blocks: Vec<Mat> },
    /// `<C, X>`.
    LinearTrace { c: Mat },
    /// An objective supplied by the caller, identified by `id` in problem files.
    Custom { id: String, inner: Arc<dyn SmoothObjective> },
}

impl ObjectiveKind {
    pub fn name(&self) -> &str {
        match self {
            Self::FrobeniusDistance { .. } => "frobenius_distance",
            Self::RowQuadratic { .. } => "row_quadratic",
            Self::LinearTrace { .. } => "linear_trace",
            Self::Custom { .. } => "registered_custom",
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            Self::FrobeniusDistance { target } => target.shape(),
            Self::RowQuadratic { blocks } => (blocks.len(), blocks.len()),
            Self::LinearTrace { c } => c.shape(),
            Self::Custom { inner, .. } => inner.shape(),
        }
    }

    pub fn value(&self, x: &Mat) -> f64 {
        match self {
            Self::FrobeniusDistance { target } => 0.5 * (x - target).norm_squared(),
            Self::RowQuadratic { blocks } => {
                0.5 * blocks
                    .iter()
                    .enumerate()
                    .map(|(i, b)| {
                        let w = x.row(i);
                        (w * b * w.transpose())[(0, 0)]
                    })
                    .sum::<f64>()
            }
            Self::LinearTrace { c } => c.dot(x),
            Self::Custom { inner, .. } => inner.value(x),
        }
    }

    pub fn gradient(&self, x: &Mat) -> Mat {
        match self {
            Self::FrobeniusDistance { target } => x - target,
            Self::RowQuadratic { blocks } => {
                let mut g = Mat::zeros(x.nrows(), x.ncols());
                for (i, b) in blocks.iter().enumerate() {
                    let sym = (b + b.transpose()) * 0.5;
                    g.set_row(i, &(x.row(i) * sym));
                }
                g
            }
            Self::LinearTrace { c } => c.clone(),
            Self::Custom { inner, .. } => inner.gradient(x),
        }
    }

    pub fn hess_quad(&self, x: &Mat, xi: &Mat) -> f64 {
        match self {
            Self::FrobeniusDistance { .. } => xi.norm_squared(),
            Self::RowQuadratic { blocks } => blocks
                .iter()
                .enumerate()
                .map(|(i, b)| {
                    let v = xi.row(i);
                    (v * b * v.transpose())[(0, 0)]
                })
                .sum(),
            Self::LinearTrace { .. } => 0.0,
            Self::Custom { inner, .. } => inner.hess_quad(x, xi),
        }
    }
}

/// An objective together with the convexity metadata the optimality
/// conclusions rely on.
#[derive(Debug, Clone)]
pub struct ObjectiveModel {
    pub kind: ObjectiveKind,
    /// Strong convexity modulus `l_f`, if any.
    pub strong_convexity: Option<f64>,
    pub convex: bool,
}

impl ObjectiveModel {
    pub fn frobenius_distance(target: Mat) -> Self {
        Self {
            kind: ObjectiveKind::FrobeniusDistance { target },
            strong_convexity: Some(1.0),
            convex: true,
        }
    }

    /// Convex iff every symmetric part `(B^i + B^i^T)/2` is PSD; strongly
    /// convex with the smallest such eigenvalue when it is positive.
    pub fn row_quadratic(blocks: Vec<Mat>) -> Result<Self> {
        let n = blocks.len();
        let mut min_eig = f64::INFINITY;
        for b in &blocks {
            if b.shape() != (n, n) {
                return Err(shape_err((n, n), b.shape()));
            }
            let sym = (b + b.transpose()) * 0.5;
            if let Some((lo, _)) = extreme_eigenvalues(&sym) {
                min_eig = min_eig.min(lo);
            }
        }
        let scale = blocks.iter().map(|b| b.norm()).fold(1.0, f64::max);
        let convex = min_eig >= -DEFAULT_TOL * scale;
        let strong = (min_eig > DEFAULT_TOL * scale && min_eig.is_finite()).then_some(min_eig);
        Ok(Self { kind: ObjectiveKind::RowQuadratic { blocks }, strong_convexity: strong, convex })
    }

    pub fn linear_trace(c: Mat) -> Self {
        Self { kind: ObjectiveKind::LinearTrace { c }, strong_convexity: None, convex: true }
    }

    /// A caller-supplied objective; convexity metadata is taken on trust.
    pub fn custom(
        id: impl Into<String>,
        inner: Arc<dyn SmoothObjective>,
        convex: bool,
        strong_convexity: Option<f64>,
    ) -> Self {
        Self { kind: ObjectiveKind::Custom { id: id.into(), inner }, strong_convexity, convex }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.kind.shape()
    }

    pub fn value(&self, x: &Mat) -> f64 {
        self.kind.value(x)
    }

    pub fn gradient(&self, x: &Mat) -> Mat {
        self.kind.gradient(x)
    }

    pub fn hess_quad(&self, x: &Mat, xi: &Mat) -> f64 {
        self.kind.hess_quad(x, xi)
    }
}

/// A complete instance: minimize `f(X)` subject to `A(X) = b`, `rank(X) <= r`.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub objective: ObjectiveModel,
    pub affine: AffineMap,
    pub rank_bound: RankBound,
    /// Relative threshold for numerical rank.
    pub rank_tol: f64,
    /// Membership and stationarity tolerance.
    pub tol: f64,
}

impl ProblemSpec {
    /// Validates dimensions and `r < min(m, n)`; uses the default tolerances.
    pub fn new(objective: ObjectiveModel, affine: AffineMap, r: usize) -> Result<Self> {
        let (m, n) = affine.shape();
        if objective.shape() != (m, n) {
            return Err(shape_err((m, n), objective.shape()));
        }
        let rank_bound = RankBound(r).validate(m, n)?;
        Ok(Self { objective, affine, rank_bound, rank_tol: DEFAULT_RANK_TOL, tol: DEFAULT_TOL })
    }

    pub fn with_tolerances(mut self, rank_tol: f64, tol: f64) -> Result<Self> {
        for (name, v) in [("rank_tol", rank_tol), ("tol", tol)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        self.rank_tol = rank_tol;
        self.tol = tol;
        Ok(self)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.affine.shape()
    }

    pub fn r(&self) -> usize {
        self.rank_bound.get()
    }

    pub(crate) fn check_point(&self, x: &Mat) -> Result<()> {
        if x.shape() != self.shape() {
            return Err(shape_err(self.shape(), x.shape()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("point has non-finite entries".into()));
        }
        Ok(())
    }
}
