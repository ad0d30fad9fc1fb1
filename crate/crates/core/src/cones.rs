//! Tangent/normal cone projections and membership predicates for the
//! fixed-rank manifold `M^s`, the low-rank set `M(r)` and the subspace
//! union `M_X(r) = U_J M_X(J)`.
//!
//! Cones are never materialized. Every predicate is tolerance-relative:
//! a matrix "vanishes" when its Frobenius norm is at most
//! `tol * max(1, ||W||_F)`, and rank decisions use the SVD's relative rank
//! tolerance with an absolute floor of the same size.

use crate::error::{shape_err, Error, Result};
use crate::linalg::{rank_with_floor, Mat, ThinSvd};

/// Default membership tolerance.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Default cap on the number of index sets produced by [`enumerate_j`].
pub const DEFAULT_J_CAP: usize = 1_000_000;

fn check_shape(svd: &ThinSvd, z: &Mat) -> Result<()> {
    let shape = (svd.rows(), svd.cols());
    if z.shape() != shape {
        return Err(shape_err(shape, z.shape()));
    }
    Ok(())
}

/// `P_U Z + Z P_V - P_U Z P_V`, the projection onto the tangent space of the
/// rank-`s` manifold at the point whose SVD is `svd`.
pub fn project_tangent_fixed_rank(svd: &ThinSvd, z: &Mat) -> Result<Mat> {
    Ok(z - project_normal_fixed_rank(svd, z)?)
}

/// `P_U^perp Z P_V^perp`.
pub fn project_normal_fixed_rank(svd: &ThinSvd, z: &Mat) -> Result<Mat> {
    check_shape(svd, z)?;
    let up = svd.u_perp();
    let vp = svd.v_perp();
    Ok(&up * (up.transpose() * z * &vp) * vp.transpose())
}

fn vanishes(residual: f64, w: &Mat, tol: f64) -> bool {
    residual <= tol * w.norm().max(1.0)
}

/// Base point data for the cone predicates on `M(r)`.
#[derive(Debug, Clone, Copy)]
pub struct ConeQuery<'a> {
    pub svd: &'a ThinSvd,
    pub r: usize,
    pub tol: f64,
}

impl<'a> ConeQuery<'a> {
    pub fn new(svd: &'a ThinSvd, r: usize, tol: f64) -> Result<Self> {
        if svd.rank() > r {
            return Err(Error::InvalidInput(format!(
                "base point has rank {} above the bound {r}",
                svd.rank()
            )));
        }
        Ok(Self { svd, r, tol })
    }

    pub fn s(&self) -> usize {
        self.svd.rank()
    }

    fn rank_of(&self, w: &Mat) -> usize {
        rank_with_floor(w, self.svd.rel_tol(), self.tol * w.norm().max(1.0))
    }

    /// Bouligand tangent cone of `M(r)`: the normal part of `H` has rank at most `r - s`.
    pub fn in_tangent_bouligand(&self, h: &Mat) -> Result<bool> {
        let normal = project_normal_fixed_rank(self.svd, h)?;
        let floor = self.tol * h.norm().max(1.0);
        Ok(rank_with_floor(&normal, self.svd.rel_tol(), floor) <= self.r - self.s())
    }

    /// Frechet normal cone of `M(r)`: the normal space of `M^s` when `s = r`,
    /// `{O}` when `s < r`.
    pub fn in_normal_frechet(&self, w: &Mat) -> Result<bool> {
        check_shape(self.svd, w)?;
        if self.s() == self.r {
            let t = project_tangent_fixed_rank(self.svd, w)?;
            Ok(vanishes(t.norm(), w, self.tol))
        } else {
            Ok(w.norm() <= self.tol)
        }
    }

    /// Mordukhovich normal cone of `M(r)`: normal to `M^s` with rank at most
    /// `min(m, n) - r`.
    pub fn in_normal_mordukhovich(&self, w: &Mat) -> Result<bool> {
        let t = project_tangent_fixed_rank(self.svd, w)?;
        if !vanishes(t.norm(), w, self.tol) {
            return Ok(false);
        }
        let k = self.svd.rows().min(self.svd.cols());
        Ok(self.rank_of(w) <= k - self.r)
    }

    /// Frechet normal cone of the subspace union `M_X(r)`.
    pub fn in_normal_frechet_subspace_union(&self, w: &Mat) -> Result<bool> {
        check_shape(self.svd, w)?;
        if self.s() == self.r {
            let gamma: Vec<usize> = self.svd.gamma().collect();
            Ok(vanishes(compressed(self.svd, &gamma, w).norm(), w, self.tol))
        } else {
            Ok(w.norm() <= self.tol)
        }
    }
}

/// An index set `J` with `|J| = r` containing Gamma (zero-based, sorted).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IndexSetJ(Vec<usize>);

impl IndexSetJ {
    /// Validates `Gamma = {0..s} subset J subset {0..k}`.
    pub fn new(mut idx: Vec<usize>, s: usize, k: usize) -> Result<Self> {
        idx.sort_unstable();
        idx.dedup();
        if idx.iter().any(|&i| i >= k) || (0..s).any(|g| idx.binary_search(&g).is_err()) {
            return Err(Error::InvalidInput(format!(
                "index set {idx:?} must contain 0..{s} and lie in 0..{k}"
            )));
        }
        Ok(Self(idx))
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// All `C(k - s, r - s)` index sets `J` of size `r` with `{0..s} subset J subset {0..k}`,
/// in lexicographic order.
pub fn enumerate_j(s: usize, k: usize, r: usize, cap: usize) -> Result<Vec<IndexSetJ>> {
    if s > r || r > k {
        return Err(Error::InvalidInput(format!("need s <= r <= k, got s={s}, r={r}, k={k}")));
    }
    let count = binomial(k - s, r - s);
    if count > cap as u128 {
        return Err(Error::SizeCap { count, cap });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut pick: Vec<usize> = (s..s + (r - s)).collect();
    loop {
        let mut idx: Vec<usize> = (0..s).collect();
        idx.extend_from_slice(&pick);
        out.push(IndexSetJ(idx));
        // advance the combination of r - s elements out of s..k
        let t = pick.len();
        let mut i = t;
        while i > 0 && pick[i - 1] == k - t + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        pick[i - 1] += 1;
        for j in i..t {
            pick[j] = pick[j - 1] + 1;
        }
    }
    Ok(out)
}

/// `U^T W V_J` when `m >= n`, `U_J^T W V` otherwise.
fn compressed(svd: &ThinSvd, j: &[usize], w: &Mat) -> Mat {
    if svd.rows() >= svd.cols() {
        svd.u.transpose() * w * svd.v_cols(j)
    } else {
        svd.u_cols(j).transpose() * w * &svd.v
    }
}

/// Normal space of the flat `M_X(J) = {U B V_J^T}`: `U^T W V_J = O`.
pub fn in_normal_mxj(svd: &ThinSvd, j: &IndexSetJ, w: &Mat, tol: f64) -> Result<bool> {
    check_shape(svd, w)?;
    let k = svd.rows().min(svd.cols());
    if j.0.iter().any(|&i| i >= k) || svd.gamma().any(|g| !j.0.contains(&g)) {
        return Err(Error::InvalidInput("index set does not contain Gamma".into()));
    }
    Ok(vanishes(compressed(svd, &j.0, w).norm(), w, tol))
}
