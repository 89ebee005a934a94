//! Linear subspaces of R^n carried by orthonormal bases, and the arithmetic
//! the chain computations need: null spaces, images, complements,
//! intersections and transversality.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::matrix::{rank_from_singular_values, svd, DenseMatrix, RankTolerance};

/// A subspace of R^n stored as an n×k matrix with orthonormal columns.
///
/// The trivial subspace has a basis with zero columns.
#[derive(Debug, Clone)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

impl Subspace {
    pub fn trivial(ambient_dim: usize) -> Self {
        Subspace {
            basis: DMatrix::zeros(ambient_dim, 0),
        }
    }

    pub fn full(ambient_dim: usize) -> Self {
        Subspace {
            basis: DMatrix::identity(ambient_dim, ambient_dim),
        }
    }

    /// Span of the given coordinate axes (0-based indices).
    pub fn coordinate(ambient_dim: usize, axes: &[usize]) -> Self {
        let mut basis = DMatrix::zeros(ambient_dim, axes.len());
        for (c, &axis) in axes.iter().enumerate() {
            basis[(axis, c)] = 1.0;
        }
        Subspace { basis }
    }

    /// Orthonormal basis for the column span of `vectors`.
    pub fn span(vectors: &DMatrix<f64>, tol: RankTolerance) -> Result<Self> {
        let n = vectors.nrows();
        if vectors.ncols() == 0 {
            return Ok(Subspace::trivial(n));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("spanning set has non-finite entries".into()));
        }
        let dec = svd(vectors, true, false)?;
        let sv = dec.singular_values;
        let rank = rank_from_singular_values(&sv, tol, n, vectors.ncols());
        let u = dec.u.expect("U requested");
        Ok(Subspace {
            basis: u.columns(0, rank).into_owned(),
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_trivial(&self) -> bool {
        self.dim() == 0
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Orthogonal projection of `v` onto the subspace.
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.basis * (self.basis.transpose() * v)
    }

    /// Euclidean distance from `v` to the subspace.
    pub fn distance_to(&self, v: &DVector<f64>) -> f64 {
        (v - self.project(v)).norm()
    }

    /// max |BᵀB − I| over all entries.
    pub fn orthonormality_defect(&self) -> f64 {
        let k = self.dim();
        let gram = self.basis.transpose() * &self.basis;
        let defect = gram - DMatrix::<f64>::identity(k, k);
        defect.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
    }
}

fn check_same_ambient(a: &Subspace, b: &Subspace) -> Result<()> {
    if a.ambient_dim() != b.ambient_dim() {
        return Err(Error::DimensionMismatch(format!(
            "subspaces live in R^{} and R^{}",
            a.ambient_dim(),
            b.ambient_dim()
        )));
    }
    Ok(())
}

/// Null space of `m` from the trailing right singular vectors.
pub fn null_space(m: &DenseMatrix, tol: RankTolerance) -> Result<Subspace> {
    null_space_of(m.as_matrix(), tol)
}

pub(crate) fn null_space_of(m: &DMatrix<f64>, tol: RankTolerance) -> Result<Subspace> {
    let (rows, cols) = m.shape();
    if rows == 0 {
        return Ok(Subspace::full(cols));
    }
    // nalgebra only returns the thin factor; zero rows make V square.
    let padded;
    let target = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.rows_mut(0, rows).copy_from(m);
        padded = p;
        &padded
    } else {
        m
    };
    let dec = svd(target, false, true)?;
    let sv = dec.singular_values;
    let rank = rank_from_singular_values(&sv, tol, rows, cols);
    let v_t = dec.v_t.expect("V requested");
    let basis = v_t.rows(rank, cols - rank).transpose();
    Ok(Subspace { basis })
}

/// Orthonormalized span of L applied to the basis of `s`.
pub fn image(l: &DenseMatrix, s: &Subspace, tol: RankTolerance) -> Result<Subspace> {
    if !l.is_square() || l.cols() != s.ambient_dim() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} operator applied to a subspace of R^{}",
            l.rows(),
            l.cols(),
            s.ambient_dim()
        )));
    }
    if s.is_trivial() {
        return Ok(s.clone());
    }
    Subspace::span(&(l.as_matrix() * s.basis()), tol)
}

pub fn orth_complement(s: &Subspace) -> Result<Subspace> {
    if s.is_trivial() {
        return Ok(Subspace::full(s.ambient_dim()));
    }
    // The basis is orthonormal, so every singular value of Bᵀ is 1.
    null_space_of(&s.basis().transpose(), RankTolerance::Relative(0.5))
}

/// S1 ∩ S2 computed as (span(S1⊥, S2⊥))⊥.
pub fn intersect(s1: &Subspace, s2: &Subspace, tol: RankTolerance) -> Result<Subspace> {
    check_same_ambient(s1, s2)?;
    let n = s1.ambient_dim();
    let c1 = orth_complement(s1)?;
    let c2 = orth_complement(s2)?;
    let k = c1.dim() + c2.dim();
    if k == 0 {
        return Ok(Subspace::full(n));
    }
    let mut stacked = DMatrix::zeros(k, n);
    stacked.rows_mut(0, c1.dim()).copy_from(&c1.basis().transpose());
    stacked.rows_mut(c1.dim(), c2.dim()).copy_from(&c2.basis().transpose());
    null_space_of(&stacked, tol)
}

/// True when dim(S1 ∩ S2) = max(dim S1 + dim S2 − n, 0).
pub fn is_transverse(s1: &Subspace, s2: &Subspace, tol: RankTolerance) -> Result<bool> {
    let meet = intersect(s1, s2, tol)?;
    Ok(meet.dim() == transverse_dim(s1.dim(), s2.dim(), s1.ambient_dim()))
}

/// The intersection dimension two generic subspaces of these sizes have.
pub fn transverse_dim(d1: usize, d2: usize, n: usize) -> usize {
    (d1 + d2).saturating_sub(n)
}

/// Largest principal-angle sine between S1 and its projection onto S2:
/// ‖(I − B₂B₂ᵀ)B₁‖₂. Zero exactly when S1 ⊆ S2.
pub fn subspace_distance(s1: &Subspace, s2: &Subspace) -> Result<f64> {
    check_same_ambient(s1, s2)?;
    if s1.is_trivial() {
        return Ok(0.0);
    }
    let b1 = s1.basis();
    let b2 = s2.basis();
    let residual = b1 - b2 * (b2.transpose() * b1);
    let dec = svd(&residual, false, false)?;
    let top = dec.singular_values.iter().copied().fold(0.0_f64, f64::max);
    Ok(top.min(1.0))
}

/// Same dimension and mutual containment within `eps`.
pub fn same_span(s1: &Subspace, s2: &Subspace, eps: f64) -> Result<bool> {
    Ok(s1.dim() == s2.dim() && subspace_distance(s1, s2)? <= eps && subspace_distance(s2, s1)? <= eps)
}
