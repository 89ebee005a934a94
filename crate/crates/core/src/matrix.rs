//! Dense real matrices, rank thresholds and the SVD helpers everything else
//! is built on.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A real dense matrix whose entries are all finite.
///
/// Empty shapes are allowed so that zero-column bases and degenerate stacks
/// can flow through the same code, but every constructor rejects NaN and
/// infinities.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix(DMatrix<f64>);

impl DenseMatrix {
    /// Builds a matrix from entries listed in row-major order.
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        Self::from_dmatrix(DMatrix::from_row_slice(rows, cols, &entries))
    }

    pub fn from_dmatrix(m: DMatrix<f64>) -> Result<Self> {
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                if !m[(i, j)].is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(DenseMatrix(m))
    }

    /// Row-by-row construction, mostly for fixtures.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let ncols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        let entries = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(rows.len(), ncols, entries)
    }

    pub fn identity(n: usize) -> Self {
        DenseMatrix(DMatrix::identity(n, n))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix(DMatrix::zeros(rows, cols))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[(row, col)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn transpose(&self) -> Self {
        DenseMatrix(self.0.transpose())
    }

    /// Matrix product, checking the inner dimensions.
    pub fn mul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols() != rhs.rows() {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows(),
                self.cols(),
                rhs.rows(),
                rhs.cols()
            )));
        }
        DenseMatrix::from_dmatrix(&self.0 * &rhs.0)
    }

    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if self.cols() != x.len() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix applied to a vector of length {}",
                self.rows(),
                self.cols(),
                x.len()
            )));
        }
        Ok(&self.0 * x)
    }

    /// Entries in row-major order.
    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DenseMatrix{}", self.0)
    }
}

impl From<DenseMatrix> for DMatrix<f64> {
    fn from(m: DenseMatrix) -> Self {
        m.0
    }
}

/// Threshold used to decide which singular values count as nonzero.
///
/// `Relative(t)` keeps σ > t·σ_max. `MachinePrecision` keeps
/// σ > max(rows, cols)·ε·σ_max, the usual default of LAPACK-based `rank`
/// routines; it is the only setting that can certify full rank for the very
/// ill-conditioned observability matrices of the pixel-grid problems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RankTolerance {
    Relative(f64),
    MachinePrecision,
}

impl RankTolerance {
    pub const DEFAULT_RELATIVE: f64 = 1e-10;

    pub fn relative(threshold: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "relative rank threshold must lie in (0, 1), got {threshold}"
            )));
        }
        Ok(RankTolerance::Relative(threshold))
    }

    /// Relative threshold for a matrix of the given shape.
    pub fn threshold(&self, rows: usize, cols: usize) -> f64 {
        match *self {
            RankTolerance::Relative(t) => t,
            RankTolerance::MachinePrecision => rows.max(cols).max(1) as f64 * f64::EPSILON,
        }
    }
}

impl Default for RankTolerance {
    fn default() -> Self {
        RankTolerance::Relative(Self::DEFAULT_RELATIVE)
    }
}

impl fmt::Display for RankTolerance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RankTolerance::Relative(t) => write!(f, "{t:e}"),
            RankTolerance::MachinePrecision => f.write_str("machine"),
        }
    }
}

impl std::str::FromStr for RankTolerance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("machine") {
            return Ok(RankTolerance::MachinePrecision);
        }
        let t: f64 = s
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("not a tolerance: {s:?}")))?;
        RankTolerance::relative(t)
    }
}

/// Thin SVD m = U diag(σ) Vᵀ with σ sorted descending.
pub(crate) struct Svd {
    pub singular_values: Vec<f64>,
    pub u: Option<DMatrix<f64>>,
    pub v_t: Option<DMatrix<f64>>,
}

fn no_convergence(m: &DMatrix<f64>) -> Error {
    Error::NumericalFailure(format!("SVD of a {}x{} matrix did not converge", m.nrows(), m.ncols()))
}

pub(crate) fn svd(m: &DMatrix<f64>, compute_u: bool, compute_v: bool) -> Result<Svd> {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Ok(Svd {
            singular_values: Vec::new(),
            u: compute_u.then(|| DMatrix::zeros(rows, 0)),
            v_t: compute_v.then(|| DMatrix::zeros(0, cols)),
        });
    }
    let a = faer::Mat::from_fn(rows, cols, |i, j| m[(i, j)]);
    if !compute_u && !compute_v {
        let singular_values = a.singular_values().map_err(|_| no_convergence(m))?;
        return Ok(Svd {
            singular_values,
            u: None,
            v_t: None,
        });
    }
    let dec = a.thin_svd().map_err(|_| no_convergence(m))?;
    let singular_values = dec.S().column_vector().iter().copied().collect();
    let u = compute_u.then(|| {
        let u = dec.U();
        DMatrix::from_fn(rows, k, |i, j| u[(i, j)])
    });
    let v_t = compute_v.then(|| {
        let v = dec.V();
        DMatrix::from_fn(k, cols, |i, j| v[(j, i)])
    });
    Ok(Svd {
        singular_values,
        u,
        v_t,
    })
}

/// Singular values in descending order; empty for an empty matrix.
pub(crate) fn singular_values(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    Ok(svd(m, false, false)?.singular_values)
}

/// Number of singular values above the tolerance, given them sorted
/// descending.
pub(crate) fn rank_from_singular_values(sv: &[f64], tol: RankTolerance, rows: usize, cols: usize) -> usize {
    let smax = match sv.first() {
        Some(&s) if s > 0.0 => s,
        _ => return 0,
    };
    let cut = tol.threshold(rows, cols) * smax;
    sv.iter().take_while(|&&s| s > cut).count()
}

pub(crate) fn rank_of(m: &DMatrix<f64>, tol: RankTolerance) -> Result<usize> {
    let sv = singular_values(m)?;
    Ok(rank_from_singular_values(&sv, tol, m.nrows(), m.ncols()))
}

/// Ratio of the largest to the smallest retained singular value.
pub(crate) fn condition_from_singular_values(sv: &[f64], rank: usize) -> f64 {
    if rank == 0 {
        f64::INFINITY
    } else {
        sv[0] / sv[rank - 1]
    }
}

/// Count of singular values σ_i with σ_i > threshold·σ_max.
pub fn numerical_rank(m: &DenseMatrix, tol: RankTolerance) -> Result<usize> {
    rank_of(m.as_matrix(), tol)
}

/// Largest over smallest retained singular value of `m`, together with the
/// retained rank. Infinite when nothing is retained.
pub fn condition_number(m: &DenseMatrix, tol: RankTolerance) -> Result<(f64, usize)> {
    let sv = singular_values(m.as_matrix())?;
    let rank = rank_from_singular_values(&sv, tol, m.rows(), m.cols());
    Ok((condition_from_singular_values(&sv, rank), rank))
}
