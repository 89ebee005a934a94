//! Linear systems x_{t+1} = L_t x_t observed through a fixed projection P.

use crate::error::{Error, Result};
use crate::matrix::{numerical_rank, DenseMatrix, RankTolerance};

/// A g×g pixel grid. Pixel (i, j), with row i and column j both in 1..=g,
/// sits at position (j−1)·g + (i−1) of the state vector (column-major).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    side: usize,
}

impl GridSpec {
    pub fn new(side: usize) -> Result<Self> {
        if side == 0 {
            return Err(Error::InvalidParameter("grid side must be positive".into()));
        }
        Ok(GridSpec { side })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn state_dim(&self) -> usize {
        self.side * self.side
    }

    /// 0-based state position of 1-based pixel (i, j).
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!((1..=self.side).contains(&i) && (1..=self.side).contains(&j));
        (j - 1) * self.side + (i - 1)
    }

    /// Inverse of [`GridSpec::index`].
    pub fn coords(&self, position: usize) -> (usize, usize) {
        (position % self.side + 1, position / self.side + 1)
    }
}

#[derive(Debug, Clone)]
pub enum Dynamics {
    Stationary(DenseMatrix),
    /// (L_1, …, L_{T−1}); L_t maps x_t to x_{t+1}.
    TimeVarying(Vec<DenseMatrix>),
}

#[derive(Debug, Clone)]
pub struct SystemModel {
    dynamics: Dynamics,
    projection: DenseMatrix,
    label: String,
    grid: Option<GridSpec>,
}

impl SystemModel {
    pub fn new(dynamics: Dynamics, projection: DenseMatrix) -> Result<Self> {
        let n = projection.cols();
        let m = projection.rows();
        if m == 0 || n == 0 {
            return Err(Error::InvalidParameter("projection must be nonempty".into()));
        }
        let blocks: Vec<&DenseMatrix> = match &dynamics {
            Dynamics::Stationary(l) => vec![l],
            Dynamics::TimeVarying(ls) => {
                if ls.is_empty() {
                    return Err(Error::InvalidParameter("time-varying dynamics need at least one operator".into()));
                }
                ls.iter().collect()
            }
        };
        for (t, l) in blocks.iter().enumerate() {
            if l.rows() != n || l.cols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "dynamics block {} is {}x{} but the projection acts on R^{n}",
                    t + 1,
                    l.rows(),
                    l.cols()
                )));
            }
        }
        let rank = numerical_rank(&projection, RankTolerance::default())?;
        if rank < m {
            return Err(Error::RankDeficientProjection { rank, rows: m });
        }
        Ok(SystemModel {
            dynamics,
            projection,
            label: String::new(),
            grid: None,
        })
    }

    pub fn stationary(l: DenseMatrix, p: DenseMatrix) -> Result<Self> {
        Self::new(Dynamics::Stationary(l), p)
    }

    pub fn time_varying(ls: Vec<DenseMatrix>, p: DenseMatrix) -> Result<Self> {
        Self::new(Dynamics::TimeVarying(ls), p)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_grid(mut self, grid: GridSpec) -> Result<Self> {
        if grid.state_dim() != self.state_dim() {
            return Err(Error::DimensionMismatch(format!(
                "a {0}x{0} grid has {1} pixels but the state dimension is {2}",
                grid.side(),
                grid.state_dim(),
                self.state_dim()
            )));
        }
        self.grid = Some(grid);
        Ok(self)
    }

    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }

    pub fn projection(&self) -> &DenseMatrix {
        &self.projection
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn grid(&self) -> Option<GridSpec> {
        self.grid
    }

    /// n
    pub fn state_dim(&self) -> usize {
        self.projection.cols()
    }

    /// m
    pub fn measurement_dim(&self) -> usize {
        self.projection.rows()
    }

    pub fn is_stationary(&self) -> bool {
        matches!(self.dynamics, Dynamics::Stationary(_))
    }

    /// Number of operators a time-varying system supplies; `None` when
    /// stationary (any number of steps).
    pub fn operator_count(&self) -> Option<usize> {
        match &self.dynamics {
            Dynamics::Stationary(_) => None,
            Dynamics::TimeVarying(ls) => Some(ls.len()),
        }
    }

    /// L_t for 1-based step t, mapping x_t to x_{t+1}.
    pub fn operator(&self, t: usize) -> Result<&DenseMatrix> {
        match &self.dynamics {
            Dynamics::Stationary(l) => Ok(l),
            Dynamics::TimeVarying(ls) => ls.get(t.wrapping_sub(1)).ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "step {t} requested but only {} time-varying operators are available",
                    ls.len()
                ))
            }),
        }
    }

    /// Fails unless the system can be propagated through `steps` states,
    /// i.e. supplies operators L_1..L_{steps−1}.
    pub fn require_steps(&self, steps: usize) -> Result<()> {
        match self.operator_count() {
            Some(k) if k + 1 < steps => Err(Error::InvalidParameter(format!(
                "{steps} states need {} time-varying operators, only {k} given",
                steps - 1
            ))),
            _ => Ok(()),
        }
    }

    /// Whether every operator L_1..L_{steps−1} has full numerical rank.
    pub fn dynamics_invertible(&self, steps: usize, tol: RankTolerance) -> Result<bool> {
        let n = self.state_dim();
        match &self.dynamics {
            Dynamics::Stationary(l) => Ok(numerical_rank(l, tol)? == n),
            Dynamics::TimeVarying(ls) => {
                for l in ls.iter().take(steps.saturating_sub(1)) {
                    if numerical_rank(l, tol)? < n {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_index_is_column_major_bijection() {
        let g = GridSpec::new(3).unwrap();
        assert_eq!(g.index(1, 1), 0);
        assert_eq!(g.index(2, 1), 1);
        assert_eq!(g.index(1, 2), 3);
        let mut seen = [false; 9];
        for j in 1..=3 {
            for i in 1..=3 {
                let p = g.index(i, j);
                assert!(!seen[p]);
                seen[p] = true;
                assert_eq!(g.coords(p), (i, j));
            }
        }
        assert!(GridSpec::new(0).is_err());
    }

    #[test]
    fn rejects_rank_deficient_projection() {
        let p = DenseMatrix::from_rows(&[&[1.0, 1.0], &[2.0, 2.0]]).unwrap();
        let err = SystemModel::stationary(DenseMatrix::identity(2), p).unwrap_err();
        assert!(matches!(err, Error::RankDeficientProjection { rank: 1, rows: 2 }));
    }

    #[test]
    fn rejects_mismatched_blocks() {
        let p = DenseMatrix::from_rows(&[&[1.0, 0.0, 0.0]]).unwrap();
        assert!(SystemModel::stationary(DenseMatrix::identity(2), p.clone()).is_err());
        assert!(SystemModel::time_varying(vec![DenseMatrix::identity(3), DenseMatrix::identity(2)], p.clone()).is_err());
        assert!(SystemModel::time_varying(vec![], p).is_err());
    }

    #[test]
    fn time_varying_operator_lookup() {
        let p = DenseMatrix::from_rows(&[&[1.0, 0.0]]).unwrap();
        let l2 = DenseMatrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        let sys = SystemModel::time_varying(vec![DenseMatrix::identity(2), l2.clone()], p).unwrap();
        assert_eq!(sys.operator(2).unwrap(), &l2);
        assert!(sys.operator(3).is_err());
        assert!(sys.operator(0).is_err());
        assert!(sys.require_steps(3).is_ok());
        assert!(sys.require_steps(4).is_err());
    }

    #[test]
    fn grid_must_match_state_dim() {
        let p = DenseMatrix::from_rows(&[&[1.0, 0.0, 0.0, 0.0]]).unwrap();
        let sys = SystemModel::stationary(DenseMatrix::identity(4), p).unwrap();
        assert!(sys.clone().with_grid(GridSpec::new(2).unwrap()).is_ok());
        assert!(sys.with_grid(GridSpec::new(3).unwrap()).is_err());
    }
}
