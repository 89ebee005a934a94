//! Extended observability matrices, block trajectory operators, forward
//! simulation and least-squares recovery of the initial state.
//!
//! Row vectors follow the convention x E = d̃: row i of the n×(mT) matrix E
//! is (P e_i, P L_1 e_i, P L_2 L_1 e_i, …), so the measurement sequence of
//! an initial state x is the row vector xᵀE.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::matrix::{condition_from_singular_values, rank_from_singular_values, svd, RankTolerance};
use crate::subspace::null_space_of;
use crate::system::SystemModel;

#[derive(Debug, Clone)]
pub struct ExtendedMatrix {
    matrix: DMatrix<f64>,
    steps: usize,
    rank: usize,
    condition: f64,
    singular_values: Vec<f64>,
}

impl ExtendedMatrix {
    /// The n×(mT) matrix itself.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Largest over smallest retained singular value.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Rank below n: the condition number then only covers the retained
    /// singular values.
    pub fn is_rank_deficient(&self) -> bool {
        self.rank < self.matrix.nrows()
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }
}

/// The blocks P, P L_1, P L_2 L_1, …, one m×n block per step.
fn observation_blocks(system: &SystemModel, steps: usize) -> Result<Vec<DMatrix<f64>>> {
    if steps == 0 {
        return Err(Error::InvalidParameter("at least one step is required".into()));
    }
    system.require_steps(steps)?;
    let p = system.projection().as_matrix();
    let n = system.state_dim();
    let mut propagator = DMatrix::<f64>::identity(n, n);
    let mut blocks = Vec::with_capacity(steps);
    for t in 1..=steps {
        blocks.push(p * &propagator);
        if t < steps {
            propagator = system.operator(t)?.as_matrix() * propagator;
        }
    }
    Ok(blocks)
}

fn assemble_extended(blocks: &[DMatrix<f64>], n: usize, m: usize) -> DMatrix<f64> {
    let mut e = DMatrix::zeros(n, m * blocks.len());
    for (t, block) in blocks.iter().enumerate() {
        e.columns_mut(t * m, m).copy_from(&block.transpose());
    }
    e
}

fn summarize(matrix: DMatrix<f64>, steps: usize, tol: RankTolerance) -> Result<ExtendedMatrix> {
    let singular_values: Vec<f64> = svd(&matrix, false, false)?.singular_values;
    let rank = rank_from_singular_values(&singular_values, tol, matrix.nrows(), matrix.ncols());
    let condition = condition_from_singular_values(&singular_values, rank);
    Ok(ExtendedMatrix {
        matrix,
        steps,
        rank,
        condition,
        singular_values,
    })
}

/// E for `steps` measurements in the canonical basis.
pub fn build_extended(system: &SystemModel, steps: usize, tol: RankTolerance) -> Result<ExtendedMatrix> {
    let blocks = observation_blocks(system, steps)?;
    let e = assemble_extended(&blocks, system.state_dim(), system.measurement_dim());
    summarize(e, steps, tol)
}

/// E for every step count in `t_min..=t_max`, sharing the block products.
pub fn build_extended_range(system: &SystemModel, t_min: usize, t_max: usize, tol: RankTolerance) -> Result<Vec<ExtendedMatrix>> {
    if t_min == 0 || t_max < t_min {
        return Err(Error::InvalidParameter(format!("need 1 <= t_min <= t_max, got {t_min}..{t_max}")));
    }
    let blocks = observation_blocks(system, t_max)?;
    let (n, m) = (system.state_dim(), system.measurement_dim());
    (t_min..=t_max)
        .map(|t| summarize(assemble_extended(&blocks[..t], n, m), t, tol))
        .collect()
}

/// States x_1..x_T satisfying x_{t+1} = L_t x_t.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// vec(x̃) = (x_1; x_2; …; x_T).
    pub fn stacked(&self) -> DVector<f64> {
        stack(&self.states)
    }
}

/// Measurements d_1..d_T, all of the same length and finite.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSequence {
    data: Vec<DVector<f64>>,
}

impl MeasurementSequence {
    pub fn new(data: Vec<DVector<f64>>) -> Result<Self> {
        let Some(first) = data.first() else {
            return Err(Error::InvalidParameter("measurement sequence is empty".into()));
        };
        let m = first.len();
        for (t, d) in data.iter().enumerate() {
            if d.len() != m {
                return Err(Error::DimensionMismatch(format!(
                    "measurement {} has {} components, expected {m}",
                    t + 1,
                    d.len()
                )));
            }
            if let Some(k) = d.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!("measurement {} component {} is not finite", t + 1, k + 1)));
            }
        }
        Ok(MeasurementSequence { data })
    }

    pub fn data(&self) -> &[DVector<f64>] {
        &self.data
    }

    pub fn steps(&self) -> usize {
        self.data.len()
    }

    pub fn measurement_dim(&self) -> usize {
        self.data[0].len()
    }

    /// The super-measurement d̃ = (d_1; …; d_T).
    pub fn stacked(&self) -> DVector<f64> {
        stack(&self.data)
    }
}

fn stack(parts: &[DVector<f64>]) -> DVector<f64> {
    let total = parts.iter().map(|p| p.len()).sum();
    let mut out = DVector::zeros(total);
    let mut offset = 0;
    for p in parts {
        out.rows_mut(offset, p.len()).copy_from(p);
        offset += p.len();
    }
    out
}

/// Propagates x0 through `steps` states and measures each one.
pub fn simulate(system: &SystemModel, x0: &DVector<f64>, steps: usize) -> Result<(Trajectory, MeasurementSequence)> {
    if steps == 0 {
        return Err(Error::InvalidParameter("at least one step is required".into()));
    }
    if x0.len() != system.state_dim() {
        return Err(Error::DimensionMismatch(format!(
            "initial state has length {}, state dimension is {}",
            x0.len(),
            system.state_dim()
        )));
    }
    system.require_steps(steps)?;
    let mut states = Vec::with_capacity(steps);
    states.push(x0.clone());
    for t in 1..steps {
        let next = system.operator(t)?.apply(&states[t - 1])?;
        states.push(next);
    }
    let data = states
        .iter()
        .map(|x| system.projection().apply(x))
        .collect::<Result<Vec<_>>>()?;
    Ok((Trajectory { states }, MeasurementSequence::new(data)?))
}

#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub x0: DVector<f64>,
    pub trajectory: Trajectory,
    /// ‖x₀E − d̃‖₂
    pub residual: f64,
    pub rank: usize,
    pub condition: f64,
    /// rank E = n
    pub rank_unique: bool,
    /// Trivial N_A ∩ N_P̃; only computed when some operator is singular
    /// and T ≥ 2.
    pub oracle_unique: Option<bool>,
}

impl ReconstructionResult {
    /// The authoritative uniqueness verdict: the oracle when it was needed,
    /// the rank test otherwise.
    pub fn unique(&self) -> bool {
        self.oracle_unique.unwrap_or(self.rank_unique)
    }
}

/// Minimum-norm least-squares solution of x E = d̃ through the SVD of E,
/// discarding singular values below the tolerance.
pub fn reconstruct(system: &SystemModel, data: &MeasurementSequence, tol: RankTolerance) -> Result<ReconstructionResult> {
    if data.measurement_dim() != system.measurement_dim() {
        return Err(Error::DimensionMismatch(format!(
            "measurements have {} components, projection produces {}",
            data.measurement_dim(),
            system.measurement_dim()
        )));
    }
    let steps = data.steps();
    let n = system.state_dim();
    let blocks = observation_blocks(system, steps)?;
    let e = assemble_extended(&blocks, n, system.measurement_dim());
    let d = data.stacked();

    // E = U Σ Vᵀ, so Eᵀ x = d̃ has minimum-norm solution U Σ⁺ Vᵀ d̃.
    let dec = svd(&e, true, true)?;
    let sv = dec.singular_values;
    let rank = rank_from_singular_values(&sv, tol, e.nrows(), e.ncols());
    let u = dec.u.as_ref().expect("U requested");
    let v_t = dec.v_t.as_ref().expect("V requested");
    let mut x0 = DVector::zeros(n);
    for (k, s) in sv.iter().enumerate().take(rank) {
        let coeff = v_t.row(k).transpose().dot(&d) / s;
        x0 += u.column(k) * coeff;
    }
    let residual = (e.transpose() * &x0 - &d).norm();
    let condition = condition_from_singular_values(&sv, rank);

    let oracle_unique = if steps >= 2 && !system.dynamics_invertible(steps, RankTolerance::default())? {
        Some(oracle_unique(system, steps, RankTolerance::default())?)
    } else {
        None
    };
    let (trajectory, _) = simulate(system, &x0, steps)?;
    Ok(ReconstructionResult {
        x0,
        trajectory,
        residual,
        rank,
        condition,
        rank_unique: rank == n,
        oracle_unique,
    })
}

/// The (T−1)n × Tn matrix with block row t equal to [0 … L_t −I … 0];
/// its null space is exactly the set of trajectories.
pub fn build_block_a(system: &SystemModel, steps: usize) -> Result<DMatrix<f64>> {
    if steps < 2 {
        return Err(Error::InvalidParameter("the dynamics constraint needs at least 2 steps".into()));
    }
    system.require_steps(steps)?;
    let n = system.state_dim();
    let mut a = DMatrix::zeros((steps - 1) * n, steps * n);
    for t in 1..steps {
        let r = (t - 1) * n;
        a.view_mut((r, (t - 1) * n), (n, n)).copy_from(system.operator(t)?.as_matrix());
        a.view_mut((r, t * n), (n, n)).fill_with_identity();
        a.view_mut((r, t * n), (n, n)).neg_mut();
    }
    Ok(a)
}

/// Block diagonal mT × nT matrix with P on the diagonal.
pub fn build_block_p(system: &SystemModel, steps: usize) -> Result<DMatrix<f64>> {
    if steps == 0 {
        return Err(Error::InvalidParameter("at least one step is required".into()));
    }
    let (m, n) = (system.measurement_dim(), system.state_dim());
    let mut p = DMatrix::zeros(m * steps, n * steps);
    for t in 0..steps {
        p.view_mut((t * m, t * n), (m, n)).copy_from(system.projection().as_matrix());
    }
    Ok(p)
}

/// Whether the only trajectory with all-zero measurements is zero:
/// null([A; P̃]) = {0}. Valid for singular dynamics as well.
pub fn oracle_unique(system: &SystemModel, steps: usize, tol: RankTolerance) -> Result<bool> {
    let a = build_block_a(system, steps)?;
    let p = build_block_p(system, steps)?;
    let mut stacked = DMatrix::zeros(a.nrows() + p.nrows(), a.ncols());
    stacked.rows_mut(0, a.nrows()).copy_from(&a);
    stacked.rows_mut(a.nrows(), p.nrows()).copy_from(&p);
    Ok(null_space_of(&stacked, tol)?.is_trivial())
}
