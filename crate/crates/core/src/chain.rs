//! The null-space chain N₁ = null(P), N_{k+1} = N₁ ∩ L_k(N_k), and the
//! diagnostics built on it: optimal reduction, transversality of each step,
//! stall witnesses, and the two rank characterizations through complements
//! and Krylov spans.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::{condition_number, rank_of, RankTolerance};
use crate::subspace::{image, intersect, is_transverse, null_space, orth_complement, subspace_distance, Subspace};
use crate::system::SystemModel;

/// Chains on dynamics worse conditioned than this carry a warning.
pub const CONDITION_WARNING: f64 = 1e12;

/// Invariance residual a stall witness has to meet.
pub const WITNESS_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct NullChain {
    system: SystemModel,
    subspaces: Vec<Subspace>,
    tol: RankTolerance,
    k_star: Option<usize>,
    stalled_at: Option<usize>,
    warnings: Vec<String>,
}

impl NullChain {
    pub fn system(&self) -> &SystemModel {
        &self.system
    }

    /// N₁, N₂, …; index 0 holds N₁.
    pub fn subspaces(&self) -> &[Subspace] {
        &self.subspaces
    }

    /// N_k for 1-based k.
    pub fn get(&self, k: usize) -> Option<&Subspace> {
        self.subspaces.get(k.checked_sub(1)?)
    }

    pub fn dims(&self) -> Vec<usize> {
        self.subspaces.iter().map(Subspace::dim).collect()
    }

    /// Number of computed members.
    pub fn len(&self) -> usize {
        self.subspaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subspaces.is_empty()
    }

    /// Smallest k with dim N_k = 0, if the chain got there.
    pub fn k_star(&self) -> Option<usize> {
        self.k_star
    }

    /// First i with dim N_{i+1} = dim N_i ≠ 0.
    pub fn stalled_at(&self) -> Option<usize> {
        self.stalled_at
    }

    pub fn tolerance(&self) -> RankTolerance {
        self.tol
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }
}

/// Runs the chain for at most `max_steps` members, stopping once a member
/// is trivial.
pub fn compute_chain(system: &SystemModel, max_steps: usize, tol: RankTolerance) -> Result<NullChain> {
    if max_steps == 0 {
        return Err(Error::InvalidParameter("max_steps must be at least 1".into()));
    }
    system.require_steps(max_steps)?;

    let mut warnings = Vec::new();
    let operators = system.operator_count().unwrap_or(1).min(max_steps.saturating_sub(1)).max(1);
    for t in 1..=operators {
        let l = system.operator(t)?;
        let (cond, rank) = condition_number(l, tol)?;
        if rank < system.state_dim() {
            warnings.push(format!(
                "dynamics operator {t} is singular (rank {rank} of {}); a trivial chain member does not by itself guarantee unique reconstruction",
                system.state_dim()
            ));
        } else if cond > CONDITION_WARNING {
            warnings.push(format!("dynamics operator {t} has condition number {cond:.3e}; rank decisions may be unreliable"));
        }
    }

    let n1 = null_space(system.projection(), tol)?;
    let mut subspaces = vec![n1.clone()];
    let mut k_star = if n1.is_trivial() { Some(1) } else { None };
    let mut stalled_at = None;
    let mut k = 1;
    while k_star.is_none() && k < max_steps {
        // A stationary chain is constant from its first stall on; copying
        // avoids amplifying rounding errors through further images.
        if stalled_at.is_some() && system.is_stationary() {
            subspaces.push(subspaces[k - 1].clone());
            k += 1;
            continue;
        }
        let current = &subspaces[k - 1];
        let moved = image(system.operator(k)?, current, tol)?;
        let next = intersect(&n1, &moved, tol)?;
        if stalled_at.is_none() && next.dim() == current.dim() {
            stalled_at = Some(k);
        }
        if next.is_trivial() {
            k_star = Some(k + 1);
        }
        subspaces.push(next);
        k += 1;
    }

    Ok(NullChain {
        system: system.clone(),
        subspaces,
        tol,
        k_star,
        stalled_at,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimality {
    Optimal,
    NotOptimal,
    /// The chain stopped before ⌈n/m⌉ members without reaching {0}.
    Undecided,
}

#[derive(Debug, Clone)]
pub struct ReductionReport {
    /// ⌈n/m⌉
    pub lower_bound: usize,
    pub k_star: Option<usize>,
    pub optimality: Optimality,
    /// Entry i (0-based) tells whether N₁ ⋔ L_{i+1}(N_{i+1}).
    pub transverse_profile: Vec<bool>,
    /// dim N_i ≤ dim N − i + 1 for every i ≤ dim N + 1.
    pub bound_satisfied: bool,
    pub warnings: Vec<String>,
}

impl ReductionReport {
    pub fn is_optimal(&self) -> bool {
        self.optimality == Optimality::Optimal
    }

    pub fn all_transverse(&self) -> bool {
        self.transverse_profile.iter().all(|&t| t)
    }
}

pub fn reduction_report(chain: &NullChain) -> Result<ReductionReport> {
    let system = chain.system();
    let n = system.state_dim();
    let m = system.measurement_dim();
    let lower_bound = n.div_ceil(m);

    let optimality = match chain.k_star() {
        Some(k) if k == lower_bound => Optimality::Optimal,
        Some(_) => Optimality::NotOptimal,
        None if chain.len() >= lower_bound => Optimality::NotOptimal,
        None if chain.stalled_at().is_some() && system.is_stationary() => Optimality::NotOptimal,
        None => Optimality::Undecided,
    };

    let n1 = &chain.subspaces()[0];
    let mut transverse_profile = Vec::with_capacity(chain.len().saturating_sub(1));
    for k in 1..chain.len() {
        let moved = image(system.operator(k)?, &chain.subspaces()[k - 1], chain.tolerance())?;
        transverse_profile.push(is_transverse(n1, &moved, chain.tolerance())?);
    }

    let dims = chain.dims();
    let p = dims[0];
    // Members past a trivial one are trivial as well.
    let dim_at = |i: usize| dims.get(i - 1).copied().unwrap_or(0);
    let checkable = if chain.k_star().is_some() { p + 1 } else { (p + 1).min(chain.len()) };
    let bound_satisfied = (1..=checkable).all(|i| dim_at(i) + i <= p + 1);

    Ok(ReductionReport {
        lower_bound,
        k_star: chain.k_star(),
        optimality,
        transverse_profile,
        bound_satisfied,
        warnings: chain.warnings().to_vec(),
    })
}

/// A nontrivial subspace of N left invariant by the dynamics, found where
/// the chain stalls.
#[derive(Debug, Clone)]
pub struct StallWitness {
    /// Chain index i of the stall.
    pub index: usize,
    pub subspace: Subspace,
    /// subspace_distance(L(N_i), N_i)
    pub invariance_residual: f64,
}

/// Returns N_i at the stall after checking that L_i(N_i) = N_i.
pub fn stall_witness(chain: &NullChain, tol: RankTolerance) -> Result<Option<StallWitness>> {
    let Some(i) = chain.stalled_at() else {
        return Ok(None);
    };
    let n_i = chain.get(i).expect("stall index lies inside the chain").clone();
    let moved = image(chain.system().operator(i)?, &n_i, tol)?;
    let residual = if moved.dim() == n_i.dim() {
        subspace_distance(&moved, &n_i)?.max(subspace_distance(&n_i, &moved)?)
    } else {
        1.0
    };
    if residual > WITNESS_TOLERANCE {
        return Err(Error::NumericalFailure(format!(
            "chain stalled at {i} but L(N_{i}) differs from N_{i} by {residual:.3e}"
        )));
    }
    Ok(Some(StallWitness {
        index: i,
        subspace: n_i,
        invariance_residual: residual,
    }))
}

/// Ranks of the stacked complement matrices
///
/// ```text
/// [ rN⊥ ; rN⊥ L_{k−1}⁻¹ ; rN⊥ L_{k−2}⁻¹ L_{k−1}⁻¹ ; … ; rN⊥ L_1⁻¹ ⋯ L_{k−1}⁻¹ ]
/// ```
///
/// for k = 2..=steps, where the rows of rN⊥ span N⊥. The k-th entry equals
/// n − dim N_k whenever every operator is invertible, which is required.
///
/// Right-multiplying by L_{k−1} ⋯ L_1 keeps the rank and turns the blocks
/// into rN⊥ Φ_t with Φ_t = L_{t−1} ⋯ L_1, so no inverse is ever formed.
pub fn stacked_complement_dims(system: &SystemModel, steps: usize, tol: RankTolerance) -> Result<Vec<usize>> {
    if steps < 2 {
        return Err(Error::InvalidParameter("stacked complements need at least 2 steps".into()));
    }
    system.require_steps(steps)?;
    if !system.dynamics_invertible(steps, tol)? {
        return Err(Error::NonInvertibleDynamics(
            "stacked complement characterization requires every dynamics operator to be invertible".into(),
        ));
    }
    let n = system.state_dim();
    let complement = orth_complement(&null_space(system.projection(), tol)?)?;
    let r_perp = complement.basis().transpose();
    let c = r_perp.nrows();

    let mut stack = DMatrix::zeros(steps * c, n);
    stack.rows_mut(0, c).copy_from(&r_perp);
    let mut phi = DMatrix::<f64>::identity(n, n);
    let mut ranks = Vec::with_capacity(steps - 1);
    for k in 2..=steps {
        phi = system.operator(k - 1)?.as_matrix() * phi;
        let scale = phi.norm();
        if scale > 0.0 {
            phi /= scale;
        }
        let mut block = &r_perp * &phi;
        // Rescale rows so late blocks do not swamp the rank decision.
        for mut row in block.row_iter_mut() {
            let norm = row.norm();
            if norm > 0.0 {
                row /= norm;
            }
        }
        stack.rows_mut((k - 1) * c, c).copy_from(&block);
        ranks.push(rank_of(&stack.rows(0, k * c).into_owned(), tol)?);
    }
    Ok(ranks)
}

/// dim span(cN⊥, L cN⊥, …, L^{k−1} cN⊥) for k = 1..=k_max, with cN⊥ an
/// orthonormal basis of N⊥ as columns. Stationary dynamics only.
pub fn krylov_span_dims(system: &SystemModel, k_max: usize, tol: RankTolerance) -> Result<Vec<usize>> {
    if !system.is_stationary() {
        return Err(Error::InvalidParameter("Krylov spans are defined for stationary dynamics only".into()));
    }
    if k_max == 0 {
        return Err(Error::InvalidParameter("k_max must be at least 1".into()));
    }
    let l = system.operator(1)?.as_matrix();
    let n = system.state_dim();
    let c_perp = orth_complement(&null_space(system.projection(), tol)?)?.basis().clone();
    let c = c_perp.ncols();

    let mut krylov = DMatrix::zeros(n, k_max * c);
    let mut block = c_perp;
    let mut dims = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        if k > 1 {
            block = l * &block;
            for mut col in block.column_iter_mut() {
                let norm = col.norm();
                if norm > 0.0 {
                    col /= norm;
                }
            }
        }
        krylov.columns_mut((k - 1) * c, c).copy_from(&block);
        dims.push(rank_of(&krylov.columns(0, k * c).into_owned(), tol)?);
    }
    Ok(dims)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::DenseMatrix;
    use crate::models::{coordinate_projection, cyclic_example, random_dynamics};
    use crate::subspace::same_span;

    fn tol() -> RankTolerance {
        RankTolerance::default()
    }

    #[test]
    fn cyclic_chain_matches_displayed_members() {
        let chain = compute_chain(&cyclic_example(), 6, tol()).unwrap();
        assert_eq!(chain.dims(), vec![4, 3, 2, 1, 0]);
        assert_eq!(chain.k_star(), Some(5));
        assert_eq!(chain.stalled_at(), None);
        let expected = [vec![2, 3, 4, 5], vec![3, 4, 5], vec![4, 5], vec![5]];
        for (k, axes) in expected.iter().enumerate() {
            assert!(same_span(&chain.subspaces()[k], &Subspace::coordinate(6, axes), 1e-10).unwrap());
        }
        assert!(chain.warnings().is_empty());
    }

    #[test]
    fn identity_dynamics_stall_immediately() {
        let sys = SystemModel::stationary(DenseMatrix::identity(5), coordinate_projection(2, 5).unwrap()).unwrap();
        let chain = compute_chain(&sys, 4, tol()).unwrap();
        assert_eq!(chain.dims(), vec![3, 3, 3, 3]);
        assert_eq!(chain.k_star(), None);
        assert_eq!(chain.stalled_at(), Some(1));
        let w = stall_witness(&chain, tol()).unwrap().unwrap();
        assert_eq!(w.index, 1);
        assert!(same_span(&w.subspace, &chain.subspaces()[0], 1e-10).unwrap());
    }

    #[test]
    fn random_system_drops_by_m() {
        let sys = SystemModel::stationary(random_dynamics(6, 11), coordinate_projection(2, 6).unwrap()).unwrap();
        let chain = compute_chain(&sys, 6, tol()).unwrap();
        assert_eq!(chain.dims(), vec![4, 2, 0]);
        assert_eq!(chain.k_star(), Some(3));
        let report = reduction_report(&chain).unwrap();
        assert_eq!(report.lower_bound, 3);
        assert!(report.is_optimal());
        assert_eq!(report.transverse_profile, vec![true, true]);
    }

    #[test]
    fn cyclic_report() {
        let chain = compute_chain(&cyclic_example(), 6, tol()).unwrap();
        let report = reduction_report(&chain).unwrap();
        assert_eq!(report.lower_bound, 3);
        assert_eq!(report.k_star, Some(5));
        assert_eq!(report.optimality, Optimality::NotOptimal);
        assert_eq!(report.transverse_profile, vec![false, false, false, true]);
        assert!(report.bound_satisfied);
        assert!(stall_witness(&chain, tol()).unwrap().is_none());
    }

    #[test]
    fn square_projection_is_optimal_at_once() {
        let p = DenseMatrix::from_rows(&[&[2.0, 1.0], &[0.0, 1.0]]).unwrap();
        let sys = SystemModel::stationary(random_dynamics(2, 1), p).unwrap();
        let report = reduction_report(&compute_chain(&sys, 3, tol()).unwrap()).unwrap();
        assert_eq!(report.k_star, Some(1));
        assert_eq!(report.lower_bound, 1);
        assert!(report.is_optimal());
        assert!(report.transverse_profile.is_empty());
    }

    #[test]
    fn short_chain_is_undecided() {
        let chain = compute_chain(&cyclic_example(), 2, tol()).unwrap();
        assert_eq!(reduction_report(&chain).unwrap().optimality, Optimality::Undecided);
        let chain = compute_chain(&cyclic_example(), 3, tol()).unwrap();
        assert_eq!(reduction_report(&chain).unwrap().optimality, Optimality::NotOptimal);
    }

    #[test]
    fn planted_rotation_block_is_witnessed() {
        // L = diag(R, Q): a rotation on span(e3, e4) ⊆ N, random elsewhere.
        let n = 6;
        let q = random_dynamics(n, 5).into_matrix();
        let mut l = DMatrix::zeros(n, n);
        let (c, s) = (0.6_f64, 0.8_f64);
        l[(2, 2)] = c;
        l[(2, 3)] = -s;
        l[(3, 2)] = s;
        l[(3, 3)] = c;
        for (a, &i) in [0usize, 1, 4, 5].iter().enumerate() {
            for (b, &j) in [0usize, 1, 4, 5].iter().enumerate() {
                l[(i, j)] = q[(a, b)];
            }
        }
        let sys = SystemModel::stationary(DenseMatrix::from_dmatrix(l).unwrap(), coordinate_projection(2, n).unwrap()).unwrap();
        let chain = compute_chain(&sys, 6, tol()).unwrap();
        let i = chain.stalled_at().expect("planted block forces a stall");
        assert!(chain.get(i).unwrap().dim() >= 2);
        let w = stall_witness(&chain, tol()).unwrap().unwrap();
        assert!(w.invariance_residual <= WITNESS_TOLERANCE);
        let block = Subspace::coordinate(n, &[2, 3]);
        assert!(subspace_distance(&block, &w.subspace).unwrap() <= 1e-8);
    }

    #[test]
    fn time_varying_chain_needs_operators() {
        let p = coordinate_projection(2, 6).unwrap();
        let sys = SystemModel::time_varying(vec![random_dynamics(6, 1)], p).unwrap();
        assert!(compute_chain(&sys, 3, tol()).is_err());
        let chain = compute_chain(&sys, 2, tol()).unwrap();
        assert_eq!(chain.dims(), vec![4, 2]);
    }

    #[test]
    fn time_varying_chain_uses_each_operator() {
        // Cyclic shift then identity: N₂ = span(e4,e5,e6), N₃ = N₁ ∩ N₂ = N₂.
        let ls = vec![crate::models::cyclic_shift(6, 1), DenseMatrix::identity(6)];
        let sys = SystemModel::time_varying(ls, coordinate_projection(2, 6).unwrap()).unwrap();
        let chain = compute_chain(&sys, 3, tol()).unwrap();
        assert_eq!(chain.dims(), vec![4, 3, 3]);
        assert_eq!(chain.stalled_at(), Some(2));
    }

    #[test]
    fn stacked_complements() {
        let sys = SystemModel::stationary(random_dynamics(6, 11), coordinate_projection(2, 6).unwrap()).unwrap();
        assert_eq!(stacked_complement_dims(&sys, 3, tol()).unwrap(), vec![4, 6]);
        assert_eq!(stacked_complement_dims(&cyclic_example(), 3, tol()).unwrap(), vec![3, 4]);
        assert_eq!(stacked_complement_dims(&cyclic_example(), 5, tol()).unwrap(), vec![3, 4, 5, 6]);
    }

    #[test]
    fn stacked_complements_with_invariant_complement() {
        // Orthogonal L preserving N⊥ = span(e1, e2).
        let mut l = DMatrix::identity(4, 4);
        l[(0, 0)] = 0.0;
        l[(0, 1)] = -1.0;
        l[(1, 0)] = 1.0;
        l[(1, 1)] = 0.0;
        let sys = SystemModel::stationary(DenseMatrix::from_dmatrix(l).unwrap(), coordinate_projection(2, 4).unwrap()).unwrap();
        assert_eq!(stacked_complement_dims(&sys, 4, tol()).unwrap(), vec![2, 2, 2]);
    }

    #[test]
    fn stacked_complements_reject_singular_dynamics() {
        let sys = SystemModel::stationary(DenseMatrix::zeros(3, 3), coordinate_projection(1, 3).unwrap()).unwrap();
        assert!(matches!(stacked_complement_dims(&sys, 3, tol()), Err(Error::NonInvertibleDynamics(_))));
        assert!(stacked_complement_dims(&cyclic_example(), 1, tol()).is_err());
    }

    #[test]
    fn krylov_left_shift_witness() {
        // Shift everything m places to the left: L e_{j+m} = e_j.
        let (n, m) = (6, 2);
        let l = crate::models::cyclic_shift(n, -(m as i64));
        let sys = SystemModel::stationary(l, coordinate_projection(m, n).unwrap()).unwrap();
        assert_eq!(krylov_span_dims(&sys, 4, tol()).unwrap(), vec![2, 4, 6, 6]);
    }

    #[test]
    fn krylov_identity_and_random() {
        let sys = SystemModel::stationary(DenseMatrix::identity(6), coordinate_projection(2, 6).unwrap()).unwrap();
        assert_eq!(krylov_span_dims(&sys, 3, tol()).unwrap(), vec![2, 2, 2]);
        let sys = SystemModel::stationary(random_dynamics(6, 11), coordinate_projection(2, 6).unwrap()).unwrap();
        assert_eq!(krylov_span_dims(&sys, 3, tol()).unwrap(), vec![2, 4, 6]);
        let tv = SystemModel::time_varying(vec![DenseMatrix::identity(6)], coordinate_projection(2, 6).unwrap()).unwrap();
        assert!(krylov_span_dims(&tv, 3, tol()).is_err());
    }

    #[test]
    fn krylov_with_l_differs_from_chain_for_non_normal_l() {
        // L = [[1,0],[1,1]], N⊥ = span(e1): span(e1, L e1) = R², but the
        // chain N₂ = N ∩ L(N) = span(e2) never shrinks.
        let l = DenseMatrix::from_rows(&[&[1.0, 0.0], &[1.0, 1.0]]).unwrap();
        let sys = SystemModel::stationary(l, coordinate_projection(1, 2).unwrap()).unwrap();
        assert_eq!(krylov_span_dims(&sys, 2, tol()).unwrap(), vec![1, 2]);
        assert_eq!(compute_chain(&sys, 3, tol()).unwrap().dims(), vec![1, 1, 1]);
    }

    #[test]
    fn singular_dynamics_warn() {
        let sys = SystemModel::stationary(DenseMatrix::zeros(2, 2), coordinate_projection(1, 2).unwrap()).unwrap();
        let chain = compute_chain(&sys, 3, tol()).unwrap();
        assert_eq!(chain.dims(), vec![1, 0]);
        assert_eq!(chain.warnings().len(), 1);
    }
}
