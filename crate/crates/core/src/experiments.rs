//! Seeded Monte-Carlo studies of the optimal reduction property and of how
//! the conditioning of E evolves with the number of measurements.

use rayon::prelude::*;

use crate::chain::{compute_chain, reduction_report};
use crate::error::{Error, Result};
use crate::matrix::RankTolerance;
use crate::models::{coordinate_projection, GaussianStream};
use crate::observability::build_extended_range;
use crate::system::SystemModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenericityParams {
    pub n: usize,
    pub m: usize,
    pub trials: usize,
    pub seed: u64,
    /// Draw ⌈n/m⌉ independent operators instead of a single one.
    pub time_varying: bool,
    /// Draw a Gaussian P per trial instead of the first m rows of I.
    pub random_projection: bool,
}

impl GenericityParams {
    pub fn new(n: usize, m: usize, trials: usize, seed: u64) -> Self {
        GenericityParams {
            n,
            m,
            trials,
            seed,
            time_varying: false,
            random_projection: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.m == 0 || self.m > self.n {
            return Err(Error::InvalidParameter(format!("need 1 <= m <= n, got n={} m={}", self.n, self.m)));
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        Ok(())
    }

    /// Seed of trial `index` (0-based).
    pub fn trial_seed(&self, index: usize) -> u64 {
        self.seed.wrapping_add(index as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialOutcome {
    pub index: usize,
    pub seed: u64,
    pub dims: Vec<usize>,
    pub k_star: Option<usize>,
    pub lower_bound: usize,
    pub optimal: bool,
    pub all_transverse: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenericityReport {
    pub params: GenericityParams,
    pub count_optimal: usize,
    pub count_all_transverse: usize,
    /// Seeds of trials that were not optimal, in trial order.
    pub failing_seeds: Vec<u64>,
    /// Seeds of trials with k_star below ⌈n/m⌉; expected empty.
    pub lower_bound_violations: Vec<u64>,
    /// Seeds of trials that were all-transverse but not optimal; expected
    /// empty.
    pub consistency_violations: Vec<u64>,
    pub outcomes: Vec<TrialOutcome>,
}

impl GenericityReport {
    pub fn fraction_optimal(&self) -> f64 {
        self.count_optimal as f64 / self.params.trials as f64
    }

    pub fn fraction_all_transverse(&self) -> f64 {
        self.count_all_transverse as f64 / self.params.trials as f64
    }
}

/// Builds the system of one trial. Dynamics come first in the trial's
/// Gaussian stream, followed by P when it is randomized.
pub fn trial_system(params: &GenericityParams, index: usize) -> Result<SystemModel> {
    params.validate()?;
    let (n, m) = (params.n, params.m);
    let mut stream = GaussianStream::new(params.trial_seed(index));
    let operators = if params.time_varying { n.div_ceil(m) } else { 1 };
    let ls: Vec<_> = (0..operators).map(|_| stream.matrix(n, n)).collect();
    let p = if params.random_projection {
        stream.matrix(m, n)
    } else {
        coordinate_projection(m, n)?
    };
    let system = if params.time_varying {
        SystemModel::time_varying(ls, p)?
    } else {
        SystemModel::stationary(ls.into_iter().next().expect("one operator"), p)?
    };
    Ok(system.with_label(format!("trial {index} seed {}", params.trial_seed(index))))
}

/// Runs trial `index` on its own; used both by the experiment and to
/// replay failing seeds.
pub fn run_trial(params: &GenericityParams, index: usize, tol: RankTolerance) -> Result<TrialOutcome> {
    let system = trial_system(params, index)?;
    let max_steps = match system.operator_count() {
        Some(k) => k + 1,
        None => params.n + 1,
    };
    let chain = compute_chain(&system, max_steps, tol)?;
    let report = reduction_report(&chain)?;
    Ok(TrialOutcome {
        index,
        seed: params.trial_seed(index),
        dims: chain.dims(),
        k_star: chain.k_star(),
        lower_bound: report.lower_bound,
        optimal: report.is_optimal(),
        all_transverse: report.all_transverse(),
    })
}

/// Runs every trial in parallel and aggregates in trial order, so the
/// report is identical for identical parameters.
pub fn genericity_experiment(params: GenericityParams, tol: RankTolerance) -> Result<GenericityReport> {
    params.validate()?;
    let outcomes: Vec<TrialOutcome> = (0..params.trials)
        .into_par_iter()
        .map(|i| run_trial(&params, i, tol))
        .collect::<Result<_>>()?;

    let mut report = GenericityReport {
        params,
        count_optimal: 0,
        count_all_transverse: 0,
        failing_seeds: Vec::new(),
        lower_bound_violations: Vec::new(),
        consistency_violations: Vec::new(),
        outcomes: Vec::new(),
    };
    for o in &outcomes {
        if o.optimal {
            report.count_optimal += 1;
        } else {
            report.failing_seeds.push(o.seed);
        }
        if o.all_transverse {
            report.count_all_transverse += 1;
            if !o.optimal {
                report.consistency_violations.push(o.seed);
            }
        }
        if o.k_star.is_some_and(|k| k < o.lower_bound) {
            report.lower_bound_violations.push(o.seed);
        }
    }
    report.outcomes = outcomes;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionRow {
    pub steps: usize,
    pub rank: usize,
    pub condition: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionStudy {
    pub rows: Vec<ConditionRow>,
}

impl ConditionStudy {
    /// condition(first) / condition(last)
    pub fn improvement(&self) -> f64 {
        let first = self.rows.first().map_or(f64::NAN, |r| r.condition);
        let last = self.rows.last().map_or(f64::NAN, |r| r.condition);
        first / last
    }
}

/// Rank and condition of E for every T in `t_min..=t_max`.
pub fn condition_study(system: &SystemModel, t_min: usize, t_max: usize, tol: RankTolerance) -> Result<ConditionStudy> {
    let rows = build_extended_range(system, t_min, t_max, tol)?
        .iter()
        .map(|e| ConditionRow {
            steps: e.steps(),
            rank: e.rank(),
            condition: e.condition(),
        })
        .collect();
    Ok(ConditionStudy { rows })
}
