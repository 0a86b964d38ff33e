//! Experiment driver: simulated trajectories, ground-truth policies,
//! replicate studies and regret curves.
//!
//! Seeds are derived, never drawn: a master seed yields one seed per
//! replicate, and each replicate seed yields the environment, action and
//! bootstrap streams. Parallel runs therefore reproduce bit-for-bit
//! regardless of the worker count.

mod oracle;
mod regret;
mod study;
mod trajectory;

use serde::{Deserialize, Serialize};

use crate::actor::SearchConfig;
use crate::error::{Error, Result};
use crate::learner::LearnerConfig;

pub use oracle::{
    myopic_equilibrium, optimal_policy_at, oracle_policy, policy_value, regularized_cost_eval, stationary_contexts,
    FixedLambdaPolicy, MyopicResult, OracleResult,
};
pub use regret::{regret_curve, PolicySource, RegretPoint};
pub use study::{
    aggregate, replicate_study, run_replicate, worker_pool, CoordinateSummary, ReplicateOutcome, StudyReport,
};
pub use trajectory::{run_trajectory, Trajectory};

/// Monte Carlo sizes and solver settings for ground-truth computations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Context draws for environments whose context law ignores the policy.
    pub mc_contexts: usize,
    /// Trajectory length for policy-dependent stationary laws.
    pub stationary_steps: usize,
    /// Leading fraction of the stationary trajectory discarded.
    pub discard_frac: f64,
    /// Trajectory length used to rank grid points in the burden search.
    pub grid_steps: usize,
    /// Row subsample used for the grid stage of the equilibrium solver.
    pub grid_rows: usize,
    pub max_sweeps: usize,
    pub sweep_tol: f64,
    pub search: SearchConfig,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            mc_contexts: 5000,
            stationary_steps: 100_000,
            discard_frac: 0.1,
            grid_steps: 10_000,
            grid_rows: 5000,
            max_sweeps: 50,
            sweep_tol: 1e-3,
            search: SearchConfig::default(),
            seed: 20_170_312,
        }
    }
}

/// Everything a replicate study needs besides the environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub learner: LearnerConfig,
    pub seed: u64,
    pub replicates: usize,
    /// Bootstrap resamples per replicate; 0 disables percentile-t intervals.
    pub bootstrap_b: usize,
    /// Nominal interval coverage.
    pub level: f64,
    /// Evaluate the regularized cost of every end-of-study estimate.
    pub evaluate_cost: bool,
    pub oracle: OracleConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            learner: LearnerConfig { clip: None, ..LearnerConfig::default() },
            seed: 1,
            replicates: 1000,
            bootstrap_b: 500,
            level: 0.95,
            evaluate_cost: false,
            oracle: OracleConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.learner.validate()?;
        if self.replicates == 0 {
            return Err(Error::config("run.replicates", "must be at least 1"));
        }
        if self.bootstrap_b == 1 {
            return Err(Error::config("inference.bootstrap_b", "use 0 (disabled) or at least 2"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::config("inference.level", format!("must lie in (0, 1), got {}", self.level)));
        }
        Ok(())
    }
}
