//! Online actor-critic contextual bandit with stochasticity-constrained
//! logistic policies.
//!
//! The crate is organised bottom-up:
//!
//! - [`policy`]: logistic policy over binary actions.
//! - [`features`]: policy feature `g(s) = [1, s]` and reward feature
//!   `f(s, a) = [g(s), a * g(s)]`.
//! - [`critic`]: incremental ridge regression of the linear reward model.
//! - [`actor`]: regularized average reward, its maximizer, and the
//!   Lagrange-multiplier line search.
//! - [`learner`]: the online loop alternating critic and actor steps.
//! - [`inference`]: plug-in asymptotic covariances, Wald and percentile-t
//!   bootstrap intervals.
//! - [`envs`]: generative environments used in the simulation studies.
//! - [`harness`]: trajectories, oracle and myopic-equilibrium policies,
//!   replicate studies and regret curves.

pub mod actor;
pub mod critic;
pub mod envs;
pub mod error;
pub mod features;
pub mod harness;
pub mod inference;
pub mod learner;
pub mod linalg;
pub mod policy;
pub mod rng;

pub use actor::{
    constraint_budget, constraint_value, empirical_gram, lambda_search, maximize_objective, objective, ActorFit,
    ActorProblem, ConstraintConfig, GramEstimate, LambdaBracket, LambdaFit, SearchConfig, SearchStrategy,
};
pub use critic::{CriticState, DecisionRecord, RewardFeature};
pub use envs::{EnvKind, EnvSpec, EnvState, OutcomeSign};
pub use error::{Error, Result};
pub use features::FeatureMap;
pub use harness::{OracleConfig, RunConfig, StudyReport};
pub use inference::{CovarianceReport, IntervalMethod, IntervalSet};
pub use learner::{LambdaMode, Learner, LearnerConfig};
pub use policy::{PolicyFeature, PolicyParams};
