//! Shared fixtures for the benchmarks.

use acbandit_core::harness::run_trajectory;
use acbandit_core::learner::Learner;
use acbandit_core::{ActorProblem, EnvSpec, LearnerConfig};

/// Learner state after a full iid trajectory of length `horizon`.
pub fn trained_learner(horizon: usize, seed: u64) -> Learner {
    let cfg = LearnerConfig { horizon, zeta: 0.01, clip: None, ..Default::default() };
    run_trajectory(&EnvSpec::iid(), &cfg, seed).expect("iid trajectory").learner
}

/// Empirical actor problem at the end of `learner`'s history.
pub fn actor_problem(learner: &Learner, lambda: f64) -> ActorProblem {
    ActorProblem::from_critic(learner.feature_map(), &learner.contexts(), learner.critic().mu_hat(), None, lambda)
        .expect("actor problem")
}
