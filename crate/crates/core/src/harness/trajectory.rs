use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::{EnvSpec, EnvState};
use crate::error::Result;
use crate::features::FeatureMap;
use crate::learner::{Learner, LearnerConfig};
use crate::rng::{stream, ACTION_STREAM, ENV_STREAM};

/// One simulated user.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub learner: Learner,
    /// Outcomes in the environment's native sign (costs stay costs).
    pub outcomes: Vec<f64>,
    /// Probability of action 1 used at each decision point.
    pub probs: Vec<f64>,
}

impl Trajectory {
    pub fn theta(&self) -> &[f64] {
        self.learner.theta()
    }

    pub fn lambda(&self) -> f64 {
        self.learner.lambda()
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }
}

/// Runs the online learner against `spec` for `cfg.horizon` decision points.
/// Contexts and outcome noise come from the environment stream of `seed`,
/// action uniforms from its action stream.
pub fn run_trajectory(spec: &EnvSpec, cfg: &LearnerConfig, seed: u64) -> Result<Trajectory> {
    let map = FeatureMap::new(spec.context_dim());
    let mut learner = Learner::new(cfg.clone(), map)?;
    let mut env_rng = stream(seed, ENV_STREAM);
    let mut act_rng = stream(seed, ACTION_STREAM);
    let mut state = EnvState::default();
    let mut outcomes = Vec::with_capacity(cfg.horizon);
    let mut probs = Vec::with_capacity(cfg.horizon);
    while !learner.is_done() {
        let s = spec.next_context(&mut state, &mut env_rng)?;
        let pi = learner.action_prob(&s);
        let a = u8::from(act_rng.random::<f64>() < pi);
        let y = spec.outcome(&s, a, &mut env_rng);
        state.record_action(a);
        learner.observe(&s, a, spec.to_reward(y))?;
        outcomes.push(y);
        probs.push(pi);
    }
    Ok(Trajectory { learner, outcomes, probs })
}
