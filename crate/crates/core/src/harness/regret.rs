use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::oracle::policy_value;
use super::trajectory::run_trajectory;
use super::RunConfig;
use crate::envs::{EnvSpec, EnvState};
use crate::error::{Error, Result};
use crate::policy::logistic;
use crate::rng::{derive_seed, stream, ACTION_STREAM, ENV_STREAM};

/// Which policy generates the actions whose regret is measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PolicySource {
    Learner,
    Fixed(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegretPoint {
    pub t: usize,
    /// Mean cumulative regret over replicates.
    pub regret: f64,
    pub std_err: f64,
}

/// Per-step expected reward of the policy actually played, with the action
/// integrated out: `r(S, 0) + pi_t (r(S, 1) - r(S, 0))`.
fn played_values(spec: &EnvSpec, cfg: &RunConfig, source: &PolicySource, seed: u64) -> Result<Vec<f64>> {
    let value = |s: &[f64], pi: f64| {
        let r0 = spec.to_reward(spec.true_mean(s, 0));
        let r1 = spec.to_reward(spec.true_mean(s, 1));
        r0 + pi * (r1 - r0)
    };
    match source {
        PolicySource::Learner => {
            let traj = run_trajectory(spec, &cfg.learner, seed)?;
            Ok(traj.learner.history().iter().zip(&traj.probs).map(|(rec, &pi)| value(&rec.context, pi)).collect())
        }
        PolicySource::Fixed(theta) => {
            if theta.len() != spec.context_dim() + 1 {
                return Err(Error::config("theta", "fixed policy has the wrong dimension"));
            }
            let mut env_rng = stream(seed, ENV_STREAM);
            let mut act_rng = stream(seed, ACTION_STREAM);
            let mut state = EnvState::default();
            (0..cfg.learner.horizon)
                .map(|_| {
                    let s = spec.next_context(&mut state, &mut env_rng)?;
                    let z = theta[0] + s.iter().zip(&theta[1..]).map(|(a, b)| a * b).sum::<f64>();
                    let pi = logistic(z);
                    let a = u8::from(act_rng.random::<f64>() < pi);
                    spec.outcome(&s, a, &mut env_rng);
                    state.record_action(a);
                    Ok(value(&s, pi))
                })
                .collect()
        }
    }
}

/// Mean cumulative regret `sum_{tau <= t} (V(theta*) - E[r(S_tau, A_tau)])`
/// at each checkpoint, over `cfg.replicates` users. `V(theta*)` is the
/// optimal policy's long-run average expected reward.
pub fn regret_curve(
    spec: &EnvSpec,
    cfg: &RunConfig,
    theta_star: &[f64],
    source: &PolicySource,
    checkpoints: &[usize],
) -> Result<Vec<RegretPoint>> {
    cfg.validate()?;
    if let Some(&t) = checkpoints.iter().find(|&&t| t == 0 || t > cfg.learner.horizon) {
        return Err(Error::config("checkpoints", format!("{t} is outside 1..={}", cfg.learner.horizon)));
    }
    let v_star = policy_value(spec, theta_star, &cfg.oracle);
    let per_rep: Vec<Vec<f64>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|i| {
            let vals = played_values(spec, cfg, source, derive_seed(cfg.seed, i as u64))?;
            let mut cum = 0.0;
            let mut out = Vec::with_capacity(checkpoints.len());
            let mut at = vec![0.0; vals.len() + 1];
            for (t, v) in vals.iter().enumerate() {
                cum += v_star - v;
                at[t + 1] = cum;
            }
            out.extend(checkpoints.iter().map(|&t| at[t]));
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let n = per_rep.len() as f64;
    Ok(checkpoints
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let m = per_rep.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = if n > 1.0 { per_rep.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
            RegretPoint { t, regret: m, std_err: (var / n).sqrt() }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::LearnerConfig;

    #[test]
    fn optimal_policy_has_no_regret() {
        let spec = EnvSpec::iid();
        let theta = [0.417778, 0.394811, 0.389474, 0.001068];
        let cfg = RunConfig {
            learner: LearnerConfig { horizon: 300, clip: None, ..Default::default() },
            replicates: 200,
            seed: 9,
            ..Default::default()
        };
        let curve = regret_curve(&spec, &cfg, &theta, &PolicySource::Fixed(theta.to_vec()), &[100, 300]).unwrap();
        for pt in curve {
            assert!(pt.regret.abs() < 4.0 * pt.std_err + 0.5, "{pt:?}");
        }
    }

    #[test]
    fn single_checkpoint() {
        let spec = EnvSpec::toy();
        let cfg = RunConfig {
            learner: LearnerConfig { horizon: 40, clip: None, ..Default::default() },
            replicates: 1,
            ..Default::default()
        };
        let c = regret_curve(&spec, &cfg, &[0.75, 0.75], &PolicySource::Learner, &[40]).unwrap();
        assert_eq!(c.len(), 1);
        assert!(regret_curve(&spec, &cfg, &[0.75, 0.75], &PolicySource::Learner, &[41]).is_err());
    }
}
