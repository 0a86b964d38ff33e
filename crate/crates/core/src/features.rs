//! Feature maps shared by the critic, the actor and the inference code.
//!
//! Every environment here uses the same construction: the policy feature
//! prepends an intercept to the context, `g(s) = [1, s]`, and the reward
//! feature is the policy feature followed by its interaction with the
//! action, `f(s, a) = [g(s), a * g(s)]`. For a three-dimensional context
//! this is `[1, s1, s2, s3, a, a s1, a s2, a s3]`.

use serde::{Deserialize, Serialize};

use crate::critic::RewardFeature;
use crate::error::{check_dims, Result};
use crate::policy::PolicyFeature;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMap {
    context_dim: usize,
}

impl FeatureMap {
    pub fn new(context_dim: usize) -> Self {
        Self { context_dim }
    }

    pub fn context_dim(&self) -> usize {
        self.context_dim
    }

    /// `p`
    pub fn policy_dim(&self) -> usize {
        self.context_dim + 1
    }

    /// `k`
    pub fn reward_dim(&self) -> usize {
        2 * self.policy_dim()
    }

    pub fn policy_feature(&self, s: &[f64]) -> Result<PolicyFeature> {
        check_dims("context", self.context_dim, s.len())?;
        let mut g = vec![0.0; self.policy_dim()];
        self.write_policy(s, &mut g);
        PolicyFeature::new(g)
    }

    pub fn reward_feature(&self, s: &[f64], a: u8) -> Result<RewardFeature> {
        check_dims("context", self.context_dim, s.len())?;
        let mut f = vec![0.0; self.reward_dim()];
        self.write_reward(s, a, &mut f);
        RewardFeature::new(f)
    }

    /// Writes `g(s)` into `out[..p]`.
    #[inline]
    pub fn write_policy(&self, s: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
        out[1..=self.context_dim].copy_from_slice(&s[..self.context_dim]);
    }

    /// Writes `f(s, a)` into `out[..k]`.
    #[inline]
    pub fn write_reward(&self, s: &[f64], a: u8, out: &mut [f64]) {
        let p = self.policy_dim();
        self.write_policy(s, &mut out[..p]);
        let af = f64::from(a);
        for i in 0..p {
            out[p + i] = af * out[i];
        }
    }

    /// Predicted treatment contrast `(f(s,1) - f(s,0))^T mu`.
    #[inline]
    pub fn contrast(&self, s: &[f64], mu: &[f64]) -> f64 {
        let p = self.policy_dim();
        mu[p] + s.iter().zip(&mu[p + 1..]).map(|(x, m)| x * m).sum::<f64>()
    }

    /// Predicted reward under action 0, `f(s,0)^T mu`.
    #[inline]
    pub fn baseline(&self, s: &[f64], mu: &[f64]) -> f64 {
        mu[0] + s.iter().zip(&mu[1..]).map(|(x, m)| x * m).sum::<f64>()
    }
}
