//! The online actor-critic loop.
//!
//! At each decision point the learner receives a context, chooses an action
//! (a fair coin during burn-in, the current logistic policy afterwards),
//! observes a reward, refits the critic and, once burn-in is over, refits
//! the actor. The multiplier is either fixed or re-searched on a schedule.

use serde::{Deserialize, Serialize};

use crate::actor::{constraint_budget, lambda_search_problem, maximize, ActorProblem, LambdaBracket, SearchConfig};
use crate::critic::{CriticState, DecisionRecord};
use crate::error::{check_dims, Error, Result};
use crate::features::FeatureMap;
use crate::policy::{dot, logistic};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMode {
    /// Bisection at the first actor update, every `every` decision points,
    /// and at the horizon; held fixed in between.
    Search {
        every: usize,
    },
    Fixed(f64),
}

impl Default for LambdaMode {
    fn default() -> Self {
        LambdaMode::Search { every: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub horizon: usize,
    pub burn_in: usize,
    pub zeta: f64,
    /// Clipping bound `K` for reward estimates; `None` uses raw estimates.
    pub clip: Option<f64>,
    pub p0: f64,
    pub alpha: f64,
    pub lambda_mode: LambdaMode,
    pub bracket: LambdaBracket,
    pub search: SearchConfig,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            horizon: 200,
            burn_in: 20,
            zeta: 1.0,
            clip: Some(1.0),
            p0: 0.1,
            alpha: 0.1,
            lambda_mode: LambdaMode::default(),
            bracket: LambdaBracket::default(),
            search: SearchConfig::local(),
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::config("run.T", "must be at least 1"));
        }
        if self.horizon < self.burn_in {
            return Err(Error::config(
                "run.burn_in",
                format!("burn-in {} exceeds the horizon T = {}", self.burn_in, self.horizon),
            ));
        }
        if !(self.zeta > 0.0 && self.zeta.is_finite()) {
            return Err(Error::config("run.zeta", format!("must be positive, got {}", self.zeta)));
        }
        if let Some(k) = self.clip {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::config("run.clip_bound", format!("must be positive, got {k}")));
            }
        }
        constraint_budget(self.p0, self.alpha)?;
        match self.lambda_mode {
            LambdaMode::Search { every: 0 } => {
                return Err(Error::config("constraint.search_every", "must be at least 1"))
            }
            LambdaMode::Fixed(l) if !(l >= 0.0 && l.is_finite()) => {
                return Err(Error::config("constraint.lambda", format!("must be >= 0, got {l}")))
            }
            _ => {}
        }
        Ok(())
    }

    /// First decision point at which the actor is refit.
    pub fn first_update(&self) -> usize {
        self.burn_in.max(1)
    }

    fn searches_at(&self, t: usize) -> bool {
        match self.lambda_mode {
            LambdaMode::Search { every } => {
                t == self.first_update() || (t > self.first_update() && (t % every == 0 || t == self.horizon))
            }
            LambdaMode::Fixed(_) => false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Learner {
    cfg: LearnerConfig,
    map: FeatureMap,
    budget: f64,
    critic: CriticState,
    history: Vec<DecisionRecord>,
    theta: Vec<f64>,
    lambda: f64,
    theta_path: Vec<Vec<f64>>,
    lambda_path: Vec<f64>,
    /// Actor refits that ended above the stationarity threshold.
    unconverged: usize,
    last_converged: bool,
}

impl Learner {
    pub fn new(cfg: LearnerConfig, map: FeatureMap) -> Result<Self> {
        cfg.validate()?;
        let budget = constraint_budget(cfg.p0, cfg.alpha)?;
        let critic = CriticState::new(map.reward_dim(), cfg.zeta)?;
        let lambda = match cfg.lambda_mode {
            LambdaMode::Fixed(l) => l,
            LambdaMode::Search { .. } => cfg.bracket.lo,
        };
        Ok(Self {
            theta: vec![0.0; map.policy_dim()],
            history: Vec::with_capacity(cfg.horizon),
            theta_path: Vec::new(),
            lambda_path: Vec::new(),
            cfg,
            map,
            budget,
            critic,
            lambda,
            unconverged: 0,
            last_converged: true,
        })
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.cfg
    }

    pub fn feature_map(&self) -> &FeatureMap {
        &self.map
    }

    /// Number of decision points observed so far.
    pub fn t(&self) -> usize {
        self.history.len()
    }

    pub fn is_done(&self) -> bool {
        self.t() >= self.cfg.horizon
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn critic(&self) -> &CriticState {
        &self.critic
    }

    pub fn history(&self) -> &[DecisionRecord] {
        &self.history
    }

    pub fn contexts(&self) -> Vec<Vec<f64>> {
        self.history.iter().map(|r| r.context.clone()).collect()
    }

    /// `theta` after each actor refit, starting at the first post-burn-in point.
    pub fn theta_path(&self) -> &[Vec<f64>] {
        &self.theta_path
    }

    pub fn lambda_path(&self) -> &[f64] {
        &self.lambda_path
    }

    pub fn unconverged_updates(&self) -> usize {
        self.unconverged
    }

    pub fn last_update_converged(&self) -> bool {
        self.last_converged
    }

    /// Probability of action 1 at the next decision point.
    pub fn action_prob(&self, s: &[f64]) -> f64 {
        if self.t() < self.cfg.first_update() {
            return 0.5;
        }
        let p = self.map.policy_dim();
        let mut g = [0.0; 16];
        if p <= g.len() {
            self.map.write_policy(s, &mut g[..p]);
            logistic(dot(&g[..p], &self.theta))
        } else {
            let mut g = vec![0.0; p];
            self.map.write_policy(s, &mut g);
            logistic(dot(&g, &self.theta))
        }
    }

    /// Action 1 iff `u < pi`.
    pub fn act(&self, s: &[f64], u: f64) -> u8 {
        u8::from(u < self.action_prob(s))
    }

    /// Records `(s, a, r)`, refits the critic, and refits the actor once
    /// burn-in is complete.
    pub fn observe(&mut self, s: &[f64], a: u8, r: f64) -> Result<()> {
        check_dims("context", self.map.context_dim(), s.len())?;
        if a > 1 {
            return Err(Error::Data(format!("action must be 0 or 1, got {a}")));
        }
        if self.is_done() {
            return Err(Error::Logic(format!("horizon {} already reached", self.cfg.horizon)));
        }
        let mut f = vec![0.0; self.map.reward_dim()];
        self.map.write_reward(s, a, &mut f);
        self.critic.update(&f, r)?;
        self.history.push(DecisionRecord { context: s.to_vec(), action: a, reward: r });
        if self.t() >= self.cfg.first_update() {
            self.update_actor()?;
        }
        Ok(())
    }

    fn update_actor(&mut self) -> Result<()> {
        let t = self.t();
        let contexts: Vec<Vec<f64>> = self.history.iter().map(|r| r.context.clone()).collect();
        let mut prob =
            ActorProblem::from_critic(&self.map, &contexts, self.critic.mu_hat(), self.cfg.clip, self.lambda)?;
        let warm = (!self.theta_path.is_empty()).then(|| self.theta.clone());
        let fit = if self.cfg.searches_at(t) {
            let lf = lambda_search_problem(&prob, &self.cfg.bracket, self.budget, &self.cfg.search, warm.as_deref())?;
            self.lambda = lf.lambda;
            lf.fit
        } else {
            prob.set_lambda(self.lambda);
            maximize(&prob, &self.cfg.search, warm.as_deref())
        };
        self.last_converged = fit.converged;
        if !fit.converged {
            self.unconverged += 1;
        }
        self.theta = fit.theta;
        self.theta_path.push(self.theta.clone());
        self.lambda_path.push(self.lambda);
        Ok(())
    }
}
