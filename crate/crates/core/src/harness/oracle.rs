//! Ground-truth policies computed from the environments' true mean models.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::OracleConfig;
use crate::actor::{
    constraint_budget, lambda_search_problem, lambda_search_with, maximize, ActorFit, ActorProblem, LambdaBracket,
    Objective, SearchConfig, SearchStrategy,
};
use crate::envs::{EnvSpec, OutcomeSign};
use crate::error::{Error, Result};
use crate::policy::logistic;
use crate::rng::{stream, ACTION_STREAM, ENV_STREAM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub lambda: f64,
    pub theta: Vec<f64>,
    /// `theta^T E[g g^T] theta` under the policy's own context law.
    pub constraint: f64,
    pub budget: f64,
    /// Monte Carlo sample size behind the objective.
    pub mc_size: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedLambdaPolicy {
    pub theta: Vec<f64>,
    pub constraint: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MyopicResult {
    pub theta: Vec<f64>,
    pub lambda: f64,
    pub constraint: f64,
    pub sweeps: usize,
}

#[inline]
fn score(theta: &[f64], s: &[f64]) -> f64 {
    theta[0] + s.iter().zip(&theta[1..]).map(|(a, b)| a * b).sum::<f64>()
}

/// Expected reward of each action at `s`, in reward sign.
#[inline]
fn action_rewards(spec: &EnvSpec, s: &[f64]) -> (f64, f64) {
    (spec.to_reward(spec.true_mean(s, 0)), spec.to_reward(spec.true_mean(s, 1)))
}

/// Common random numbers for simulating a policy-dependent context chain.
struct ChainNoise {
    spec: EnvSpec,
    d: usize,
    noise: Vec<f64>,
    u: Vec<f64>,
}

impl ChainNoise {
    fn new(spec: &EnvSpec, steps: usize, seed: u64) -> Self {
        let d = spec.context_dim();
        let mut env_rng = stream(seed, ENV_STREAM);
        let mut act_rng = stream(seed, ACTION_STREAM);
        let mut noise = vec![0.0; steps * d];
        for row in noise.chunks_exact_mut(d) {
            spec.draw_context_noise(&mut env_rng, row);
        }
        let u = (0..steps).map(|_| act_rng.random::<f64>()).collect();
        Self { spec: *spec, d, noise, u }
    }

    /// Walks the chain under `theta` for `steps` decision points, calling
    /// `visit(s, pi)` on every context after the first `discard`.
    fn walk(&self, theta: &[f64], steps: usize, discard: usize, mut visit: impl FnMut(&[f64], f64)) {
        let d = self.d;
        let mut s = [0.0; 3];
        let mut next = [0.0; 3];
        self.spec.transition(None, &self.noise[..d], &mut s[..d]);
        for t in 0..steps {
            let pi = logistic(score(theta, &s[..d]));
            if t >= discard {
                visit(&s[..d], pi);
            }
            if t + 1 < steps {
                let a = u8::from(self.u[t] < pi);
                let row = &self.noise[(t + 1) * d..(t + 2) * d];
                self.spec.transition(Some((&s[..d], a)), row, &mut next[..d]);
                s[..d].copy_from_slice(&next[..d]);
            }
        }
    }

    /// Mean expected reward (actions integrated out) and mean `(g^T theta)^2`.
    fn evaluate(&self, theta: &[f64], steps: usize, discard: usize) -> (f64, f64) {
        let mut reward = 0.0;
        let mut quad = 0.0;
        self.walk(theta, steps, discard, |s, pi| {
            let (r0, r1) = action_rewards(&self.spec, s);
            reward += r0 + pi * (r1 - r0);
            quad += score(theta, s).powi(2);
        });
        let n = (steps - discard) as f64;
        (reward / n, quad / n)
    }

    fn contexts(&self, theta: &[f64], steps: usize, discard: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(steps - discard);
        self.walk(theta, steps, discard, |s, _| out.push(s.to_vec()));
        out
    }
}

/// Regularized average reward under the stationary law the policy induces,
/// estimated on a common-random-number chain.
struct StationaryObjective<'a> {
    chain: &'a ChainNoise,
    steps: usize,
    discard: usize,
    grid_steps: usize,
    grid_discard: usize,
    lambda: f64,
}

impl Objective for StationaryObjective<'_> {
    fn dim(&self) -> usize {
        self.chain.d + 1
    }

    fn value(&self, theta: &[f64]) -> f64 {
        let (r, q) = self.chain.evaluate(theta, self.steps, self.discard);
        r - self.lambda * q
    }

    fn grid_value(&self, theta: &[f64]) -> f64 {
        let (r, q) = self.chain.evaluate(theta, self.grid_steps, self.grid_discard);
        r - self.lambda * q
    }
}

fn discard_count(steps: usize, frac: f64) -> usize {
    ((steps as f64) * frac).floor() as usize
}

/// Contexts from the environment's stationary law. For action-dependent
/// dynamics the chain runs under `theta` and the leading fraction is
/// discarded; otherwise `n` contexts are drawn directly.
pub fn stationary_contexts(spec: &EnvSpec, theta: &[f64], n: usize, cfg: &OracleConfig) -> Vec<Vec<f64>> {
    if spec.action_dependent() {
        let chain = ChainNoise::new(spec, n, cfg.seed);
        chain.contexts(theta, n, discard_count(n, cfg.discard_frac))
    } else {
        let chain = ChainNoise::new(spec, n, cfg.seed);
        chain.contexts(theta, n, 0)
    }
}

/// Population actor problem on fixed contexts with the true contrasts.
fn population_problem(spec: &EnvSpec, contexts: &[Vec<f64>], lambda: f64) -> Result<ActorProblem> {
    let p = spec.context_dim() + 1;
    let mut g = Vec::with_capacity(contexts.len() * p);
    let mut delta = Vec::with_capacity(contexts.len());
    let mut base = 0.0;
    for s in contexts {
        g.push(1.0);
        g.extend_from_slice(s);
        let (r0, r1) = action_rewards(spec, s);
        delta.push(r1 - r0);
        base += r0;
    }
    ActorProblem::from_parts(p, g, delta, base / contexts.len().max(1) as f64, lambda)
}

/// Oracle multiplier and policy: the smallest `lambda` whose population
/// maximizer meets the quadratic constraint.
pub fn oracle_policy(
    spec: &EnvSpec,
    p0: f64,
    alpha: f64,
    bracket: &LambdaBracket,
    cfg: &OracleConfig,
) -> Result<OracleResult> {
    let budget = constraint_budget(p0, alpha)?;
    if !spec.action_dependent() {
        let p = spec.context_dim() + 1;
        let contexts = stationary_contexts(spec, &vec![0.0; p], cfg.mc_contexts, cfg);
        let prob = population_problem(spec, &contexts, 0.0)?;
        let lf = lambda_search_problem(&prob, bracket, budget, &cfg.search, None)?;
        return Ok(OracleResult {
            lambda: lf.lambda,
            theta: lf.fit.theta,
            constraint: lf.constraint,
            budget,
            mc_size: contexts.len(),
            converged: lf.fit.converged,
        });
    }

    let steps = cfg.stationary_steps;
    let chain = ChainNoise::new(spec, steps, cfg.seed);
    let grid_steps = cfg.grid_steps.min(steps);
    let mut obj = StationaryObjective {
        chain: &chain,
        steps,
        discard: discard_count(steps, cfg.discard_frac),
        grid_steps,
        grid_discard: discard_count(grid_steps, cfg.discard_frac),
        lambda: bracket.lo,
    };
    let search = SearchConfig { strategy: SearchStrategy::GridPattern, ..cfg.search };
    let lf = lambda_search_with(bracket, budget, None, |lambda, warm| {
        obj.lambda = lambda;
        let fit = maximize(&obj, &search, warm);
        let (_, q) = chain.evaluate(&fit.theta, obj.steps, obj.discard);
        Ok((fit, q))
    })?;
    Ok(OracleResult {
        lambda: lf.lambda,
        theta: lf.fit.theta,
        constraint: lf.constraint,
        budget,
        mc_size: steps - discard_count(steps, cfg.discard_frac),
        converged: lf.fit.converged,
    })
}

/// Population maximizer of the regularized objective at a fixed multiplier.
pub fn optimal_policy_at(spec: &EnvSpec, lambda: f64, cfg: &OracleConfig) -> Result<FixedLambdaPolicy> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::config("lambda", format!("must be finite and non-negative, got {lambda}")));
    }
    let search = SearchConfig { strategy: SearchStrategy::GridPattern, ..cfg.search };
    if !spec.action_dependent() {
        let p = spec.context_dim() + 1;
        let contexts = stationary_contexts(spec, &vec![0.0; p], cfg.mc_contexts, cfg);
        let prob = population_problem(spec, &contexts, lambda)?;
        let fit = maximize(&prob, &search, None);
        let constraint = prob.constraint(&fit.theta);
        return Ok(FixedLambdaPolicy { theta: fit.theta, constraint, converged: fit.converged });
    }
    let steps = cfg.stationary_steps;
    let chain = ChainNoise::new(spec, steps, cfg.seed);
    let grid_steps = cfg.grid_steps.min(steps);
    let obj = StationaryObjective {
        chain: &chain,
        steps,
        discard: discard_count(steps, cfg.discard_frac),
        grid_steps,
        grid_discard: discard_count(grid_steps, cfg.discard_frac),
        lambda,
    };
    let fit = maximize(&obj, &search, None);
    let (_, constraint) = chain.evaluate(&fit.theta, obj.steps, obj.discard);
    Ok(FixedLambdaPolicy { theta: fit.theta, constraint, converged: fit.converged })
}

/// Fixed point of "solve the actor problem on the stationary contexts the
/// current policy induces". Starts from `init` (zero when `None`).
pub fn myopic_equilibrium(
    spec: &EnvSpec,
    p0: f64,
    alpha: f64,
    bracket: &LambdaBracket,
    cfg: &OracleConfig,
    init: Option<&[f64]>,
) -> Result<MyopicResult> {
    let budget = constraint_budget(p0, alpha)?;
    let p = spec.context_dim() + 1;
    let mut theta = init.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; p]);
    if theta.len() != p {
        return Err(Error::config("init", format!("expected {p} coefficients, got {}", theta.len())));
    }
    let steps = cfg.stationary_steps;
    let chain = ChainNoise::new(spec, steps, cfg.seed);
    let discard = discard_count(steps, cfg.discard_frac);
    let local = SearchConfig { strategy: SearchStrategy::Local, ..cfg.search };
    let grid = SearchConfig { strategy: SearchStrategy::GridPattern, ..cfg.search };
    let mut prev: Option<Vec<f64>> = None;

    for sweep in 1..=cfg.max_sweeps {
        let contexts = chain.contexts(&theta, steps, discard);
        let full = population_problem(spec, &contexts, 0.0)?;
        let stride = (contexts.len() / cfg.grid_rows.max(1)).max(1);
        let sub: Vec<Vec<f64>> = contexts.iter().step_by(stride).cloned().collect();
        let coarse = population_problem(spec, &sub, 0.0)?;
        let mut work = full.clone();
        let mut coarse_work = coarse.clone();
        let start = prev.as_ref().map(|_| theta.clone());
        let lf = lambda_search_with(bracket, budget, start.as_deref(), |lambda, warm| {
            work.set_lambda(lambda);
            let seed = match warm {
                Some(w) => w.to_vec(),
                None => {
                    coarse_work.set_lambda(lambda);
                    maximize(&coarse_work, &grid, None).theta
                }
            };
            let fit: ActorFit = maximize(&work, &local, Some(&seed));
            let c = work.constraint(&fit.theta);
            Ok((fit, c))
        })?;
        let new = lf.fit.theta;
        let step = new.iter().zip(&theta).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        prev = Some(std::mem::replace(&mut theta, new));
        if step < cfg.sweep_tol {
            return Ok(MyopicResult { theta, lambda: lf.lambda, constraint: lf.constraint, sweeps: sweep });
        }
    }
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(", ");
    Err(Error::NoConvergence {
        iterations: cfg.max_sweeps,
        detail: format!(
            "equilibrium iterates [{}] and [{}] still differ by more than {}",
            fmt(prev.as_deref().unwrap_or(&[])),
            fmt(&theta),
            cfg.sweep_tol
        ),
    })
}

/// Long-run average expected reward of `pi_theta` (reward sign, no penalty)
/// and `theta^T E[g g^T] theta` under the stationary law.
fn stationary_value(spec: &EnvSpec, theta: &[f64], cfg: &OracleConfig) -> (f64, f64) {
    if spec.action_dependent() {
        let steps = cfg.stationary_steps;
        ChainNoise::new(spec, steps, cfg.seed).evaluate(theta, steps, discard_count(steps, cfg.discard_frac))
    } else {
        let n = cfg.mc_contexts;
        ChainNoise::new(spec, n, cfg.seed).evaluate(theta, n, 0)
    }
}

/// Average expected reward of `pi_theta` under its stationary law.
pub fn policy_value(spec: &EnvSpec, theta: &[f64], cfg: &OracleConfig) -> f64 {
    stationary_value(spec, theta, cfg).0
}

/// Regularized average outcome of `pi_theta` in the environment's native
/// sign: `E[C] + lambda theta^T G theta` for costs,
/// `E[R] - lambda theta^T G theta` for rewards.
pub fn regularized_cost_eval(spec: &EnvSpec, theta: &[f64], lambda: f64, cfg: &OracleConfig) -> f64 {
    let (r, q) = stationary_value(spec, theta, cfg);
    match spec.sign {
        OutcomeSign::Cost => -r + lambda * q,
        OutcomeSign::Reward => r - lambda * q,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_policy_cost_on_iid() {
        let cfg = OracleConfig { mc_contexts: 200_000, ..Default::default() };
        let v = regularized_cost_eval(&EnvSpec::iid(), &[0.0; 4], 0.05, &cfg);
        assert!((v - 9.9).abs() < 0.01, "{v}");
        let again = regularized_cost_eval(&EnvSpec::iid(), &[0.0; 4], 0.05, &cfg);
        assert_eq!(v, again);
    }

    #[test]
    fn oracle_policy_is_locally_optimal() {
        let spec = EnvSpec::iid();
        let cfg = OracleConfig::default();
        let o = oracle_policy(&spec, 0.1, 0.1, &LambdaBracket::default(), &cfg).unwrap();
        let at = regularized_cost_eval(&spec, &o.theta, o.lambda, &cfg);
        for i in 0..4 {
            for h in [-0.05, 0.05] {
                let mut th = o.theta.clone();
                th[i] += h;
                assert!(regularized_cost_eval(&spec, &th, o.lambda, &cfg) >= at - 1e-9);
            }
        }
    }

    #[test]
    fn fixed_lambda_policy_on_toy() {
        let r = optimal_policy_at(&EnvSpec::toy(), 0.1, &OracleConfig::default()).unwrap();
        assert!(r.converged);
        assert!((r.theta[0] - r.theta[1]).abs() < 0.02, "{:?}", r.theta);
        assert!(optimal_policy_at(&EnvSpec::toy(), -1.0, &OracleConfig::default()).is_err());
    }

    #[test]
    fn chain_contexts_follow_the_policy() {
        let spec = EnvSpec::burden(0.4).unwrap();
        let cfg = OracleConfig { stationary_steps: 20_000, ..Default::default() };
        let never = stationary_contexts(&spec, &[-30.0, 0.0, 0.0, 0.0], 20_000, &cfg);
        let always = stationary_contexts(&spec, &[30.0, 0.0, 0.0, 0.0], 20_000, &cfg);
        let mean3 = |c: &[Vec<f64>]| c.iter().map(|s| s[2]).sum::<f64>() / c.len() as f64;
        assert!(mean3(&never).abs() < 0.05);
        // always treated: s3 = 0.6 s3 + 0.4 + noise has mean 1
        assert!((mean3(&always) - 1.0).abs() < 0.05);
        assert_eq!(never.len(), 18_000);
    }
}
