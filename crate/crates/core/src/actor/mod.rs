//! Actor step: maximize the empirical regularized average reward
//!
//! ```text
//! J(theta) = mean_tau sum_a r_hat(S_tau, a) pi_theta(S_tau, a) - lambda theta^T G theta
//! ```
//!
//! over the policy coefficients, and pick the Lagrange multiplier `lambda`
//! by bisection so that the maximizer meets the quadratic stochasticity
//! constraint `theta^T G theta <= ln(p0 / (1 - p0))^2 alpha`.
//!
//! With two actions the reward term is `mean r_hat(S, 0) + mean Delta(S) pi_theta(S, 1)`
//! where `Delta = r_hat(S, 1) - r_hat(S, 0)`, so an [`ActorProblem`] only
//! stores the policy features, the contrasts and the baseline.

mod search;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::critic::{clip_estimate, CriticState};
use crate::error::{check_dims, Error, Result};
use crate::features::FeatureMap;
use crate::linalg;
use crate::policy::{dot, logistic, PolicyFeature, PolicyParams};

pub use search::{maximize, ActorFit, Objective, SearchConfig, SearchStrategy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintConfig {
    pub p0: f64,
    pub alpha: f64,
    pub lambda: f64,
}

impl ConstraintConfig {
    pub fn new(p0: f64, alpha: f64, lambda: f64) -> Result<Self> {
        let cfg = Self { p0, alpha, lambda };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p0 > 0.0 && self.p0 < 0.5) {
            return Err(Error::config("constraint.p0", format!("must lie in (0, 0.5), got {}", self.p0)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config("constraint.alpha", format!("must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::config("constraint.lambda", format!("must be finite and >= 0, got {}", self.lambda)));
        }
        Ok(())
    }

    pub fn budget(&self) -> Result<f64> {
        constraint_budget(self.p0, self.alpha)
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        Self { lambda, ..self }
    }
}

/// Right-hand side of the quadratic constraint, `ln(p0 / (1 - p0))^2 alpha`.
pub fn constraint_budget(p0: f64, alpha: f64) -> Result<f64> {
    ConstraintConfig { p0, alpha, lambda: 0.0 }.validate()?;
    let logit = (p0 / (1.0 - p0)).ln();
    Ok(logit * logit * alpha)
}

/// Empirical second moment of the policy features, `(1/n) sum g g^T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramEstimate {
    pub g: DMatrix<f64>,
    pub n: usize,
}

impl GramEstimate {
    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    /// `theta^T G theta`.
    pub fn quad(&self, theta: &[f64]) -> f64 {
        let v = linalg::dvec(theta);
        v.dot(&(&self.g * &v))
    }
}

pub fn empirical_gram(features: &[PolicyFeature]) -> Result<GramEstimate> {
    let first = features.first().ok_or_else(|| Error::Data("empirical Gram of an empty feature list".into()))?;
    let p = first.dim();
    let mut acc = vec![0.0; p * p];
    for g in features {
        check_dims("g", p, g.dim())?;
        linalg::add_outer(&mut acc, g.as_slice(), 1.0);
    }
    let n = features.len();
    let mut g = linalg::from_row_major(p, &acc) / n as f64;
    linalg::symmetrize(&mut g);
    Ok(GramEstimate { g, n })
}

pub fn constraint_value(theta: &PolicyParams, gram: &GramEstimate) -> Result<f64> {
    check_dims("theta", gram.dim(), theta.dim())?;
    Ok(gram.quad(theta.as_slice()))
}

/// Empirical regularized objective in contrast form.
#[derive(Debug, Clone)]
pub struct ActorProblem {
    p: usize,
    /// Row-major `n x p` policy features.
    g: Vec<f64>,
    delta: Vec<f64>,
    base: f64,
    /// Row-major `p x p` mean of `g g^T`.
    gram: Vec<f64>,
    lambda: f64,
}

impl ActorProblem {
    /// Builds the problem from flattened policy features, per-row contrasts
    /// and the mean baseline reward.
    pub fn from_parts(p: usize, g: Vec<f64>, delta: Vec<f64>, base: f64, lambda: f64) -> Result<Self> {
        if p == 0 || g.len() != p * delta.len() {
            return Err(Error::config("g", "feature rows do not match the contrast count"));
        }
        if delta.is_empty() {
            return Err(Error::Data("actor objective needs at least one context".into()));
        }
        if g.iter().chain(&delta).any(|x| !x.is_finite()) || !base.is_finite() {
            return Err(Error::Data("actor inputs contain non-finite values".into()));
        }
        let n = delta.len();
        let mut gram = vec![0.0; p * p];
        for row in g.chunks_exact(p) {
            linalg::add_outer(&mut gram, row, 1.0);
        }
        gram.iter_mut().for_each(|x| *x /= n as f64);
        Ok(Self { p, g, delta, base, gram, lambda })
    }

    /// Plug-in problem from critic predictions at the observed contexts.
    /// `clip` is the bound `K` of the clipped estimator, or `None` for raw
    /// predictions.
    pub fn from_critic(
        map: &FeatureMap,
        contexts: &[Vec<f64>],
        mu: &[f64],
        clip: Option<f64>,
        lambda: f64,
    ) -> Result<Self> {
        check_dims("mu", map.reward_dim(), mu.len())?;
        let p = map.policy_dim();
        let mut g = vec![0.0; p * contexts.len()];
        let mut delta = Vec::with_capacity(contexts.len());
        let mut base = 0.0;
        for (s, row) in contexts.iter().zip(g.chunks_exact_mut(p)) {
            check_dims("context", map.context_dim(), s.len())?;
            map.write_policy(s, row);
            let r0 = map.baseline(s, mu);
            let r1 = r0 + map.contrast(s, mu);
            let (r0, r1) = match clip {
                Some(k) => (clip_estimate(r0, k), clip_estimate(r1, k)),
                None => (r0, r1),
            };
            delta.push(r1 - r0);
            base += r0;
        }
        let n = contexts.len().max(1) as f64;
        Self::from_parts(p, g, delta, base / n, lambda)
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn set_lambda(&mut self, lambda: f64) {
        self.lambda = lambda;
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self { lambda, ..self.clone() }
    }

    pub fn gram(&self) -> GramEstimate {
        GramEstimate { g: linalg::from_row_major(self.p, &self.gram), n: self.len() }
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.g.chunks_exact(self.p).zip(self.delta.iter().copied())
    }

    /// `theta^T G theta`.
    pub fn constraint(&self, theta: &[f64]) -> f64 {
        let p = self.p;
        let mut q = 0.0;
        for i in 0..p {
            q += theta[i] * dot(&self.gram[i * p..(i + 1) * p], theta);
        }
        q
    }

    /// Mean of `Delta pi_theta(S, 1)`, the policy-dependent part of the
    /// reward term.
    pub fn treatment_value(&self, theta: &[f64]) -> f64 {
        let s: f64 = self.rows().map(|(g, d)| d * logistic(dot(g, theta))).sum();
        s / self.len() as f64
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        self.base + self.treatment_value(theta) - self.lambda * self.constraint(theta)
    }

    /// Gradient and row-major Hessian.
    pub fn derivatives(&self, theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let p = self.p;
        let mut grad = vec![0.0; p];
        let mut hess = vec![0.0; p * p];
        for (g, d) in self.rows() {
            let pi = logistic(dot(g, theta));
            let w = d * pi * (1.0 - pi);
            for (gr, gi) in grad.iter_mut().zip(g) {
                *gr += w * gi;
            }
            linalg::add_outer(&mut hess, g, w * (1.0 - 2.0 * pi));
        }
        let n = self.len() as f64;
        for i in 0..p {
            grad[i] = grad[i] / n - 2.0 * self.lambda * dot(&self.gram[i * p..(i + 1) * p], theta);
            for j in 0..p {
                hess[i * p + j] = hess[i * p + j] / n - 2.0 * self.lambda * self.gram[i * p + j];
            }
        }
        (grad, hess)
    }
}

impl Objective for ActorProblem {
    fn dim(&self) -> usize {
        self.p
    }

    fn value(&self, theta: &[f64]) -> f64 {
        ActorProblem::value(self, theta)
    }

    fn derivatives(&self, theta: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        Some(ActorProblem::derivatives(self, theta))
    }
}

/// Empirical objective at `theta` for the critic's current estimate.
pub fn objective(
    theta: &PolicyParams,
    map: &FeatureMap,
    contexts: &[Vec<f64>],
    critic: &CriticState,
    cfg: &ConstraintConfig,
    clip: Option<f64>,
) -> Result<f64> {
    let prob = ActorProblem::from_critic(map, contexts, critic.mu_hat(), clip, cfg.lambda)?;
    check_dims("theta", prob.dim(), theta.dim())?;
    Ok(prob.value(theta.as_slice()))
}

/// Maximizer of [`objective`] at the configured `lambda`.
pub fn maximize_objective(
    map: &FeatureMap,
    contexts: &[Vec<f64>],
    critic: &CriticState,
    cfg: &ConstraintConfig,
    clip: Option<f64>,
    search: &SearchConfig,
    warm_start: Option<&PolicyParams>,
) -> Result<ActorFit> {
    let prob = ActorProblem::from_critic(map, contexts, critic.mu_hat(), clip, cfg.lambda)?;
    if let Some(w) = warm_start {
        check_dims("warm_start", prob.dim(), w.dim())?;
    }
    Ok(maximize(&prob, search, warm_start.map(|w| w.as_slice())))
}

/// Bisection bracket for the multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaBracket {
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
}

impl Default for LambdaBracket {
    fn default() -> Self {
        Self { lo: 1.0 / 1024.0, hi: 4.0, tol: 1.0 / 256.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaFit {
    pub lambda: f64,
    pub fit: ActorFit,
    /// `theta^T G theta` at the returned maximizer.
    pub constraint: f64,
    /// Number of inner maximizations performed.
    pub solves: usize,
}

/// Smallest multiplier in `bracket` (to within `bracket.tol`) whose maximizer
/// satisfies `constraint <= budget`. `solve(lambda, warm)` returns the
/// maximizer at `lambda` and its constraint value; `warm` is the solution at
/// the nearest multiplier already solved, or `start` for the first solve.
pub fn lambda_search_with<F>(
    bracket: &LambdaBracket,
    budget: f64,
    start: Option<&[f64]>,
    mut solve: F,
) -> Result<LambdaFit>
where
    F: FnMut(f64, Option<&[f64]>) -> Result<(ActorFit, f64)>,
{
    let LambdaBracket { mut lo, mut hi, tol } = *bracket;
    if !(lo > 0.0 && hi > lo && tol > 0.0) {
        return Err(Error::config("lambda_bracket", "need 0 < lo < hi and tol > 0"));
    }
    let (lo_fit, lo_c) = solve(lo, start)?;
    if lo_c <= budget {
        return Ok(LambdaFit { lambda: lo, fit: lo_fit, constraint: lo_c, solves: 1 });
    }
    let (mut best, mut best_c) = solve(hi, Some(&lo_fit.theta))?;
    let mut solves = 2;
    if best_c > budget {
        return Err(Error::ConstraintUnsatisfiable { lambda: hi, theta: best.theta, value: best_c, budget });
    }
    let mut lo_theta = lo_fit.theta;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        // warm start from whichever solved endpoint is nearer on a log scale
        let warm = if (mid / lo).ln() < (hi / mid).ln() { &lo_theta } else { &best.theta };
        let (fit, c) = solve(mid, Some(warm))?;
        solves += 1;
        if c <= budget {
            hi = mid;
            best = fit;
            best_c = c;
        } else {
            lo = mid;
            lo_theta = fit.theta;
        }
    }
    Ok(LambdaFit { lambda: hi, fit: best, constraint: best_c, solves })
}

/// Multiplier search on a fixed problem, reusing the problem's features.
pub fn lambda_search_problem(
    prob: &ActorProblem,
    bracket: &LambdaBracket,
    budget: f64,
    search: &SearchConfig,
    start: Option<&[f64]>,
) -> Result<LambdaFit> {
    let mut work = prob.clone();
    lambda_search_with(bracket, budget, start, |lambda, warm| {
        work.set_lambda(lambda);
        let fit = maximize(&work, search, warm);
        let c = work.constraint(&fit.theta);
        Ok((fit, c))
    })
}

/// Multiplier search for the critic's current estimate at the observed
/// contexts.
pub fn lambda_search(
    map: &FeatureMap,
    contexts: &[Vec<f64>],
    critic: &CriticState,
    clip: Option<f64>,
    budget: f64,
    bracket: &LambdaBracket,
    search: &SearchConfig,
) -> Result<LambdaFit> {
    let prob = ActorProblem::from_critic(map, contexts, critic.mu_hat(), clip, bracket.lo)?;
    lambda_search_problem(&prob, bracket, budget, search, None)
}
