//! Plug-in asymptotic covariances, Wald intervals, and the percentile-t
//! residual bootstrap.
//!
//! For the regularized objective
//! `J(mu, theta) = E[sum_a f(S,a)^T mu pi_theta(S,a)] - lambda theta^T E[g g^T] theta`
//! the per-context score and its derivatives have the closed forms
//!
//! ```text
//! j        = Delta pi (1 - pi) g - 2 lambda g g^T theta
//! J_tt     = E[Delta pi (1 - pi) (1 - 2 pi) g g^T] - 2 lambda G
//! J_tm     = E[pi (1 - pi) g (f(S,1) - f(S,0))^T]
//! ```
//!
//! with `Delta = (f(S,1) - f(S,0))^T mu`. The actor covariance is the
//! sandwich `J_tt^{-1} V J_tt^{-1}` with
//! `V = sigma^2 J_tm E[f f^T]^{-1} J_mt + E[j j^T]`.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::critic::{centered, residual_variance};
use crate::error::{check_dims, Error, Result};
use crate::features::FeatureMap;
use crate::learner::{Learner, LearnerConfig};
use crate::linalg::{self, add_outer};
use crate::policy::{dot, logistic};
use crate::rng::{stream, RESAMPLE_STREAM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    /// Asymptotic covariance of `sqrt(t) (mu_hat - mu*)`.
    pub critic_cov: DMatrix<f64>,
    /// Asymptotic covariance of `sqrt(t) (theta_hat - theta*)`.
    pub actor_cov: DMatrix<f64>,
    pub sigma2_hat: f64,
}

impl CovarianceReport {
    pub fn actor_var(&self) -> Vec<f64> {
        self.actor_cov.diagonal().iter().copied().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalMethod {
    Wald,
    PercentileT,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSet {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub level: f64,
    pub method: IntervalMethod,
}

impl IntervalSet {
    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn contains(&self, i: usize, x: f64) -> bool {
        self.lower[i] <= x && x <= self.upper[i]
    }

    pub fn half_width(&self, i: usize) -> f64 {
        0.5 * (self.upper[i] - self.lower[i])
    }
}

/// `(1/t) sum_tau sum_a f(S_tau, a) f(S_tau, a)^T pi_theta(S_tau, a)`.
pub fn expected_ff(map: &FeatureMap, contexts: &[Vec<f64>], theta: &[f64]) -> Result<DMatrix<f64>> {
    check_dims("theta", map.policy_dim(), theta.len())?;
    if contexts.is_empty() {
        return Err(Error::Data("expected_ff needs at least one context".into()));
    }
    let k = map.reward_dim();
    let p = map.policy_dim();
    let mut acc = vec![0.0; k * k];
    let mut f = vec![0.0; k];
    for s in contexts {
        check_dims("context", map.context_dim(), s.len())?;
        map.write_reward(s, 1, &mut f);
        let pi = logistic(dot(&f[..p], theta));
        add_outer(&mut acc, &f, pi);
        f[p..].iter_mut().for_each(|x| *x = 0.0);
        add_outer(&mut acc, &f, 1.0 - pi);
    }
    let mut m = linalg::from_row_major(k, &acc) / contexts.len() as f64;
    linalg::symmetrize(&mut m);
    Ok(m)
}

/// Per-context score of the regularized objective with respect to `theta`.
pub fn j_score(mu: &[f64], theta: &[f64], g: &[f64], f0: &[f64], f1: &[f64], lambda: f64) -> Vec<f64> {
    let delta: f64 = f1.iter().zip(f0).zip(mu).map(|((a, b), m)| (a - b) * m).sum();
    let pi = logistic(dot(g, theta));
    let w = delta * pi * (1.0 - pi);
    let gt = dot(g, theta);
    g.iter().map(|gi| w * gi - 2.0 * lambda * gi * gt).collect()
}

/// Averages of the score's derivatives: `(J_tt, J_tm)`, `p x p` and `p x k`.
pub fn j_derivatives(
    map: &FeatureMap,
    mu: &[f64],
    theta: &[f64],
    contexts: &[Vec<f64>],
    lambda: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_dims("mu", map.reward_dim(), mu.len())?;
    check_dims("theta", map.policy_dim(), theta.len())?;
    if contexts.is_empty() {
        return Err(Error::Data("score derivatives need at least one context".into()));
    }
    let p = map.policy_dim();
    let k = map.reward_dim();
    let mut jtt = vec![0.0; p * p];
    let mut jtm = DMatrix::zeros(p, k);
    let mut g = vec![0.0; p];
    for s in contexts {
        map.write_policy(s, &mut g);
        let pi = logistic(dot(&g, theta));
        let delta = map.contrast(s, mu);
        let v = pi * (1.0 - pi);
        add_outer(&mut jtt, &g, delta * v * (1.0 - 2.0 * pi) - 2.0 * lambda);
        // f(s,1) - f(s,0) = [0, g]
        for i in 0..p {
            for j in 0..p {
                jtm[(i, p + j)] += v * g[i] * g[j];
            }
        }
    }
    let n = contexts.len() as f64;
    let mut jtt = linalg::from_row_major(p, &jtt) / n;
    linalg::symmetrize(&mut jtt);
    Ok((jtt, jtm / n))
}

/// `E[j j^T]` over the observed contexts.
pub fn score_outer(map: &FeatureMap, mu: &[f64], theta: &[f64], contexts: &[Vec<f64>], lambda: f64) -> DMatrix<f64> {
    let p = map.policy_dim();
    let mut acc = vec![0.0; p * p];
    let mut g = vec![0.0; p];
    let mut j = vec![0.0; p];
    for s in contexts {
        map.write_policy(s, &mut g);
        let gt = dot(&g, theta);
        let pi = logistic(gt);
        let w = map.contrast(s, mu) * pi * (1.0 - pi) - 2.0 * lambda * gt;
        for (ji, gi) in j.iter_mut().zip(&g) {
            *ji = w * gi;
        }
        add_outer(&mut acc, &j, 1.0);
    }
    linalg::from_row_major(p, &acc) / contexts.len().max(1) as f64
}

/// `E_theta[f f^T]^{-1} sigma^2`.
pub fn critic_covariance(map: &FeatureMap, contexts: &[Vec<f64>], theta: &[f64], sigma2: f64) -> Result<DMatrix<f64>> {
    let eff = expected_ff(map, contexts, theta)?;
    critic_covariance_from(&eff, sigma2)
}

pub fn critic_covariance_from(eff: &DMatrix<f64>, sigma2: f64) -> Result<DMatrix<f64>> {
    Ok(linalg::sym_inverse(eff, "E[f f^T]")? * sigma2)
}

/// Sandwich covariance `J_tt^{-1} V J_tt^{-1}` at `(mu, theta)`.
pub fn actor_covariance(
    map: &FeatureMap,
    mu: &[f64],
    theta: &[f64],
    contexts: &[Vec<f64>],
    lambda: f64,
    sigma2: f64,
) -> Result<DMatrix<f64>> {
    let (jtt, jtm) = j_derivatives(map, mu, theta, contexts, lambda)?;
    let eff = expected_ff(map, contexts, theta)?;
    let b = linalg::sym_inverse(&eff, "E[f f^T]")?;
    let v = &jtm * b * jtm.transpose() * sigma2 + score_outer(map, mu, theta, contexts, lambda);
    let jinv = linalg::sym_inverse(&jtt, "J_theta_theta")?;
    let mut cov = &jinv * v * &jinv;
    linalg::symmetrize(&mut cov);
    Ok(cov)
}

/// Plug-in covariances at the learner's current estimates.
pub fn plug_in(learner: &Learner) -> Result<CovarianceReport> {
    let map = learner.feature_map();
    let contexts = learner.contexts();
    let res = learner.critic().residuals(map, learner.history())?;
    let sigma2_hat = residual_variance(&res, map.reward_dim())?;
    let theta = learner.theta();
    let critic_cov = critic_covariance(map, &contexts, theta, sigma2_hat)?;
    let actor_cov = actor_covariance(map, learner.critic().mu_hat(), theta, &contexts, learner.lambda(), sigma2_hat)?;
    Ok(CovarianceReport { critic_cov, actor_cov, sigma2_hat })
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::config("inference.level", format!("must lie in (0, 1), got {level}")))
    }
}

/// Two-sided normal quantile for coverage `level`.
pub fn normal_quantile(level: f64) -> f64 {
    Normal::standard().inverse_cdf(0.5 + 0.5 * level)
}

/// `theta_i +- z sqrt(V_ii / t)`.
pub fn wald_ci(theta: &[f64], actor_cov: &DMatrix<f64>, t: usize, level: f64) -> Result<IntervalSet> {
    check_level(level)?;
    check_dims("actor_cov", theta.len(), actor_cov.nrows())?;
    if t == 0 {
        return Err(Error::Data("Wald interval needs t > 0".into()));
    }
    let z = normal_quantile(level);
    let (lower, upper) = theta
        .iter()
        .enumerate()
        .map(|(i, &th)| {
            let hw = z * (actor_cov[(i, i)].max(0.0) / t as f64).sqrt();
            (th - hw, th + hw)
        })
        .unzip();
    Ok(IntervalSet { lower, upper, level, method: IntervalMethod::Wald })
}

/// Linear-interpolation sample quantile (type 7) of `xs`.
pub fn quantile(xs: &mut [f64], q: f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let h = (xs.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi || xs[hi] == xs[lo] {
        xs[lo]
    } else {
        xs[lo] + (h - lo as f64) * (xs[hi] - xs[lo])
    }
}

/// One bootstrap estimate and its plug-in variance diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapDraw {
    pub theta: Vec<f64>,
    pub var: Vec<f64>,
}

/// `theta_i +- p_i sqrt(V_i / T)` where `p_i` is the `level` quantile of
/// `|sqrt(T) (theta^b_i - theta_i) / sqrt(V^b_i)|`.
pub fn percentile_t_ci(
    theta: &[f64],
    var: &[f64],
    draws: &[BootstrapDraw],
    t: usize,
    level: f64,
) -> Result<IntervalSet> {
    check_level(level)?;
    check_dims("var", theta.len(), var.len())?;
    if draws.len() < 2 {
        return Err(Error::Inference(format!(
            "percentile-t interval needs at least 2 bootstrap draws, got {}",
            draws.len()
        )));
    }
    let rt = (t as f64).sqrt();
    let mut lower = Vec::with_capacity(theta.len());
    let mut upper = Vec::with_capacity(theta.len());
    let mut piv = Vec::with_capacity(draws.len());
    for i in 0..theta.len() {
        piv.clear();
        for d in draws {
            let diff = d.theta[i] - theta[i];
            piv.push(if diff == 0.0 { 0.0 } else { (rt * diff / d.var[i].sqrt()).abs() });
        }
        let q = quantile(&mut piv, level);
        let hw = q * var[i].max(0.0).sqrt() / rt;
        lower.push(theta[i] - hw);
        upper.push(theta[i] + hw);
    }
    Ok(IntervalSet { lower, upper, level, method: IntervalMethod::PercentileT })
}

/// Reruns the learner over the fixed `contexts` with rewards
/// `f(S, A^b)^T mu_hat + e*`, where `e*` is resampled uniformly from
/// `residual_pool`. Per decision point the action uniform is drawn first,
/// then the residual index.
pub fn bootstrap_replicate(
    cfg: &LearnerConfig,
    map: &FeatureMap,
    contexts: &[Vec<f64>],
    mu_hat: &[f64],
    residual_pool: &[f64],
    seed: u64,
) -> Result<BootstrapDraw> {
    check_dims("mu_hat", map.reward_dim(), mu_hat.len())?;
    if residual_pool.is_empty() {
        return Err(Error::Data("empty residual pool".into()));
    }
    let cfg = LearnerConfig { horizon: contexts.len(), ..cfg.clone() };
    let mut learner = Learner::new(cfg, *map)?;
    let mut rng = stream(seed, RESAMPLE_STREAM);
    for s in contexts {
        let a = learner.act(s, rng.random());
        let e = residual_pool[rng.random_range(0..residual_pool.len())];
        let mean = map.baseline(s, mu_hat) + f64::from(a) * map.contrast(s, mu_hat);
        learner.observe(s, a, mean + e)?;
    }
    let report = plug_in(&learner)?;
    Ok(BootstrapDraw { theta: learner.theta().to_vec(), var: report.actor_var() })
}

/// Centered residuals of a finished learner, the bootstrap resampling pool.
pub fn residual_pool(learner: &Learner) -> Result<Vec<f64>> {
    let res = learner.critic().residuals(learner.feature_map(), learner.history())?;
    Ok(centered(&res))
}
