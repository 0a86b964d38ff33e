//! Logistic stochastic policy over the binary action set `{0, 1}`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};

/// Policy coefficients `theta` (length `p`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PolicyParams(Vec<f64>);

impl PolicyParams {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::config("theta", "policy dimension must be at least 1"));
        }
        if theta.iter().any(|x| !x.is_finite()) {
            return Err(Error::config("theta", "entries must be finite"));
        }
        Ok(Self(theta))
    }

    pub fn zeros(p: usize) -> Self {
        Self(vec![0.0; p.max(1)])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

impl std::ops::Neg for &PolicyParams {
    type Output = PolicyParams;
    fn neg(self) -> PolicyParams {
        PolicyParams(self.0.iter().map(|x| -x).collect())
    }
}

/// Policy feature `g(s)` (length `p`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PolicyFeature(Vec<f64>);

impl PolicyFeature {
    pub fn new(g: Vec<f64>) -> Result<Self> {
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::config("g", "entries must be finite"));
        }
        Ok(Self(g))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Logistic function evaluated without overflow for large `|x|`.
#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `g(s)^T theta`.
pub fn linear_score(theta: &PolicyParams, g: &PolicyFeature) -> Result<f64> {
    check_dims("g", theta.dim(), g.dim())?;
    Ok(dot(theta.as_slice(), g.as_slice()))
}

/// `pi_theta(s, 1)`; the probability of action 0 is the complement.
pub fn action_prob(theta: &PolicyParams, g: &PolicyFeature) -> Result<f64> {
    linear_score(theta, g).map(logistic)
}

/// Returns action 1 iff `u < pi_theta(s, 1)`.
pub fn sample_action(theta: &PolicyParams, g: &PolicyFeature, u: f64) -> Result<u8> {
    Ok(u8::from(u < action_prob(theta, g)?))
}

/// Gradient of `pi_theta(s, 1)` with respect to `theta`: `pi (1 - pi) g`.
pub fn prob_grad(theta: &PolicyParams, g: &PolicyFeature) -> Result<Vec<f64>> {
    let pi = action_prob(theta, g)?;
    let w = pi * (1.0 - pi);
    Ok(g.as_slice().iter().map(|x| w * x).collect())
}
