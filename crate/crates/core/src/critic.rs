//! Ridge-regression critic for the linear reward model `r(s, a) = f(s, a)^T mu`.
//!
//! The estimate `mu_hat = B^{-1} A` with `B = zeta I + sum f f^T` and
//! `A = sum f r` is maintained through a Sherman-Morrison update of `B^{-1}`.
//! The inverse is rebuilt from `B` every [`REFRESH_EVERY`] updates so the
//! incremental value never drifts from a fresh dense solve.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::features::FeatureMap;
use crate::linalg;

/// Number of rank-one updates between full refactorizations of `B`.
pub const REFRESH_EVERY: usize = 256;

/// Reward feature `f(s, a)` (length `k`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RewardFeature(Vec<f64>);

impl RewardFeature {
    pub fn new(f: Vec<f64>) -> Result<Self> {
        if f.iter().any(|x| !x.is_finite()) {
            return Err(Error::Data("reward feature has non-finite entries".into()));
        }
        Ok(Self(f))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// One `(S_t, A_t, R_t)` triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub context: Vec<f64>,
    pub action: u8,
    pub reward: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticState {
    b: DMatrix<f64>,
    b_inv: DMatrix<f64>,
    a: DVector<f64>,
    mu_hat: DVector<f64>,
    n_obs: usize,
    zeta: f64,
    since_refresh: usize,
}

impl CriticState {
    /// `B = zeta I`, `A = 0`, `mu_hat = 0`.
    pub fn new(k: usize, zeta: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::config("k", "reward dimension must be at least 1"));
        }
        if !(zeta > 0.0 && zeta.is_finite()) {
            return Err(Error::config("zeta", format!("must be positive, got {zeta}")));
        }
        Ok(Self {
            b: DMatrix::identity(k, k) * zeta,
            b_inv: DMatrix::identity(k, k) / zeta,
            a: DVector::zeros(k),
            mu_hat: DVector::zeros(k),
            n_obs: 0,
            zeta,
            since_refresh: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn mu_hat(&self) -> &[f64] {
        self.mu_hat.as_slice()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn moment(&self) -> &[f64] {
        self.a.as_slice()
    }

    /// Adds one observation. Non-finite inputs are rejected and leave the
    /// state untouched.
    pub fn update(&mut self, f: &[f64], r: f64) -> Result<()> {
        check_dims("f", self.dim(), f.len())?;
        if !r.is_finite() || f.iter().any(|x| !x.is_finite()) {
            return Err(Error::Data(format!("non-finite observation (r = {r})")));
        }
        let k = self.dim();
        let fv = DVector::from_column_slice(f);
        self.b.ger(1.0, &fv, &fv, 1.0);
        self.a.axpy(r, &fv, 1.0);
        self.n_obs += 1;
        self.since_refresh += 1;

        if self.since_refresh >= REFRESH_EVERY {
            self.refresh();
        } else {
            // (B + f f^T)^{-1} = B^{-1} - (B^{-1} f)(B^{-1} f)^T / (1 + f^T B^{-1} f)
            let u = &self.b_inv * &fv;
            let denom = 1.0 + fv.dot(&u);
            self.b_inv.ger(-1.0 / denom, &u, &u, 1.0);
            self.mu_hat = &self.b_inv * &self.a;
        }
        debug_assert_eq!(self.mu_hat.len(), k);
        Ok(())
    }

    pub fn update_record(&mut self, map: &FeatureMap, rec: &DecisionRecord) -> Result<()> {
        let f = map.reward_feature(&rec.context, rec.action)?;
        self.update(f.as_slice(), rec.reward)
    }

    /// Rebuilds `B^{-1}` and `mu_hat` from the accumulated sums.
    pub fn refresh(&mut self) {
        if let Some(chol) = self.b.clone().cholesky() {
            self.b_inv = chol.inverse();
            self.mu_hat = chol.solve(&self.a);
        }
        linalg::symmetrize(&mut self.b_inv);
        self.since_refresh = 0;
    }

    /// Relative residual `|B mu_hat - A| / |A|` (absolute when `A = 0`).
    pub fn solve_residual(&self) -> f64 {
        let r = (&self.b * &self.mu_hat - &self.a).norm();
        let scale = self.a.norm();
        if scale > 0.0 {
            r / scale
        } else {
            r
        }
    }

    /// `f^T mu_hat`.
    pub fn estimate_raw(&self, f: &[f64]) -> f64 {
        f.iter().zip(self.mu_hat.iter()).map(|(x, m)| x * m).sum()
    }

    /// `f^T mu_hat` clamped to `[-(K+1), K+1]`.
    pub fn estimate_clipped(&self, f: &[f64], bound_k: f64) -> f64 {
        clip_estimate(self.estimate_raw(f), bound_k)
    }

    /// Residuals `R - f(S, A)^T mu_hat` in history order.
    pub fn residuals(&self, map: &FeatureMap, history: &[DecisionRecord]) -> Result<Vec<f64>> {
        let mut f = vec![0.0; map.reward_dim()];
        history
            .iter()
            .map(|rec| {
                check_dims("context", map.context_dim(), rec.context.len())?;
                map.write_reward(&rec.context, rec.action, &mut f);
                Ok(rec.reward - self.estimate_raw(&f))
            })
            .collect()
    }
}

/// Clamp of a raw reward estimate to `[-(K+1), K+1]`.
#[inline]
pub fn clip_estimate(raw: f64, bound_k: f64) -> f64 {
    let b = bound_k + 1.0;
    raw.clamp(-b, b)
}

/// Residual variance with a degrees-of-freedom correction, `sum e^2 / (t - k)`.
pub fn residual_variance(residuals: &[f64], k: usize) -> Result<f64> {
    let t = residuals.len();
    if t <= k {
        return Err(Error::Data(format!("need more than {k} residuals for a variance estimate, got {t}")));
    }
    Ok(residuals.iter().map(|e| e * e).sum::<f64>() / (t - k) as f64)
}

/// Residuals shifted to mean zero, the pool resampled by the bootstrap.
pub fn centered(residuals: &[f64]) -> Vec<f64> {
    if residuals.is_empty() {
        return Vec::new();
    }
    let mean = residuals.iter().sum::<f64>() / residuals.len() as f64;
    residuals.iter().map(|e| e - mean).collect()
}
