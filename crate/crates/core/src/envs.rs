//! Generative environments: context dynamics plus a mean outcome model.
//!
//! The HeartSteps-style kinds produce a sedentary-time *cost* with a
//! three-dimensional context; the toy kind produces a *reward* with a binary
//! context. Outcomes are returned in their native sign; callers that
//! maximize convert with [`EnvSpec::to_reward`].
//!
//! Randomness is consumed in a fixed order at every decision point: the
//! context innovations in component order, then one outcome noise draw.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// AR coefficient of the autoregressive context components.
pub const AR_COEF: f64 = 0.4;
/// Innovation variance that keeps the AR(1) components at unit stationary variance.
pub const AR_INNOVATION_VAR: f64 = 1.0 - AR_COEF * AR_COEF;
/// Outcome noise standard deviation of the toy environment.
pub const TOY_NOISE_SD: f64 = 9.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvKind {
    Iid,
    Ar1,
    Burden { tau: f64 },
    Nonlinear { alpha_nl: f64 },
    ToyBinary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeSign {
    Reward,
    Cost,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub kind: EnvKind,
    pub sign: OutcomeSign,
}

/// Dynamics state carried between decision points.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub prev_context: Option<Vec<f64>>,
    pub prev_action: Option<u8>,
}

impl EnvState {
    pub fn record_action(&mut self, a: u8) {
        self.prev_action = Some(a);
    }
}

impl EnvSpec {
    /// Builds a spec with the kind's native outcome sign.
    pub fn new(kind: EnvKind) -> Result<Self> {
        match kind {
            EnvKind::Burden { tau } if !(tau >= 0.0 && tau.is_finite()) => {
                return Err(Error::config("env.tau", format!("must be finite and >= 0, got {tau}")));
            }
            EnvKind::Nonlinear { alpha_nl } if !(0.0..=1.0).contains(&alpha_nl) => {
                return Err(Error::config("env.alpha_nl", format!("must lie in [0, 1], got {alpha_nl}")));
            }
            _ => {}
        }
        let sign = match kind {
            EnvKind::ToyBinary => OutcomeSign::Reward,
            _ => OutcomeSign::Cost,
        };
        Ok(Self { kind, sign })
    }

    pub fn iid() -> Self {
        Self { kind: EnvKind::Iid, sign: OutcomeSign::Cost }
    }

    pub fn toy() -> Self {
        Self { kind: EnvKind::ToyBinary, sign: OutcomeSign::Reward }
    }

    pub fn burden(tau: f64) -> Result<Self> {
        Self::new(EnvKind::Burden { tau })
    }

    pub fn nonlinear(alpha_nl: f64) -> Result<Self> {
        Self::new(EnvKind::Nonlinear { alpha_nl })
    }

    pub fn context_dim(&self) -> usize {
        match self.kind {
            EnvKind::ToyBinary => 1,
            _ => 3,
        }
    }

    /// Number of random draws consumed by one context transition.
    pub fn noise_dim(&self) -> usize {
        self.context_dim()
    }

    /// Whether past actions influence the context distribution.
    pub fn action_dependent(&self) -> bool {
        matches!(self.kind, EnvKind::Burden { .. })
    }

    /// Whether contexts depend on the previous context at all.
    pub fn has_dynamics(&self) -> bool {
        matches!(self.kind, EnvKind::Ar1 | EnvKind::Burden { .. })
    }

    /// Outcome expressed as a reward to maximize.
    #[inline]
    pub fn to_reward(&self, outcome: f64) -> f64 {
        match self.sign {
            OutcomeSign::Reward => outcome,
            OutcomeSign::Cost => -outcome,
        }
    }

    /// Draws the innovations of one context transition, in component order.
    /// The toy environment draws a single uniform.
    pub fn draw_context_noise<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self.kind {
            EnvKind::ToyBinary => out[0] = rng.random::<f64>(),
            _ => {
                for z in out.iter_mut().take(3) {
                    *z = rng.sample(StandardNormal);
                }
            }
        }
    }

    /// Deterministic transition from standardized innovations. `prev` is the
    /// previous context and action, `None` at the first decision point.
    pub fn transition(&self, prev: Option<(&[f64], u8)>, noise: &[f64], out: &mut [f64]) {
        match (self.kind, prev) {
            (EnvKind::ToyBinary, _) => out[0] = if noise[0] < 0.5 { 1.0 } else { -1.0 },
            (EnvKind::Iid | EnvKind::Nonlinear { .. }, _) | (_, None) => {
                out[..3].copy_from_slice(&noise[..3]);
            }
            (EnvKind::Ar1, Some((s, _))) => {
                let sd = AR_INNOVATION_VAR.sqrt();
                out[0] = AR_COEF * s[0] + sd * noise[0];
                out[1] = AR_COEF * s[1] + sd * noise[1];
                out[2] = noise[2];
            }
            (EnvKind::Burden { .. }, Some((s, a))) => {
                let af = f64::from(a);
                out[0] = AR_COEF * s[0] + noise[0];
                out[1] = AR_COEF * s[1] + noise[1];
                out[2] = 0.4 * s[2] + 0.2 * s[2] * af + 0.4 * af + noise[2];
            }
        }
    }

    /// Draws the next context and stores it in `state`. For the burden kind
    /// the previous action must have been recorded first.
    pub fn next_context<R: Rng + ?Sized>(&self, state: &mut EnvState, rng: &mut R) -> Result<Vec<f64>> {
        let d = self.context_dim();
        let mut noise = [0.0; 3];
        self.draw_context_noise(rng, &mut noise[..d]);
        let mut out = vec![0.0; d];
        let prev = match (&state.prev_context, state.prev_action) {
            (None, _) => None,
            (Some(s), Some(a)) => Some((s.as_slice(), a)),
            (Some(s), None) if !self.action_dependent() => Some((s.as_slice(), 0)),
            (Some(_), None) => {
                return Err(Error::Logic("burden dynamics need the previous action before the next context".into()))
            }
        };
        self.transition(prev, &noise[..d], &mut out);
        state.prev_context = Some(out.clone());
        state.prev_action = None;
        Ok(out)
    }

    /// Noiseless mean outcome in the native sign.
    pub fn true_mean(&self, s: &[f64], a: u8) -> f64 {
        let af = f64::from(a);
        match self.kind {
            EnvKind::ToyBinary => 1.0 + s[0] + af + af * s[0],
            EnvKind::Iid | EnvKind::Ar1 => linear_cost(s[0], s[1], s[2], af, 0.4),
            EnvKind::Burden { tau } => linear_cost(s[0], s[1], s[2], af, tau),
            EnvKind::Nonlinear { alpha_nl } => {
                let q = (1.0 - alpha_nl) * s[0] + alpha_nl * s[0] * s[0];
                linear_cost(q, s[1], s[2], af, 0.4)
            }
        }
    }

    /// Mean outcome plus one noise draw.
    pub fn outcome<R: Rng + ?Sized>(&self, s: &[f64], a: u8, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.true_mean(s, a) + self.noise_sd() * z
    }

    pub fn noise_sd(&self) -> f64 {
        match self.kind {
            EnvKind::ToyBinary => TOY_NOISE_SD,
            _ => 1.0,
        }
    }

    /// Coefficients of the mean model on `f(s, a)` in the native sign, for
    /// kinds whose mean is linear in the reward feature.
    pub fn linear_mean_params(&self) -> Option<Vec<f64>> {
        let c3 = match self.kind {
            EnvKind::ToyBinary => return Some(vec![1.0, 1.0, 1.0, 1.0]),
            EnvKind::Iid | EnvKind::Ar1 | EnvKind::Nonlinear { alpha_nl: 0.0 } => 0.4,
            EnvKind::Nonlinear { .. } => return None,
            EnvKind::Burden { tau } => tau,
        };
        Some(vec![10.0, -0.4, -0.4, c3, -0.2, -0.2, -0.2, 0.0])
    }
}

#[inline]
fn linear_cost(s1: f64, s2: f64, s3: f64, a: f64, c3: f64) -> f64 {
    10.0 - 0.4 * s1 - 0.4 * s2 - a * (0.2 + 0.2 * s1 + 0.2 * s2) + c3 * s3
}
