//! Derivative-free and Newton-type maximization of small objectives.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// A scalar objective to maximize over `R^p`.
pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, theta: &[f64]) -> f64;
    /// Cheaper approximation used only to rank coarse grid points.
    fn grid_value(&self, theta: &[f64]) -> f64 {
        self.value(theta)
    }
    /// Gradient and row-major Hessian, when available in closed form.
    fn derivatives(&self, _theta: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStrategy {
    /// Coarse grid, compass pattern search from the best seed, then a
    /// Newton polish when derivatives exist.
    GridPattern,
    /// Damped Newton ascent from the warm start (and from zero). Falls back
    /// to the grid for seeding when no warm start is given.
    Local,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub strategy: SearchStrategy,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_step: f64,
    pub pattern_step: f64,
    pub pattern_tol: f64,
    pub max_evals: usize,
    /// Stationarity threshold on the gradient's max-norm.
    pub grad_tol: f64,
    pub newton_iters: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            strategy: SearchStrategy::GridPattern,
            grid_lo: -2.0,
            grid_hi: 2.0,
            grid_step: 0.5,
            pattern_step: 0.25,
            pattern_tol: 1e-4,
            max_evals: 2000,
            grad_tol: 1e-3,
            newton_iters: 100,
        }
    }
}

impl SearchConfig {
    pub fn local() -> Self {
        Self { strategy: SearchStrategy::Local, ..Self::default() }
    }

    fn grid_points(&self) -> usize {
        ((self.grid_hi - self.grid_lo) / self.grid_step).round() as usize + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorFit {
    pub theta: Vec<f64>,
    pub value: f64,
    /// `max_i |dJ/dtheta_i|` at `theta`; NaN when the objective has no
    /// closed-form gradient.
    pub grad_inf: f64,
    /// Stationarity reached (or pattern step fell below tolerance for
    /// derivative-free objectives).
    pub converged: bool,
    pub evaluations: usize,
}

const TIE_EPS: f64 = 1e-12;

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// `true` when `(v, x)` beats the incumbent `(bv, bx)`: larger value, or an
/// equal value (within `TIE_EPS`) at a smaller norm.
fn better(v: f64, x: &[f64], bv: f64, bx: &[f64]) -> bool {
    if v > bv + TIE_EPS {
        true
    } else if v >= bv - TIE_EPS {
        norm2(x) < norm2(bx)
    } else {
        false
    }
}

struct Counter<'a, O: Objective + ?Sized> {
    obj: &'a O,
    evals: usize,
}

fn finite_or_worst(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

impl<O: Objective + ?Sized> Counter<'_, O> {
    fn value(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        finite_or_worst(self.obj.value(x))
    }

    fn grid_value(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        finite_or_worst(self.obj.grid_value(x))
    }
}

fn grid_search<O: Objective + ?Sized>(c: &mut Counter<O>, cfg: &SearchConfig) -> (Vec<f64>, f64) {
    let p = c.obj.dim();
    let m = cfg.grid_points();
    let mut idx = vec![0usize; p];
    let mut x = vec![cfg.grid_lo; p];
    let mut best = x.clone();
    let mut bv = f64::NEG_INFINITY;
    loop {
        for (xi, &k) in x.iter_mut().zip(&idx) {
            *xi = cfg.grid_lo + k as f64 * cfg.grid_step;
        }
        let v = c.grid_value(&x);
        if better(v, &x, bv, &best) {
            bv = v;
            best.copy_from_slice(&x);
        }
        // odometer increment, last coordinate fastest
        let mut d = p;
        loop {
            if d == 0 {
                return (best, bv);
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < m {
                break;
            }
            idx[d] = 0;
        }
    }
}

/// Compass search: poll `+-step` along each axis in order, move to the
/// first improving point, halve the step when no poll improves.
fn pattern_search<O: Objective + ?Sized>(
    c: &mut Counter<O>,
    cfg: &SearchConfig,
    mut x: Vec<f64>,
    mut fx: f64,
    budget_end: usize,
) -> (Vec<f64>, f64, bool) {
    let mut step = cfg.pattern_step;
    let mut trial = x.clone();
    while step >= cfg.pattern_tol {
        if c.evals >= budget_end {
            return (x, fx, false);
        }
        let mut improved = false;
        'poll: for i in 0..x.len() {
            for sgn in [1.0, -1.0] {
                trial.copy_from_slice(&x);
                trial[i] += sgn * step;
                let v = c.value(&trial);
                if v > fx + TIE_EPS {
                    x.copy_from_slice(&trial);
                    fx = v;
                    improved = true;
                    break 'poll;
                }
                if c.evals >= budget_end {
                    return (x, fx, false);
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (x, fx, true)
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

/// Damped Newton ascent with a Levenberg shift that makes the model
/// Hessian negative definite, and Armijo backtracking.
fn newton_ascent<O: Objective + ?Sized>(
    c: &mut Counter<O>,
    mut x: Vec<f64>,
    mut fx: f64,
    max_iter: usize,
) -> Option<(Vec<f64>, f64, Vec<f64>)> {
    let p = x.len();
    let (mut grad, mut hess) = c.obj.derivatives(&x)?;
    let mut trial = vec![0.0; p];
    for _ in 0..max_iter {
        if inf_norm(&grad) < 1e-10 {
            break;
        }
        let g = DVector::from_column_slice(&grad);
        let neg_h = -DMatrix::from_row_slice(p, p, &hess);
        let scale = neg_h.diagonal().iter().fold(1e-12f64, |a, v| a.max(v.abs()));
        let mut shift = 0.0;
        let dir = loop {
            let m = &neg_h + DMatrix::identity(p, p) * shift;
            if let Some(ch) = m.cholesky() {
                break ch.solve(&g);
            }
            shift = if shift == 0.0 { 1e-8 * scale } else { shift * 10.0 };
        };
        let slope = g.dot(&dir);
        // predicted gain is below what `value` can resolve
        if slope.is_nan() || slope <= 1e-15 * (1.0 + fx.abs()) {
            break;
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..50 {
            for i in 0..p {
                trial[i] = x[i] + t * dir[i];
            }
            let v = c.value(&trial);
            if v >= fx + 1e-4 * t * slope {
                accepted = v > fx || t * inf_norm(dir.as_slice()) < 1e-14;
                if v > fx {
                    x.copy_from_slice(&trial);
                    fx = v;
                }
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        let (gn, hn) = c.obj.derivatives(&x)?;
        grad = gn;
        hess = hn;
    }
    Some((x, fx, grad))
}

/// Maximizes `obj`. `warm` is an extra starting point (typically the
/// previous decision point's estimate).
pub fn maximize<O: Objective + ?Sized>(obj: &O, cfg: &SearchConfig, warm: Option<&[f64]>) -> ActorFit {
    let p = obj.dim();
    let mut c = Counter { obj, evals: 0 };

    let (mut x, mut fx, mut pattern_ok) = match (cfg.strategy, warm) {
        (SearchStrategy::Local, Some(w)) => {
            let v = c.value(w);
            (w.to_vec(), v, true)
        }
        _ => {
            let (mut x, _) = grid_search(&mut c, cfg);
            let mut fx = c.value(&x);
            if let Some(w) = warm {
                let v = c.value(w);
                if better(v, w, fx, &x) {
                    x = w.to_vec();
                    fx = v;
                }
            }
            if cfg.strategy == SearchStrategy::GridPattern || obj.derivatives(&x).is_none() {
                let end = c.evals + cfg.max_evals;
                let (px, pf, ok) = pattern_search(&mut c, cfg, x, fx, end);
                (px, pf, ok)
            } else {
                (x, fx, true)
            }
        }
    };

    let mut grad = None;
    if let Some((nx, nf, g)) = newton_ascent(&mut c, x.clone(), fx, cfg.newton_iters) {
        if nf >= fx {
            x = nx;
            fx = nf;
            grad = Some(g);
        }
        if cfg.strategy == SearchStrategy::Local {
            // guard against a warm start stuck in a worse basin than the origin
            let zero = vec![0.0; p];
            let f0 = c.value(&zero);
            if f0 > fx + TIE_EPS {
                if let Some((zx, zf, zg)) = newton_ascent(&mut c, zero, f0, cfg.newton_iters) {
                    x = zx;
                    fx = zf;
                    grad = Some(zg);
                }
            }
        }
        if grad.is_none() {
            grad = obj.derivatives(&x).map(|(g, _)| g);
        }
    }
    if cfg.strategy == SearchStrategy::Local && grad.is_none() {
        // no derivatives: fall back to pattern search from the warm start
        let end = c.evals + cfg.max_evals;
        let (px, pf, ok) = pattern_search(&mut c, cfg, x, fx, end);
        x = px;
        fx = pf;
        pattern_ok = ok;
    }

    let (grad_inf, converged) = match grad {
        Some(g) => {
            let gi = inf_norm(&g);
            (gi, gi <= cfg.grad_tol)
        }
        None => (f64::NAN, pattern_ok),
    };
    ActorFit { theta: x, value: fx, grad_inf, converged, evaluations: c.evals }
}
