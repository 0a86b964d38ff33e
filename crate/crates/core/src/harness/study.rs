use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::oracle::regularized_cost_eval;
use super::trajectory::run_trajectory;
use super::RunConfig;
use crate::envs::EnvSpec;
use crate::error::{check_dims, Error, Result};
use crate::inference::{
    bootstrap_replicate, percentile_t_ci, plug_in, residual_pool, wald_ci, BootstrapDraw, IntervalSet,
};
use crate::rng::derive_seed;

/// Domain tag separating bootstrap seeds from other children of a replicate seed.
const BOOTSTRAP_DOMAIN: u64 = 0xB0_07;

/// End-of-study statistics of one simulated user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub index: usize,
    pub seed: u64,
    pub theta: Vec<f64>,
    /// Final multiplier; `None` when the replicate failed before finishing.
    pub lambda: Option<f64>,
    /// Diagonal of the plug-in actor covariance.
    pub plug_in_var: Vec<f64>,
    pub wald: Option<IntervalSet>,
    pub bootstrap: Option<IntervalSet>,
    /// Bootstrap resamples dropped because their rerun failed.
    pub bootstrap_failures: usize,
    pub reg_cost: Option<f64>,
    /// Set when the replicate failed; such replicates are excluded from
    /// every aggregate.
    pub error: Option<String>,
}

impl ReplicateOutcome {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateSummary {
    pub mean: f64,
    pub bias: f64,
    pub mse: f64,
    /// Percentile-t coverage of the reference value.
    pub coverage: Option<f64>,
    pub wald_coverage: Option<f64>,
    /// Mean plug-in variance of `sqrt(T) theta_hat`.
    pub mean_plug_in_var: f64,
    /// Bias against the secondary reference (e.g. the myopic equilibrium).
    pub bias_alt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub replicates: usize,
    pub failures: usize,
    pub theta_star: Vec<f64>,
    pub theta_alt: Option<Vec<f64>>,
    pub coords: Vec<CoordinateSummary>,
    pub mean_lambda: f64,
    pub mean_reg_cost: Option<f64>,
    pub outcomes: Vec<ReplicateOutcome>,
}

impl StudyReport {
    pub fn bias(&self) -> Vec<f64> {
        self.coords.iter().map(|c| c.bias).collect()
    }

    pub fn mse(&self) -> Vec<f64> {
        self.coords.iter().map(|c| c.mse).collect()
    }

    pub fn coverage(&self) -> Vec<Option<f64>> {
        self.coords.iter().map(|c| c.coverage).collect()
    }

    pub fn wald_coverage(&self) -> Vec<Option<f64>> {
        self.coords.iter().map(|c| c.wald_coverage).collect()
    }
}

fn replicate_body(spec: &EnvSpec, cfg: &RunConfig, seed: u64, out: &mut ReplicateOutcome) -> Result<()> {
    let traj = run_trajectory(spec, &cfg.learner, seed)?;
    let learner = &traj.learner;
    let t = learner.t();
    out.theta = learner.theta().to_vec();
    out.lambda = Some(learner.lambda());
    let report = plug_in(learner)?;
    out.plug_in_var = report.actor_var();
    out.wald = Some(wald_ci(&out.theta, &report.actor_cov, t, cfg.level)?);

    if cfg.bootstrap_b >= 2 {
        let pool = residual_pool(learner)?;
        let contexts = learner.contexts();
        let mu_hat = learner.critic().mu_hat().to_vec();
        let map = *learner.feature_map();
        let boot_seed = derive_seed(seed, BOOTSTRAP_DOMAIN);
        let draws: Vec<Result<BootstrapDraw>> = (0..cfg.bootstrap_b)
            .into_par_iter()
            .map(|b| {
                bootstrap_replicate(&cfg.learner, &map, &contexts, &mu_hat, &pool, derive_seed(boot_seed, b as u64))
            })
            .collect();
        let ok: Vec<BootstrapDraw> = draws.into_iter().filter_map(Result::ok).collect();
        out.bootstrap_failures = cfg.bootstrap_b - ok.len();
        out.bootstrap = Some(percentile_t_ci(&out.theta, &out.plug_in_var, &ok, t, cfg.level)?);
    }
    if cfg.evaluate_cost {
        out.reg_cost = Some(regularized_cost_eval(spec, &out.theta, learner.lambda(), &cfg.oracle));
    }
    Ok(())
}

/// Runs replicate `index` of a study. Failures are recorded in the outcome,
/// not returned.
pub fn run_replicate(spec: &EnvSpec, cfg: &RunConfig, index: usize) -> ReplicateOutcome {
    let seed = derive_seed(cfg.seed, index as u64);
    let mut out = ReplicateOutcome {
        index,
        seed,
        theta: Vec::new(),
        lambda: None,
        plug_in_var: Vec::new(),
        wald: None,
        bootstrap: None,
        bootstrap_failures: 0,
        reg_cost: None,
        error: None,
    };
    if let Err(e) = replicate_body(spec, cfg, seed, &mut out) {
        out.error = Some(e.to_string());
    }
    out
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

/// Aggregates outcomes (in index order) against the reference `theta_star`.
/// Fails when at least 1% of the replicates failed.
pub fn aggregate(
    outcomes: Vec<ReplicateOutcome>,
    theta_star: &[f64],
    theta_alt: Option<&[f64]>,
) -> Result<StudyReport> {
    let total = outcomes.len();
    let failed: Vec<&ReplicateOutcome> = outcomes.iter().filter(|o| o.failed()).collect();
    if !failed.is_empty() && failed.len() * 100 >= total {
        return Err(Error::ReplicateFailures {
            failed: failed.len(),
            total,
            first: failed[0].error.clone().unwrap_or_default(),
        });
    }
    let failures = failed.len();
    let ok: Vec<&ReplicateOutcome> = outcomes.iter().filter(|o| !o.failed()).collect();
    if ok.is_empty() {
        return Err(Error::Data("study has no replicates".into()));
    }
    let p = theta_star.len();
    for o in &ok {
        check_dims("theta_star", o.theta.len(), p)?;
    }
    if let Some(alt) = theta_alt {
        check_dims("theta_alt", p, alt.len())?;
    }
    let rate = |hits: Option<Vec<bool>>| hits.map(|h| h.iter().filter(|&&x| x).count() as f64 / h.len() as f64);
    let coords = (0..p)
        .map(|i| {
            let m = mean(ok.iter().map(|o| o.theta[i]));
            let mse = mean(ok.iter().map(|o| (o.theta[i] - theta_star[i]).powi(2)));
            let hits = |get: fn(&ReplicateOutcome) -> Option<&IntervalSet>| {
                ok.iter().map(|o| get(o).map(|ci| ci.contains(i, theta_star[i]))).collect::<Option<Vec<_>>>()
            };
            CoordinateSummary {
                mean: m,
                bias: m - theta_star[i],
                mse,
                coverage: rate(hits(|o| o.bootstrap.as_ref())),
                wald_coverage: rate(hits(|o| o.wald.as_ref())),
                mean_plug_in_var: mean(ok.iter().map(|o| o.plug_in_var[i])),
                bias_alt: theta_alt.map(|alt| m - alt[i]),
            }
        })
        .collect();
    let mean_reg_cost = ok.iter().map(|o| o.reg_cost).collect::<Option<Vec<f64>>>().map(|v| mean(v.into_iter()));
    Ok(StudyReport {
        replicates: ok.len(),
        failures,
        theta_star: theta_star.to_vec(),
        theta_alt: theta_alt.map(<[f64]>::to_vec),
        coords,
        mean_lambda: mean(ok.iter().map(|o| o.lambda.unwrap_or(f64::NAN))),
        mean_reg_cost,
        outcomes,
    })
}

/// Runs `cfg.replicates` independent users and aggregates them against
/// `theta_star`. Replicates run on the current rayon pool; results are
/// reduced in index order.
pub fn replicate_study(
    spec: &EnvSpec,
    cfg: &RunConfig,
    theta_star: &[f64],
    theta_alt: Option<&[f64]>,
) -> Result<StudyReport> {
    cfg.validate()?;
    check_dims("theta_star", spec.context_dim() + 1, theta_star.len())?;
    let outcomes: Vec<ReplicateOutcome> =
        (0..cfg.replicates).into_par_iter().map(|i| run_replicate(spec, cfg, i)).collect();
    aggregate(outcomes, theta_star, theta_alt)
}

/// Dedicated thread pool; `0` lets rayon pick the worker count.
pub fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| Error::config("workers", e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::{LambdaMode, LearnerConfig};

    fn small(replicates: usize, b: usize) -> RunConfig {
        RunConfig {
            learner: LearnerConfig {
                horizon: 60,
                clip: None,
                lambda_mode: LambdaMode::Fixed(0.1),
                ..Default::default()
            },
            replicates,
            bootstrap_b: b,
            seed: 42,
            ..Default::default()
        }
    }

    #[test]
    fn single_replicate_bias_and_mse() {
        let spec = EnvSpec::toy();
        let star = [0.747809, 0.747809];
        let r = replicate_study(&spec, &small(1, 0), &star, None).unwrap();
        let th = &r.outcomes[0].theta;
        for i in 0..2 {
            let b = th[i] - star[i];
            assert_eq!(r.coords[i].bias, b);
            assert!((r.coords[i].mse - b * b).abs() < 1e-15);
        }
        assert!(r.coverage()[0].is_none());
        assert!(r.wald_coverage()[0].is_some());
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let spec = EnvSpec::toy();
        let star = [0.747809, 0.747809];
        let cfg = small(6, 8);
        let one = worker_pool(1).unwrap().install(|| replicate_study(&spec, &cfg, &star, None)).unwrap();
        let three = worker_pool(3).unwrap().install(|| replicate_study(&spec, &cfg, &star, None)).unwrap();
        assert_eq!(one, three);
        for c in &one.coords {
            assert!(c.mse >= c.bias * c.bias - 1e-12);
            let cov = c.coverage.unwrap();
            assert!((0.0..=1.0).contains(&cov));
        }
    }

    #[test]
    fn too_many_failures_abort() {
        let mk = |index, error: Option<&str>| ReplicateOutcome {
            index,
            seed: 0,
            theta: vec![0.0],
            lambda: Some(0.1),
            plug_in_var: vec![1.0],
            wald: None,
            bootstrap: None,
            bootstrap_failures: 0,
            reg_cost: None,
            error: error.map(String::from),
        };
        let mut outs: Vec<_> = (0..99).map(|i| mk(i, None)).collect();
        outs.push(mk(99, Some("boom")));
        assert!(matches!(aggregate(outs.clone(), &[0.0], None), Err(Error::ReplicateFailures { failed: 1, .. })));
        outs.extend((100..200).map(|i| mk(i, None)));
        let r = aggregate(outs, &[0.0], None).unwrap();
        assert_eq!((r.replicates, r.failures), (199, 1));
    }
}
