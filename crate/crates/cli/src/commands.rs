use std::path::{Path, PathBuf};

use acbandit_core::harness::{
    aggregate, myopic_equilibrium, optimal_policy_at, oracle_policy, regret_curve, run_replicate, run_trajectory,
    worker_pool, PolicySource, ReplicateOutcome, StudyReport,
};
use acbandit_core::inference::{plug_in, wald_ci};
use acbandit_core::learner::LambdaMode;
use acbandit_core::{EnvKind, EnvSpec, RunConfig};
use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde_json::json;

use crate::checkpoint::Checkpoint;
use crate::config::ExperimentFile;
use crate::output::{cols, num, opt, Table};

/// Replicates dispatched between checkpoint flushes, per worker.
const CHUNK_PER_WORKER: usize = 4;

pub struct Experiment {
    pub file: ExperimentFile,
    pub spec: EnvSpec,
    pub cfg: RunConfig,
    pub out: PathBuf,
}

impl Experiment {
    pub fn new(file: ExperimentFile) -> Result<Self> {
        let spec = file.env_spec()?;
        let cfg = file.run_config()?;
        let out = file.output.dir.clone();
        std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        Ok(Self { file, spec, cfg, out })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn p(&self) -> usize {
        self.spec.context_dim() + 1
    }

    fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        Ok(worker_pool(self.file.run.workers)?.install(f))
    }
}

/// One trajectory: `trajectory.csv` (one row per decision point) and
/// `summary.csv` (end-of-study estimate with plug-in Wald intervals).
pub fn run(exp: &Experiment) -> Result<()> {
    let traj = run_trajectory(&exp.spec, &exp.cfg.learner, exp.cfg.seed)?;
    let l = &traj.learner;
    let d = exp.spec.context_dim();
    let p = exp.p();
    let first = exp.cfg.learner.first_update();

    let mut header = vec!["t".to_string()];
    header.extend((1..=d).map(|i| format!("s{i}")));
    header.extend(["a", "outcome", "pi"].map(String::from));
    header.extend(cols("theta", p));
    header.push("lambda".into());
    let mut table = Table::create(&exp.path("trajectory.csv"), header)?;
    let zero = vec![0.0; p];
    for (i, rec) in l.history().iter().enumerate() {
        let t = i + 1;
        let (theta, lambda) = match t.checked_sub(first) {
            Some(k) => (&l.theta_path()[k], l.lambda_path()[k]),
            None => (&zero, f64::NAN),
        };
        let mut row = vec![t.to_string()];
        row.extend(rec.context.iter().map(|&x| num(x)));
        row.push(rec.action.to_string());
        row.push(num(traj.outcomes[i]));
        row.push(num(traj.probs[i]));
        row.extend(theta.iter().map(|&x| num(x)));
        row.push(if lambda.is_nan() { String::new() } else { num(lambda) });
        table.row(row)?;
    }
    table.finish()?;

    let mut header: Vec<String> = ["seed", "T", "lambda", "sigma2_hat"].map(String::from).to_vec();
    header.extend(cols("theta", p));
    header.extend(cols("plug_in_var", p));
    header.extend(cols("wald_lower", p));
    header.extend(cols("wald_upper", p));
    let mut table = Table::create(&exp.path("summary.csv"), header)?;
    let mut row = vec![exp.cfg.seed.to_string(), l.t().to_string(), num(l.lambda())];
    match plug_in(l) {
        Ok(rep) => {
            let ci = wald_ci(l.theta(), &rep.actor_cov, l.t(), exp.cfg.level)?;
            row.push(num(rep.sigma2_hat));
            row.extend(l.theta().iter().map(|&x| num(x)));
            row.extend(rep.actor_var().iter().map(|&x| num(x)));
            row.extend(ci.lower.iter().chain(&ci.upper).map(|&x| num(x)));
        }
        Err(e) => {
            eprintln!("warning: plug-in covariance unavailable: {e}");
            row.push(String::new());
            row.extend(l.theta().iter().map(|&x| num(x)));
            row.extend(std::iter::repeat_n(String::new(), 3 * p));
        }
    }
    table.row(row)?;
    table.finish()
}

struct Reference {
    theta: Vec<f64>,
    source: &'static str,
    alt: Option<Vec<f64>>,
}

fn reference(exp: &Experiment) -> Result<Reference> {
    let c = &exp.cfg.learner;
    let check = |name: &str, v: &[f64]| -> Result<()> {
        if v.len() != exp.p() {
            bail!("run.{name} needs {} coefficients, got {}", exp.p(), v.len());
        }
        Ok(())
    };
    let (theta, source) = match &exp.file.run.theta_star {
        Some(t) => {
            check("theta_star", t)?;
            (t.clone(), "pinned")
        }
        None => match c.lambda_mode {
            LambdaMode::Fixed(lambda) => {
                let r = exp.install(|| optimal_policy_at(&exp.spec, lambda, &exp.cfg.oracle))??;
                (r.theta, "fixed-lambda optimum")
            }
            LambdaMode::Search { .. } => {
                let r = exp.install(|| oracle_policy(&exp.spec, c.p0, c.alpha, &c.bracket, &exp.cfg.oracle))??;
                (r.theta, "oracle")
            }
        },
    };
    let alt = match (&exp.file.run.theta_alt, exp.spec.kind) {
        (Some(t), _) => {
            check("theta_alt", t)?;
            Some(t.clone())
        }
        (None, EnvKind::Burden { .. }) => {
            let m =
                exp.install(|| myopic_equilibrium(&exp.spec, c.p0, c.alpha, &c.bracket, &exp.cfg.oracle, None))??;
            Some(m.theta)
        }
        (None, _) => None,
    };
    Ok(Reference { theta, source, alt })
}

fn fingerprint(exp: &Experiment, r: &Reference) -> Result<serde_json::Value> {
    let mut cfg = exp.cfg.clone();
    cfg.replicates = 0;
    Ok(json!({
        "env": serde_json::to_value(exp.spec)?,
        "run": serde_json::to_value(&cfg)?,
        "theta_star": r.theta,
    }))
}

fn run_replicates(exp: &Experiment, r: &Reference) -> Result<Vec<ReplicateOutcome>> {
    let n = exp.cfg.replicates;
    if !exp.file.output.checkpoint {
        return exp.install(|| (0..n).into_par_iter().map(|i| run_replicate(&exp.spec, &exp.cfg, i)).collect());
    }
    let (mut cp, mut done) = Checkpoint::open(&exp.out, fingerprint(exp, r)?)?;
    done.retain(|&i, _| i < n);
    let todo: Vec<usize> = (0..n).filter(|i| !done.contains_key(i)).collect();
    if !done.is_empty() {
        eprintln!("resuming: {} of {n} replicates already finished", done.len());
    }
    let pool = worker_pool(exp.file.run.workers)?;
    let chunk = (pool.current_num_threads() * CHUNK_PER_WORKER).max(1);
    for batch in todo.chunks(chunk) {
        let outs: Vec<ReplicateOutcome> =
            pool.install(|| batch.par_iter().map(|&i| run_replicate(&exp.spec, &exp.cfg, i)).collect());
        cp.append(&outs)?;
        done.extend(outs.into_iter().map(|o| (o.index, o)));
    }
    Ok(done.into_values().collect())
}

fn write_study(exp: &Experiment, outcomes: &[ReplicateOutcome]) -> Result<()> {
    let p = exp.p();
    let mut header: Vec<String> = ["replicate", "seed", "lambda"].map(String::from).to_vec();
    header.extend(cols("theta", p));
    header.extend(cols("plug_in_var", p));
    header.extend(cols("wald_lower", p));
    header.extend(cols("wald_upper", p));
    header.extend(cols("boot_lower", p));
    header.extend(cols("boot_upper", p));
    header.extend(["boot_failures", "reg_cost", "error"].map(String::from));
    let mut table = Table::create(&exp.path("study.csv"), header)?;
    let blank = |n: usize| std::iter::repeat_n(String::new(), n);
    for o in outcomes {
        let mut row = vec![o.index.to_string(), o.seed.to_string(), opt(o.lambda)];
        let padded = |v: &[f64]| -> Vec<String> {
            if v.len() == p {
                v.iter().map(|&x| num(x)).collect()
            } else {
                blank(p).collect()
            }
        };
        row.extend(padded(&o.theta));
        row.extend(padded(&o.plug_in_var));
        for ci in [&o.wald, &o.bootstrap] {
            match ci {
                Some(ci) => row.extend(ci.lower.iter().chain(&ci.upper).map(|&x| num(x))),
                None => row.extend(blank(2 * p)),
            }
        }
        row.push(o.bootstrap_failures.to_string());
        row.push(opt(o.reg_cost));
        row.push(o.error.clone().unwrap_or_default());
        table.row(row)?;
    }
    table.finish()
}

/// One row in the layout of the paper's tables: bias and MSE per
/// coordinate, then coverage rates.
fn write_aggregates(exp: &Experiment, rep: &StudyReport, source: &str) -> Result<()> {
    let p = exp.p();
    let mut header: Vec<String> =
        ["T", "replicates", "failures", "reference", "mean_lambda"].map(String::from).to_vec();
    for name in ["theta_star", "bias", "mse", "coverage", "wald_coverage", "mean_plug_in_var", "bias_alt"] {
        header.extend(cols(name, p));
    }
    header.push("mean_reg_cost".into());
    let mut table = Table::create(&exp.path("aggregates.csv"), header)?;
    let mut row = vec![
        exp.cfg.learner.horizon.to_string(),
        rep.replicates.to_string(),
        rep.failures.to_string(),
        source.to_string(),
        num(rep.mean_lambda),
    ];
    row.extend(rep.theta_star.iter().map(|&x| num(x)));
    row.extend(rep.coords.iter().map(|c| num(c.bias)));
    row.extend(rep.coords.iter().map(|c| num(c.mse)));
    row.extend(rep.coords.iter().map(|c| opt(c.coverage)));
    row.extend(rep.coords.iter().map(|c| opt(c.wald_coverage)));
    row.extend(rep.coords.iter().map(|c| num(c.mean_plug_in_var)));
    row.extend(rep.coords.iter().map(|c| opt(c.bias_alt)));
    row.push(opt(rep.mean_reg_cost));
    table.row(row)?;
    table.finish()
}

/// Replicate study: `study.csv` (one row per replicate) and `aggregates.csv`.
pub fn study(exp: &Experiment) -> Result<()> {
    let r = reference(exp)?;
    let outcomes = run_replicates(exp, &r)?;
    write_study(exp, &outcomes)?;
    let rep = aggregate(outcomes, &r.theta, r.alt.as_deref())?;
    write_aggregates(exp, &rep, r.source)
}

pub fn oracle(exp: &Experiment) -> Result<()> {
    let c = &exp.cfg.learner;
    let r = exp.install(|| oracle_policy(&exp.spec, c.p0, c.alpha, &c.bracket, &exp.cfg.oracle))??;
    let mut header: Vec<String> = vec!["lambda".into()];
    header.extend(cols("theta", exp.p()));
    header.extend(["constraint", "budget", "mc_size", "converged"].map(String::from));
    let mut table = Table::create(&exp.path("oracle.csv"), header)?;
    let mut row = vec![num(r.lambda)];
    row.extend(r.theta.iter().map(|&x| num(x)));
    row.extend([num(r.constraint), num(r.budget), r.mc_size.to_string(), r.converged.to_string()]);
    table.row(row)?;
    table.finish()
}

pub fn myopic(exp: &Experiment) -> Result<()> {
    let c = &exp.cfg.learner;
    let m = exp.install(|| myopic_equilibrium(&exp.spec, c.p0, c.alpha, &c.bracket, &exp.cfg.oracle, None))??;
    let mut header: Vec<String> = vec!["lambda".into()];
    header.extend(cols("theta", exp.p()));
    header.extend(["constraint", "sweeps"].map(String::from));
    let mut table = Table::create(&exp.path("myopic.csv"), header)?;
    let mut row = vec![num(m.lambda)];
    row.extend(m.theta.iter().map(|&x| num(x)));
    row.extend([num(m.constraint), m.sweeps.to_string()]);
    table.row(row)?;
    table.finish()
}

/// Mean cumulative regret of the learner against the reference policy.
pub fn regret(exp: &Experiment) -> Result<()> {
    let r = reference(exp)?;
    let horizon = exp.cfg.learner.horizon;
    let checkpoints = match &exp.file.output.regret_checkpoints {
        c if c.is_empty() => {
            let mut c: Vec<usize> = vec![(horizon / 4).max(1), (horizon / 2).max(1), horizon];
            c.dedup();
            c
        }
        c => c.clone(),
    };
    let curve = exp.install(|| regret_curve(&exp.spec, &exp.cfg, &r.theta, &PolicySource::Learner, &checkpoints))??;
    let header = ["t", "regret", "std_err", "regret_over_sqrt_t"].map(String::from).to_vec();
    let mut table = Table::create(&exp.path("regret.csv"), header)?;
    for pt in curve {
        table.row(vec![pt.t.to_string(), num(pt.regret), num(pt.std_err), num(pt.regret / (pt.t as f64).sqrt())])?;
    }
    table.finish()
}

pub fn load(path: &Path, overrides: &crate::config::Overrides) -> Result<Experiment> {
    let mut file = ExperimentFile::load(path)?;
    file.apply(overrides);
    Experiment::new(file)
}
