//! Experiment files: TOML with `[env]`, `[constraint]`, `[run]`,
//! `[inference]` and `[output]` sections.
//!
//! Values are layered: built-in defaults, then the file, then environment
//! variables named `ACBANDIT_<SECTION>__<KEY>` (e.g. `ACBANDIT_RUN__T=500`),
//! then command-line flags. Unknown sections or keys are rejected.

use std::path::{Path, PathBuf};

use acbandit_core::{
    EnvKind, EnvSpec, LambdaBracket, LambdaMode, LearnerConfig, OracleConfig, OutcomeSign, RunConfig, SearchConfig,
    SearchStrategy,
};
use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

pub const ENV_PREFIX: &str = "ACBANDIT_";
const SECTIONS: [&str; 5] = ["env", "constraint", "run", "inference", "output"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvName {
    Iid,
    Ar1,
    Burden,
    Nonlinear,
    ToyBinary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvSection {
    pub kind: EnvName,
    pub tau: Option<f64>,
    pub alpha_nl: Option<f64>,
    /// Defaults to the kind's native sign.
    pub sign: Option<OutcomeSign>,
}

impl Default for EnvSection {
    fn default() -> Self {
        Self { kind: EnvName::Iid, tau: None, alpha_nl: None, sign: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaModeName {
    Search,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstraintSection {
    pub p0: f64,
    pub alpha: f64,
    pub lambda_mode: LambdaModeName,
    /// Multiplier used when `lambda_mode = "fixed"`.
    pub lambda: Option<f64>,
    pub search_every: usize,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub lambda_tol: f64,
}

impl Default for ConstraintSection {
    fn default() -> Self {
        let b = LambdaBracket::default();
        Self {
            p0: 0.1,
            alpha: 0.1,
            lambda_mode: LambdaModeName::Search,
            lambda: None,
            search_every: 10,
            lambda_lo: b.lo,
            lambda_hi: b.hi,
            lambda_tol: b.tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    #[serde(rename = "T", alias = "t")]
    pub horizon: usize,
    pub burn_in: usize,
    pub zeta: f64,
    pub clip: bool,
    pub clip_bound: f64,
    pub seed: u64,
    pub replicates: usize,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    pub optimizer: SearchStrategy,
    /// Pinned reference policy for bias and coverage (computed when absent).
    pub theta_star: Option<Vec<f64>>,
    /// Secondary reference reported as a diagnostic (the myopic equilibrium
    /// is computed for burden environments when absent).
    pub theta_alt: Option<Vec<f64>>,
    pub oracle_mc_contexts: usize,
    pub oracle_steps: usize,
    pub oracle_seed: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        let l = LearnerConfig::default();
        let o = OracleConfig::default();
        Self {
            horizon: l.horizon,
            burn_in: l.burn_in,
            zeta: l.zeta,
            clip: true,
            clip_bound: 1.0,
            seed: 1,
            replicates: 1000,
            workers: 0,
            optimizer: SearchStrategy::Local,
            theta_star: None,
            theta_alt: None,
            oracle_mc_contexts: o.mc_contexts,
            oracle_steps: o.stationary_steps,
            oracle_seed: o.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InferenceSection {
    pub bootstrap_b: usize,
    pub level: f64,
    pub evaluate_cost: bool,
}

impl Default for InferenceSection {
    fn default() -> Self {
        Self { bootstrap_b: 500, level: 0.95, evaluate_cost: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Append finished replicates to `checkpoint.jsonl` and resume from it.
    pub checkpoint: bool,
    /// Decision points reported by the `regret` command (defaults to T/4,
    /// T/2 and T).
    pub regret_checkpoints: Vec<usize>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), checkpoint: true, regret_checkpoints: Vec::new() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentFile {
    pub env: EnvSection,
    pub constraint: ConstraintSection,
    pub run: RunSection,
    pub inference: InferenceSection,
    pub output: OutputSection,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub replicates: Option<usize>,
}

/// Parses a scalar or array from an environment variable; anything that is
/// not valid TOML is taken as a bare string.
fn env_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn apply_env<I>(table: &mut toml::Table, vars: I) -> Result<()>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut vars: Vec<_> = vars.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    vars.sort();
    for (name, raw) in vars {
        let rest = &name[ENV_PREFIX.len()..];
        let (section, key) =
            rest.split_once("__").ok_or_else(|| anyhow!("{name}: expected {ENV_PREFIX}<SECTION>__<KEY>"))?;
        let section = section.to_ascii_lowercase();
        if !SECTIONS.contains(&section.as_str()) {
            bail!("{name}: unknown section `{section}`");
        }
        let key = match key.to_ascii_lowercase() {
            k if section == "run" && k == "t" => "T".to_string(),
            k => k,
        };
        let entry = table.entry(section.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        let sub = entry.as_table_mut().ok_or_else(|| anyhow!("[{section}] must be a table"))?;
        sub.insert(key, env_value(&raw));
    }
    Ok(())
}

impl ExperimentFile {
    #[cfg(test)]
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with_env(text, std::iter::empty())
    }

    pub fn parse_with_env<I>(text: &str, vars: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut table: toml::Table = toml::from_str(text).context("experiment file is not valid TOML")?;
        apply_env(&mut table, vars)?;
        let exp: ExperimentFile = toml::Value::Table(table).try_into().context("invalid experiment file")?;
        Ok(exp)
    }

    /// Reads `path` with environment overrides from the process environment.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse_with_env(&text, std::env::vars()).with_context(|| format!("in {}", path.display()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.run.seed = s;
        }
        if let Some(d) = &o.out {
            self.output.dir = d.clone();
        }
        if let Some(w) = o.workers {
            self.run.workers = w;
        }
        if let Some(r) = o.replicates {
            self.run.replicates = r;
        }
    }

    pub fn env_spec(&self) -> Result<EnvSpec> {
        let e = &self.env;
        let only = |key: &str, value: Option<f64>, allowed: EnvName| -> Result<()> {
            if value.is_some() && e.kind != allowed {
                bail!("env.{key} is only valid for kind = \"{}\"", name_of(allowed));
            }
            Ok(())
        };
        only("tau", e.tau, EnvName::Burden)?;
        only("alpha_nl", e.alpha_nl, EnvName::Nonlinear)?;
        let kind = match e.kind {
            EnvName::Iid => EnvKind::Iid,
            EnvName::Ar1 => EnvKind::Ar1,
            EnvName::ToyBinary => EnvKind::ToyBinary,
            EnvName::Burden => EnvKind::Burden { tau: e.tau.ok_or_else(|| anyhow!("env.tau is required for burden"))? },
            EnvName::Nonlinear => EnvKind::Nonlinear {
                alpha_nl: e.alpha_nl.ok_or_else(|| anyhow!("env.alpha_nl is required for nonlinear"))?,
            },
        };
        let mut spec = EnvSpec::new(kind)?;
        if let Some(sign) = e.sign {
            spec.sign = sign;
        }
        Ok(spec)
    }

    pub fn run_config(&self) -> Result<RunConfig> {
        let c = &self.constraint;
        let r = &self.run;
        if r.horizon < r.burn_in {
            bail!("run.T = {} is shorter than run.burn_in = {}", r.horizon, r.burn_in);
        }
        let lambda_mode = match c.lambda_mode {
            LambdaModeName::Search => {
                if c.lambda.is_some() {
                    bail!("constraint.lambda is only used with lambda_mode = \"fixed\"");
                }
                LambdaMode::Search { every: c.search_every }
            }
            LambdaModeName::Fixed => LambdaMode::Fixed(
                c.lambda.ok_or_else(|| anyhow!("constraint.lambda is required when lambda_mode = \"fixed\""))?,
            ),
        };
        let search = match r.optimizer {
            SearchStrategy::Local => SearchConfig::local(),
            SearchStrategy::GridPattern => SearchConfig::default(),
        };
        let learner = LearnerConfig {
            horizon: r.horizon,
            burn_in: r.burn_in,
            zeta: r.zeta,
            clip: r.clip.then_some(r.clip_bound),
            p0: c.p0,
            alpha: c.alpha,
            lambda_mode,
            bracket: LambdaBracket { lo: c.lambda_lo, hi: c.lambda_hi, tol: c.lambda_tol },
            search,
        };
        let oracle = OracleConfig {
            mc_contexts: r.oracle_mc_contexts,
            stationary_steps: r.oracle_steps,
            seed: r.oracle_seed,
            ..OracleConfig::default()
        };
        let cfg = RunConfig {
            learner,
            seed: r.seed,
            replicates: r.replicates,
            bootstrap_b: self.inference.bootstrap_b,
            level: self.inference.level,
            evaluate_cost: self.inference.evaluate_cost,
            oracle,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn name_of(kind: EnvName) -> &'static str {
    match kind {
        EnvName::Iid => "iid",
        EnvName::Ar1 => "ar1",
        EnvName::Burden => "burden",
        EnvName::Nonlinear => "nonlinear",
        EnvName::ToyBinary => "toy_binary",
    }
}
