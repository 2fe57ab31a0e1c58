//! Run configuration: an optional TOML file overlaid by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Deserialize;

/// Environment variable overriding the element budget of the config file.
pub const BUDGET_ENV: &str = "FREDHOLM_BUDGET";

pub const DEFAULT_BUDGET: u64 = 10_000_000;

/// Keys accepted in the `--config` file. Every key is optional and loses to
/// the matching flag.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub rank: Option<usize>,
    pub epsilon: Option<f64>,
    pub radius: Option<usize>,
    pub level: Option<usize>,
    pub p: Option<Vec<f64>>,
    pub phi: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub budget: Option<u64>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// The settings shared by every subcommand after merging.
#[derive(Clone, Debug)]
pub struct Settings {
    pub file: RunConfig,
    pub out: PathBuf,
    pub budget: u64,
    pub threads: Option<usize>,
}

impl Settings {
    pub fn resolve(
        file: RunConfig,
        out: Option<PathBuf>,
        budget: Option<u64>,
        threads: Option<usize>,
    ) -> anyhow::Result<Self> {
        let env_budget = match std::env::var(BUDGET_ENV) {
            Ok(v) => Some(v.trim().parse::<u64>().with_context(|| format!("{BUDGET_ENV}={v:?} is not a count"))?),
            Err(_) => None,
        };
        let budget = budget.or(env_budget).or(file.budget).unwrap_or(DEFAULT_BUDGET);
        if budget == 0 {
            bail!("the budget must be positive");
        }
        let threads = threads.or(file.threads);
        if threads == Some(0) {
            bail!("the thread count must be positive");
        }
        let out = out.or_else(|| file.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
        Ok(Settings { file, out, budget, threads })
    }

    pub fn rank(&self, flag: Option<usize>) -> usize {
        flag.or(self.file.rank).unwrap_or(2)
    }

    pub fn epsilon(&self, flag: Option<f64>) -> anyhow::Result<f64> {
        let eps = flag.or(self.file.epsilon).unwrap_or(1.0);
        if !(eps > 0.0 && eps.is_finite()) {
            bail!("epsilon must be positive, got {eps}");
        }
        Ok(eps)
    }

    pub fn radius(&self, flag: Option<usize>, default: usize) -> usize {
        flag.or(self.file.radius).unwrap_or(default)
    }

    pub fn level(&self, flag: Option<usize>) -> Option<usize> {
        flag.or(self.file.level)
    }

    pub fn seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.file.seed).unwrap_or(0)
    }

    pub fn p_list(&self, flag: Option<Vec<f64>>) -> Vec<f64> {
        flag.or_else(|| self.file.p.clone()).unwrap_or_else(|| vec![2.0, 3.0])
    }

    pub fn path(&self, flag: Option<PathBuf>, from_file: &Option<PathBuf>, what: &str) -> anyhow::Result<PathBuf> {
        match flag.or_else(|| from_file.clone()) {
            Some(p) => Ok(p),
            None => bail!("missing {what}: pass it as a flag or in the config file"),
        }
    }
}
