//! Experiment configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qlab::benchmarks;
use qlab::qlearn::QlearnConfig;
use qlab::regret::RegretMethod;
use qlab::sa::{Algo, BoundSpec, Extras};
use qlab::{Error, Mdp, Result};

use crate::fail::{CliError, Kind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    List(Vec<u64>),
    Count { count: u64, master: u64 },
}

impl SeedSpec {
    pub fn expand(&self) -> Vec<u64> {
        match self {
            SeedSpec::List(v) => v.clone(),
            SeedSpec::Count { count, master } => (0..*count).map(|i| master.wrapping_add(i)).collect(),
        }
    }
}

impl Default for SeedSpec {
    fn default() -> Self {
        SeedSpec::List(vec![0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Q0Init {
    #[default]
    Zeros,
    /// Suboptimal actions at `Rmax/(1−γ)`, optimal ones at `0`.
    Adversarial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FitWindow {
    pub lo: u64,
    pub hi: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RegretBlock {
    #[serde(default = "default_method")]
    pub method: RegretMethod,
    /// Geometric base of the regret grid.
    #[serde(default = "default_regret_base")]
    pub grid_base: f64,
    #[serde(default)]
    pub rollouts: Option<usize>,
    #[serde(default)]
    pub tol: Option<f64>,
}

fn default_method() -> RegretMethod {
    RegretMethod::Frozen
}

fn default_regret_base() -> f64 {
    1.3
}

impl Default for RegretBlock {
    fn default() -> Self {
        RegretBlock { method: default_method(), grid_base: default_regret_base(), rollouts: None, tol: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DecompositionBlock {
    pub start: u64,
    pub length: u64,
    #[serde(default)]
    pub i_star: usize,
}

impl Default for DecompositionBlock {
    fn default() -> Self {
        DecompositionBlock { start: 0, length: 200, i_star: 0 }
    }
}

/// Explicit exponents for auditing a generic iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AuditBlock {
    pub algo: Algo,
    pub bound: BoundSpec,
    #[serde(default)]
    pub extras: Extras,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExperimentConfig {
    /// MDP file, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mdp: Option<PathBuf>,
    /// Name of a built-in benchmark, used when `mdp` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<QlearnConfig>,
    #[serde(default)]
    pub q0_init: Q0Init,
    #[serde(default)]
    pub seeds: SeedSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitWindow>,
    /// Allowed distance between fitted and theoretical exponents.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub regret: RegretBlock,
    #[serde(default)]
    pub decomposition: DecompositionBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audit: Option<AuditBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub strict_conditions: bool,
}

fn default_tolerance() -> f64 {
    0.15
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> std::result::Result<(ExperimentConfig, PathBuf), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io_at(path, e))?;
        let cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| CliError::new(Kind::Parse, format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok((cfg, base))
    }

    fn validate(&self) -> std::result::Result<(), CliError> {
        let seeds = self.seeds.expand();
        if seeds.is_empty() {
            return Err(CliError::new(Kind::Validation, "seed list is empty"));
        }
        if let Some(cps) = self.run.as_ref().and_then(|r| r.checkpoints.as_ref()) {
            if cps.windows(2).any(|w| w[0] >= w[1]) {
                return Err(CliError::new(Kind::Validation, "checkpoint grid must increase strictly"));
            }
        }
        Ok(())
    }

    /// Loads the MDP file or builds the named benchmark.
    pub fn load_mdp(&self, base: &Path) -> std::result::Result<Mdp, CliError> {
        match (&self.mdp, &self.benchmark) {
            (Some(p), _) => load_mdp_file(&base.join(p)),
            (None, Some(name)) => benchmarks::named()
                .into_iter()
                .find(|(n, _)| n == name)
                .map(|(_, m)| m)
                .ok_or_else(|| CliError::new(Kind::Validation, format!("unknown benchmark {name}"))),
            (None, None) => Err(CliError::new(Kind::Validation, "config names neither mdp nor benchmark")),
        }
    }

    /// Run block with defaults resolved against the MDP.
    pub fn resolved_run(&self, mdp: &Mdp) -> Result<QlearnConfig> {
        let mut run = self.run.clone().ok_or_else(|| Error::MissingParameter("run".into()))?;
        if run.q0.is_none() && self.q0_init == Q0Init::Adversarial {
            run.q0 = Some(benchmarks::adversarial_q0(mdp)?);
        }
        run.strict_conditions |= self.strict_conditions;
        if run.checkpoints.is_none() {
            run.checkpoints = Some(run.checkpoint_labels());
        }
        run.validate(mdp)?;
        Ok(run)
    }

    pub fn fit_window(&self, steps: u64) -> FitWindow {
        self.fit.unwrap_or(FitWindow { lo: 1000.min(steps), hi: steps })
    }
}

pub fn load_mdp_file(path: &Path) -> std::result::Result<Mdp, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io_at(path, e))?;
    Mdp::from_json(&text).map_err(|e| CliError::from_lib(e).context(&path.display().to_string()))
}
