//! Campaign descriptions, loaded from TOML.
//!
//! ```toml
//! mode = "fixed_confidence"
//! replications = 50
//! seed = 1
//! gamma = 0.7
//! delta = 0.1
//! thresholds = "practical"
//! eps_grid = [1.0]
//!
//! [env]
//! states = 200
//! actions = 5
//! branching = 2
//! sparsity = 0.5
//!
//! [[algo]]
//! name = "gape"
//! ```

use std::path::{Path, PathBuf};

use gape_core::{Algorithm, GeneratorConfig, RewardGranularity};
use serde::{Deserialize, Serialize};

use crate::error::{input_err, HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    FixedConfidence,
    Scaling,
    FixedBudget,
    Concentration,
}

/// Threshold family for fixed-confidence runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdChoice {
    #[default]
    Practical,
    Theoretical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub states: usize,
    pub actions: usize,
    pub branching: usize,
    pub sparsity: f64,
    #[serde(default)]
    pub granularity: RewardGranularity,
}

impl EnvConfig {
    /// S=200, K=5, B=2, sparsity 0.5.
    pub fn paper() -> Self {
        Self::from_generator(&GeneratorConfig::paper(0))
    }

    /// S=50, K=3, B=2, sparsity 0.5.
    pub fn desk() -> Self {
        Self::from_generator(&GeneratorConfig::desk(0))
    }

    fn from_generator(g: &GeneratorConfig) -> Self {
        Self {
            states: g.num_states,
            actions: g.num_actions,
            branching: g.branching,
            sparsity: g.reward_sparsity,
            granularity: g.granularity,
        }
    }

    pub fn generator(&self, seed: u64) -> GeneratorConfig {
        GeneratorConfig {
            num_states: self.states,
            num_actions: self.actions,
            branching: self.branching,
            reward_sparsity: self.sparsity,
            granularity: self.granularity,
            seed,
        }
    }
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self::paper()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgoParams {
    /// UCB1 exploration constant for UCT.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exploration: Option<f64>,
    /// Episode cap for fixed-confidence GapE runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_episodes: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgoSpec {
    pub name: Algorithm,
    #[serde(default)]
    pub params: AlgoParams,
}

impl AlgoSpec {
    pub fn new(name: Algorithm) -> Self {
        Self { name, params: AlgoParams::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcentrationSpec {
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_trials")]
    pub stream_length: usize,
    #[serde(default = "default_deltas")]
    pub delta_grid: Vec<f64>,
    /// Support sizes of the categorical streams.
    #[serde(default = "default_sizes")]
    pub categorical_sizes: Vec<usize>,
    /// Mean of the Bernoulli streams.
    #[serde(default = "default_bernoulli_mean")]
    pub bernoulli_mean: f64,
}

fn default_trials() -> usize {
    1000
}

fn default_deltas() -> Vec<f64> {
    vec![0.05, 0.1]
}

fn default_sizes() -> Vec<usize> {
    vec![2, 3, 5]
}

fn default_bernoulli_mean() -> f64 {
    0.3
}

impl Default for ConcentrationSpec {
    fn default() -> Self {
        Self {
            trials: default_trials(),
            stream_length: default_trials(),
            delta_grid: default_deltas(),
            categorical_sizes: default_sizes(),
            bernoulli_mean: default_bernoulli_mean(),
        }
    }
}

fn default_gamma() -> f64 {
    0.7
}

fn default_delta() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Campaign {
    pub mode: Mode,
    #[serde(default)]
    pub env: EnvConfig,
    #[serde(default, rename = "algo")]
    pub algos: Vec<AlgoSpec>,
    #[serde(default)]
    pub eps_grid: Vec<f64>,
    #[serde(default)]
    pub budget_grid: Vec<u64>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub thresholds: ThresholdChoice,
    /// Horizon of the exact values used to score fixed-budget runs; defaults
    /// to the horizon at tolerance 1e-3.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concentration: Option<ConcentrationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn default_replications() -> usize {
    1
}

impl Campaign {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            env: EnvConfig::default(),
            algos: Vec::new(),
            eps_grid: Vec::new(),
            budget_grid: Vec::new(),
            replications: 1,
            seed: 0,
            gamma: default_gamma(),
            delta: default_delta(),
            thresholds: ThresholdChoice::Practical,
            eval_horizon: None,
            concentration: None,
            output: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let c: Campaign = toml::from_str(text)
            .map_err(|source| HarnessError::Toml { path: PathBuf::from("<inline>"), source })?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(input_err(path))?;
        let c: Campaign =
            toml::from_str(&text).map_err(|source| HarnessError::Toml { path: path.to_path_buf(), source })?;
        c.validate()?;
        Ok(c)
    }

    /// Seed of the MDP of replication `index`.
    pub fn replication_seed(&self, index: usize) -> u64 {
        self.seed.wrapping_add(index as u64)
    }

    /// Algorithms to run, with GapE alone as the default.
    pub fn algorithms(&self) -> Vec<AlgoSpec> {
        if self.algos.is_empty() {
            vec![AlgoSpec::new(Algorithm::Gape)]
        } else {
            self.algos.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma {} outside (0,1)", self.gamma));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return bad(format!("delta {} outside (0,1]", self.delta));
        }
        self.env.generator(0).validate()?;
        if let Some(e) = self.eps_grid.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return bad(format!("eps {e} must be positive"));
        }
        if self.budget_grid.contains(&0) {
            return bad("budgets must be positive".into());
        }
        if self.eval_horizon == Some(0) {
            return bad("eval_horizon must be positive".into());
        }
        match self.mode {
            Mode::FixedConfidence | Mode::Scaling => {
                if self.algorithms().iter().any(|a| a.name != Algorithm::Gape) {
                    return bad("fixed-confidence campaigns only run gape".into());
                }
                let need = if self.mode == Mode::Scaling { 3 } else { 1 };
                if self.eps_grid.len() < need {
                    return bad(format!("{:?} mode needs at least {need} eps values", self.mode));
                }
            }
            Mode::FixedBudget => {
                if self.budget_grid.is_empty() {
                    return bad("fixed_budget mode needs a budget_grid".into());
                }
                if let Some(a) = self.algorithms().iter().find(|a| a.name == Algorithm::SparseSampling) {
                    return bad(format!("{} has no budget mode", a.name));
                }
            }
            Mode::Concentration => {
                let spec = self.concentration.clone().unwrap_or_default();
                if spec.trials == 0 || spec.stream_length == 0 {
                    return bad("trials and stream_length must be positive".into());
                }
                if spec.delta_grid.is_empty() || spec.delta_grid.iter().any(|d| !(*d > 0.0 && *d <= 1.0)) {
                    return bad("delta_grid values must lie in (0,1]".into());
                }
                if spec.categorical_sizes.iter().any(|m| *m < 2) {
                    return bad("categorical sizes must be at least 2".into());
                }
                if !(spec.bernoulli_mean >= 0.0 && spec.bernoulli_mean <= 1.0) {
                    return bad("bernoulli_mean outside [0,1]".into());
                }
            }
        }
        Ok(())
    }
}
