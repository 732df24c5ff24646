//! Outcome of a single planning run.

use alloc::vec::Vec;
use core::fmt;

use crate::planner::Diagnostics;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Algorithm {
    Gape,
    KlOlop,
    Brue,
    Uct,
    SparseSampling,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] =
        [Algorithm::Gape, Algorithm::KlOlop, Algorithm::Brue, Algorithm::Uct, Algorithm::SparseSampling];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Gape => "gape",
            Algorithm::KlOlop => "kl_olop",
            Algorithm::Brue => "brue",
            Algorithm::Uct => "uct",
            Algorithm::SparseSampling => "sparse_sampling",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum StopReason {
    /// The stopping statistic fell below the tolerance.
    Confident,
    /// The episode cap was reached first.
    BudgetExhausted,
    /// Only one action is available at the root.
    SingleAction,
    /// Fixed-budget planners always end this way.
    BudgetSpent,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::Confident => "confident",
            StopReason::BudgetExhausted => "budget_exhausted",
            StopReason::SingleAction => "single_action",
            StopReason::BudgetSpent => "budget_spent",
        }
    }
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub recommended_action: usize,
    /// Number of episodes played.
    pub tau: u64,
    /// Calls made to the forward model.
    pub oracle_calls: u64,
    pub horizon: usize,
    pub stop_reason: StopReason,
    /// Filled in by whoever knows the true MDP.
    pub simple_regret: Option<f64>,
    pub mdp_seed: Option<u64>,
    pub episode_seed: u64,
    /// `U(c) - L(b)` at termination, for the gap-based planner.
    pub stop_stat: Option<f64>,
    /// Per-action bounds (or estimates) at the root when the run ended.
    pub root_upper: Vec<f64>,
    pub root_lower: Vec<f64>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub diagnostics: Option<Diagnostics>,
}

impl RunRecord {
    pub fn new(algorithm: Algorithm, recommended_action: usize, episode_seed: u64) -> Self {
        Self {
            algorithm,
            recommended_action,
            tau: 0,
            oracle_calls: 0,
            horizon: 0,
            stop_reason: StopReason::BudgetSpent,
            simple_regret: None,
            mdp_seed: None,
            episode_seed,
            stop_stat: None,
            root_upper: Vec::new(),
            root_lower: Vec::new(),
            diagnostics: None,
        }
    }
}
