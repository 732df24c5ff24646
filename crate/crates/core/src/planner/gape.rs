//! The planning loop: root decision, one optimistic episode, path refresh,
//! until the stopping statistic drops below the tolerance.

use alloc::vec::Vec;

use super::decision::{root_decision, RootDecision};
use super::diagnostics::{Diagnostics, TrajectoryLog};
use super::tree::{optimistic_action, SearchTree, Step, Trajectory};
use crate::confidence::{ThresholdKind, ThresholdSpec};
use crate::error::config_err;
use crate::record::{Algorithm, RunRecord, StopReason};
use crate::{Result, Simulator};

pub const DEFAULT_MAX_EPISODES: u64 = 10_000_000;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GapeConfig {
    pub eps: f64,
    pub gamma: f64,
    /// Carries `delta`, `H`, `B` and `K` as well as the threshold family.
    pub thresholds: ThresholdSpec,
    pub max_episodes: u64,
    /// Keep the trajectory log needed by the replay diagnostics.
    pub record_trajectories: bool,
}

impl GapeConfig {
    pub fn new(eps: f64, gamma: f64, thresholds: ThresholdSpec) -> Result<Self> {
        let cfg = Self { eps, gamma, thresholds, max_episodes: DEFAULT_MAX_EPISODES, record_trajectories: false };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Budget-stopped variant: `ln(tau)` thresholds, `eps = 0` and a hard cap
    /// of `tau` episodes.
    pub fn fixed_budget(episodes: u64, gamma: f64, horizon: usize, branching: usize, num_actions: usize) -> Result<Self> {
        let spec = ThresholdSpec::new(ThresholdKind::FixedBudget { episodes }, 1.0, horizon, branching, num_actions)?;
        Ok(Self::new(0.0, gamma, spec)?.with_max_episodes(episodes))
    }

    pub fn with_max_episodes(mut self, max_episodes: u64) -> Self {
        self.max_episodes = max_episodes;
        self
    }

    pub fn with_trajectories(mut self, on: bool) -> Self {
        self.record_trajectories = on;
        self
    }

    pub fn horizon(&self) -> usize {
        self.thresholds.horizon
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(config_err!("eps {} must be finite and nonnegative", self.eps));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(config_err!("gamma {} outside (0,1]", self.gamma));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct GapePlanner {
    cfg: GapeConfig,
    tree: SearchTree,
    episodes: u64,
    upper: Vec<f64>,
    lower: Vec<f64>,
    log: Option<TrajectoryLog>,
}

impl GapePlanner {
    pub fn new(cfg: GapeConfig, root_state: usize) -> Result<Self> {
        cfg.validate()?;
        let tree = SearchTree::new(cfg.thresholds, cfg.gamma, root_state);
        let log = cfg.record_trajectories.then(|| TrajectoryLog::new(cfg.horizon()));
        Ok(Self { cfg, tree, episodes: 0, upper: Vec::new(), lower: Vec::new(), log })
    }

    pub fn tree(&self) -> &SearchTree {
        &self.tree
    }

    pub fn config(&self) -> &GapeConfig {
        &self.cfg
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn root_bounds(&mut self) -> (&[f64], &[f64]) {
        self.tree.root_bounds(&mut self.upper, &mut self.lower);
        (&self.upper, &self.lower)
    }

    pub fn decision(&mut self) -> Result<RootDecision> {
        self.tree.root_bounds(&mut self.upper, &mut self.lower);
        root_decision(&self.upper, &self.lower)
    }

    /// Plays `first_action` at the root and the optimistic policy below,
    /// making exactly `H` calls to the simulator. The tree is not modified.
    pub fn run_episode<S: Simulator>(&self, sim: &mut S, first_action: usize) -> Result<Trajectory> {
        let horizon = self.tree.horizon();
        let mut steps = Vec::with_capacity(horizon);
        let mut state = self.tree.root_state();
        let mut node = Some(self.tree.root());
        for depth in 1..=horizon {
            let action = match (depth, node) {
                (1, _) => first_action,
                (_, Some(id)) => optimistic_action(&self.tree, id),
                (_, None) => 0,
            };
            let (next_state, reward) = sim.sample_step(state, action)?;
            steps.push(Step { action, reward, next_state });
            node = node.and_then(|id| self.tree.child_state(id, action, next_state));
            state = next_state;
        }
        Ok(Trajectory { root: self.tree.root_state(), steps })
    }

    pub fn update(&mut self, trajectory: &Trajectory) -> Result<()> {
        self.tree.update_bounds(trajectory)?;
        if let Some(log) = &mut self.log {
            log.push(trajectory);
        }
        self.episodes += 1;
        Ok(())
    }

    pub fn into_diagnostics(self) -> Option<Diagnostics> {
        let root_state = self.tree.root_state();
        self.log.map(|log| Diagnostics { config: self.cfg, root_state, log })
    }
}

/// Runs the planner from `root` until it is confident or out of episodes.
pub fn plan<S: Simulator>(cfg: &GapeConfig, sim: &mut S, root: usize) -> Result<RunRecord> {
    let k = cfg.thresholds.num_actions;
    if sim.num_actions() != k {
        return Err(config_err!("simulator has {} actions, config says {k}", sim.num_actions()));
    }
    let calls_before = sim.calls();
    let mut planner = GapePlanner::new(cfg.clone(), root)?;
    let mut record = RunRecord::new(Algorithm::Gape, 0, 0);
    record.horizon = cfg.horizon();

    if k == 1 {
        record.stop_reason = StopReason::SingleAction;
    } else {
        let budget_mode = matches!(cfg.thresholds.kind, ThresholdKind::FixedBudget { .. });
        loop {
            let d = planner.decision()?;
            let reason = if d.stop_stat <= cfg.eps {
                Some(StopReason::Confident)
            } else if planner.episodes() >= cfg.max_episodes {
                Some(if budget_mode { StopReason::BudgetSpent } else { StopReason::BudgetExhausted })
            } else {
                None
            };
            if let Some(reason) = reason {
                record.recommended_action = d.best;
                record.stop_reason = reason;
                record.stop_stat = Some(d.stop_stat);
                break;
            }
            let trajectory = planner.run_episode(sim, d.selected)?;
            planner.update(&trajectory)?;
        }
    }
    record.tau = planner.episodes();
    record.oracle_calls = sim.calls() - calls_before;
    let (u, l) = planner.root_bounds();
    record.root_upper = u.to_vec();
    record.root_lower = l.to_vec();
    record.diagnostics = planner.into_diagnostics();
    Ok(record)
}
