//! Baseline planners for comparison: Sparse Sampling, open-loop KL-OLOP,
//! BRUE and UCT. The fixed-budget ones share [`BudgetConfig`], which turns a
//! call budget into `tau` episodes of horizon `H`.

mod brue;
mod kl_olop;
mod sparse_sampling;
mod uct;

use alloc::vec::Vec;

use smallvec::SmallVec;

use crate::error::config_err;
use crate::Result;

pub use brue::brue_plan;
pub use kl_olop::kl_olop_plan;
pub use sparse_sampling::{
    sparse_sampling_budget, sparse_sampling_calls, sparse_sampling_plan, SparseSamplingOutcome,
};
pub use uct::uct_plan;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BudgetConfig {
    /// Total number of forward-model calls.
    pub budget: u64,
    pub gamma: f64,
    /// UCB1 exploration constant (UCT only).
    pub exploration: f64,
    /// Seed for the planner's own randomness (BRUE).
    pub seed: u64,
}

impl BudgetConfig {
    pub fn new(budget: u64, gamma: f64, seed: u64) -> Self {
        Self { budget, gamma, exploration: 1.0, seed }
    }

    pub fn split(&self) -> Result<(u64, usize)> {
        budget_split(self.budget, self.gamma)
    }
}

/// Largest `tau` with `tau ln(tau) / (2 ln(1/gamma)) <= n`, and
/// `H = ceil(ln(tau) / (2 ln(1/gamma)))`, at least 1.
pub fn budget_split(n: u64, gamma: f64) -> Result<(u64, usize)> {
    if n == 0 {
        return Err(config_err!("budget must be at least one call"));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(config_err!("gamma {gamma} outside (0,1)"));
    }
    let scale = 2.0 * libm::log(1.0 / gamma);
    let fits = |tau: u64| {
        let t = tau as f64;
        t * libm::log(t) / scale <= n as f64
    };
    let mut lo = 1u64;
    let mut hi = 2u64;
    while fits(hi) {
        lo = hi;
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let horizon = libm::ceil(libm::log(lo as f64) / scale).max(1.0) as usize;
    Ok((lo, horizon))
}

/// Closed-loop history tree with per-(history, action) statistics.
#[derive(Clone, Debug)]
pub(crate) struct HistoryTree {
    k: usize,
    slots: Vec<u32>,
    nodes: Vec<ActionNode>,
}

#[derive(Clone, Debug, Default)]
pub(crate) struct ActionNode {
    pub n: u64,
    pub value_sum: f64,
    children: SmallVec<[(u32, u32); 2]>,
}

impl ActionNode {
    pub fn mean(&self) -> f64 {
        self.value_sum / self.n as f64
    }
}

const EMPTY: u32 = u32::MAX;

impl HistoryTree {
    pub fn new(k: usize) -> Self {
        let mut t = Self { k, slots: Vec::new(), nodes: Vec::new() };
        t.new_state();
        t
    }

    fn new_state(&mut self) -> u32 {
        let id = (self.slots.len() / self.k) as u32;
        self.slots.extend(core::iter::repeat(EMPTY).take(self.k));
        id
    }

    pub fn action(&self, sid: u32, a: usize) -> Option<&ActionNode> {
        match self.slots[sid as usize * self.k + a] {
            EMPTY => None,
            id => Some(&self.nodes[id as usize]),
        }
    }

    pub fn action_id(&mut self, sid: u32, a: usize) -> u32 {
        let idx = sid as usize * self.k + a;
        if self.slots[idx] == EMPTY {
            self.slots[idx] = self.nodes.len() as u32;
            self.nodes.push(ActionNode::default());
        }
        self.slots[idx]
    }

    pub fn node_mut(&mut self, id: u32) -> &mut ActionNode {
        &mut self.nodes[id as usize]
    }

    pub fn child(&self, sid: u32, a: usize, next: usize) -> Option<u32> {
        let node = self.action(sid, a)?;
        node.children.iter().find(|(s, _)| *s as usize == next).map(|&(_, c)| c)
    }

    pub fn child_or_insert(&mut self, action_id: u32, next: usize) -> u32 {
        if let Some(&(_, c)) = self.nodes[action_id as usize].children.iter().find(|(s, _)| *s as usize == next) {
            return c;
        }
        let c = self.new_state();
        self.nodes[action_id as usize].children.push((next as u32, c));
        c
    }

    /// Empirical means at a history (`None` for unvisited actions).
    pub fn means(&self, sid: u32) -> Vec<Option<f64>> {
        (0..self.k).map(|a| self.action(sid, a).filter(|n| n.n > 0).map(ActionNode::mean)).collect()
    }
}

/// Lowest-index argmax over the visited entries, or `None` if none is.
pub(crate) fn argmax_visited(values: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (a, v) in values.iter().enumerate() {
        if let Some(v) = *v {
            if best.map_or(true, |(_, b)| v > b) {
                best = Some((a, v));
            }
        }
    }
    best.map(|(a, _)| a)
}
