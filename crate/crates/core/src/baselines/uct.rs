//! UCT: UCB1 selection at every history (untried actions first, lowest
//! index), Monte-Carlo backups of the discounted return along the whole
//! path, recommendation of the most visited root action.

use alloc::vec::Vec;

use super::{BudgetConfig, HistoryTree};
use crate::record::{Algorithm, RunRecord, StopReason};
use crate::{Result, Simulator};

pub fn uct_plan<S: Simulator>(sim: &mut S, root: usize, cfg: &BudgetConfig) -> Result<RunRecord> {
    let (tau, horizon) = cfg.split()?;
    let k = sim.num_actions();
    let mut tree = HistoryTree::new(k);
    let calls_before = sim.calls();
    let mut path = Vec::with_capacity(horizon);
    let mut rewards = Vec::with_capacity(horizon);

    for _ in 0..tau {
        path.clear();
        rewards.clear();
        let mut state = root;
        let mut node = 0u32;
        for _ in 0..horizon {
            let action = select(&tree, node, k, cfg.exploration);
            let (next, reward) = sim.sample_step(state, action)?;
            let a = tree.action_id(node, action);
            path.push(a);
            rewards.push(reward);
            node = tree.child_or_insert(a, next);
            state = next;
        }
        let mut ret = 0.0;
        for (i, &a) in path.iter().enumerate().rev() {
            ret = rewards[i] + cfg.gamma * ret;
            let n = tree.node_mut(a);
            n.n += 1;
            n.value_sum += ret;
        }
    }

    let visits: Vec<u64> = (0..k).map(|a| tree.action(0, a).map_or(0, |n| n.n)).collect();
    let mut action = 0;
    for a in 1..k {
        if visits[a] > visits[action] {
            action = a;
        }
    }
    let mut record = RunRecord::new(Algorithm::Uct, action, cfg.seed);
    record.tau = tau;
    record.horizon = horizon;
    record.oracle_calls = sim.calls() - calls_before;
    record.stop_reason = StopReason::BudgetSpent;
    record.root_upper = tree.means(0).iter().map(|m| m.unwrap_or(0.0)).collect();
    Ok(record)
}

fn select(tree: &HistoryTree, node: u32, k: usize, c: f64) -> usize {
    let mut total = 0u64;
    for a in 0..k {
        match tree.action(node, a) {
            Some(n) if n.n > 0 => total += n.n,
            _ => return a,
        }
    }
    let log_total = libm::log(total as f64);
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for a in 0..k {
        let n = tree.action(node, a).unwrap();
        let v = n.mean() + c * libm::sqrt(log_total / n.n as f64);
        if v > best_val {
            best_val = v;
            best = a;
        }
    }
    best
}
