//! BRUE: uniform exploration down to a switch depth that cycles through
//! `H, H-1, ..., 1`, greedy play below it, and a Monte-Carlo update of the
//! switch node only.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{argmax_visited, BudgetConfig, HistoryTree};
use crate::record::{Algorithm, RunRecord, StopReason};
use crate::{Result, Simulator};

pub fn brue_plan<S: Simulator>(sim: &mut S, root: usize, cfg: &BudgetConfig) -> Result<RunRecord> {
    let (tau, horizon) = cfg.split()?;
    let k = sim.num_actions();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut tree = HistoryTree::new(k);
    let calls_before = sim.calls();
    let mut rewards = Vec::with_capacity(horizon);

    for t in 0..tau {
        let switch = horizon - (t % horizon as u64) as usize;
        rewards.clear();
        let mut state = root;
        let mut node = Some(0u32);
        let mut target = 0u32;
        for depth in 1..=horizon {
            let greedy = if depth > switch { node.and_then(|id| argmax_visited(&tree.means(id))) } else { None };
            let action = greedy.unwrap_or_else(|| rng.gen_range(0..k));
            let (next, reward) = sim.sample_step(state, action)?;
            rewards.push(reward);
            node = match node {
                Some(id) if depth < switch => {
                    let a = tree.action_id(id, action);
                    Some(tree.child_or_insert(a, next))
                }
                Some(id) if depth == switch => {
                    target = tree.action_id(id, action);
                    tree.child(id, action, next)
                }
                Some(id) => tree.child(id, action, next),
                None => None,
            };
            state = next;
        }
        let ret = rewards[switch - 1..].iter().rev().fold(0.0, |acc, r| r + cfg.gamma * acc);
        let n = tree.node_mut(target);
        n.n += 1;
        n.value_sum += ret;
    }

    let means = tree.means(0);
    let action = argmax_visited(&means).unwrap_or(0);
    let mut record = RunRecord::new(Algorithm::Brue, action, cfg.seed);
    record.tau = tau;
    record.horizon = horizon;
    record.oracle_calls = sim.calls() - calls_before;
    record.stop_reason = StopReason::BudgetSpent;
    record.root_upper = means.iter().map(|m| m.unwrap_or(0.0)).collect();
    Ok(record)
}
