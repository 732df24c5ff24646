//! Open-loop optimistic planning with kl-UCB reward bounds.
//!
//! The tree is over action sequences only. Each sequence node keeps the
//! rewards observed at its depth; its index is
//! `W = u + gamma * max_child W` with unvisited children at `sigma`, and
//! `u` the kl-UCB bound at level `ln(tau) / n`. Since the level only depends
//! on the node's own count, an episode changes `W` on its own path only.

use alloc::vec::Vec;

use super::BudgetConfig;
use crate::confidence::kl_ucb_upper;
use crate::mdp::sigma;
use crate::record::{Algorithm, RunRecord, StopReason};
use crate::{Result, Simulator};

const EMPTY: u32 = u32::MAX;

struct SeqNode {
    depth: usize,
    n: u64,
    reward_sum: f64,
    w: f64,
}

pub fn kl_olop_plan<S: Simulator>(sim: &mut S, root: usize, cfg: &BudgetConfig) -> Result<RunRecord> {
    let (tau, horizon) = cfg.split()?;
    let k = sim.num_actions();
    let sig: Vec<f64> = (0..=horizon).map(|m| sigma(m, cfg.gamma)).collect();
    let beta = libm::log(tau as f64);
    let calls_before = sim.calls();

    // Node 0 is the empty sequence; children of node i live in slots[i*k..].
    let mut nodes = Vec::new();
    nodes.push(SeqNode { depth: 0, n: 0, reward_sum: 0.0, w: sig[horizon] });
    let mut slots: Vec<u32> = alloc::vec![EMPTY; k];
    let mut path: Vec<u32> = Vec::with_capacity(horizon);

    for _ in 0..tau {
        path.clear();
        let mut node = 0usize;
        let mut state = root;
        for depth in 1..=horizon {
            let unvisited = sig[horizon + 1 - depth];
            let mut action = 0;
            let mut best = f64::NEG_INFINITY;
            for a in 0..k {
                let w = match slots[node * k + a] {
                    EMPTY => unvisited,
                    c => nodes[c as usize].w,
                };
                if w > best {
                    best = w;
                    action = a;
                }
            }
            let child = match slots[node * k + action] {
                EMPTY => {
                    let id = nodes.len() as u32;
                    nodes.push(SeqNode { depth, n: 0, reward_sum: 0.0, w: unvisited });
                    slots.extend(core::iter::repeat(EMPTY).take(k));
                    slots[node * k + action] = id;
                    id
                }
                c => c,
            };
            let (next, reward) = sim.sample_step(state, action)?;
            let c = &mut nodes[child as usize];
            c.n += 1;
            c.reward_sum += reward;
            path.push(child);
            node = child as usize;
            state = next;
        }
        for &id in path.iter().rev() {
            let id = id as usize;
            let (n, mean, depth) = (nodes[id].n as f64, nodes[id].reward_sum / nodes[id].n as f64, nodes[id].depth);
            let u = kl_ucb_upper(mean, beta / n);
            let tail = if depth == horizon {
                0.0
            } else {
                let unvisited = sig[horizon - depth];
                (0..k)
                    .map(|a| match slots[id * k + a] {
                        EMPTY => unvisited,
                        c => nodes[c as usize].w,
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            nodes[id].w = u + cfg.gamma * tail;
        }
    }

    let visits: Vec<u64> =
        (0..k).map(|a| match slots[a] { EMPTY => 0, c => nodes[c as usize].n }).collect();
    let mut action = 0;
    for a in 1..k {
        if visits[a] > visits[action] {
            action = a;
        }
    }
    let mut record = RunRecord::new(Algorithm::KlOlop, action, cfg.seed);
    record.tau = tau;
    record.horizon = horizon;
    record.oracle_calls = sim.calls() - calls_before;
    record.stop_reason = StopReason::BudgetSpent;
    record.root_upper =
        (0..k).map(|a| match slots[a] { EMPTY => sig[horizon], c => nodes[c as usize].w }).collect();
    Ok(record)
}
