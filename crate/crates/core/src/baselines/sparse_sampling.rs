//! Sparse Sampling: a depth-`H` recursive estimate built from `C` fresh
//! samples per (history, action). Rewards are estimated from the same
//! samples as the transitions.

use alloc::vec::Vec;

use crate::error::config_err;
use crate::{Result, Simulator};

#[derive(Clone, Debug, PartialEq)]
pub struct SparseSamplingOutcome {
    pub action: usize,
    pub q_root: Vec<f64>,
    pub calls: u64,
}

pub fn sparse_sampling_plan<S: Simulator>(
    sim: &mut S,
    root: usize,
    horizon: usize,
    samples: usize,
    gamma: f64,
) -> Result<SparseSamplingOutcome> {
    if samples == 0 || horizon == 0 {
        return Err(config_err!("sparse sampling needs C >= 1 and H >= 1"));
    }
    let calls_before = sim.calls();
    let k = sim.num_actions();
    let mut q_root = Vec::with_capacity(k);
    for a in 0..k {
        q_root.push(q_value(sim, root, a, 1, horizon, samples, gamma)?);
    }
    let mut action = 0;
    for (a, q) in q_root.iter().enumerate() {
        if *q > q_root[action] {
            action = a;
        }
    }
    Ok(SparseSamplingOutcome { action, q_root, calls: sim.calls() - calls_before })
}

fn q_value<S: Simulator>(
    sim: &mut S,
    state: usize,
    action: usize,
    depth: usize,
    horizon: usize,
    samples: usize,
    gamma: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for _ in 0..samples {
        let (next, reward) = sim.sample_step(state, action)?;
        total += reward;
        if depth < horizon {
            let mut v = f64::NEG_INFINITY;
            for a in 0..sim.num_actions() {
                v = v.max(q_value(sim, next, a, depth + 1, horizon, samples, gamma)?);
            }
            total += gamma * v;
        }
    }
    Ok(total / samples as f64)
}

/// `sum_{i=1..H} (K C)^i`, saturating.
pub fn sparse_sampling_calls(horizon: usize, samples: u64, num_actions: u64) -> u128 {
    let kc = (num_actions as u128).saturating_mul(samples as u128);
    let mut term = 1u128;
    let mut total = 0u128;
    for _ in 0..horizon {
        term = term.saturating_mul(kc);
        total = total.saturating_add(term);
    }
    total
}

/// `H^5 (B K)^H / eps^2`.
pub fn sparse_sampling_budget(horizon: usize, branching: usize, num_actions: usize, eps: f64) -> f64 {
    let h = horizon as f64;
    libm::pow(h, 5.0) * libm::pow((branching * num_actions) as f64, h) / (eps * eps)
}
