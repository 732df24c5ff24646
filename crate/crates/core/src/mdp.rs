//! Ground-truth tabular MDPs: representation, random instances, sampling and
//! exact finite-horizon values.

use alloc::vec::Vec;

use rand::distributions::{Distribution, Open01};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{config_err, domain_err};
use crate::Result;

const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// Maximal discounted reward collected over `m` steps: `sum_{i<m} gamma^i`.
pub fn sigma(m: usize, gamma: f64) -> f64 {
    let mut acc = 0.0;
    let mut g = 1.0;
    for _ in 0..m {
        acc += g;
        g *= gamma;
    }
    acc
}

/// Transitions and reward of one `(state, action)` pair.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TransitionRow {
    pub successors: Vec<usize>,
    pub probs: Vec<f64>,
    pub reward_mean: f64,
    /// Optional per-successor Bernoulli means; when present `reward_mean` is
    /// their expectation under `probs`.
    #[cfg_attr(
        feature = "serde",
        serde(default, skip_serializing_if = "Option::is_none")
    )]
    pub transition_rewards: Option<Vec<f64>>,
}

/// Stationary finite MDP with at most `branching` successors per pair.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "RawMdp"))]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    branching: usize,
    rows: Vec<TransitionRow>,
}

#[cfg(feature = "serde")]
#[derive(serde::Deserialize)]
struct RawMdp {
    num_states: usize,
    num_actions: usize,
    branching: usize,
    rows: Vec<TransitionRow>,
}

#[cfg(feature = "serde")]
impl TryFrom<RawMdp> for TabularMdp {
    type Error = crate::Error;

    fn try_from(raw: RawMdp) -> Result<Self> {
        TabularMdp::new(raw.num_states, raw.num_actions, raw.branching, raw.rows)
    }
}

impl TabularMdp {
    /// Builds an MDP from rows ordered `state * num_actions + action`.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        branching: usize,
        rows: Vec<TransitionRow>,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 || branching == 0 {
            return Err(config_err!("S, K and B must be positive"));
        }
        if branching > num_states {
            return Err(config_err!("branching {branching} exceeds {num_states} states"));
        }
        if rows.len() != num_states * num_actions {
            return Err(config_err!(
                "expected {} rows, got {}",
                num_states * num_actions,
                rows.len()
            ));
        }
        for (idx, row) in rows.iter().enumerate() {
            let (s, a) = (idx / num_actions, idx % num_actions);
            if row.successors.is_empty() || row.successors.len() > branching {
                return Err(config_err!("row ({s},{a}) has {} successors", row.successors.len()));
            }
            if row.successors.len() != row.probs.len() {
                return Err(config_err!("row ({s},{a}): successor/probability length mismatch"));
            }
            for (i, &next) in row.successors.iter().enumerate() {
                if next >= num_states {
                    return Err(config_err!("row ({s},{a}): successor {next} out of range"));
                }
                if row.successors[..i].contains(&next) {
                    return Err(config_err!("row ({s},{a}): duplicate successor {next}"));
                }
            }
            if row.probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(config_err!("row ({s},{a}): probability outside [0,1]"));
            }
            let total: f64 = row.probs.iter().sum();
            if (total - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(config_err!("row ({s},{a}) sums to {total}"));
            }
            if !(0.0..=1.0).contains(&row.reward_mean) {
                return Err(config_err!("row ({s},{a}): reward mean {} outside [0,1]", row.reward_mean));
            }
            if let Some(tr) = &row.transition_rewards {
                if tr.len() != row.successors.len() || tr.iter().any(|r| !(0.0..=1.0).contains(r)) {
                    return Err(config_err!("row ({s},{a}): invalid transition rewards"));
                }
                let mean: f64 = tr.iter().zip(&row.probs).map(|(r, p)| r * p).sum();
                if (mean - row.reward_mean).abs() > 1e-9 {
                    return Err(config_err!("row ({s},{a}): reward mean inconsistent with transition rewards"));
                }
            }
        }
        Ok(Self { num_states, num_actions, branching, rows })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn branching(&self) -> usize {
        self.branching
    }

    pub fn rows(&self) -> &[TransitionRow] {
        &self.rows
    }

    #[inline]
    pub fn row(&self, state: usize, action: usize) -> &TransitionRow {
        &self.rows[state * self.num_actions + action]
    }

    pub fn reward_mean(&self, state: usize, action: usize) -> f64 {
        self.row(state, action).reward_mean
    }

    /// Probability of `next` after playing `action` in `state`.
    pub fn prob(&self, state: usize, action: usize, next: usize) -> f64 {
        let row = self.row(state, action);
        row.successors
            .iter()
            .position(|&s| s == next)
            .map_or(0.0, |i| row.probs[i])
    }
}

/// Which objects carry the sparse non-zero rewards.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum RewardGranularity {
    /// A fraction of `(s, a)` pairs get a non-zero mean.
    #[default]
    StateAction,
    /// A fraction of `(s, a, s')` transitions get a non-zero mean.
    Transition,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GeneratorConfig {
    pub num_states: usize,
    pub num_actions: usize,
    pub branching: usize,
    pub reward_sparsity: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub granularity: RewardGranularity,
    pub seed: u64,
}

impl GeneratorConfig {
    /// S=200, K=5, B=2, sparsity 0.5.
    pub fn paper(seed: u64) -> Self {
        Self {
            num_states: 200,
            num_actions: 5,
            branching: 2,
            reward_sparsity: 0.5,
            granularity: RewardGranularity::StateAction,
            seed,
        }
    }

    /// S=50, K=3, B=2, sparsity 0.5.
    pub fn desk(seed: u64) -> Self {
        Self { num_states: 50, num_actions: 3, ..Self::paper(seed) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_states == 0 || self.num_actions == 0 {
            return Err(config_err!("num_states and num_actions must be positive"));
        }
        if self.branching == 0 || self.branching > self.num_states {
            return Err(config_err!(
                "branching must lie in [1, {}], got {}",
                self.num_states,
                self.branching
            ));
        }
        if !(0.0..=1.0).contains(&self.reward_sparsity) {
            return Err(config_err!("reward_sparsity {} outside [0,1]", self.reward_sparsity));
        }
        Ok(())
    }
}

/// Draws a random MDP: for each pair, `B` distinct successors picked uniformly,
/// probabilities given by the gaps between `B-1` sorted uniforms, and sparse
/// uniform reward means.
pub fn generate_random_mdp(cfg: &GeneratorConfig) -> Result<TabularMdp> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (s_count, k, b) = (cfg.num_states, cfg.num_actions, cfg.branching);
    let mut rows = Vec::with_capacity(s_count * k);
    let mut cuts = Vec::with_capacity(b + 1);
    for _ in 0..s_count * k {
        let successors = rand::seq::index::sample(&mut rng, s_count, b).into_vec();
        cuts.clear();
        cuts.push(0.0);
        for _ in 1..b {
            cuts.push(Open01.sample(&mut rng));
        }
        cuts[1..].sort_by(f64::total_cmp);
        cuts.push(1.0);
        let probs = cuts.windows(2).map(|w| w[1] - w[0]).collect();
        rows.push(TransitionRow { successors, probs, reward_mean: 0.0, transition_rewards: None });
    }
    for row in &mut rows {
        match cfg.granularity {
            RewardGranularity::StateAction => {
                if rng.gen::<f64>() < cfg.reward_sparsity {
                    row.reward_mean = Open01.sample(&mut rng);
                }
            }
            RewardGranularity::Transition => {
                let mut tr = Vec::with_capacity(row.successors.len());
                for _ in 0..row.successors.len() {
                    let r = if rng.gen::<f64>() < cfg.reward_sparsity {
                        Open01.sample(&mut rng)
                    } else {
                        0.0
                    };
                    tr.push(r);
                }
                let mean: f64 = tr.iter().zip(&row.probs).map(|(r, p)| r * p).sum();
                row.reward_mean = mean.clamp(0.0, 1.0);
                row.transition_rewards = Some(tr);
            }
        }
    }
    TabularMdp::new(s_count, k, b, rows)
}

/// A generative model: one call samples a next state and a reward.
pub trait Simulator {
    fn num_actions(&self) -> usize;

    fn sample_step(&mut self, state: usize, action: usize) -> Result<(usize, f64)>;

    /// Number of `sample_step` calls served so far.
    fn calls(&self) -> u64;
}

/// Samples transitions of a [`TabularMdp`] with Bernoulli rewards.
#[derive(Clone, Debug)]
pub struct ForwardModel<'a> {
    mdp: &'a TabularMdp,
    rng: ChaCha8Rng,
    calls: u64,
}

impl<'a> ForwardModel<'a> {
    pub fn new(mdp: &'a TabularMdp, seed: u64) -> Self {
        Self { mdp, rng: ChaCha8Rng::seed_from_u64(seed), calls: 0 }
    }

    pub fn mdp(&self) -> &'a TabularMdp {
        self.mdp
    }
}

impl Simulator for ForwardModel<'_> {
    fn num_actions(&self) -> usize {
        self.mdp.num_actions
    }

    fn sample_step(&mut self, state: usize, action: usize) -> Result<(usize, f64)> {
        if state >= self.mdp.num_states || action >= self.mdp.num_actions {
            return Err(domain_err!("state {state} / action {action} out of range"));
        }
        let row = self.mdp.row(state, action);
        let u: f64 = self.rng.gen();
        let mut acc = 0.0;
        let mut slot = row.probs.len() - 1;
        for (i, p) in row.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                slot = i;
                break;
            }
        }
        let mean = match &row.transition_rewards {
            Some(tr) => tr[slot],
            None => row.reward_mean,
        };
        let reward = if self.rng.gen::<f64>() < mean { 1.0 } else { 0.0 };
        self.calls += 1;
        Ok((row.successors[slot], reward))
    }

    fn calls(&self) -> u64 {
        self.calls
    }
}

/// Optimal finite-horizon values `Q_h`, `V_h` and gaps `Delta_h` for
/// `h = 1..=H` (1-based depth).
#[derive(Clone, Debug, PartialEq)]
pub struct ExactValues {
    horizon: usize,
    gamma: f64,
    num_states: usize,
    num_actions: usize,
    q: Vec<f64>,
    v: Vec<f64>,
    gaps: Vec<f64>,
}

impl ExactValues {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    #[inline]
    fn qi(&self, h: usize, s: usize, a: usize) -> usize {
        debug_assert!((1..=self.horizon).contains(&h));
        ((h - 1) * self.num_states + s) * self.num_actions + a
    }

    pub fn q(&self, h: usize, s: usize, a: usize) -> f64 {
        self.q[self.qi(h, s, a)]
    }

    pub fn v(&self, h: usize, s: usize) -> f64 {
        self.v[(h - 1) * self.num_states + s]
    }

    pub fn gap(&self, h: usize, s: usize, a: usize) -> f64 {
        self.gaps[self.qi(h, s, a)]
    }

    /// Optimal action at depth `h` in `s`, lowest index on ties.
    pub fn optimal_action(&self, h: usize, s: usize) -> usize {
        (0..self.num_actions)
            .find(|&a| self.gap(h, s, a) == 0.0)
            .unwrap_or(0)
    }

    /// `min_{a != a*} [Q_1(s, a*) - Q_1(s, a)]`; zero when two actions tie.
    pub fn min_root_gap(&self, s: usize) -> f64 {
        let best = self.optimal_action(1, s);
        (0..self.num_actions)
            .filter(|&a| a != best)
            .map(|a| self.gap(1, s, a))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Backward induction with `Q_{H+1} = 0`.
pub fn exact_value_iteration(mdp: &TabularMdp, horizon: usize, gamma: f64) -> Result<ExactValues> {
    if horizon == 0 {
        return Err(config_err!("horizon must be at least 1"));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(config_err!("discount {gamma} outside (0,1]"));
    }
    let (ns, na) = (mdp.num_states, mdp.num_actions);
    let mut q = alloc::vec![0.0; horizon * ns * na];
    let mut v = alloc::vec![0.0; horizon * ns];
    let mut gaps = alloc::vec![0.0; horizon * ns * na];
    let mut next_v = alloc::vec![0.0; ns];
    for h in (1..=horizon).rev() {
        for s in 0..ns {
            let base = ((h - 1) * ns + s) * na;
            let mut best = f64::NEG_INFINITY;
            for a in 0..na {
                let row = mdp.row(s, a);
                let cont: f64 = row
                    .successors
                    .iter()
                    .zip(&row.probs)
                    .map(|(&n, &p)| p * next_v[n])
                    .sum();
                let value = row.reward_mean + gamma * cont;
                q[base + a] = value;
                best = best.max(value);
            }
            v[(h - 1) * ns + s] = best;
            for a in 0..na {
                gaps[base + a] = best - q[base + a];
            }
        }
        next_v.copy_from_slice(&v[(h - 1) * ns..h * ns]);
    }
    Ok(ExactValues { horizon, gamma, num_states: ns, num_actions: na, q, v, gaps })
}

/// `V*(s_1) - Q*(s_1, a)` at depth one.
pub fn simple_regret(values: &ExactValues, root: usize, action: usize) -> f64 {
    values.v(1, root) - values.q(1, root, action)
}

/// Smallest horizon with `2 gamma^H / (1 - gamma) <= eps`, i.e.
/// `ceil(log_gamma(eps (1 - gamma) / 2))`, at least 1.
pub fn planning_horizon(eps: f64, gamma: f64) -> Result<usize> {
    if !(eps > 0.0) {
        return Err(config_err!("tolerance must be positive, got {eps}"));
    }
    if gamma >= 1.0 {
        return Err(config_err!("undiscounted setting: the horizon must be supplied explicitly"));
    }
    if !(gamma > 0.0) {
        return Err(config_err!("discount {gamma} outside (0,1)"));
    }
    let h = libm::ceil(libm::log(eps * (1.0 - gamma) / 2.0) / libm::log(gamma));
    Ok(if h < 1.0 { 1 } else { h as usize })
}
