//! History-keyed search tree with path-local confidence-bound refreshes.
//!
//! State nodes stand for a history ending in a state at depth `h`; each owns
//! `K` action slots pointing at plan nodes (the history extended by an
//! action). Plan nodes at depth `H` keep successor counts but no child state
//! nodes, since the value below depth `H` is zero.

use alloc::vec::Vec;

use smallvec::SmallVec;

use crate::confidence::{kl_ucb_lower, kl_ucb_upper, max_linear, min_linear, KlBallProblem, ThresholdSpec};
use crate::error::domain_err;
use crate::mdp::sigma;
use crate::{Error, Result};

pub(crate) const NONE: u32 = u32::MAX;

/// One step of an episode: the action played, the reward observed and the
/// state reached.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Step {
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub root: usize,
    pub steps: Vec<Step>,
}

#[derive(Clone, Debug)]
pub struct StateNode {
    pub state: u32,
    pub depth: u32,
    first_slot: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Successor {
    pub state: u32,
    pub count: u32,
    /// State node for the extended history, `None` at depth `H`.
    child: u32,
}

impl Successor {
    pub fn child(&self) -> Option<u32> {
        (self.child != NONE).then_some(self.child)
    }
}

#[derive(Clone, Debug)]
pub struct PlanNode {
    pub depth: u32,
    pub state: u32,
    pub action: u32,
    pub n: u64,
    pub reward_sum: f64,
    pub successors: SmallVec<[Successor; 2]>,
    pub u: f64,
    pub l: f64,
    pub upper: f64,
    pub lower: f64,
}

/// Which side of the value interval a ball problem feeds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Upper,
    Lower,
}

#[derive(Clone, Debug)]
pub struct SearchTree {
    spec: ThresholdSpec,
    gamma: f64,
    horizon: usize,
    num_actions: usize,
    branching: usize,
    /// `sigma[m]` for `m = 0..=H`.
    sigma: Vec<f64>,
    states: Vec<StateNode>,
    slots: Vec<u32>,
    plans: Vec<PlanNode>,
    path: Vec<u32>,
    scratch_p: Vec<f64>,
    scratch_up: Vec<f64>,
    scratch_lo: Vec<f64>,
}

impl SearchTree {
    pub fn new(spec: ThresholdSpec, gamma: f64, root_state: usize) -> Self {
        let horizon = spec.horizon;
        let sigma = (0..=horizon).map(|m| sigma(m, gamma)).collect();
        let mut tree = Self {
            spec,
            gamma,
            horizon,
            num_actions: spec.num_actions,
            branching: spec.branching,
            sigma,
            states: Vec::new(),
            slots: Vec::new(),
            plans: Vec::new(),
            path: Vec::with_capacity(horizon),
            scratch_p: Vec::with_capacity(spec.branching + 1),
            scratch_up: Vec::with_capacity(spec.branching + 1),
            scratch_lo: Vec::with_capacity(spec.branching + 1),
        };
        tree.push_state(root_state as u32, 1);
        tree
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn thresholds(&self) -> &ThresholdSpec {
        &self.spec
    }

    /// `sigma_m`, the largest discounted reward collectable in `m` steps.
    pub fn sigma(&self, m: usize) -> f64 {
        self.sigma[m]
    }

    pub fn root(&self) -> u32 {
        0
    }

    pub fn root_state(&self) -> usize {
        self.states[0].state as usize
    }

    pub fn state_node(&self, id: u32) -> &StateNode {
        &self.states[id as usize]
    }

    pub fn plan_node(&self, id: u32) -> &PlanNode {
        &self.plans[id as usize]
    }

    pub fn plan_nodes(&self) -> &[PlanNode] {
        &self.plans
    }

    pub fn num_state_nodes(&self) -> usize {
        self.states.len()
    }

    /// Plan nodes refreshed by the last [`SearchTree::update_bounds`], root first.
    pub fn last_path(&self) -> &[u32] {
        &self.path
    }

    pub fn child_plan(&self, state_id: u32, action: usize) -> Option<u32> {
        let slot = self.slots[(self.states[state_id as usize].first_slot as usize) + action];
        (slot != NONE).then_some(slot)
    }

    /// State node reached from `state_id` by `action` then `next_state`.
    pub fn child_state(&self, state_id: u32, action: usize, next_state: usize) -> Option<u32> {
        let plan = self.child_plan(state_id, action)?;
        self.plans[plan as usize]
            .successors
            .iter()
            .find(|s| s.state as usize == next_state)
            .and_then(Successor::child)
    }

    /// `U_h(s_h, a)` for the history `state_id`; unvisited actions sit at `sigma_{H-h+1}`.
    #[inline]
    pub fn action_upper(&self, state_id: u32, action: usize) -> f64 {
        let node = &self.states[state_id as usize];
        match self.slots[node.first_slot as usize + action] {
            NONE => self.sigma[self.horizon + 1 - node.depth as usize],
            p => self.plans[p as usize].upper,
        }
    }

    /// `L_h(s_h, a)`; unvisited actions sit at 0.
    #[inline]
    pub fn action_lower(&self, state_id: u32, action: usize) -> f64 {
        match self.slots[self.states[state_id as usize].first_slot as usize + action] {
            NONE => 0.0,
            p => self.plans[p as usize].lower,
        }
    }

    #[inline]
    pub fn max_upper(&self, state_id: u32) -> f64 {
        (0..self.num_actions).map(|a| self.action_upper(state_id, a)).fold(f64::NEG_INFINITY, f64::max)
    }

    #[inline]
    pub fn max_lower(&self, state_id: u32) -> f64 {
        (0..self.num_actions).map(|a| self.action_lower(state_id, a)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn root_bounds(&self, upper: &mut Vec<f64>, lower: &mut Vec<f64>) {
        upper.clear();
        lower.clear();
        for a in 0..self.num_actions {
            upper.push(self.action_upper(0, a));
            lower.push(self.action_lower(0, a));
        }
    }

    /// Ball problem behind the `side` bound of a plan node: one slot per
    /// observed successor, plus a virtual slot with empirical mass 0 and the
    /// most extreme admissible value when fewer than `B` successors have
    /// been seen. An unvisited node gets the whole simplex (infinite radius).
    pub fn kl_ball_slots(&self, plan_id: u32, side: Side) -> Result<KlBallProblem> {
        let node = &self.plans[plan_id as usize];
        let (mut p, mut v) = (Vec::new(), Vec::new());
        self.fill_slots(node, side, &mut p, &mut v);
        let radius = if node.n == 0 {
            // Any distribution is admissible; p_hat only has to be valid.
            let m = p.len() as f64;
            p.iter_mut().for_each(|x| *x = 1.0 / m);
            f64::INFINITY
        } else {
            let n = node.n as f64;
            self.spec.transition(n) / n
        };
        KlBallProblem::new(p, radius, v)
    }

    fn virtual_value(&self, depth: usize, side: Side) -> f64 {
        match side {
            Side::Upper => self.sigma[self.horizon - depth],
            Side::Lower => 0.0,
        }
    }

    fn fill_slots(&self, node: &PlanNode, side: Side, p: &mut Vec<f64>, v: &mut Vec<f64>) {
        p.clear();
        v.clear();
        let n = node.n as f64;
        for s in &node.successors {
            p.push(if node.n == 0 { 0.0 } else { s.count as f64 / n });
            v.push(match (s.child(), side) {
                (None, _) => 0.0,
                (Some(c), Side::Upper) => self.max_upper(c),
                (Some(c), Side::Lower) => self.max_lower(c),
            });
        }
        if node.successors.len() < self.branching {
            p.push(0.0);
            v.push(self.virtual_value(node.depth as usize, side));
        }
    }

    fn push_state(&mut self, state: u32, depth: u32) -> u32 {
        let id = self.states.len() as u32;
        let first_slot = self.slots.len() as u32;
        self.slots.extend(core::iter::repeat(NONE).take(self.num_actions));
        self.states.push(StateNode { state, depth, first_slot });
        id
    }

    fn plan_slot(&mut self, state_id: u32, action: usize) -> u32 {
        let node = &self.states[state_id as usize];
        let (slot_idx, state, depth) = (node.first_slot as usize + action, node.state, node.depth);
        match self.slots[slot_idx] {
            NONE => {
                let id = self.plans.len() as u32;
                let h = depth as usize;
                self.plans.push(PlanNode {
                    depth,
                    state,
                    action: action as u32,
                    n: 0,
                    reward_sum: 0.0,
                    successors: SmallVec::new(),
                    u: 1.0,
                    l: 0.0,
                    upper: self.sigma[self.horizon + 1 - h],
                    lower: 0.0,
                });
                self.slots[slot_idx] = id;
                id
            }
            id => id,
        }
    }

    /// Adds a finished episode to the counts along its path and refreshes
    /// the bounds of exactly those plan nodes, deepest first.
    pub fn update_bounds(&mut self, trajectory: &Trajectory) -> Result<()> {
        if trajectory.steps.len() != self.horizon {
            return Err(domain_err!(
                "trajectory has {} steps, horizon is {}",
                trajectory.steps.len(),
                self.horizon
            ));
        }
        if trajectory.root != self.root_state() {
            return Err(domain_err!("trajectory starts in {}, tree root is {}", trajectory.root, self.root_state()));
        }
        if let Some(step) = trajectory.steps.iter().find(|s| s.action >= self.num_actions) {
            return Err(domain_err!("action {} out of range", step.action));
        }
        self.path.clear();
        let mut state_id = 0u32;
        for (i, step) in trajectory.steps.iter().enumerate() {
            let depth = i + 1;
            let plan_id = self.plan_slot(state_id, step.action);
            let next = step.next_state as u32;
            let pos = self.plans[plan_id as usize].successors.iter().position(|s| s.state == next);
            let pos = match pos {
                Some(pos) => pos,
                None => {
                    let node = &self.plans[plan_id as usize];
                    if node.successors.len() >= self.branching {
                        return Err(Error::ModelAssumption(alloc::format!(
                            "more than B = {} successors observed at depth {depth}",
                            self.branching
                        )));
                    }
                    let child = if depth < self.horizon { self.push_state(next, depth as u32 + 1) } else { NONE };
                    let node = &mut self.plans[plan_id as usize];
                    node.successors.push(Successor { state: next, count: 0, child });
                    node.successors.len() - 1
                }
            };
            let node = &mut self.plans[plan_id as usize];
            node.n += 1;
            node.reward_sum += step.reward;
            node.successors[pos].count += 1;
            self.path.push(plan_id);
            state_id = node.successors[pos].child;
        }
        for i in (0..self.path.len()).rev() {
            self.refresh(self.path[i])?;
        }
        Ok(())
    }

    fn refresh(&mut self, plan_id: u32) -> Result<()> {
        let node = &self.plans[plan_id as usize];
        let n = node.n as f64;
        let depth = node.depth as usize;
        let level = self.spec.reward(n) / n;
        let mean = node.reward_sum / n;
        let u = kl_ucb_upper(mean, level);
        let l = kl_ucb_lower(mean, level);
        let (upper, lower) = if depth == self.horizon {
            (u, l)
        } else {
            let mut p = core::mem::take(&mut self.scratch_p);
            let mut up = core::mem::take(&mut self.scratch_up);
            let mut lo = core::mem::take(&mut self.scratch_lo);
            self.fill_slots(node, Side::Upper, &mut p, &mut up);
            lo.clear();
            lo.extend(up.iter().enumerate().map(|(i, _)| match node.successors.get(i).and_then(Successor::child) {
                Some(c) => self.max_lower(c),
                None => 0.0,
            }));
            let radius = self.spec.transition(n) / n;
            let hi = max_linear(&p, &up, radius);
            let lw = min_linear(&p, &lo, radius);
            self.scratch_p = p;
            self.scratch_up = up;
            self.scratch_lo = lo;
            let cap = self.sigma[self.horizon + 1 - depth];
            let upper = (u + self.gamma * hi?).min(cap);
            let lower = (l + self.gamma * lw?).max(0.0).min(upper);
            (upper, lower)
        };
        let node = &mut self.plans[plan_id as usize];
        node.u = u;
        node.l = l;
        node.upper = upper;
        node.lower = lower;
        Ok(())
    }
}

/// `argmax_a U_h(s_h, a)` at a history below the root, lowest index on ties.
pub fn optimistic_action(tree: &SearchTree, state_id: u32) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for a in 0..tree.num_actions() {
        let v = tree.action_upper(state_id, a);
        if v > best_val {
            best_val = v;
            best = a;
        }
    }
    best
}

#[cfg(test)]
pub(crate) fn scripted_tree(spec: ThresholdSpec, gamma: f64, episodes: &[Trajectory]) -> SearchTree {
    let mut tree = SearchTree::new(spec, gamma, episodes[0].root);
    for t in episodes {
        tree.update_bounds(t).unwrap();
    }
    tree
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::confidence::{max_over_kl_ball, min_over_kl_ball, ThresholdKind};
    use alloc::vec;
    use approx::assert_abs_diff_eq;

    fn traj(root: usize, steps: &[(usize, f64, usize)]) -> Trajectory {
        Trajectory {
            root,
            steps: steps.iter().map(|&(action, reward, next_state)| Step { action, reward, next_state }).collect(),
        }
    }

    fn spec(h: usize) -> ThresholdSpec {
        ThresholdSpec::new(ThresholdKind::Practical, 0.1, h, 2, 2).unwrap()
    }

    /// Independent recomputation of the backup recursion over the whole
    /// tree, by history, using the public ball solvers.
    fn recompute(tree: &SearchTree, state_id: u32, action: usize) -> (f64, f64) {
        let h = tree.state_node(state_id).depth as usize;
        let big_h = tree.horizon();
        let Some(pid) = tree.child_plan(state_id, action) else {
            return (vec_sigma(tree.gamma(), big_h + 1 - h), 0.0);
        };
        let node = tree.plan_node(pid);
        let n = node.n as f64;
        let lvl = tree.thresholds().reward(n) / n;
        let mean = node.reward_sum / n;
        let u = kl_ucb_upper(mean, lvl);
        let l = kl_ucb_lower(mean, lvl);
        if h == big_h {
            return (u, l);
        }
        let mut p = Vec::new();
        let mut vu = Vec::new();
        let mut vl = Vec::new();
        for s in &node.successors {
            p.push(s.count as f64 / n);
            let c = s.child().unwrap();
            let kids: Vec<(f64, f64)> = (0..tree.num_actions()).map(|a| recompute(tree, c, a)).collect();
            vu.push(kids.iter().map(|k| k.0).fold(f64::MIN, f64::max));
            vl.push(kids.iter().map(|k| k.1).fold(f64::MIN, f64::max));
        }
        if node.successors.len() < 2 {
            p.push(0.0);
            vu.push(vec_sigma(tree.gamma(), big_h - h));
            vl.push(0.0);
        }
        let radius = tree.thresholds().transition(n) / n;
        let hi = max_over_kl_ball(&KlBallProblem::new(p.clone(), radius, vu).unwrap()).unwrap().value;
        let lo = min_over_kl_ball(&KlBallProblem::new(p, radius, vl).unwrap()).unwrap().value;
        (u + tree.gamma() * hi, (l + tree.gamma() * lo).max(0.0))
    }

    fn vec_sigma(gamma: f64, m: usize) -> f64 {
        (0..m).map(|i| gamma.powi(i as i32)).sum()
    }

    fn toy_episodes() -> Vec<Trajectory> {
        vec![
            traj(0, &[(0, 1.0, 0), (1, 0.0, 1)]),
            traj(0, &[(1, 0.0, 1), (0, 1.0, 0)]),
            traj(0, &[(0, 0.0, 1), (0, 1.0, 0)]),
            traj(0, &[(0, 1.0, 0), (1, 1.0, 1)]),
            traj(0, &[(1, 1.0, 1), (1, 0.0, 1)]),
        ]
    }

    #[test]
    fn root_matches_full_tree_recomputation() {
        let tree = scripted_tree(spec(2), 0.7, &toy_episodes());
        for a in 0..2 {
            let (u, l) = recompute(&tree, 0, a);
            assert_abs_diff_eq!(tree.action_upper(0, a), u, epsilon = 1e-10);
            assert_abs_diff_eq!(tree.action_lower(0, a), l, epsilon = 1e-10);
        }
    }

    #[test]
    fn fresh_nodes_follow_conventions() {
        let tree = SearchTree::new(spec(3), 0.5, 4);
        for a in 0..2 {
            assert_eq!(tree.action_upper(0, a), 1.0 + 0.5 + 0.25);
            assert_eq!(tree.action_lower(0, a), 0.0);
        }
    }

    #[test]
    fn leaf_parents_use_reward_bounds_only() {
        let tree = scripted_tree(spec(2), 0.7, &toy_episodes());
        for node in tree.plan_nodes().iter().filter(|n| n.depth == 2) {
            assert_eq!(node.upper, node.u);
            assert_eq!(node.lower, node.l);
        }
    }

    #[test]
    fn off_path_nodes_untouched() {
        let eps = toy_episodes();
        let mut tree = scripted_tree(spec(2), 0.7, &eps);
        let before: Vec<_> = tree.plan_nodes().iter().map(|n| (n.upper.to_bits(), n.lower.to_bits())).collect();
        tree.update_bounds(&eps[0]).unwrap();
        let path = tree.last_path().to_vec();
        for (i, node) in tree.plan_nodes().iter().enumerate() {
            if !path.contains(&(i as u32)) {
                assert_eq!((node.upper.to_bits(), node.lower.to_bits()), before[i]);
            }
        }
    }

    #[test]
    fn ball_slots_cover_virtual_successor() {
        let tree = scripted_tree(spec(2), 0.7, &[traj(0, &[(0, 1.0, 3), (0, 1.0, 3)])]);
        let root_plan = tree.child_plan(0, 0).unwrap();
        let up = tree.kl_ball_slots(root_plan, Side::Upper).unwrap();
        assert_eq!(up.p_hat, vec![1.0, 0.0]);
        let child = tree.child_state(0, 0, 3).unwrap();
        assert_eq!(up.values, vec![tree.max_upper(child), 1.0]);
        let lo = tree.kl_ball_slots(root_plan, Side::Lower).unwrap();
        assert_eq!(lo.values[1], 0.0);
    }

    #[test]
    fn too_many_successors_is_an_error() {
        let mut tree = scripted_tree(spec(1), 0.7, &[traj(0, &[(0, 1.0, 1)]), traj(0, &[(0, 1.0, 2)])]);
        let err = tree.update_bounds(&traj(0, &[(0, 1.0, 3)])).unwrap_err();
        assert!(matches!(err, Error::ModelAssumption(_)));
    }

    #[test]
    fn optimistic_action_prefers_unvisited() {
        let tree = scripted_tree(spec(3), 0.7, &[traj(0, &[(0, 0.0, 0), (0, 0.0, 0), (0, 0.0, 0)])]);
        let child = tree.child_state(0, 0, 0).unwrap();
        assert!(tree.action_upper(child, 0) < tree.sigma(2));
        assert_eq!(optimistic_action(&tree, child), 1);
        let fresh = SearchTree::new(spec(3), 0.7, 0);
        assert_eq!(optimistic_action(&fresh, 0), 0);
    }
}
