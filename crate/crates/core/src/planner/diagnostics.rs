//! Replay of a recorded run against the true MDP.
//!
//! The planner's tree is rebuilt episode by episode from the trajectory log,
//! which reproduces every policy the planner played. Along the way the
//! replay checks the concentration events on every refreshed node and
//! accumulates pseudo-counts: expected visit counts of each history under
//! the policies played, obtained by pushing reach probabilities through the
//! true kernel.
//!
//! Histories the tree has never seen are played with action 0 at every
//! depth, so their reach mass is parked on the history and only pushed
//! further down once the planner visits it. Count checks below such a
//! parked history start once the mass has been pushed.

use alloc::vec;
use alloc::vec::Vec;

use smallvec::SmallVec;

use super::decision::root_decision;
use super::gape::GapeConfig;
use super::tree::{optimistic_action, SearchTree, Step, Trajectory, NONE};
use crate::mdp::{exact_value_iteration, ExactValues, TabularMdp};
use crate::error::domain_err;
use crate::{Error, Result};

/// Episodes played by a run, stored flat (`H` entries per episode).
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrajectoryLog {
    pub horizon: usize,
    pub actions: Vec<u32>,
    pub rewards: Vec<f64>,
    pub next_states: Vec<u32>,
}

impl TrajectoryLog {
    pub fn new(horizon: usize) -> Self {
        Self { horizon, ..Self::default() }
    }

    pub fn push(&mut self, trajectory: &Trajectory) {
        for s in &trajectory.steps {
            self.actions.push(s.action as u32);
            self.rewards.push(s.reward);
            self.next_states.push(s.next_state as u32);
        }
    }

    pub fn episodes(&self) -> usize {
        if self.horizon == 0 {
            0
        } else {
            self.actions.len() / self.horizon
        }
    }

    pub fn trajectory(&self, root: usize, t: usize) -> Trajectory {
        let r = t * self.horizon..(t + 1) * self.horizon;
        let steps = r
            .map(|i| Step {
                action: self.actions[i] as usize,
                reward: self.rewards[i],
                next_state: self.next_states[i] as usize,
            })
            .collect();
        Trajectory { root, steps }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Diagnostics {
    pub config: GapeConfig,
    pub root_state: usize,
    pub log: TrajectoryLog,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    Reward,
    Transition,
    Count,
    /// `L <= Q <= U` failed at a refreshed node.
    ValueInclusion,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Violation {
    /// 1-based episode after which the violation was observed.
    pub episode: u64,
    pub depth: usize,
    pub state: usize,
    pub action: usize,
    pub kind: ViolationKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EventReport {
    pub episodes: u64,
    pub reward_event: bool,
    pub transition_event: bool,
    pub count_event: bool,
    pub value_inclusion: bool,
    pub first_violation: Option<Violation>,
    /// Node refreshes examined.
    pub checked_nodes: u64,
}

impl EventReport {
    /// Whether the reward, transition and count events all held.
    pub fn holds(&self) -> bool {
        self.reward_event && self.transition_event && self.count_event
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PseudoCountRow {
    pub depth: usize,
    pub state: usize,
    pub action: usize,
    pub count: u64,
    pub pseudo_count: f64,
    /// `max(Delta_1, Delta, eps)` at the root, `Delta_h` below.
    pub gap: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PseudoCountReport {
    pub episodes: u64,
    /// Sum of pseudo-counts over all histories of each depth (index `h - 1`).
    pub depth_totals: Vec<f64>,
    pub root_pseudo_counts: Vec<f64>,
    pub root_counts: Vec<u64>,
    /// Visited histories with a positive gap.
    pub rows: Vec<PseudoCountRow>,
    /// Visited histories the replay never assigned reach mass to (always 0
    /// for a consistent log).
    pub unmatched: usize,
}

impl PseudoCountReport {
    pub fn inequality_holds(&self) -> bool {
        self.rows.iter().all(|r| r.holds)
    }
}

/// Leading constant of the pseudo-count/gap inequality.
pub fn pseudo_count_constant() -> f64 {
    64.0 * core::f64::consts::SQRT_2 * (1.0 + core::f64::consts::SQRT_2)
}

pub fn check_event_e(diag: &Diagnostics, mdp: &TabularMdp) -> Result<EventReport> {
    audit_run(diag, mdp).map(|(e, _)| e)
}

pub fn track_pseudo_counts(diag: &Diagnostics, mdp: &TabularMdp) -> Result<PseudoCountReport> {
    audit_run(diag, mdp).map(|(_, p)| p)
}

/// Both reports from a single replay.
pub fn audit_run(diag: &Diagnostics, mdp: &TabularMdp) -> Result<(EventReport, PseudoCountReport)> {
    let cfg = &diag.config;
    let spec = cfg.thresholds;
    if spec.num_actions != mdp.num_actions() || spec.branching < mdp.branching() {
        return Err(Error::Precondition("diagnostics do not match the MDP dimensions"));
    }
    if diag.log.horizon != spec.horizon || diag.root_state >= mdp.num_states() {
        return Err(Error::Precondition("diagnostics log is inconsistent with its configuration"));
    }
    let values = exact_value_iteration(mdp, spec.horizon, cfg.gamma)?;
    let mut replay = Replay::new(diag, mdp, &values);
    let episodes = diag.log.episodes();
    for t in 0..episodes {
        replay.episode(t)?;
    }
    let pseudo = replay.finish(cfg.eps);
    Ok((replay.report, pseudo))
}

struct ShadowState {
    state: u32,
    depth: u32,
    /// Planner state node for this history, once it exists.
    planner: u32,
    parent_plan: u32,
    first_slot: u32,
    pending: f64,
}

struct ShadowPlan {
    parent: u32,
    action: u32,
    pseudo: f64,
    /// Shadow children, one per true successor with positive probability.
    children: SmallVec<[(u32, u32); 2]>,
}

struct Replay<'a> {
    diag: &'a Diagnostics,
    mdp: &'a TabularMdp,
    values: &'a ExactValues,
    tree: SearchTree,
    states: Vec<ShadowState>,
    slots: Vec<u32>,
    plans: Vec<ShadowPlan>,
    touched_plans: Vec<u32>,
    touched_parked: Vec<u32>,
    depth_totals: Vec<f64>,
    report: EventReport,
    episode: u64,
    root_action: usize,
}

impl<'a> Replay<'a> {
    fn new(diag: &'a Diagnostics, mdp: &'a TabularMdp, values: &'a ExactValues) -> Self {
        let cfg = &diag.config;
        let h = cfg.horizon();
        let mut r = Self {
            diag,
            mdp,
            values,
            tree: SearchTree::new(cfg.thresholds, cfg.gamma, diag.root_state),
            states: Vec::new(),
            slots: Vec::new(),
            plans: Vec::new(),
            touched_plans: Vec::new(),
            touched_parked: Vec::new(),
            depth_totals: vec![0.0; h],
            report: EventReport {
                episodes: 0,
                reward_event: true,
                transition_event: true,
                count_event: true,
                value_inclusion: true,
                first_violation: None,
                checked_nodes: 0,
            },
            episode: 0,
            root_action: 0,
        };
        r.push_state(diag.root_state as u32, 1, NONE);
        r.states[0].planner = 0;
        r
    }

    fn k(&self) -> usize {
        self.mdp.num_actions()
    }

    fn push_state(&mut self, state: u32, depth: u32, parent_plan: u32) -> u32 {
        let id = self.states.len() as u32;
        let first_slot = self.slots.len() as u32;
        self.slots.extend(core::iter::repeat(NONE).take(self.k()));
        self.states.push(ShadowState { state, depth, planner: NONE, parent_plan, first_slot, pending: 0.0 });
        id
    }

    fn plan_of(&mut self, sid: u32, action: usize) -> u32 {
        let idx = self.states[sid as usize].first_slot as usize + action;
        if self.slots[idx] == NONE {
            self.slots[idx] = self.plans.len() as u32;
            self.plans.push(ShadowPlan { parent: sid, action: action as u32, pseudo: 0.0, children: SmallVec::new() });
        }
        self.slots[idx]
    }

    fn child_of(&mut self, pid: u32, next: u32) -> u32 {
        if let Some(&(_, c)) = self.plans[pid as usize].children.iter().find(|(s, _)| *s == next) {
            return c;
        }
        let parent = self.plans[pid as usize].parent;
        let depth = self.states[parent as usize].depth + 1;
        let c = self.push_state(next, depth, pid);
        self.plans[pid as usize].children.push((next, c));
        c
    }

    /// Planner state node of a shadow history, if the planner has one.
    fn resolve(&mut self, sid: u32) -> Option<u32> {
        let s = &self.states[sid as usize];
        if s.planner != NONE {
            return Some(s.planner);
        }
        let (state, parent_plan) = (s.state, s.parent_plan);
        let plan = &self.plans[parent_plan as usize];
        let (parent, action) = (plan.parent, plan.action as usize);
        let ps = self.resolve(parent)?;
        let id = self.tree.child_state(ps, action, state as usize)?;
        self.states[sid as usize].planner = id;
        Some(id)
    }

    fn planner_count(&mut self, pid: u32) -> u64 {
        let (parent, action) = (self.plans[pid as usize].parent, self.plans[pid as usize].action as usize);
        self.resolve(parent)
            .and_then(|ps| self.tree.child_plan(ps, action))
            .map_or(0, |p| self.tree.plan_node(p).n)
    }

    fn push_parked(&mut self, sid: u32) {
        let mass = core::mem::replace(&mut self.states[sid as usize].pending, 0.0);
        if mass == 0.0 {
            return;
        }
        let pid = self.plan_of(sid, 0);
        self.plans[pid as usize].pseudo += mass;
        self.touched_plans.push(pid);
        let (state, depth) = (self.states[sid as usize].state as usize, self.states[sid as usize].depth as usize);
        if depth < self.tree.horizon() {
            let row = self.mdp.row(state, 0);
            for (&s2, &p) in row.successors.iter().zip(&row.probs) {
                if p > 0.0 {
                    let c = self.child_of(pid, s2 as u32);
                    self.states[c as usize].pending += mass * p;
                    self.touched_parked.push(c);
                }
            }
        }
    }

    /// Adds the reach probabilities of the policy about to be played.
    fn spread(&mut self, sid: u32, planner: Option<u32>, mass: f64) {
        let depth = self.states[sid as usize].depth as usize;
        let Some(ps) = planner else {
            self.states[sid as usize].pending += mass;
            self.touched_parked.push(sid);
            for total in &mut self.depth_totals[depth - 1..] {
                *total += mass;
            }
            return;
        };
        self.states[sid as usize].planner = ps;
        self.push_parked(sid);
        let action = if depth == 1 { self.root_action } else { optimistic_action(&self.tree, ps) };
        let pid = self.plan_of(sid, action);
        self.plans[pid as usize].pseudo += mass;
        self.touched_plans.push(pid);
        self.depth_totals[depth - 1] += mass;
        if depth == self.tree.horizon() {
            return;
        }
        let state = self.states[sid as usize].state as usize;
        let row = self.mdp.row(state, action);
        for (&s2, &p) in row.successors.iter().zip(&row.probs) {
            if p > 0.0 {
                let c = self.child_of(pid, s2 as u32);
                let next_planner = self.tree.child_state(ps, action, s2);
                self.spread(c, next_planner, mass * p);
            }
        }
    }

    fn violate(&mut self, depth: usize, state: usize, action: usize, kind: ViolationKind) {
        match kind {
            ViolationKind::Reward => self.report.reward_event = false,
            ViolationKind::Transition => self.report.transition_event = false,
            ViolationKind::Count => self.report.count_event = false,
            ViolationKind::ValueInclusion => self.report.value_inclusion = false,
        }
        if self.report.first_violation.is_none() {
            self.report.first_violation = Some(Violation { episode: self.episode, depth, state, action, kind });
        }
    }

    fn episode(&mut self, t: usize) -> Result<()> {
        let traj = self.diag.log.trajectory(self.diag.root_state, t);
        if self.k() >= 2 {
            let mut up = Vec::new();
            let mut lo = Vec::new();
            self.tree.root_bounds(&mut up, &mut lo);
            let d = root_decision(&up, &lo)?;
            if d.selected != traj.steps[0].action {
                return Err(domain_err!("episode {} does not replay: root action differs", t + 1));
            }
        }
        self.root_action = traj.steps[0].action;
        self.touched_plans.clear();
        self.touched_parked.clear();
        self.spread(0, Some(0), 1.0);
        self.tree.update_bounds(&traj)?;
        self.episode = t as u64 + 1;
        self.report.episodes = self.episode;
        self.check_path();
        self.check_counts();
        Ok(())
    }

    fn check_path(&mut self) {
        let spec = *self.tree.thresholds();
        let path: SmallVec<[u32; 16]> = self.tree.last_path().iter().copied().collect();
        for pid in path {
            let node = self.tree.plan_node(pid).clone();
            let (h, s, a) = (node.depth as usize, node.state as usize, node.action as usize);
            self.report.checked_nodes += 1;
            let r = self.mdp.reward_mean(s, a);
            if !(node.l <= r && r <= node.u) {
                self.violate(h, s, a, ViolationKind::Reward);
            }
            let n = node.n as f64;
            let row = self.mdp.row(s, a);
            let mut kl = 0.0;
            for succ in &node.successors {
                let p_hat = succ.count as f64 / n;
                let p = row.successors.iter().position(|&x| x == succ.state as usize).map_or(0.0, |i| row.probs[i]);
                kl += if p > 0.0 { p_hat * libm::log(p_hat / p) } else { f64::INFINITY };
            }
            if kl > spec.transition(n) / n {
                self.violate(h, s, a, ViolationKind::Transition);
            }
            let q = self.values.q(h, s, a);
            let slack = 1e-9;
            if !(node.lower <= q + slack && q <= node.upper + slack) {
                self.violate(h, s, a, ViolationKind::ValueInclusion);
            }
        }
    }

    fn check_counts(&mut self) {
        let beta = self.tree.thresholds().count();
        let plans = core::mem::take(&mut self.touched_plans);
        for &pid in &plans {
            let sid = self.plans[pid as usize].parent;
            let action = self.plans[pid as usize].action as usize;
            let mut pseudo = self.plans[pid as usize].pseudo;
            if action == 0 {
                pseudo += self.states[sid as usize].pending;
            }
            let n = self.planner_count(pid) as f64;
            if n < pseudo / 2.0 - beta {
                let st = &self.states[sid as usize];
                let (d, s) = (st.depth as usize, st.state as usize);
                self.violate(d, s, action, ViolationKind::Count);
            }
        }
        self.touched_plans = plans;
        let parked = core::mem::take(&mut self.touched_parked);
        for &sid in &parked {
            let pending = self.states[sid as usize].pending;
            let (n, pseudo) = match self.resolve(sid) {
                Some(ps) => {
                    let pid = self.plan_of(sid, 0);
                    let n = self.tree.child_plan(ps, 0).map_or(0, |p| self.tree.plan_node(p).n);
                    (n as f64, self.plans[pid as usize].pseudo + pending)
                }
                None => (0.0, pending),
            };
            if n < pseudo / 2.0 - beta {
                let st = &self.states[sid as usize];
                let (d, s) = (st.depth as usize, st.state as usize);
                self.violate(d, s, 0, ViolationKind::Count);
            }
        }
        self.touched_parked = parked;
    }

    fn finish(&mut self, eps: f64) -> PseudoCountReport {
        // Push parked mass into every history the planner knows about.
        let mut i = 0;
        while i < self.states.len() {
            let sid = i as u32;
            if self.states[i].pending > 0.0 && self.resolve(sid).is_some() {
                self.push_parked(sid);
            }
            i += 1;
        }
        let spec = *self.tree.thresholds();
        let horizon = spec.horizon;
        let bk = (spec.branching * spec.num_actions) as f64;
        let c0 = pseudo_count_constant();
        let root = self.diag.root_state;
        let min_gap = self.values.min_root_gap(root);
        let mut rows = Vec::new();
        let mut matched = 0usize;
        let k = self.k();
        let mut root_pseudo = vec![0.0; k];
        for pid in 0..self.plans.len() as u32 {
            let count = self.planner_count(pid);
            let plan = &self.plans[pid as usize];
            let st = &self.states[plan.parent as usize];
            let (h, s, a) = (st.depth as usize, st.state as usize, plan.action as usize);
            let pseudo = plan.pseudo;
            if h == 1 {
                root_pseudo[a] = pseudo;
            }
            if count == 0 {
                continue;
            }
            matched += 1;
            let gap = if h == 1 { self.values.gap(1, s, a).max(min_gap).max(eps) } else { self.values.gap(h, s, a) };
            if gap <= 0.0 {
                continue;
            }
            let lhs = pseudo * gap;
            let rhs = c0 * libm::pow(libm::sqrt(bk), (horizon - h) as f64) * libm::sqrt(pseudo * spec.master(pseudo));
            rows.push(PseudoCountRow { depth: h, state: s, action: a, count, pseudo_count: pseudo, gap, lhs, rhs, holds: lhs <= rhs });
        }
        let visited = self.tree.plan_nodes().iter().filter(|n| n.n > 0).count();
        let root_counts = (0..k).map(|a| self.tree.child_plan(0, a).map_or(0, |p| self.tree.plan_node(p).n)).collect();
        PseudoCountReport {
            episodes: self.episode,
            depth_totals: self.depth_totals.clone(),
            root_pseudo_counts: root_pseudo,
            root_counts,
            rows,
            unmatched: visited - matched.min(visited),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::confidence::{ThresholdKind, ThresholdSpec};
    use crate::mdp::{generate_random_mdp, ForwardModel, GeneratorConfig};
    use crate::planner::plan;

    fn tiny_run(kind: ThresholdKind, seed: u64) -> (TabularMdp, Diagnostics, crate::RunRecord) {
        let gen = GeneratorConfig { num_states: 5, num_actions: 2, branching: 2, seed, ..GeneratorConfig::desk(seed) };
        let mdp = generate_random_mdp(&gen).unwrap();
        let spec = ThresholdSpec::new(kind, 0.1, 3, 2, 2).unwrap();
        let cfg = GapeConfig::new(0.5, 0.7, spec).unwrap().with_trajectories(true).with_max_episodes(20_000);
        let mut sim = ForwardModel::new(&mdp, seed ^ 0xABCD);
        let mut rec = plan(&cfg, &mut sim, 0).unwrap();
        let diag = rec.diagnostics.take().unwrap();
        (mdp, diag, rec)
    }

    #[test]
    fn pseudo_counts_sum_to_episodes_per_depth() {
        let (mdp, diag, rec) = tiny_run(ThresholdKind::Practical, 3);
        let report = track_pseudo_counts(&diag, &mdp).unwrap();
        assert_eq!(report.episodes, rec.tau);
        for total in &report.depth_totals {
            assert!((total - rec.tau as f64).abs() < 1e-6 * (1.0 + rec.tau as f64));
        }
        for a in 0..2 {
            assert_eq!(report.root_pseudo_counts[a], report.root_counts[a] as f64);
        }
        assert_eq!(report.unmatched, 0);
    }

    #[test]
    fn theoretical_run_satisfies_events() {
        let (mdp, diag, _) = tiny_run(ThresholdKind::Theoretical, 5);
        let (events, pseudo) = audit_run(&diag, &mdp).unwrap();
        assert!(events.holds(), "{:?}", events.first_violation);
        assert!(events.value_inclusion);
        assert!(pseudo.inequality_holds());
    }

    #[test]
    fn shrunken_threshold_breaks_events() {
        let mut broken = 0;
        for seed in 0..5 {
            let (mdp, diag, _) = tiny_run(ThresholdKind::Constant { value: 0.01 }, seed);
            broken += usize::from(!check_event_e(&diag, &mdp).unwrap().holds());
        }
        assert!(broken >= 4);
    }
}
