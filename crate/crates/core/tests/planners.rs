//! End-to-end behaviour of the planners on generated MDPs.

use gape_core::baselines::{
    brue_plan, budget_split, kl_olop_plan, sparse_sampling_calls, sparse_sampling_plan, uct_plan, BudgetConfig,
};
use gape_core::confidence::{ThresholdKind, ThresholdSpec};
use gape_core::planner::{plan, GapeConfig};
use gape_core::{
    exact_value_iteration, generate_random_mdp, planning_horizon, sigma, simple_regret, ForwardModel, GeneratorConfig,
    Result, RunRecord, Simulator, StopReason, TabularMdp,
};

fn practical(eps: f64, gamma: f64, mdp: &TabularMdp) -> GapeConfig {
    let h = planning_horizon(eps, gamma).unwrap();
    let spec = ThresholdSpec::new(ThresholdKind::Practical, 0.1, h, mdp.branching(), mdp.num_actions()).unwrap();
    GapeConfig::new(eps, gamma, spec).unwrap()
}

#[test]
fn oracle_calls_are_horizon_times_episodes() {
    for seed in 0..8 {
        let mdp = generate_random_mdp(&GeneratorConfig::desk(seed)).unwrap();
        let cfg = practical(1.0, 0.7, &mdp);
        let mut sim = ForwardModel::new(&mdp, seed + 100);
        let r = plan(&cfg, &mut sim, 0).unwrap();
        assert_eq!(r.oracle_calls, r.tau * r.horizon as u64);
        assert_eq!(r.oracle_calls, sim.calls());
        assert_eq!(r.stop_reason, StopReason::Confident);
        assert!(r.stop_stat.unwrap() <= 1.0);
        let values = exact_value_iteration(&mdp, r.horizon, 0.7).unwrap();
        assert!(simple_regret(&values, 0, r.recommended_action) <= 1.0);
    }
}

#[test]
fn tolerance_above_sigma_stops_before_any_episode() {
    let mdp = generate_random_mdp(&GeneratorConfig::desk(3)).unwrap();
    let h = 4;
    let spec = ThresholdSpec::new(ThresholdKind::Practical, 0.1, h, 2, 3).unwrap();
    let cfg = GapeConfig::new(sigma(h, 0.7), 0.7, spec).unwrap();
    let mut sim = ForwardModel::new(&mdp, 1);
    let r = plan(&cfg, &mut sim, 0).unwrap();
    assert_eq!((r.tau, r.oracle_calls, r.recommended_action), (0, 0, 0));
    assert_eq!(r.stop_reason, StopReason::Confident);
}

#[test]
fn single_action_needs_no_calls() {
    let mdp = generate_random_mdp(&GeneratorConfig { num_actions: 1, ..GeneratorConfig::desk(2) }).unwrap();
    let cfg = practical(0.5, 0.7, &mdp);
    let mut sim = ForwardModel::new(&mdp, 1);
    let r = plan(&cfg, &mut sim, 0).unwrap();
    assert_eq!((r.stop_reason, r.tau, r.oracle_calls), (StopReason::SingleAction, 0, 0));
    for run in [kl_olop_plan, brue_plan, uct_plan] {
        let rec = run(&mut ForwardModel::new(&mdp, 1), 0, &BudgetConfig::new(500, 0.7, 1)).unwrap();
        assert_eq!(rec.recommended_action, 0);
    }
}

#[test]
fn episode_cap_is_respected() {
    let mdp = generate_random_mdp(&GeneratorConfig::paper(4)).unwrap();
    let cfg = practical(0.25, 0.7, &mdp).with_max_episodes(50);
    let r = plan(&cfg, &mut ForwardModel::new(&mdp, 4), 0).unwrap();
    assert_eq!((r.tau, r.stop_reason), (50, StopReason::BudgetExhausted));
}

#[test]
fn fixed_budget_mode_spends_its_episodes() {
    let mdp = generate_random_mdp(&GeneratorConfig::desk(6)).unwrap();
    let (tau, h) = budget_split(2000, 0.7).unwrap();
    let cfg = GapeConfig::fixed_budget(tau, 0.7, h, 2, 3).unwrap();
    let r = plan(&cfg, &mut ForwardModel::new(&mdp, 6), 0).unwrap();
    assert_eq!((r.tau, r.oracle_calls, r.stop_reason), (tau, tau * h as u64, StopReason::BudgetSpent));
}

#[test]
fn runs_are_reproducible() {
    let mdp = generate_random_mdp(&GeneratorConfig::desk(8)).unwrap();
    let cfg = practical(0.5, 0.7, &mdp);
    let a = plan(&cfg, &mut ForwardModel::new(&mdp, 42), 0).unwrap();
    let b = plan(&cfg, &mut ForwardModel::new(&mdp, 42), 0).unwrap();
    assert_eq!(a, b);
    let bc = BudgetConfig::new(3000, 0.7, 42);
    for run in [kl_olop_plan, brue_plan, uct_plan] {
        let x = run(&mut ForwardModel::new(&mdp, 42), 0, &bc).unwrap();
        let y = run(&mut ForwardModel::new(&mdp, 42), 0, &bc).unwrap();
        assert_eq!(x, y);
    }
}

#[test]
fn baselines_spend_tau_episodes_of_length_h() {
    let mdp = generate_random_mdp(&GeneratorConfig::desk(9)).unwrap();
    for budget in [10u64, 100, 1000, 5000] {
        let bc = BudgetConfig::new(budget, 0.7, 1);
        let (tau, h) = bc.split().unwrap();
        for which in 0..3 {
            let mut sim = ForwardModel::new(&mdp, 3);
            let r: RunRecord = match which {
                0 => kl_olop_plan(&mut sim, 0, &bc),
                1 => brue_plan(&mut sim, 0, &bc),
                _ => uct_plan(&mut sim, 0, &bc),
            }
            .unwrap();
            assert_eq!((r.tau, r.horizon), (tau, h));
            assert_eq!(r.oracle_calls, tau * h as u64);
            assert_eq!(sim.calls(), r.oracle_calls);
            assert!(r.oracle_calls <= budget + tau, "{:?} used {} of {budget}", r.algorithm, r.oracle_calls);
            assert!(r.recommended_action < 3);
        }
    }
}

/// Forwards to a model and remembers every root-level sample.
struct Recorder<'a> {
    inner: ForwardModel<'a>,
    samples: Vec<(usize, f64)>,
}

impl Simulator for Recorder<'_> {
    fn num_actions(&self) -> usize {
        self.inner.num_actions()
    }

    fn sample_step(&mut self, state: usize, action: usize) -> Result<(usize, f64)> {
        let out = self.inner.sample_step(state, action)?;
        self.samples.push((action, out.1));
        Ok(out)
    }

    fn calls(&self) -> u64 {
        self.inner.calls()
    }
}

#[test]
fn brue_with_unit_horizon_is_monte_carlo() {
    let mdp = generate_random_mdp(&GeneratorConfig::desk(10)).unwrap();
    let bc = BudgetConfig::new(60, 0.1, 5);
    assert_eq!(bc.split().unwrap().1, 1);
    let mut sim = Recorder { inner: ForwardModel::new(&mdp, 5), samples: Vec::new() };
    let r = brue_plan(&mut sim, 0, &bc).unwrap();
    let mut sums = [0.0; 3];
    let mut counts = [0usize; 3];
    for &(a, reward) in &sim.samples {
        sums[a] += reward;
        counts[a] += 1;
    }
    let mut best: Option<usize> = None;
    for a in 0..3 {
        if counts[a] > 0 {
            let mean = sums[a] / counts[a] as f64;
            assert_eq!(r.root_upper[a], mean);
            if best.map_or(true, |b| mean > sums[b] / counts[b] as f64) {
                best = Some(a);
            }
        }
    }
    assert_eq!(Some(r.recommended_action), best);
}

#[test]
fn sparse_sampling_estimates_small_mdp() {
    let mdp = generate_random_mdp(&GeneratorConfig { num_states: 5, num_actions: 2, ..GeneratorConfig::paper(12) })
        .unwrap();
    let (h, c, gamma) = (2, 400, 0.7);
    let mut sim = ForwardModel::new(&mdp, 13);
    let out = sparse_sampling_plan(&mut sim, 0, h, c, gamma).unwrap();
    assert_eq!(out.calls as u128, sparse_sampling_calls(h, c as u64, 2));
    let values = exact_value_iteration(&mdp, h, gamma).unwrap();
    for a in 0..2 {
        // Each estimate averages C returns bounded by sigma_H; the inner
        // maximum adds a nonnegative bias of the same order.
        let sd = sigma(h, gamma) / (c as f64).sqrt();
        assert!((out.q_root[a] - values.q(1, 0, a)).abs() <= 5.0 * sd, "{a}: {} vs {}", out.q_root[a], values.q(1, 0, a));
    }
}
