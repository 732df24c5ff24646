//! Property tests for the numerical building blocks and the ground-truth MDP
//! machinery, each checked against an independent oracle.

use gape_core::confidence::{
    kl_bernoulli, kl_categorical, kl_ucb_lower, kl_ucb_upper, max_over_kl_ball, min_over_kl_ball, KlBallProblem,
};
use gape_core::planner::root_decision;
use gape_core::{
    exact_value_iteration, generate_random_mdp, sigma, ForwardModel, GeneratorConfig, RewardGranularity, Simulator,
};
use gape_core::mdp::TransitionRow;
use proptest::prelude::*;

fn brute_force_root(upper: &[f64], lower: &[f64]) -> (usize, usize, f64) {
    let k = upper.len();
    let index =
        |b: usize| (0..k).filter(|&a| a != b).map(|a| upper[a]).fold(f64::NEG_INFINITY, f64::max) - lower[b];
    let b = (0..k).fold(0, |best, cand| if index(cand) < index(best) { cand } else { best });
    let c = (0..k).filter(|&a| a != b).fold(usize::MAX, |c, a| if c == usize::MAX || upper[a] > upper[c] { a } else { c });
    (b, c, upper[c] - lower[b])
}

fn bounds_table() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    prop::collection::vec((0u8..8, 0u8..8), 2..7).prop_map(|pairs| {
        let upper = pairs.iter().map(|&(a, b)| a.max(b) as f64 / 4.0).collect();
        let lower = pairs.iter().map(|&(a, b)| a.min(b) as f64 / 4.0).collect();
        (upper, lower)
    })
}

fn simplex(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, m).prop_map(|mut w| {
        if w.iter().all(|&x| x == 0.0) {
            w[0] = 1.0;
        }
        let t: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= t);
        w
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn root_rule_matches_brute_force((upper, lower) in bounds_table()) {
        let d = root_decision(&upper, &lower).unwrap();
        let (b, c, stat) = brute_force_root(&upper, &lower);
        prop_assert_eq!((d.best, d.challenger), (b, c));
        prop_assert_eq!(d.stop_stat, stat);
        prop_assert!(d.selected == b || d.selected == c);
        let width = |a: usize| upper[a] - lower[a];
        let other = if d.selected == b { c } else { b };
        prop_assert!(width(d.selected) >= width(other));
    }

    #[test]
    fn kl_bounds_bracket_the_mean(p in 0.0f64..=1.0, level in 1e-6f64..20.0) {
        let (lo, hi) = (kl_ucb_lower(p, level), kl_ucb_upper(p, level));
        prop_assert!(lo <= p && p <= hi);
        prop_assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
        // Feasible, or the root sits within one ulp below `hi`.
        let feasible = |v: f64| kl_bernoulli(p, v).unwrap() <= level * (1.0 + 1e-9) + 1e-12;
        prop_assert!(feasible(hi) || feasible(hi.next_down()));
        prop_assert!(lo == 0.0 || feasible(lo) || feasible(lo.next_up()));
    }

    #[test]
    fn kl_bounds_monotone_in_level(p in 0.0f64..=1.0, a in 1e-6f64..10.0, b in 1e-6f64..10.0) {
        let (small, large) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(kl_ucb_upper(p, small) <= kl_ucb_upper(p, large));
        prop_assert!(kl_ucb_lower(p, small) >= kl_ucb_lower(p, large));
    }

    #[test]
    fn ball_extremes_are_feasible_and_bracket_plug_in(
        p in simplex(3),
        values in prop::collection::vec(0.0f64..2.0, 3),
        radius in 1e-4f64..3.0,
    ) {
        let problem = KlBallProblem::new(p.clone(), radius, values.clone()).unwrap();
        let hi = max_over_kl_ball(&problem).unwrap();
        let lo = min_over_kl_ball(&problem).unwrap();
        let plug = problem.plug_in();
        prop_assert!(lo.value <= plug + 1e-12 && plug <= hi.value + 1e-12);
        let vmax = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let vmin = values.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(hi.value <= vmax + 1e-12 && lo.value >= vmin - 1e-12);
        for sol in [&hi, &lo] {
            let mass: f64 = sol.distribution.iter().sum();
            prop_assert!((mass - 1.0).abs() < 1e-9);
            let kl = kl_categorical(&p, &sol.distribution).unwrap();
            prop_assert!(kl <= radius * (1.0 + 1e-6) + 1e-9, "kl {} radius {}", kl, radius);
        }
    }

    #[test]
    fn ball_is_monotone_in_radius(p in simplex(3), values in prop::collection::vec(0.0f64..1.0, 3), r in 1e-3f64..1.0) {
        let small = KlBallProblem::new(p.clone(), r, values.clone()).unwrap();
        let large = KlBallProblem::new(p, 2.0 * r, values).unwrap();
        prop_assert!(max_over_kl_ball(&small).unwrap().value <= max_over_kl_ball(&large).unwrap().value + 1e-12);
        prop_assert!(min_over_kl_ball(&small).unwrap().value >= min_over_kl_ball(&large).unwrap().value - 1e-12);
    }

    #[test]
    fn generator_respects_its_configuration(
        states in 2usize..30,
        actions in 1usize..5,
        branching in 1usize..4,
        sparsity in 0.0f64..=1.0,
        seed in any::<u64>(),
        transition in any::<bool>(),
    ) {
        let branching = branching.min(states);
        let granularity = if transition { RewardGranularity::Transition } else { RewardGranularity::StateAction };
        let cfg = GeneratorConfig { num_states: states, num_actions: actions, branching, reward_sparsity: sparsity, granularity, seed };
        let mdp = generate_random_mdp(&cfg).unwrap();
        prop_assert_eq!(&mdp, &generate_random_mdp(&cfg).unwrap());
        for row in mdp.rows() {
            prop_assert_eq!(row.successors.len(), branching);
            prop_assert!((row.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&row.reward_mean));
        }
    }

    #[test]
    fn exact_values_satisfy_bellman(seed in any::<u64>(), horizon in 1usize..6, gamma in 0.3f64..1.0) {
        let mdp = generate_random_mdp(&GeneratorConfig { num_states: 12, num_actions: 3, ..GeneratorConfig::paper(seed) }).unwrap();
        let v = exact_value_iteration(&mdp, horizon, gamma).unwrap();
        for h in 1..=horizon {
            for s in 0..12 {
                let mut best = f64::NEG_INFINITY;
                for a in 0..3 {
                    let row: &TransitionRow = mdp.row(s, a);
                    let next: f64 = if h == horizon {
                        0.0
                    } else {
                        row.successors.iter().zip(&row.probs).map(|(&t, p)| p * v.v(h + 1, t)).sum()
                    };
                    let q = row.reward_mean + gamma * next;
                    prop_assert!((v.q(h, s, a) - q).abs() < 1e-12);
                    prop_assert!(v.gap(h, s, a) >= 0.0);
                    best = best.max(q);
                }
                prop_assert!((v.v(h, s) - best).abs() < 1e-12);
                prop_assert!(v.v(h, s) <= sigma(horizon - h + 1, gamma) + 1e-12);
            }
        }
    }
}

#[test]
fn deterministic_transitions_with_one_successor() {
    let mdp = generate_random_mdp(&GeneratorConfig { branching: 1, ..GeneratorConfig::desk(5) }).unwrap();
    let mut sim = ForwardModel::new(&mdp, 9);
    for s in 0..mdp.num_states() {
        for a in 0..mdp.num_actions() {
            let (next, _) = sim.sample_step(s, a).unwrap();
            assert_eq!(next, mdp.row(s, a).successors[0]);
        }
    }
}

#[test]
fn sampled_frequencies_within_three_sigma() {
    let mdp = generate_random_mdp(&GeneratorConfig::desk(11)).unwrap();
    let mut sim = ForwardModel::new(&mdp, 12);
    let draws = 20_000;
    for (s, a) in [(0, 0), (3, 1), (17, 2)] {
        let row = mdp.row(s, a);
        let mut counts = vec![0usize; row.successors.len()];
        let mut reward_total = 0.0;
        for _ in 0..draws {
            let (next, r) = sim.sample_step(s, a).unwrap();
            counts[row.successors.iter().position(|&x| x == next).unwrap()] += 1;
            reward_total += r;
        }
        for (c, p) in counts.iter().zip(&row.probs) {
            let sd = (p * (1.0 - p) / draws as f64).sqrt();
            assert!((*c as f64 / draws as f64 - p).abs() <= 3.0 * sd + 1e-12);
        }
        let m = row.reward_mean;
        let sd = (m * (1.0 - m) / draws as f64).sqrt();
        assert!((reward_total / draws as f64 - m).abs() <= 3.0 * sd + 1e-12);
    }
    assert_eq!(sim.calls(), 3 * draws as u64);
}

#[test]
fn sparsity_extremes() {
    let none = generate_random_mdp(&GeneratorConfig { reward_sparsity: 0.0, ..GeneratorConfig::desk(1) }).unwrap();
    assert!(none.rows().iter().all(|r| r.reward_mean == 0.0));
    let all = generate_random_mdp(&GeneratorConfig { reward_sparsity: 1.0, ..GeneratorConfig::desk(1) }).unwrap();
    assert!(all.rows().iter().all(|r| r.reward_mean > 0.0));
}
