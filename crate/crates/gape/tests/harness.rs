//! Campaign-level properties: persisted aggregates, trends and canaries.

use gape::campaign::{AlgoSpec, Campaign, EnvConfig, Mode};
use gape::harness::{self, RunRow, SummaryRow};
use gape::io::read_csv;
use gape_core::confidence::{coverage_test, CoverageConfig, CoverageKind};
use gape_core::Algorithm;

fn budget_campaign(algos: &[Algorithm], budgets: Vec<u64>, reps: usize) -> Campaign {
    let mut c = Campaign::new(Mode::FixedBudget);
    c.env = EnvConfig::desk();
    c.seed = 10;
    c.replications = reps;
    c.budget_grid = budgets;
    c.algos = algos.iter().map(|&a| AlgoSpec::new(a)).collect();
    c
}

#[test]
fn persisted_summary_recomputes_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = Campaign::new(Mode::Scaling);
    c.env = EnvConfig::desk();
    c.eps_grid = vec![2.0, 1.0, 0.7];
    c.replications = 6;
    c.seed = 5;
    let result = harness::run_campaign(&c).unwrap();
    harness::write_outputs(&c, &result, dir.path()).unwrap();
    let (echo, rows): (String, Vec<RunRow>) = read_csv(&dir.path().join("results.csv")).unwrap();
    let (_, summary): (String, Vec<SummaryRow>) = read_csv(&dir.path().join("summary.csv")).unwrap();
    assert_eq!(rows, result.rows);
    assert_eq!(harness::summarize(&c, &rows).unwrap(), summary);
    assert_eq!(harness::fit_scaling(&rows).unwrap(), result.scaling.unwrap());
    let echoed: Campaign = serde_json::from_str(&echo).unwrap();
    assert_eq!(echoed, c);
    for r in &rows {
        let (tau, n) = (r.tau.unwrap(), r.n.unwrap());
        let h = gape_core::planning_horizon(r.eps_or_budget, c.gamma).unwrap() as u64;
        assert_eq!(n, h * tau);
    }
}

#[test]
fn zero_gap_mdps_have_zero_regret() {
    let mut c = budget_campaign(&[Algorithm::Gape, Algorithm::KlOlop, Algorithm::Brue, Algorithm::Uct], vec![100, 1000], 5);
    c.env.sparsity = 0.0;
    let result = harness::run_fixed_budget(&c).unwrap();
    assert_eq!(result.rows.len(), 4 * 2 * 5);
    assert!(result.rows.iter().all(|r| r.regret == Some(0.0)));
}

#[test]
fn mean_regret_trends_down_with_budget() {
    let algos = [Algorithm::Gape, Algorithm::KlOlop, Algorithm::Brue, Algorithm::Uct];
    let c = budget_campaign(&algos, vec![100, 400, 1600, 6400], 40);
    let result = harness::run_fixed_budget(&c).unwrap();
    for alg in algos {
        let cells: Vec<&SummaryRow> = result.summary.iter().filter(|s| s.algorithm == alg).collect();
        assert_eq!(cells.len(), 4);
        for w in cells.windows(2) {
            assert!(
                w[1].regret_ci_low.unwrap() <= w[0].regret_ci_high.unwrap(),
                "{alg}: regret rose from {:?} to {:?}",
                w[0].mean_regret,
                w[1].mean_regret
            );
        }
        let (first, last) = (cells[0].mean_regret.unwrap(), cells[3].mean_regret.unwrap());
        assert!(last <= first, "{alg}: {first} -> {last}");
    }
}

#[test]
fn gape_beats_kl_olop_at_high_budget() {
    let mut c = budget_campaign(&[Algorithm::Gape, Algorithm::KlOlop], vec![16_000], 100);
    c.env = EnvConfig::paper();
    let result = harness::run_fixed_budget(&c).unwrap();
    let mean = |alg| result.summary.iter().find(|s| s.algorithm == alg).unwrap().mean_regret.unwrap();
    assert!(mean(Algorithm::Gape) <= mean(Algorithm::KlOlop), "{} vs {}", mean(Algorithm::Gape), mean(Algorithm::KlOlop));
}

#[test]
fn fixed_confidence_campaign_is_correct_and_reproducible() {
    let mut c = Campaign::new(Mode::FixedConfidence);
    c.env = EnvConfig::desk();
    c.eps_grid = vec![1.0];
    c.replications = 10;
    c.seed = 20;
    let a = harness::run_fixed_confidence(&c).unwrap();
    let b = harness::run_fixed_confidence(&c).unwrap();
    assert_eq!(a.rows, b.rows);
    let s = &a.summary[0];
    assert_eq!(s.correct_rate, Some(1.0));
    assert!(s.n_ss.unwrap() > s.max_n.unwrap());
    assert_eq!(a.rows.iter().map(|r| r.seed).collect::<Vec<_>>(), (20..30).collect::<Vec<_>>());
}

#[test]
fn unit_delta_rows_report_rates_in_range() {
    let mut c = Campaign::new(Mode::Concentration);
    c.concentration = Some(gape::campaign::ConcentrationSpec {
        trials: 200,
        stream_length: 200,
        delta_grid: vec![1.0],
        ..Default::default()
    });
    let result = harness::run_concentration_suite(&c).unwrap();
    assert_eq!(result.coverage.len(), 5);
    assert!(result.coverage.iter().all(|r| r.passes() && (0.0..=1.0).contains(&r.violation_rate)));
}

#[test]
fn halving_the_threshold_raises_violations() {
    let kind = CoverageKind::Categorical { probs: vec![0.2, 0.3, 0.5] };
    let mut cfg = CoverageConfig::new(kind, 1000, 1000, 0.1, 77);
    let full = coverage_test(&cfg).unwrap();
    cfg.threshold_scale = 0.5;
    let half = coverage_test(&cfg).unwrap();
    assert!(half > full + 0.01, "{full} -> {half}");
}

#[test]
fn mode_mismatch_is_a_config_error() {
    let c = budget_campaign(&[Algorithm::Uct], vec![100], 1);
    let err = harness::run_fixed_confidence(&c).unwrap_err();
    assert!(err.is_config());
}
