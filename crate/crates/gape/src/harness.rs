//! Campaign execution: fixed-confidence runs, the tolerance-scaling study,
//! fixed-budget comparisons and concentration coverage.
//!
//! Replication `i` uses the MDP generated from seed `base + i` and a
//! forward model seeded from that value, so every run can be reproduced on
//! its own. Runs execute in parallel and are collected in task order.

use std::path::Path;

use gape_core::baselines::{
    brue_plan, budget_split, kl_olop_plan, sparse_sampling_budget, uct_plan, BudgetConfig,
};
use gape_core::confidence::{coverage_test, CoverageConfig, CoverageKind, ThresholdKind, ThresholdSpec};
use gape_core::planner::{plan, GapeConfig, DEFAULT_MAX_EPISODES};
use gape_core::{
    exact_value_iteration, generate_random_mdp, planning_horizon, simple_regret, Algorithm, ExactValues,
    ForwardModel, RunRecord, TabularMdp,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::campaign::{AlgoSpec, Campaign, ConcentrationSpec, Mode, ThresholdChoice};
use crate::error::{io_err, HarnessError, Result};
use crate::io::write_csv;
use crate::stats;

/// All runs start from state 0.
pub const ROOT: usize = 0;

/// Tolerance defining the default scoring horizon of fixed-budget runs.
pub const EVAL_EPS: f64 = 1e-3;

pub const FAILED: &str = "failed";

/// Seed of the forward model used on the MDP generated from `mdp_seed`.
pub fn episode_seed(mdp_seed: u64) -> u64 {
    mdp_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1)
}

/// One line of `results.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub algorithm: Algorithm,
    pub eps_or_budget: f64,
    pub seed: u64,
    pub tau: Option<u64>,
    pub n: Option<u64>,
    pub regret: Option<f64>,
    pub stop_reason: String,
}

impl RunRow {
    fn from_outcome(algorithm: Algorithm, eps_or_budget: f64, seed: u64, outcome: &Result<RunRecord>) -> Self {
        match outcome {
            Ok(r) => Self {
                algorithm,
                eps_or_budget,
                seed,
                tau: Some(r.tau),
                n: Some(r.oracle_calls),
                regret: r.simple_regret,
                stop_reason: r.stop_reason.to_string(),
            },
            Err(_) => Self {
                algorithm,
                eps_or_budget,
                seed,
                tau: None,
                n: None,
                regret: None,
                stop_reason: FAILED.to_string(),
            },
        }
    }
}

/// One line of `summary.csv`: aggregates over the replications of one
/// (algorithm, eps or budget) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub eps_or_budget: f64,
    pub runs: usize,
    pub failures: usize,
    pub median_n: Option<f64>,
    pub max_n: Option<f64>,
    pub mean_n: Option<f64>,
    pub mean_log_n: Option<f64>,
    pub max_regret: Option<f64>,
    pub mean_regret: Option<f64>,
    pub regret_ci_low: Option<f64>,
    pub regret_ci_high: Option<f64>,
    /// Fraction of runs with regret at most eps (fixed-confidence only).
    pub correct_rate: Option<f64>,
    /// Sparse Sampling budget at the same tolerance (fixed-confidence only).
    pub n_ss: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub eps: f64,
    pub log_inv_eps: f64,
    pub mean_n: f64,
    pub mean_log_n: f64,
}

/// Least-squares fits of `log n` against `log(1/eps)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    /// Slope of the per-eps mean of `log n`.
    pub slope: f64,
    /// Slope of the log of the per-eps mean of `n`.
    pub slope_log_mean: f64,
    pub points: Vec<ScalingPoint>,
}

/// One line of `coverage.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub kind: String,
    pub delta: f64,
    pub trials: usize,
    pub length: usize,
    pub violation_rate: f64,
}

impl CoverageRow {
    pub fn passes(&self) -> bool {
        self.violation_rate <= self.delta
    }
}

#[derive(Clone, Debug, Default)]
pub struct CampaignResult {
    pub rows: Vec<RunRow>,
    /// Full records in the order of `rows`; failed runs keep their error.
    pub records: Vec<std::result::Result<RunRecord, String>>,
    pub summary: Vec<SummaryRow>,
    pub scaling: Option<ScalingFit>,
    pub coverage: Vec<CoverageRow>,
}

impl CampaignResult {
    pub fn errors(&self) -> impl Iterator<Item = &str> {
        self.records.iter().filter_map(|r| r.as_ref().err().map(String::as_str))
    }
}

fn threshold_kind(choice: ThresholdChoice) -> ThresholdKind {
    match choice {
        ThresholdChoice::Practical => ThresholdKind::Practical,
        ThresholdChoice::Theoretical => ThresholdKind::Theoretical,
    }
}

/// Settings of a single fixed-confidence run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanSettings {
    pub eps: f64,
    pub gamma: f64,
    pub delta: f64,
    pub thresholds: ThresholdChoice,
    /// Defaults to the smallest horizon whose truncation costs at most eps.
    pub horizon: Option<usize>,
    pub max_episodes: u64,
    pub episode_seed: u64,
}

impl PlanSettings {
    pub fn resolved_horizon(&self) -> Result<usize> {
        match self.horizon {
            Some(0) => Err(HarnessError::Config("horizon must be positive".into())),
            Some(h) => Ok(h),
            None => Ok(planning_horizon(self.eps, self.gamma)?),
        }
    }

    pub fn gape_config(&self, mdp: &TabularMdp) -> Result<GapeConfig> {
        let spec = ThresholdSpec::new(
            threshold_kind(self.thresholds),
            self.delta,
            self.resolved_horizon()?,
            mdp.branching(),
            mdp.num_actions(),
        )?;
        Ok(GapeConfig::new(self.eps, self.gamma, spec)?.with_max_episodes(self.max_episodes))
    }
}

/// Runs the planner on `mdp` from [`ROOT`] and scores the recommendation
/// against exact values at the planning horizon.
pub fn plan_on_mdp(mdp: &TabularMdp, settings: &PlanSettings) -> Result<RunRecord> {
    let cfg = settings.gape_config(mdp)?;
    let mut sim = ForwardModel::new(mdp, settings.episode_seed);
    let mut record = plan(&cfg, &mut sim, ROOT)?;
    let values = exact_value_iteration(mdp, cfg.horizon(), settings.gamma)?;
    record.simple_regret = Some(simple_regret(&values, ROOT, record.recommended_action));
    record.episode_seed = settings.episode_seed;
    Ok(record)
}

fn fixed_confidence_run(c: &Campaign, algo: &AlgoSpec, eps: f64, rep: usize) -> Result<RunRecord> {
    let seed = c.replication_seed(rep);
    let mdp = generate_random_mdp(&c.env.generator(seed))?;
    let settings = PlanSettings {
        eps,
        gamma: c.gamma,
        delta: c.delta,
        thresholds: c.thresholds,
        horizon: None,
        max_episodes: algo.params.max_episodes.unwrap_or(DEFAULT_MAX_EPISODES),
        episode_seed: episode_seed(seed),
    };
    let mut record = plan_on_mdp(&mdp, &settings)?;
    record.mdp_seed = Some(seed);
    Ok(record)
}

fn check_mode(c: &Campaign, allowed: &[Mode]) -> Result<()> {
    c.validate()?;
    if allowed.contains(&c.mode) {
        Ok(())
    } else {
        Err(HarnessError::Config(format!("campaign mode {:?} does not match", c.mode)))
    }
}

fn collect(
    tasks: Vec<(Algorithm, f64, u64)>,
    outcomes: Vec<Result<RunRecord>>,
) -> (Vec<RunRow>, Vec<std::result::Result<RunRecord, String>>) {
    let rows = tasks
        .iter()
        .zip(&outcomes)
        .map(|(&(alg, x, seed), o)| RunRow::from_outcome(alg, x, seed, o))
        .collect();
    let records = outcomes.into_iter().map(|o| o.map_err(|e| e.to_string())).collect();
    (rows, records)
}

pub fn run_fixed_confidence(c: &Campaign) -> Result<CampaignResult> {
    check_mode(c, &[Mode::FixedConfidence, Mode::Scaling])?;
    let algo = c.algorithms().remove(0);
    let tasks: Vec<(f64, usize)> =
        c.eps_grid.iter().flat_map(|&e| (0..c.replications).map(move |r| (e, r))).collect();
    let outcomes: Vec<Result<RunRecord>> =
        tasks.par_iter().map(|&(eps, rep)| fixed_confidence_run(c, &algo, eps, rep)).collect();
    let labels = tasks.iter().map(|&(e, r)| (Algorithm::Gape, e, c.replication_seed(r))).collect();
    let (rows, records) = collect(labels, outcomes);
    let summary = summarize(c, &rows)?;
    Ok(CampaignResult { rows, records, summary, ..Default::default() })
}

/// Fixed-confidence runs over the eps grid, then the slope fits.
pub fn run_scaling(c: &Campaign) -> Result<CampaignResult> {
    check_mode(c, &[Mode::Scaling])?;
    let mut result = run_fixed_confidence(c)?;
    result.scaling = Some(fit_scaling(&result.rows)?);
    Ok(result)
}

/// Fits both slope variants from raw rows; failed runs are skipped.
pub fn fit_scaling(rows: &[RunRow]) -> Result<ScalingFit> {
    let mut grid: Vec<f64> = Vec::new();
    for r in rows {
        if !grid.contains(&r.eps_or_budget) {
            grid.push(r.eps_or_budget);
        }
    }
    let mut points = Vec::new();
    for eps in grid {
        let ns: Vec<f64> =
            rows.iter().filter(|r| r.eps_or_budget == eps).filter_map(|r| r.n).map(|n| n as f64).collect();
        let logs: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
        if let (Some(mean_n), Some(mean_log_n)) = (stats::mean(&ns), stats::mean(&logs)) {
            points.push(ScalingPoint { eps, log_inv_eps: (1.0 / eps).ln(), mean_n, mean_log_n });
        }
    }
    let x: Vec<f64> = points.iter().map(|p| p.log_inv_eps).collect();
    let y: Vec<f64> = points.iter().map(|p| p.mean_log_n).collect();
    let y2: Vec<f64> = points.iter().map(|p| p.mean_n.ln()).collect();
    let not_enough = || HarnessError::Config("scaling fit needs at least two distinct eps values with runs".into());
    let slope = stats::ls_slope(&x, &y).ok_or_else(not_enough)?;
    let slope_log_mean = stats::ls_slope(&x, &y2).ok_or_else(not_enough)?;
    Ok(ScalingFit { slope, slope_log_mean, points })
}

fn eval_horizon(c: &Campaign) -> Result<usize> {
    match c.eval_horizon {
        Some(h) => Ok(h),
        None => Ok(planning_horizon(EVAL_EPS, c.gamma)?),
    }
}

fn budget_run(c: &Campaign, algo: &AlgoSpec, budget: u64, mdp: &TabularMdp, seed: u64, values: &ExactValues) -> Result<RunRecord> {
    let ep_seed = episode_seed(seed);
    let mut sim = ForwardModel::new(mdp, ep_seed);
    let mut bc = BudgetConfig::new(budget, c.gamma, ep_seed);
    if let Some(x) = algo.params.exploration {
        bc.exploration = x;
    }
    let mut record = match algo.name {
        Algorithm::Gape => {
            let (tau, horizon) = budget_split(budget, c.gamma)?;
            let cfg = GapeConfig::fixed_budget(tau, c.gamma, horizon, mdp.branching(), mdp.num_actions())?;
            plan(&cfg, &mut sim, ROOT)?
        }
        Algorithm::KlOlop => kl_olop_plan(&mut sim, ROOT, &bc)?,
        Algorithm::Brue => brue_plan(&mut sim, ROOT, &bc)?,
        Algorithm::Uct => uct_plan(&mut sim, ROOT, &bc)?,
        Algorithm::SparseSampling => {
            return Err(HarnessError::Config("sparse_sampling has no budget mode".into()));
        }
    };
    record.simple_regret = Some(simple_regret(values, ROOT, record.recommended_action));
    record.mdp_seed = Some(seed);
    record.episode_seed = ep_seed;
    Ok(record)
}

/// Every algorithm at every budget on the same replication MDPs; regret is
/// measured with exact values at the scoring horizon.
pub fn run_fixed_budget(c: &Campaign) -> Result<CampaignResult> {
    check_mode(c, &[Mode::FixedBudget])?;
    let h_eval = eval_horizon(c)?;
    let instances: Vec<Result<(TabularMdp, ExactValues)>> = (0..c.replications)
        .into_par_iter()
        .map(|rep| {
            let mdp = generate_random_mdp(&c.env.generator(c.replication_seed(rep)))?;
            let values = exact_value_iteration(&mdp, h_eval, c.gamma)?;
            Ok((mdp, values))
        })
        .collect();
    let algos = c.algorithms();
    let mut tasks = Vec::new();
    for (ai, a) in algos.iter().enumerate() {
        for &b in &c.budget_grid {
            for rep in 0..c.replications {
                tasks.push((ai, a.name, b, rep));
            }
        }
    }
    let outcomes: Vec<Result<RunRecord>> = tasks
        .par_iter()
        .map(|&(ai, _, budget, rep)| match &instances[rep] {
            Ok((mdp, values)) => budget_run(c, &algos[ai], budget, mdp, c.replication_seed(rep), values),
            Err(e) => Err(HarnessError::Config(e.to_string())),
        })
        .collect();
    let labels = tasks.iter().map(|&(_, alg, b, rep)| (alg, b as f64, c.replication_seed(rep))).collect();
    let (rows, records) = collect(labels, outcomes);
    let summary = summarize(c, &rows)?;
    Ok(CampaignResult { rows, records, summary, ..Default::default() })
}

/// Stream families of the coverage table, with their CSV labels.
pub fn coverage_kinds(spec: &ConcentrationSpec) -> Vec<(String, CoverageKind)> {
    let mut kinds = vec![("bounded_mean".to_string(), CoverageKind::BoundedMean { mean: spec.bernoulli_mean })];
    for &m in &spec.categorical_sizes {
        let total = (m * (m + 1) / 2) as f64;
        let probs = (1..=m).map(|i| i as f64 / total).collect();
        kinds.push((format!("categorical_m{m}"), CoverageKind::Categorical { probs }));
    }
    kinds.push(("count_martingale".to_string(), CoverageKind::CountMartingale));
    kinds
}

pub fn run_concentration_suite(c: &Campaign) -> Result<CampaignResult> {
    check_mode(c, &[Mode::Concentration])?;
    let spec = c.concentration.clone().unwrap_or_default();
    let kinds = coverage_kinds(&spec);
    let cells: Vec<(f64, &(String, CoverageKind))> =
        spec.delta_grid.iter().flat_map(|&d| kinds.iter().map(move |k| (d, k))).collect();
    let coverage = cells
        .par_iter()
        .enumerate()
        .map(|(i, &(delta, (label, kind)))| {
            let cfg = CoverageConfig::new(kind.clone(), spec.trials, spec.stream_length, delta, c.replication_seed(i));
            Ok(CoverageRow {
                kind: label.clone(),
                delta,
                trials: spec.trials,
                length: spec.stream_length,
                violation_rate: coverage_test(&cfg)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CampaignResult { coverage, ..Default::default() })
}

pub fn run_campaign(c: &Campaign) -> Result<CampaignResult> {
    match c.mode {
        Mode::FixedConfidence => run_fixed_confidence(c),
        Mode::Scaling => run_scaling(c),
        Mode::FixedBudget => run_fixed_budget(c),
        Mode::Concentration => run_concentration_suite(c),
    }
}

/// Per-cell aggregates, computed from the raw rows alone.
pub fn summarize(c: &Campaign, rows: &[RunRow]) -> Result<Vec<SummaryRow>> {
    let mut cells: Vec<(Algorithm, f64)> = Vec::new();
    for r in rows {
        if !cells.contains(&(r.algorithm, r.eps_or_budget)) {
            cells.push((r.algorithm, r.eps_or_budget));
        }
    }
    let fixed_confidence = matches!(c.mode, Mode::FixedConfidence | Mode::Scaling);
    let mut out = Vec::with_capacity(cells.len());
    for (algorithm, x) in cells {
        let cell: Vec<&RunRow> = rows.iter().filter(|r| r.algorithm == algorithm && r.eps_or_budget == x).collect();
        let ns: Vec<f64> = cell.iter().filter_map(|r| r.n).map(|n| n as f64).collect();
        let logs: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
        let regrets: Vec<f64> = cell.iter().filter_map(|r| r.regret).collect();
        let ci = stats::ci95(&regrets);
        let (correct_rate, n_ss) = if fixed_confidence {
            let correct = regrets.iter().filter(|&&r| r <= x).count();
            let rate = (!regrets.is_empty()).then(|| correct as f64 / regrets.len() as f64);
            let h = planning_horizon(x, c.gamma)?;
            (rate, Some(sparse_sampling_budget(h, c.env.branching, c.env.actions, x)))
        } else {
            (None, None)
        };
        out.push(SummaryRow {
            algorithm,
            eps_or_budget: x,
            runs: ns.len(),
            failures: cell.len() - ns.len(),
            median_n: stats::median(&ns),
            max_n: stats::max(&ns),
            mean_n: stats::mean(&ns),
            mean_log_n: stats::mean(&logs),
            max_regret: stats::max(&regrets),
            mean_regret: stats::mean(&regrets),
            regret_ci_low: ci.map(|c| c.0),
            regret_ci_high: ci.map(|c| c.1),
            correct_rate,
            n_ss,
        });
    }
    Ok(out)
}

/// Writes `results.csv` and `summary.csv` (run campaigns), `scaling.csv`
/// (scaling campaigns) or `coverage.csv` (concentration campaigns).
pub fn write_outputs(c: &Campaign, result: &CampaignResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    if c.mode == Mode::Concentration {
        return write_csv(&dir.join("coverage.csv"), c, &result.coverage);
    }
    write_csv(&dir.join("results.csv"), c, &result.rows)?;
    write_csv(&dir.join("summary.csv"), c, &result.summary)?;
    if let Some(fit) = &result.scaling {
        #[derive(Serialize)]
        struct Line {
            eps: f64,
            log_inv_eps: f64,
            mean_n: f64,
            mean_log_n: f64,
            slope: f64,
            slope_log_mean: f64,
        }
        let lines: Vec<Line> = fit
            .points
            .iter()
            .map(|p| Line {
                eps: p.eps,
                log_inv_eps: p.log_inv_eps,
                mean_n: p.mean_n,
                mean_log_n: p.mean_log_n,
                slope: fit.slope,
                slope_log_mean: fit.slope_log_mean,
            })
            .collect();
        write_csv(&dir.join("scaling.csv"), c, &lines)?;
    }
    Ok(())
}
