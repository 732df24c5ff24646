//! Monte-Carlo checks of the time-uniform deviation inequalities behind the
//! thresholds: each trial simulates one stream and records whether the
//! inequality is ever violated along it.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::kl::{kl_bern, kl_cat};
use crate::error::config_err;
use crate::Result;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "kind"))]
pub enum CoverageKind {
    /// i.i.d. Bernoulli(mean) samples; checks
    /// `n kl(mean_hat_n, mean) <= ln(1/delta) + ln(e (1 + n))`.
    BoundedMean { mean: f64 },
    /// i.i.d. categorical samples; checks
    /// `n KL(p_hat_n, p) <= ln(1/delta) + (m-1) ln(e (1 + n/(m-1)))`.
    Categorical { probs: Vec<f64> },
    /// Bernoulli variables with predictable success probabilities `p_n`;
    /// checks `sum X >= sum p / 2 - ln(1/delta)`.
    CountMartingale,
}

impl CoverageKind {
    pub fn label(&self) -> &'static str {
        match self {
            CoverageKind::BoundedMean { .. } => "bounded_mean",
            CoverageKind::Categorical { .. } => "categorical",
            CoverageKind::CountMartingale => "count_martingale",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CoverageConfig {
    pub kind: CoverageKind,
    pub trials: usize,
    pub stream_length: usize,
    pub delta: f64,
    pub seed: u64,
    /// Multiplies the threshold; 1 reproduces the inequality, smaller values
    /// are canaries that must raise the violation rate.
    pub threshold_scale: f64,
}

impl CoverageConfig {
    pub fn new(kind: CoverageKind, trials: usize, stream_length: usize, delta: f64, seed: u64) -> Self {
        Self { kind, trials, stream_length, delta, seed, threshold_scale: 1.0 }
    }
}

/// Fraction of trials whose stream violates the inequality at some time.
pub fn coverage_test(cfg: &CoverageConfig) -> Result<f64> {
    if cfg.trials == 0 {
        return Err(config_err!("coverage test needs at least one trial"));
    }
    if !(cfg.delta > 0.0 && cfg.delta <= 1.0) {
        return Err(config_err!("delta {} outside (0,1]", cfg.delta));
    }
    match &cfg.kind {
        CoverageKind::BoundedMean { mean } if !(0.0..=1.0).contains(mean) => {
            return Err(config_err!("mean {mean} outside [0,1]"));
        }
        CoverageKind::Categorical { probs } => {
            let total: f64 = probs.iter().sum();
            if probs.len() < 2 || (total - 1.0).abs() > 1e-9 || probs.iter().any(|p| *p < 0.0) {
                return Err(config_err!("categorical coverage needs a distribution with m >= 2"));
            }
        }
        _ => {}
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let log_inv_delta = -libm::log(cfg.delta);
    let mut violations = 0usize;
    for _ in 0..cfg.trials {
        let violated = match &cfg.kind {
            CoverageKind::BoundedMean { mean } => {
                bounded_mean_stream(&mut rng, *mean, cfg.stream_length, log_inv_delta, cfg.threshold_scale)
            }
            CoverageKind::Categorical { probs } => {
                categorical_stream(&mut rng, probs, cfg.stream_length, log_inv_delta, cfg.threshold_scale)
            }
            CoverageKind::CountMartingale => {
                count_stream(&mut rng, cfg.stream_length, log_inv_delta, cfg.threshold_scale)
            }
        };
        violations += usize::from(violated);
    }
    Ok(violations as f64 / cfg.trials as f64)
}

fn bounded_mean_stream(rng: &mut ChaCha8Rng, mean: f64, len: usize, log_inv_delta: f64, scale: f64) -> bool {
    let mut sum = 0.0;
    for n in 1..=len {
        if rng.gen::<f64>() < mean {
            sum += 1.0;
        }
        let nf = n as f64;
        let threshold = scale * (log_inv_delta + 1.0 + libm::log1p(nf));
        if nf * kl_bern(sum / nf, mean) > threshold {
            return true;
        }
    }
    false
}

fn categorical_stream(rng: &mut ChaCha8Rng, probs: &[f64], len: usize, log_inv_delta: f64, scale: f64) -> bool {
    let m = probs.len();
    let m1 = (m - 1) as f64;
    let mut counts = vec![0.0; m];
    let mut p_hat = vec![0.0; m];
    for n in 1..=len {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut slot = m - 1;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                slot = i;
                break;
            }
        }
        counts[slot] += 1.0;
        let nf = n as f64;
        for (ph, c) in p_hat.iter_mut().zip(&counts) {
            *ph = c / nf;
        }
        let threshold = scale * (log_inv_delta + m1 * (1.0 + libm::log1p(nf / m1)));
        if nf * kl_cat(&p_hat, probs) > threshold {
            return true;
        }
    }
    false
}

/// Success probabilities depend on the previous outcome (an adapted,
/// non-stationary sequence): 0.5 first, then 0.2 after a success and 0.8
/// after a failure.
fn count_stream(rng: &mut ChaCha8Rng, len: usize, log_inv_delta: f64, scale: f64) -> bool {
    let (mut successes, mut pseudo) = (0.0, 0.0);
    let mut p = 0.5;
    for _ in 0..len {
        let hit = rng.gen::<f64>() < p;
        pseudo += p;
        if hit {
            successes += 1.0;
        }
        if successes < pseudo / 2.0 - scale * log_inv_delta {
            return true;
        }
        p = if hit { 0.2 } else { 0.8 };
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_masses_never_violate() {
        for mean in [0.0, 1.0] {
            let cfg = CoverageConfig::new(CoverageKind::BoundedMean { mean }, 50, 500, 0.1, 1);
            assert_eq!(coverage_test(&cfg).unwrap(), 0.0);
        }
        let cfg = CoverageConfig::new(CoverageKind::Categorical { probs: vec![1.0, 0.0, 0.0] }, 50, 500, 0.1, 1);
        assert_eq!(coverage_test(&cfg).unwrap(), 0.0);
    }

    #[test]
    fn bernoulli_streams_are_covered() {
        let cfg = CoverageConfig::new(CoverageKind::BoundedMean { mean: 0.3 }, 300, 300, 0.1, 7);
        assert!(coverage_test(&cfg).unwrap() <= 0.1);
    }

    #[test]
    fn shrunken_threshold_is_detected() {
        let mut cfg = CoverageConfig::new(CoverageKind::BoundedMean { mean: 0.3 }, 300, 300, 0.1, 7);
        let honest = coverage_test(&cfg).unwrap();
        cfg.threshold_scale = 0.1;
        let canary = coverage_test(&cfg).unwrap();
        assert!(canary > honest + 0.1, "{honest} vs {canary}");
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = CoverageConfig::new(CoverageKind::CountMartingale, 0, 10, 0.1, 0);
        assert!(coverage_test(&cfg).is_err());
        cfg.trials = 1;
        cfg.delta = 0.0;
        assert!(coverage_test(&cfg).is_err());
        let cfg = CoverageConfig::new(CoverageKind::Categorical { probs: vec![1.0] }, 1, 1, 0.1, 0);
        assert!(coverage_test(&cfg).is_err());
    }
}
