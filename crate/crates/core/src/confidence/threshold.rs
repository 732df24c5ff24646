//! Exploration thresholds `beta(n, delta)` governing confidence-set sizes.

use crate::error::config_err;
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "kind"))]
pub enum ThresholdKind {
    /// Calibrated so that the concentration event holds with probability
    /// at least `1 - delta` (union over `3 (BK)^H` confidence statements).
    Theoretical,
    /// `ln(1/delta) + ln ln n` for rewards and `ln(1/delta) + ln n` for
    /// transitions.
    Practical,
    /// `ln(tau)` for every term, `tau` the episode budget.
    FixedBudget { episodes: u64 },
    /// The same value for every term and every count; a deliberately
    /// miscalibrated canary when small.
    Constant { value: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThresholdTerm {
    Reward,
    Transition,
    Count,
    /// Pointwise maximum of the three terms.
    Master,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ThresholdSpec {
    pub kind: ThresholdKind,
    pub delta: f64,
    pub horizon: usize,
    pub branching: usize,
    pub num_actions: usize,
}

impl ThresholdSpec {
    pub fn new(
        kind: ThresholdKind,
        delta: f64,
        horizon: usize,
        branching: usize,
        num_actions: usize,
    ) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(config_err!("delta {delta} outside (0,1]"));
        }
        if horizon == 0 || branching == 0 || num_actions == 0 {
            return Err(config_err!("H, B and K must be positive"));
        }
        match kind {
            ThresholdKind::FixedBudget { episodes: 0 } => {
                return Err(config_err!("fixed-budget thresholds need a positive episode budget"));
            }
            ThresholdKind::Constant { value } if !(value >= 0.0 && value.is_finite()) => {
                return Err(config_err!("constant threshold {value} must be finite and nonnegative"));
            }
            _ => {}
        }
        Ok(Self { kind, delta, horizon, branching, num_actions })
    }

    /// `ln(3 (BK)^H / delta)`.
    pub fn union_log(&self) -> f64 {
        libm::log(3.0)
            + self.horizon as f64 * libm::log((self.branching * self.num_actions) as f64)
            - libm::log(self.delta)
    }

    pub fn eval(&self, term: ThresholdTerm, n: f64) -> f64 {
        match term {
            ThresholdTerm::Reward => self.reward(n),
            ThresholdTerm::Transition => self.transition(n),
            ThresholdTerm::Count => self.count(),
            ThresholdTerm::Master => self.master(n),
        }
    }

    pub fn reward(&self, n: f64) -> f64 {
        match self.kind {
            ThresholdKind::Theoretical => self.union_log() + 1.0 + libm::log1p(n),
            // ln ln n is negative (or -inf) below n = e; floor it at zero.
            ThresholdKind::Practical => {
                let ln_n = if n > 0.0 { libm::log(n) } else { 0.0 };
                -libm::log(self.delta) + libm::log(ln_n.max(1.0))
            }
            ThresholdKind::FixedBudget { episodes } => libm::log(episodes as f64),
            ThresholdKind::Constant { value } => value,
        }
    }

    pub fn transition(&self, n: f64) -> f64 {
        match self.kind {
            ThresholdKind::Theoretical => {
                // (B-1) ln(e (1 + n/(B-1))) -> 0 as B -> 1.
                let b1 = (self.branching - 1) as f64;
                let tail = if self.branching == 1 { 0.0 } else { b1 * (1.0 + libm::log1p(n / b1)) };
                self.union_log() + tail
            }
            ThresholdKind::Practical => {
                -libm::log(self.delta) + if n > 1.0 { libm::log(n) } else { 0.0 }
            }
            ThresholdKind::FixedBudget { episodes } => libm::log(episodes as f64),
            ThresholdKind::Constant { value } => value,
        }
    }

    pub fn count(&self) -> f64 {
        match self.kind {
            ThresholdKind::Theoretical => self.union_log(),
            ThresholdKind::Practical => -libm::log(self.delta),
            ThresholdKind::FixedBudget { episodes } => libm::log(episodes as f64),
            ThresholdKind::Constant { value } => value,
        }
    }

    pub fn master(&self, n: f64) -> f64 {
        self.reward(n).max(self.transition(n)).max(self.count())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn theo(b: usize) -> ThresholdSpec {
        ThresholdSpec::new(ThresholdKind::Theoretical, 0.1, 6, b, 5).unwrap()
    }

    #[test]
    fn theoretical_reward_at_zero() {
        // ln(3 * 10^6 / 0.1) + ln(e * 1), computed by hand:
        // ln 3 + 7 ln 10 + 1.
        let expected = 3f64.ln() + 7.0 * 10f64.ln() + 1.0;
        assert_abs_diff_eq!(theo(2).reward(0.0), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(expected, 18.216_707_939_626, epsilon = 1e-9);
    }

    #[test]
    fn practical_and_budget_values() {
        let p = ThresholdSpec::new(ThresholdKind::Practical, 0.1, 6, 2, 5).unwrap();
        assert_abs_diff_eq!(p.reward(core::f64::consts::E), 10f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(p.transition(100.0), 10f64.ln() + 100f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(p.reward(1.0), 10f64.ln(), epsilon = 1e-12);
        let fb = ThresholdSpec::new(ThresholdKind::FixedBudget { episodes: 143 }, 0.1, 7, 2, 5).unwrap();
        for n in [0.0, 1.0, 50.0, 1e6] {
            assert_abs_diff_eq!(fb.reward(n), 143f64.ln(), epsilon = 1e-12);
            assert_abs_diff_eq!(fb.transition(n), 143f64.ln(), epsilon = 1e-12);
        }
    }

    #[test]
    fn master_matches_closed_form() {
        // For B >= 2 the maximum is the transition term.
        for b in [2usize, 3, 5] {
            let spec = theo(b);
            for n in [1.0, 10.0, 1e4] {
                let b1 = (b - 1) as f64;
                let closed = spec.union_log() + b1 * (1.0 + (1.0 + n / b1).ln());
                assert_abs_diff_eq!(spec.master(n), closed, epsilon = 1e-9);
            }
        }
        // B = 1: the reward term dominates.
        let spec = theo(1);
        let closed = (3.0 * 5f64.powi(6) / 0.1).ln() + (core::f64::consts::E * 11.0).ln();
        assert_abs_diff_eq!(spec.master(10.0), closed, epsilon = 1e-9);
    }

    #[test]
    fn master_monotonicity_on_grid() {
        for b in [1usize, 2, 4] {
            let spec = theo(b);
            let mut prev_n = 1.0;
            let mut prev = spec.master(1.0);
            let mut n = 1.0f64;
            while n <= 1e6 {
                n = (n * 1.05).ceil();
                let cur = spec.master(n);
                assert!(cur >= prev);
                assert!(cur / n <= prev / prev_n);
                prev = cur;
                prev_n = n;
            }
        }
    }

    #[test]
    fn rejects_bad_delta() {
        assert!(ThresholdSpec::new(ThresholdKind::Theoretical, 0.0, 6, 2, 5).is_err());
        assert!(ThresholdSpec::new(ThresholdKind::Practical, 1.5, 6, 2, 5).is_err());
        assert!(ThresholdSpec::new(ThresholdKind::FixedBudget { episodes: 0 }, 0.1, 6, 2, 5).is_err());
    }
}
