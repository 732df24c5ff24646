//! Linear optimization over KL confidence balls
//! `{q in simplex : KL(p_hat, q) <= radius}`.
//!
//! The maximizer has the closed form `q_i ∝ p_i / (nu - v_i)` on the support
//! of `p_hat`, where the level `nu` solves
//! `f(nu) = sum_i p_i ln(nu - v_i) + ln sum_i p_i / (nu - v_i) = radius`;
//! `f` is exactly `KL(p_hat, q(nu))`. When the best value sits on a slot
//! outside the support and `f` at that value is already below the radius,
//! the leftover KL budget moves mass `1 - exp(f - radius)` onto that slot.
//! The level is found by safeguarded Newton iteration.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::domain_err;
use crate::{Error, Result};

const MAX_NEWTON_ITER: usize = 100;
const MAX_BRACKET_STEPS: usize = 2200;

#[derive(Clone, Debug, PartialEq)]
pub struct KlBallProblem {
    pub p_hat: Vec<f64>,
    pub radius: f64,
    pub values: Vec<f64>,
}

impl KlBallProblem {
    pub fn new(p_hat: Vec<f64>, radius: f64, values: Vec<f64>) -> Result<Self> {
        if p_hat.is_empty() || p_hat.len() != values.len() {
            return Err(domain_err!(
                "ball problem with {} probabilities and {} values",
                p_hat.len(),
                values.len()
            ));
        }
        if p_hat.iter().any(|p| !(*p >= 0.0)) {
            return Err(domain_err!("negative empirical probability"));
        }
        let total: f64 = p_hat.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(domain_err!("empirical distribution sums to {total}"));
        }
        if !(radius >= 0.0) {
            return Err(domain_err!("radius {radius} must be nonnegative"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(domain_err!("slot values must be finite"));
        }
        Ok(Self { p_hat, radius, values })
    }

    /// `sum_i p_hat_i values_i`.
    pub fn plug_in(&self) -> f64 {
        self.p_hat.iter().zip(&self.values).map(|(p, v)| p * v).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BallSolution {
    pub value: f64,
    pub distribution: Vec<f64>,
}

/// Maximum of `sum_i q_i values_i` over the ball.
pub fn max_over_kl_ball(problem: &KlBallProblem) -> Result<BallSolution> {
    let mut q = vec![0.0; problem.p_hat.len()];
    let value = solve(&problem.p_hat, &problem.values, 1.0, problem.radius, Some(&mut q))?;
    Ok(BallSolution { value, distribution: q })
}

/// Minimum of `sum_i q_i values_i` over the ball.
pub fn min_over_kl_ball(problem: &KlBallProblem) -> Result<BallSolution> {
    let mut q = vec![0.0; problem.p_hat.len()];
    let value = -solve(&problem.p_hat, &problem.values, -1.0, problem.radius, Some(&mut q))?;
    Ok(BallSolution { value, distribution: q })
}

/// Allocation-free maximum for the planner's hot path.
#[inline]
pub(crate) fn max_linear(p: &[f64], values: &[f64], radius: f64) -> Result<f64> {
    solve(p, values, 1.0, radius, None)
}

#[inline]
pub(crate) fn min_linear(p: &[f64], values: &[f64], radius: f64) -> Result<f64> {
    solve(p, values, -1.0, radius, None).map(|v| -v)
}

/// KL of `p` to the tilted distribution at level `Wbar + x`, written in a
/// cancellation-free form (the `ln x` terms cancel because `sum p = 1`).
#[inline]
fn level_divergence(p: &[f64], gaps: &[f64], x: f64) -> f64 {
    let mut log_part = 0.0;
    let mut shrink = 0.0;
    for (&pi, &di) in p.iter().zip(gaps) {
        if pi > 0.0 {
            let t = di / x;
            log_part += pi * libm::log1p(t);
            shrink += pi * t / (1.0 + t);
        }
    }
    log_part + libm::log1p(-shrink)
}

#[inline]
fn level_slope(p: &[f64], gaps: &[f64], x: f64) -> f64 {
    let (mut w1, mut w2) = (0.0, 0.0);
    for (&pi, &di) in p.iter().zip(gaps) {
        if pi > 0.0 {
            let inv = 1.0 / (x + di);
            w1 += pi * inv;
            w2 += pi * inv * inv;
        }
    }
    w1 - w2 / w1
}

/// Maximizes `sum_i q_i (sign * values_i)` and returns that maximum.
fn solve(p: &[f64], values: &[f64], sign: f64, radius: f64, q: Option<&mut [f64]>) -> Result<f64> {
    let m = p.len();
    debug_assert_eq!(m, values.len());
    let w = |i: usize| sign * values[i];

    let mut best_all = f64::NEG_INFINITY;
    let mut best_idx = 0;
    let mut best_supp = f64::NEG_INFINITY;
    let mut worst_supp = f64::INFINITY;
    for i in 0..m {
        let wi = w(i);
        if wi > best_all {
            best_all = wi;
            best_idx = i;
        }
        if p[i] > 0.0 {
            best_supp = best_supp.max(wi);
            worst_supp = worst_supp.min(wi);
        }
    }

    if !(radius > 0.0) {
        let value = (0..m).map(|i| p[i] * w(i)).sum::<f64>();
        if let Some(q) = q {
            q.copy_from_slice(p);
        }
        return Ok(value.clamp(worst_supp, best_supp));
    }
    if radius == f64::INFINITY {
        if let Some(q) = q {
            q.fill(0.0);
            q[best_idx] = 1.0;
        }
        return Ok(best_all);
    }

    // Slots outside the support that carry the overall best value.
    let off_support_best = best_all > best_supp;
    let zero_best_count = if off_support_best {
        (0..m).filter(|&i| p[i] == 0.0 && w(i) == best_all).count()
    } else {
        0
    };

    if worst_supp == best_supp {
        // f vanishes identically: only moving mass off the support helps.
        let moved = if off_support_best { -libm::expm1(-radius) } else { 0.0 };
        if let Some(q) = q {
            for i in 0..m {
                q[i] = p[i] * (1.0 - moved);
                if off_support_best && p[i] == 0.0 && w(i) == best_all {
                    q[i] = moved / zero_best_count as f64;
                }
            }
        }
        return Ok((1.0 - moved) * best_supp + moved * best_all);
    }

    // gaps d_i = Wbar - w_i on the support (zero elsewhere; ignored).
    let mut gaps_buf = [0.0f64; 8];
    let mut gaps_vec;
    let gaps: &mut [f64] = if m <= gaps_buf.len() {
        &mut gaps_buf[..m]
    } else {
        gaps_vec = vec![0.0; m];
        &mut gaps_vec
    };
    let mut max_gap = 0.0f64;
    for i in 0..m {
        if p[i] > 0.0 {
            gaps[i] = best_supp - w(i);
            max_gap = max_gap.max(gaps[i]);
        }
    }
    let gaps: &[f64] = gaps;

    let (x, moved) = 'level: {
        if off_support_best {
            let x_star = best_all - best_supp;
            let f_star = level_divergence(p, gaps, x_star);
            if f_star < radius {
                break 'level (x_star, -libm::expm1(f_star - radius));
            }
        }
        // Bracket the root of the decreasing map x -> f(x) - radius.
        let mut hi = max_gap;
        let mut steps = 0;
        while level_divergence(p, gaps, hi) > radius {
            hi *= 2.0;
            steps += 1;
            if steps > MAX_BRACKET_STEPS {
                return Err(Error::Numeric { what: "KL-ball bracketing", residual: radius });
            }
        }
        let mut lo = hi;
        while level_divergence(p, gaps, lo) <= radius {
            lo *= 0.5;
            steps += 1;
            if steps > MAX_BRACKET_STEPS || lo == 0.0 {
                return Err(Error::Numeric { what: "KL-ball bracketing", residual: radius });
            }
        }
        let mut x = lo;
        let mut residual = f64::INFINITY;
        let mut converged = false;
        for _ in 0..MAX_NEWTON_ITER {
            let fx = level_divergence(p, gaps, x) - radius;
            residual = fx.abs();
            if fx > 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            if residual <= 1e-13 * radius || hi - lo <= 1e-15 * hi {
                converged = true;
                break;
            }
            let next = x - fx / level_slope(p, gaps, x);
            x = if next.is_finite() && next > lo && next < hi {
                next
            } else {
                libm::sqrt(lo * hi)
            };
        }
        if !converged {
            return Err(Error::Numeric { what: "KL-ball Newton iteration", residual });
        }
        // Newton approaches from the infeasible side; stopping there keeps
        // the optimum on the conservative side by at most the residual.
        (x, 0.0)
    };

    let mut weight_sum = 0.0;
    let mut weighted_gap = 0.0;
    for i in 0..m {
        if p[i] > 0.0 {
            let wi = p[i] / (x + gaps[i]);
            weight_sum += wi;
            weighted_gap += wi * gaps[i];
        }
    }
    if let Some(q) = q {
        for i in 0..m {
            q[i] = if p[i] > 0.0 {
                (1.0 - moved) * p[i] / (x + gaps[i]) / weight_sum
            } else if moved > 0.0 && w(i) == best_all {
                moved / zero_best_count as f64
            } else {
                0.0
            };
        }
    }
    let on_support = best_supp - weighted_gap / weight_sum;
    let value = (1.0 - moved) * on_support + moved * best_all;
    Ok(value.clamp(worst_supp.min(best_all), best_all))
}

#[cfg(test)]
mod tests {
    use super::*;
    use super::super::kl::kl_cat;
    use approx::assert_abs_diff_eq;

    fn problem(p: &[f64], radius: f64, v: &[f64]) -> KlBallProblem {
        KlBallProblem::new(p.to_vec(), radius, v.to_vec()).unwrap()
    }

    #[test]
    fn zero_radius_is_plug_in() {
        let pb = problem(&[0.2, 0.5, 0.3], 0.0, &[1.0, -2.0, 0.5]);
        assert_abs_diff_eq!(max_over_kl_ball(&pb).unwrap().value, pb.plug_in(), epsilon = 1e-15);
        assert_abs_diff_eq!(min_over_kl_ball(&pb).unwrap().value, pb.plug_in(), epsilon = 1e-15);
    }

    #[test]
    fn mass_moves_to_unsupported_slot() {
        // KL((1,0), q) = ln(1/q_1) <= ln 2 caps the mass on slot 2 at 1/2.
        let pb = problem(&[1.0, 0.0], core::f64::consts::LN_2, &[0.0, 1.0]);
        let sol = max_over_kl_ball(&pb).unwrap();
        assert_abs_diff_eq!(sol.value, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.distribution[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.distribution[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn infinite_radius_is_simplex() {
        let pb = problem(&[0.5, 0.5, 0.0], f64::INFINITY, &[0.1, 0.2, 0.9]);
        assert_eq!(max_over_kl_ball(&pb).unwrap().value, 0.9);
        assert_eq!(min_over_kl_ball(&pb).unwrap().value, 0.1);
    }

    #[test]
    fn solution_is_feasible_and_tight() {
        let pb = problem(&[0.6, 0.3, 0.1], 0.05, &[0.2, 0.9, 0.4]);
        let sol = max_over_kl_ball(&pb).unwrap();
        let kl = kl_cat(&pb.p_hat, &sol.distribution);
        assert!(kl <= 0.05 + 1e-12);
        assert!((kl - 0.05).abs() <= 1e-8);
        let value: f64 = sol.distribution.iter().zip(&pb.values).map(|(q, v)| q * v).sum();
        assert_abs_diff_eq!(value, sol.value, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.distribution.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn saturates_at_large_radius() {
        let pb = problem(&[0.7, 0.3], 40.0, &[0.0, 1.0]);
        assert_abs_diff_eq!(max_over_kl_ball(&pb).unwrap().value, 1.0, epsilon = 1e-12);
        // Already concentrated on the best slot: every radius gives the max.
        let pb = problem(&[0.0, 1.0], 0.3, &[0.0, 1.0]);
        assert_eq!(max_over_kl_ball(&pb).unwrap().value, 1.0);
    }

    #[test]
    fn rejects_malformed_problems() {
        assert!(KlBallProblem::new(vec![0.5, 0.4], 0.1, vec![0.0, 1.0]).is_err());
        assert!(KlBallProblem::new(vec![1.0], -0.1, vec![0.0]).is_err());
        assert!(KlBallProblem::new(vec![1.0], 0.1, vec![0.0, 1.0]).is_err());
        assert!(KlBallProblem::new(vec![], 0.1, vec![]).is_err());
    }

    #[test]
    fn tiny_radius_stays_accurate() {
        let pb = problem(&[0.5, 0.5], 1e-10, &[0.0, 1.0]);
        let sol = max_over_kl_ball(&pb).unwrap();
        // Second-order expansion: mean + sqrt(2 radius Var).
        let expected = 0.5 + libm::sqrt(2.0 * 1e-10 * 0.25);
        assert_abs_diff_eq!(sol.value, expected, epsilon = 1e-9);
    }
}
