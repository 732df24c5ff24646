//! Confidence-bound numerics: KL divergences, kl-UCB inversions, linear
//! optimization over KL balls, exploration thresholds and their Monte-Carlo
//! coverage checks.

mod ball;
mod coverage;
mod kl;
mod threshold;

pub use ball::{max_over_kl_ball, min_over_kl_ball, BallSolution, KlBallProblem};
pub(crate) use ball::{max_linear, min_linear};
pub use coverage::{coverage_test, CoverageConfig, CoverageKind};
pub use kl::{kl_bernoulli, kl_categorical, kl_ucb_lower, kl_ucb_upper};
pub use threshold::{ThresholdKind, ThresholdSpec, ThresholdTerm};
