//! Fixed-confidence Monte-Carlo planning in finite-branching MDPs.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the algorithmic
//! parts: tabular ground-truth MDPs, KL confidence machinery, the gap-based
//! trajectory planner, baseline planners and run diagnostics. File formats,
//! experiment orchestration and the command line live in the `gape` crate.
//!
//! ```
//! use gape_core::confidence::{ThresholdKind, ThresholdSpec};
//! use gape_core::planner::{plan, GapeConfig};
//! use gape_core::{generate_random_mdp, planning_horizon, ForwardModel, GeneratorConfig};
//!
//! let mdp = generate_random_mdp(&GeneratorConfig::desk(7))?;
//! let (eps, gamma, delta) = (1.0, 0.7, 0.1);
//! let h = planning_horizon(eps, gamma)?;
//! let spec = ThresholdSpec::new(ThresholdKind::Practical, delta, h, mdp.branching(), mdp.num_actions())?;
//! let cfg = GapeConfig::new(eps, gamma, spec)?;
//! let mut sim = ForwardModel::new(&mdp, 42);
//! let record = plan(&cfg, &mut sim, 0)?;
//! println!("action {} after {} episodes", record.recommended_action, record.tau);
//! # Ok::<(), gape_core::Error>(())
//! ```

#![no_std]

extern crate alloc;

pub mod baselines;
pub mod confidence;
mod error;
pub mod mdp;
pub mod planner;
pub mod record;

pub use error::{Error, Result};
pub use mdp::{
    exact_value_iteration, generate_random_mdp, planning_horizon, sigma, simple_regret,
    ExactValues, ForwardModel, GeneratorConfig, RewardGranularity, Simulator, TabularMdp,
};
pub use record::{Algorithm, RunRecord, StopReason};
