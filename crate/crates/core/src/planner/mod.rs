//! The gap-based trajectory planner.

mod decision;
mod diagnostics;
mod gape;
mod tree;

pub use decision::{root_decision, RootDecision};
pub use diagnostics::{
    audit_run, check_event_e, pseudo_count_constant, track_pseudo_counts, Diagnostics, EventReport,
    PseudoCountReport, PseudoCountRow, TrajectoryLog, Violation, ViolationKind,
};
pub use gape::{plan, GapeConfig, GapePlanner, DEFAULT_MAX_EPISODES};
pub use tree::{optimistic_action, PlanNode, SearchTree, Side, StateNode, Step, Successor, Trajectory};
