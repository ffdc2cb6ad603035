//! Contention-aware scheduling of concurrent DNN inference across the
//! accelerators of a shared-memory SoC.
//!
//! * [`grouping`] turns raw layer lists into schedulable layer groups.
//! * [`contention`] maps requested and external memory throughput to a
//!   slowdown factor.
//! * [`timeline`] evaluates a schedule with an event-driven simulation.
//! * [`optimizer`] finds provably optimal schedules by branch-and-bound,
//!   with an anytime mode and an exhaustive oracle.

pub mod contention;
pub mod fixtures;
pub mod grouping;
pub mod model;
pub mod optimizer;
mod parallel;
pub mod timeline;

pub use contention::{estimate_dsa_throughput, external_demand, slowdown, ContentionModel, SlowdownGrid};
pub use grouping::{group_layers, GroupBoundary, RawLayer};
pub use model::{
    parse_scenario, validate_schedule, AccelId, Accelerator, DnnSpec, GroupRef, LayerGroup, Objective,
    Scenario, Schedule,
};
pub use optimizer::{
    baselines, brute_force, optimize, optimize_anytime, run_dynamic, Incumbent, OptimizeError,
    OptimizeResult, SearchConfig,
};
pub use parallel::available_workers;
pub use timeline::{evaluate, interval_overlap, objective_value, Timeline};
