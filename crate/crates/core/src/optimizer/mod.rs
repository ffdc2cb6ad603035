//! Exact schedule optimization.
//!
//! The search starts from the best baseline, then runs branch-and-bound in
//! waves: the tree is split into prefixes, and each wave of [`WAVE`]
//! prefixes is explored against the incumbent as it stood when the wave
//! began. Waves are merged in prefix order, so the result and the node
//! count do not depend on how many workers explored them.

mod baselines;
mod brute;
mod dynamic;
mod search;

use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::model::{AccelId, Scenario, Schedule};
use crate::parallel::{available_workers, Workers};
use crate::timeline::{evaluate_flat, objective_value, Timeline};

pub use baselines::baselines;
pub use brute::{brute_force, BRUTE_FORCE_LIMIT};
pub use dynamic::{run_dynamic, DynamicPhase, PhaseReport};

use baselines::best_baseline;
use search::Problem;

/// Subtrees explored per synchronization round.
pub const WAVE: usize = 32;

/// Target number of prefixes the tree is split into.
const FRONTIER_TARGET: usize = 256;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimizeError {
    #[error("no feasible schedule")]
    NoFeasibleSchedule,
    #[error("budget exhausted before any feasible schedule was found")]
    BudgetExhausted,
    #[error("assignment space of {size} exceeds the enumeration limit of {limit}")]
    SpaceTooLarge { size: u128, limit: u128 },
    #[error("dynamic sequence is empty")]
    EmptySequence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchConfig {
    /// Wall-clock budget in ms; `None` searches to exhaustion.
    pub budget_ms: Option<u64>,
    pub workers: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            budget_ms: None,
            workers: available_workers(),
        }
    }
}

impl SearchConfig {
    pub fn with_budget_ms(mut self, budget_ms: Option<u64>) -> Self {
        self.budget_ms = budget_ms;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }
}

#[derive(Debug, Clone)]
pub struct OptimizeResult {
    pub schedule: Schedule,
    pub timeline: Timeline,
    pub objective: f64,
    pub nodes_explored: u64,
    /// The whole tree was searched, so nothing strictly better exists.
    pub proven_optimal: bool,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Incumbent {
    #[serde(serialize_with = "schedule_json")]
    pub schedule: Schedule,
    pub objective: f64,
    pub elapsed_ms: f64,
}

fn schedule_json<S: serde::Serializer>(s: &Schedule, ser: S) -> Result<S::Ok, S::Error> {
    s.to_json_value().serialize(ser)
}

#[derive(Debug, Clone)]
pub(crate) struct Candidate {
    pub assign: Vec<AccelId>,
    pub serial_edges: Vec<(usize, usize)>,
    /// Objective value as reported.
    pub value: f64,
    /// Minimization form of `value`.
    pub score: f64,
}

pub fn optimize(scenario: &Scenario, config: &SearchConfig) -> Result<OptimizeResult, OptimizeError> {
    optimize_anytime(scenario, config, |_| {})
}

/// Like [`optimize`], additionally handing every strictly improving
/// incumbent to `sink` as it is adopted. The best baseline, when one
/// exists, is delivered before any branching.
pub fn optimize_anytime<F>(
    scenario: &Scenario,
    config: &SearchConfig,
    mut sink: F,
) -> Result<OptimizeResult, OptimizeError>
where
    F: FnMut(&Incumbent),
{
    let start = Instant::now();
    let deadline = config.budget_ms.map(|ms| start + Duration::from_millis(ms));
    let expired = || deadline.is_some_and(|d| Instant::now() >= d);

    let mut deliver = |c: &Candidate| {
        sink(&Incumbent {
            schedule: candidate_schedule(scenario, c),
            objective: c.value,
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        })
    };

    let mut best = best_baseline(scenario);
    if let Some(b) = &best {
        deliver(b);
    }
    let incumbent = |b: &Option<Candidate>| b.as_ref().map_or(f64::INFINITY, |c| c.score);

    let mut nodes = 0u64;
    let mut exhausted = false;
    if !expired() {
        let problem = Problem::new(scenario);
        let depth = problem.split_depth(FRONTIER_TARGET);
        let (frontier, frontier_nodes, complete) =
            problem.frontier(depth, incumbent(&best), deadline);
        nodes += frontier_nodes;
        exhausted = complete;

        let pool = Workers::new(config.workers);
        for wave in frontier.chunks(WAVE) {
            if expired() {
                exhausted = false;
                break;
            }
            let snapshot = incumbent(&best);
            let outcomes = pool.map(wave, |prefix| problem.explore(prefix, snapshot, deadline));
            for outcome in outcomes {
                nodes += outcome.nodes;
                exhausted &= outcome.complete;
                for cand in outcome.found {
                    if cand.score < incumbent(&best) {
                        deliver(&cand);
                        best = Some(cand);
                    }
                }
            }
        }
    }

    match best {
        Some(b) => Ok(finish(scenario, b, nodes, exhausted, start)),
        None if exhausted => Err(OptimizeError::NoFeasibleSchedule),
        None => Err(OptimizeError::BudgetExhausted),
    }
}

fn candidate_schedule(scenario: &Scenario, c: &Candidate) -> Schedule {
    Schedule::from_flat(scenario, &c.assign).with_serial_edges(c.serial_edges.clone())
}

pub(crate) fn finish(
    scenario: &Scenario,
    best: Candidate,
    nodes: u64,
    proven: bool,
    start: Instant,
) -> OptimizeResult {
    let timeline = evaluate_flat(scenario, &best.assign, &best.serial_edges);
    let objective = objective_value(&timeline, scenario.objective()).expect("incumbents are feasible");
    debug_assert_eq!(objective, best.value);
    OptimizeResult {
        schedule: candidate_schedule(scenario, &best),
        timeline,
        objective,
        nodes_explored: nodes,
        proven_optimal: proven,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    }
}
