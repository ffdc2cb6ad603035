//! Scenario sequences: re-optimize from scratch each time the workload
//! changes and report how the incumbent evolved.

use serde::Serialize;

use crate::model::Scenario;

use super::{optimize_anytime, Incumbent, OptimizeError, SearchConfig};

#[derive(Debug, Clone)]
pub struct DynamicPhase {
    pub scenario: Scenario,
    /// How long the workload stays active, in ms.
    pub dwell_ms: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseReport {
    pub trace: Vec<Incumbent>,
    pub steady_state_objective: f64,
    pub proven_optimal: bool,
    /// Elapsed time of the final incumbent when optimality was proven
    /// within the dwell time.
    pub time_to_optimal_ms: Option<f64>,
    pub total_groups: usize,
    pub nodes_explored: u64,
    pub wall_time_ms: f64,
}

/// Runs an anytime search per phase with a budget of
/// `min(dwell_ms, budget_per_scenario_ms)`. Nothing carries over between
/// phases.
pub fn run_dynamic(
    sequence: &[DynamicPhase],
    budget_per_scenario_ms: u64,
    workers: usize,
) -> Result<Vec<PhaseReport>, OptimizeError> {
    if sequence.is_empty() {
        return Err(OptimizeError::EmptySequence);
    }
    let mut reports = Vec::with_capacity(sequence.len());
    for phase in sequence {
        let config = SearchConfig::default()
            .with_workers(workers)
            .with_budget_ms(Some(phase.dwell_ms.min(budget_per_scenario_ms)));
        let mut trace = Vec::new();
        let result = optimize_anytime(&phase.scenario, &config, |inc| trace.push(inc.clone()))?;
        let converged = result.proven_optimal && result.wall_time_ms <= phase.dwell_ms as f64;
        reports.push(PhaseReport {
            time_to_optimal_ms: converged
                .then(|| trace.last().map(|i| i.elapsed_ms))
                .flatten(),
            trace,
            steady_state_objective: result.objective,
            proven_optimal: result.proven_optimal,
            total_groups: phase.scenario.total_groups(),
            nodes_explored: result.nodes_explored,
            wall_time_ms: result.wall_time_ms,
        });
    }
    Ok(reports)
}
