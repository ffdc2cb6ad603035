//! Exhaustive enumeration, used as the optimality oracle.

use std::time::Instant;

use crate::model::{AccelId, Scenario};
use crate::parallel::Workers;
use crate::timeline::{quick_objective, score};

use super::baselines::best_baseline;
use super::{finish, Candidate, OptimizeError, OptimizeResult};

/// Largest assignment space `brute_force` will enumerate.
pub const BRUTE_FORCE_LIMIT: u128 = 1 << 20;

/// Exact optimum by enumerating every total assignment in lexicographic
/// (dnn, group) order. Baselines are candidates too, exactly as in the
/// branch-and-bound search; among equal objectives the first one wins.
pub fn brute_force(scenario: &Scenario, workers: usize) -> Result<OptimizeResult, OptimizeError> {
    let start = Instant::now();
    let layout = scenario.layout();
    let domains: Vec<Vec<AccelId>> = (0..layout.total)
        .map(|f| (0..layout.accels).filter(|&a| layout.supports(f, a)).collect())
        .collect();
    let size: u128 = domains
        .iter()
        .try_fold(1u128, |acc, d| acc.checked_mul(d.len() as u128))
        .unwrap_or(u128::MAX);
    if size > BRUTE_FORCE_LIMIT {
        return Err(OptimizeError::SpaceTooLarge {
            size,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let size = size as u64;
    let objective = scenario.objective();

    let pool = Workers::new(workers);
    let chunks = (workers.max(1) as u64 * 8).min(size).max(1);
    let ranges: Vec<(u64, u64)> = (0..chunks)
        .map(|c| (size * c / chunks, size * (c + 1) / chunks))
        .collect();
    let bests = pool.map(&ranges, |&(lo, hi)| {
        let mut best: Option<Candidate> = None;
        let mut assign = vec![0; domains.len()];
        for index in lo..hi {
            decode(index, &domains, &mut assign);
            if let Some(value) = quick_objective(scenario, &assign, &[]) {
                let s = score(objective, value);
                if best.as_ref().is_none_or(|b| s < b.score) {
                    best = Some(Candidate {
                        assign: assign.clone(),
                        serial_edges: Vec::new(),
                        value,
                        score: s,
                    });
                }
            }
        }
        best
    });

    let mut best = best_baseline(scenario);
    for cand in bests.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| cand.score < b.score) {
            best = Some(cand);
        }
    }
    let best = best.ok_or(OptimizeError::NoFeasibleSchedule)?;
    Ok(finish(scenario, best, size, true, start))
}

/// Mixed-radix decode with the last group varying fastest.
fn decode(mut index: u64, domains: &[Vec<AccelId>], out: &mut [AccelId]) {
    for (slot, dom) in out.iter_mut().zip(domains).rev() {
        let r = dom.len() as u64;
        *slot = dom[(index % r) as usize];
        index /= r;
    }
}
