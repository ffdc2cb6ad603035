//! Non-collaborative reference schedules.

use crate::model::{topological_order, AccelId, Scenario, Schedule};
use crate::timeline::{quick_objective, score};

use super::Candidate;

/// Upper limit on whole-DNN mappings enumerated for the concurrent family.
const MAX_MAPPINGS: usize = 1 << 16;

/// Reference schedules, in a fixed order:
///
/// * `serial-fastest`: every DNN entirely on the accelerator where its
///   standalone time is smallest, DNNs run one after another.
/// * `naive-concurrent/<names>`: with two or more accelerators, every
///   whole-DNN mapping that satisfies the overlap constraint.
///
/// A DNN that no single accelerator fully supports has no whole-DNN
/// placement, so neither family is produced for it.
pub fn baselines(scenario: &Scenario) -> Vec<(String, Schedule)> {
    let mut out = Vec::new();
    let accels = scenario.accelerators().len();
    let n = scenario.dnns().len();
    let supported: Vec<Vec<AccelId>> = (0..n)
        .map(|d| (0..accels).filter(|&a| whole_dnn_time(scenario, d, a).is_some()).collect())
        .collect();
    if supported.iter().any(|s| s.is_empty()) {
        return out;
    }

    let fastest: Vec<AccelId> = (0..n)
        .map(|d| {
            *supported[d]
                .iter()
                .min_by(|&&a, &&b| {
                    let ta = whole_dnn_time(scenario, d, a).unwrap();
                    let tb = whole_dnn_time(scenario, d, b).unwrap();
                    ta.total_cmp(&tb).then(a.cmp(&b))
                })
                .unwrap()
        })
        .collect();
    let order = topological_order(n, scenario.dependencies()).expect("validated DAG");
    let edges: Vec<(usize, usize)> = order.windows(2).map(|w| (w[0], w[1])).collect();
    out.push((
        "serial-fastest".to_string(),
        Schedule::whole_dnn(scenario, &fastest).with_serial_edges(edges),
    ));

    let combos: usize = supported.iter().map(Vec::len).product();
    if accels < 2 || combos > MAX_MAPPINGS {
        return out;
    }
    let mut pick = vec![0usize; n];
    for _ in 0..combos {
        let mapping: Vec<AccelId> = (0..n).map(|d| supported[d][pick[d]]).collect();
        let schedule = Schedule::whole_dnn(scenario, &mapping);
        let flat = schedule.to_flat(scenario).unwrap();
        if quick_objective(scenario, &flat, &[]).is_some() {
            let names: Vec<&str> = mapping
                .iter()
                .map(|&a| scenario.accelerators()[a].name.as_str())
                .collect();
            out.push((format!("naive-concurrent/{}", names.join(",")), schedule));
        }
        // odometer, last DNN fastest
        for d in (0..n).rev() {
            pick[d] += 1;
            if pick[d] < supported[d].len() {
                break;
            }
            pick[d] = 0;
        }
    }
    out
}

fn whole_dnn_time(scenario: &Scenario, dnn: usize, accel: AccelId) -> Option<f64> {
    let layout = scenario.layout();
    let start = layout.offsets[dnn];
    let mut total = 0.0;
    for f in start..start + layout.lens[dnn] {
        if !layout.supports(f, accel) {
            return None;
        }
        total += layout.exec(f, accel);
    }
    Some(total)
}

/// Best baseline by objective; the earliest in [`baselines`] order wins ties.
pub(crate) fn best_baseline(scenario: &Scenario) -> Option<Candidate> {
    let objective = scenario.objective();
    let mut best: Option<Candidate> = None;
    for (_, schedule) in baselines(scenario) {
        let flat = schedule.to_flat(scenario).unwrap();
        let Some(value) = quick_objective(scenario, &flat, &schedule.serial_edges) else {
            continue;
        };
        let cand = Candidate {
            assign: flat,
            serial_edges: schedule.serial_edges,
            value,
            score: score(objective, value),
        };
        if best.as_ref().is_none_or(|b| cand.score < b.score) {
            best = Some(cand);
        }
    }
    best
}
