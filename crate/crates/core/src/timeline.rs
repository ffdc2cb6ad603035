//! Contention-aware timeline evaluation of a concrete schedule.
//!
//! Each running group carries its standalone execution time as work and
//! progresses at rate `1 / c`, where `c` is the slowdown its accelerator's
//! table assigns to the group's requested throughput against the summed
//! demand of every other running group. Rates only change when some group
//! starts or ends, so the simulation steps from event to event; the spans
//! between events are the contention intervals.

use serde::Serialize;
use thiserror::Error;

use crate::contention::sum_external;
use crate::model::{validate_schedule, AccelId, GroupRef, Objective, Scenario, Schedule, ScheduleViolation};

/// Absolute slack applied on top of epsilon when checking overlaps.
pub const OVERLAP_SLACK_MS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TimelineError {
    #[error("timeline is infeasible")]
    InfeasibleTimeline,
    #[error("invalid schedule: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidSchedule(Vec<ScheduleViolation>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlowdownSegment {
    pub start_ms: f64,
    pub end_ms: f64,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupTiming {
    pub group: GroupRef,
    pub accel: AccelId,
    pub start_ms: f64,
    pub end_ms: f64,
    pub segments: Vec<SlowdownSegment>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DnnTiming {
    /// Earliest time the DNN's input is available (scenario dependencies).
    pub release_ms: f64,
    /// When its first group actually started.
    pub start_ms: f64,
    pub completion_ms: f64,
    /// `completion_ms - release_ms`.
    pub latency_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapViolation {
    pub first: GroupRef,
    pub second: GroupRef,
    pub accel: AccelId,
    pub overlap_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timeline {
    /// One entry per unrolled group in (dnn, group) order.
    pub groups: Vec<GroupTiming>,
    pub dnns: Vec<DnnTiming>,
    /// Sorted, deduplicated start and end timestamps.
    pub events: Vec<f64>,
    pub makespan_ms: f64,
    pub feasible: bool,
    pub violations: Vec<OverlapViolation>,
}

impl Timeline {
    pub fn latencies(&self) -> Vec<f64> {
        self.dnns.iter().map(|d| d.latency_ms).collect()
    }

    pub fn group(&self, g: GroupRef) -> Option<&GroupTiming> {
        self.groups.iter().find(|t| t.group == g)
    }
}

/// Length of the intersection of two closed intervals.
pub fn interval_overlap(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.1.min(b.1) - a.0.max(b.0)).max(0.0)
}

/// Evaluates a structurally valid schedule.
pub fn evaluate(scenario: &Scenario, schedule: &Schedule) -> Result<Timeline, TimelineError> {
    let violations = validate_schedule(scenario, schedule);
    if !violations.is_empty() {
        return Err(TimelineError::InvalidSchedule(violations));
    }
    let flat = schedule.to_flat(scenario).expect("validated schedule is total");
    Ok(evaluate_flat(scenario, &flat, &schedule.serial_edges))
}

pub(crate) fn evaluate_flat(
    scenario: &Scenario,
    assign: &[AccelId],
    serial_edges: &[(usize, usize)],
) -> Timeline {
    let trace = simulate(scenario, assign, serial_edges, true);
    let layout = scenario.layout();
    let segments = trace.segments.expect("recorded");
    let groups: Vec<GroupTiming> = segments
        .into_iter()
        .enumerate()
        .map(|(f, segs)| GroupTiming {
            group: layout.group_ref(f),
            accel: assign[f],
            start_ms: trace.st[f],
            end_ms: trace.et[f],
            segments: segs,
        })
        .collect();
    let dnns: Vec<DnnTiming> = (0..scenario.dnns().len())
        .map(|n| DnnTiming {
            release_ms: trace.release[n],
            start_ms: trace.st[layout.offsets[n]],
            completion_ms: trace.completion[n],
            latency_ms: trace.completion[n] - trace.release[n],
        })
        .collect();
    let mut events: Vec<f64> = trace.st.iter().chain(trace.et.iter()).copied().collect();
    events.sort_by(f64::total_cmp);
    events.dedup();
    let violations = overlap_violations(scenario, assign, &trace.st, &trace.et, false);
    Timeline {
        groups,
        dnns,
        events,
        makespan_ms: trace.completion.iter().copied().fold(0.0, f64::max),
        feasible: violations.is_empty(),
        violations,
    }
}

/// Objective of a feasible timeline: the sum of inverse latencies for
/// throughput, the largest latency for min-max.
pub fn objective_value(timeline: &Timeline, objective: Objective) -> Result<f64, TimelineError> {
    if !timeline.feasible {
        return Err(TimelineError::InfeasibleTimeline);
    }
    Ok(objective_from_latencies(objective, timeline.dnns.iter().map(|d| d.latency_ms)))
}

pub(crate) fn objective_from_latencies(
    objective: Objective,
    latencies: impl Iterator<Item = f64>,
) -> f64 {
    match objective {
        Objective::MaxThroughput => latencies.fold(0.0, |acc, t| acc + 1.0 / t),
        Objective::MinMaxLatency => latencies.fold(0.0, f64::max),
    }
}

/// Minimization form of an objective value: lower is always better.
#[inline]
pub fn score(objective: Objective, value: f64) -> f64 {
    match objective {
        Objective::MaxThroughput => -value,
        Objective::MinMaxLatency => value,
    }
}

/// Fast path for search: objective value of a feasible assignment, `None`
/// when it violates the overlap constraint.
pub(crate) fn quick_objective(
    scenario: &Scenario,
    assign: &[AccelId],
    serial_edges: &[(usize, usize)],
) -> Option<f64> {
    let trace = simulate(scenario, assign, serial_edges, false);
    if !overlap_violations(scenario, assign, &trace.st, &trace.et, true).is_empty() {
        return None;
    }
    let n = scenario.dnns().len();
    Some(objective_from_latencies(
        scenario.objective(),
        (0..n).map(|i| trace.completion[i] - trace.release[i]),
    ))
}

pub(crate) struct Trace {
    pub st: Vec<f64>,
    pub et: Vec<f64>,
    pub release: Vec<f64>,
    pub completion: Vec<f64>,
    pub segments: Option<Vec<Vec<SlowdownSegment>>>,
}

#[derive(Clone, Copy)]
enum Phase {
    Blocked,
    Running { flat: usize, remaining: f64 },
    Transit { next: usize, until: f64 },
    Done,
}

/// Groups whose projected finish is within this relative distance of the
/// next event end together, avoiding sliver intervals from rounding.
const FINISH_TOLERANCE: f64 = 1e-12;

pub(crate) fn simulate(
    scenario: &Scenario,
    assign: &[AccelId],
    serial_edges: &[(usize, usize)],
    record: bool,
) -> Trace {
    let layout = scenario.layout();
    let model = scenario.contention();
    let n = scenario.dnns().len();
    let total = layout.total;

    let mut release_preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(p, c) in scenario.dependencies() {
        release_preds[c].push(p);
    }
    let mut serial_preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(p, c) in serial_edges {
        serial_preds[c].push(p);
    }

    let mut st = vec![f64::NAN; total];
    let mut et = vec![f64::NAN; total];
    let mut release = vec![0.0; n];
    let mut completion = vec![f64::NAN; n];
    let mut segments: Option<Vec<Vec<SlowdownSegment>>> = record.then(|| vec![Vec::new(); total]);
    let mut phase = vec![Phase::Blocked; n];

    let mut running: Vec<(usize, usize)> = Vec::with_capacity(n); // (dnn, flat)
    let mut factors: Vec<f64> = Vec::with_capacity(n);
    let mut t = 0.0f64;

    loop {
        // Releases: a DNN starts once every predecessor of either kind is done.
        for d in 0..n {
            if !matches!(phase[d], Phase::Blocked) {
                continue;
            }
            let done = |p: &usize| matches!(phase[*p], Phase::Done);
            if release_preds[d].iter().all(done) && serial_preds[d].iter().all(done) {
                release[d] = release_preds[d]
                    .iter()
                    .map(|&p| completion[p])
                    .fold(0.0, f64::max);
                let first = layout.offsets[d];
                st[first] = t;
                phase[d] = Phase::Running {
                    flat: first,
                    remaining: layout.exec(first, assign[first]),
                };
            }
        }

        running.clear();
        let mut next_event = f64::INFINITY;
        for (d, p) in phase.iter().enumerate() {
            match *p {
                Phase::Running { flat, .. } => running.push((d, flat)),
                Phase::Transit { until, .. } => next_event = next_event.min(until),
                _ => {}
            }
        }
        if running.is_empty() && next_event == f64::INFINITY {
            break;
        }

        factors.clear();
        for &(d, flat) in &running {
            let a = assign[flat];
            let external = sum_external(
                running
                    .iter()
                    .filter(|&&(o, _)| o != d)
                    .map(|&(_, of)| layout.thr(of, assign[of])),
            );
            let grid = model.grid(a).expect("model covers every accelerator");
            factors.push(grid.lookup(layout.thr(flat, a), external));
        }
        for (k, &(d, _)) in running.iter().enumerate() {
            if let Phase::Running { remaining, .. } = phase[d] {
                next_event = next_event.min(t + remaining * factors[k]);
            }
        }

        let limit = next_event + FINISH_TOLERANCE * next_event.abs().max(1.0);
        for (k, &(d, flat)) in running.iter().enumerate() {
            let Phase::Running { remaining, .. } = phase[d] else {
                unreachable!()
            };
            let c = factors[k];
            if let Some(segs) = segments.as_mut() {
                if next_event > t {
                    push_segment(&mut segs[flat], t, next_event, c);
                }
            }
            if t + remaining * c <= limit {
                et[flat] = next_event;
                let last = layout.offsets[d] + layout.lens[d] - 1;
                if flat == last {
                    completion[d] = next_event;
                    phase[d] = Phase::Done;
                } else {
                    let nxt = flat + 1;
                    let until = next_event + layout.transition(flat, nxt, assign[flat], assign[nxt]);
                    phase[d] = Phase::Transit { next: nxt, until };
                }
            } else {
                phase[d] = Phase::Running {
                    flat,
                    remaining: remaining - (next_event - t) / c,
                };
            }
        }
        t = next_event;

        // Ends are settled above; transitions that finish now start their group.
        for p in phase.iter_mut() {
            if let Phase::Transit { next, until } = *p {
                if until <= t {
                    st[next] = t;
                    *p = Phase::Running {
                        flat: next,
                        remaining: layout.exec(next, assign[next]),
                    };
                }
            }
        }
    }

    Trace {
        st,
        et,
        release,
        completion,
        segments,
    }
}

fn push_segment(segs: &mut Vec<SlowdownSegment>, start: f64, end: f64, factor: f64) {
    if let Some(last) = segs.last_mut() {
        if last.factor == factor && last.end_ms == start {
            last.end_ms = end;
            return;
        }
    }
    segs.push(SlowdownSegment {
        start_ms: start,
        end_ms: end,
        factor,
    });
}

/// Pairwise same-accelerator overlaps between groups of distinct DNNs that
/// exceed epsilon. With `first_only` the scan stops at the first hit.
fn overlap_violations(
    scenario: &Scenario,
    assign: &[AccelId],
    st: &[f64],
    et: &[f64],
    first_only: bool,
) -> Vec<OverlapViolation> {
    let layout = scenario.layout();
    let limit = scenario.epsilon_ms() + OVERLAP_SLACK_MS;
    let mut by_accel: Vec<Vec<usize>> = vec![Vec::new(); layout.accels];
    for (f, &a) in assign.iter().enumerate() {
        by_accel[a].push(f);
    }
    let mut out = Vec::new();
    for (a, list) in by_accel.iter_mut().enumerate() {
        list.sort_by(|&x, &y| st[x].total_cmp(&st[y]).then(x.cmp(&y)));
        for (i, &x) in list.iter().enumerate() {
            for &y in &list[i + 1..] {
                if st[y] >= et[x] {
                    break;
                }
                if layout.dnn_of[x] == layout.dnn_of[y] {
                    continue;
                }
                let overlap = interval_overlap((st[x], et[x]), (st[y], et[y]));
                if overlap > limit {
                    let (first, second) = if x < y { (x, y) } else { (y, x) };
                    out.push(OverlapViolation {
                        first: layout.group_ref(first),
                        second: layout.group_ref(second),
                        accel: a,
                        overlap_ms: overlap,
                    });
                    if first_only {
                        return out;
                    }
                }
            }
        }
    }
    out.sort_by_key(|v| (v.first, v.second));
    out
}
