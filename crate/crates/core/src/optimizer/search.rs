//! Depth-first branch-and-bound over per-group accelerator choices.
//!
//! Variables are the unrolled groups, ordered by optimistic earliest
//! start. The bound on a partial assignment gives every DNN the latency it would have
//! with no contention, the transitions already fixed, and the fastest
//! standalone time for every undecided group. Slowdowns are at least 1 and
//! transitions non-negative, so no completion can beat it.

use std::time::Instant;

use crate::model::{topological_order, AccelId, Objective, Scenario};
use crate::timeline::{quick_objective, score};

use super::Candidate;

/// Relative slack on pruning so rounding in the bound never discards a leaf
/// that ties or beats the incumbent.
const PRUNE_SLACK: f64 = 1e-9;

const DEADLINE_CHECK_EVERY: u64 = 64;

pub(crate) struct Problem<'a> {
    scenario: &'a Scenario,
    objective: Objective,
    /// Flat group index decided at each depth.
    order: Vec<usize>,
    /// Candidate accelerators per depth, fastest first.
    values: Vec<Vec<AccelId>>,
    /// `suffix_min[n][k]`: sum of fastest times of groups `k..` of DNN `n`.
    suffix_min: Vec<Vec<f64>>,
}

impl<'a> Problem<'a> {
    pub fn new(scenario: &'a Scenario) -> Self {
        let layout = scenario.layout();
        let n = scenario.dnns().len();
        let accels = layout.accels;
        let min_exec: Vec<f64> = (0..layout.total)
            .map(|f| (0..accels).map(|a| layout.exec(f, a)).fold(f64::INFINITY, f64::min))
            .collect();

        let suffix_min: Vec<Vec<f64>> = (0..n)
            .map(|d| {
                let start = layout.offsets[d];
                let len = layout.lens[d];
                let mut s = vec![0.0; len + 1];
                for i in (0..len).rev() {
                    s[i] = s[i + 1] + min_exec[start + i];
                }
                s
            })
            .collect();

        // Optimistic release times along dependencies, then prefix sums.
        let mut release = vec![0.0f64; n];
        for &d in &topological_order(n, scenario.dependencies()).expect("validated DAG") {
            for &(p, c) in scenario.dependencies() {
                if c == d {
                    release[d] = release[d].max(release[p] + suffix_min[p][0]);
                }
            }
        }
        let mut est = vec![0.0; layout.total];
        for (d, &released) in release.iter().enumerate() {
            let start = layout.offsets[d];
            let mut t = released;
            for i in 0..layout.lens[d] {
                est[start + i] = t;
                t += min_exec[start + i];
            }
        }
        let mut order: Vec<usize> = (0..layout.total).collect();
        order.sort_by(|&x, &y| {
            est[x]
                .total_cmp(&est[y])
                .then(layout.dnn_of[x].cmp(&layout.dnn_of[y]))
                .then(x.cmp(&y))
        });

        let values = order
            .iter()
            .map(|&f| {
                let mut v: Vec<AccelId> = (0..accels).filter(|&a| layout.supports(f, a)).collect();
                v.sort_by(|&a, &b| layout.exec(f, a).total_cmp(&layout.exec(f, b)).then(a.cmp(&b)));
                v
            })
            .collect();

        Self {
            scenario,
            objective: scenario.objective(),
            order,
            values,
            suffix_min,
        }
    }

    pub fn depth(&self) -> usize {
        self.order.len()
    }

    /// Smallest depth whose prefix count reaches `target`, capped at the
    /// full depth.
    pub fn split_depth(&self, target: usize) -> usize {
        let mut count = 1usize;
        for (d, v) in self.values.iter().enumerate() {
            if count >= target {
                return d;
            }
            count = count.saturating_mul(v.len());
        }
        self.depth()
    }

    /// Every unpruned prefix of length `depth`, in search order.
    pub fn frontier(
        &self,
        depth: usize,
        incumbent: f64,
        deadline: Option<Instant>,
    ) -> (Vec<Vec<AccelId>>, u64, bool) {
        let mut w = Walker::new(self, incumbent, deadline);
        let mut out = Vec::new();
        w.collect(0, depth, &mut out);
        (out, w.nodes, !w.timed_out)
    }

    /// Explores the subtree under `prefix`. Improvements are relative to
    /// `incumbent` and listed in discovery order.
    pub fn explore(
        &self,
        prefix: &[AccelId],
        incumbent: f64,
        deadline: Option<Instant>,
    ) -> SubtreeOutcome {
        let mut w = Walker::new(self, incumbent, deadline);
        for (depth, &a) in prefix.iter().enumerate() {
            w.apply(depth, a);
        }
        w.visit(prefix.len());
        SubtreeOutcome {
            found: w.found,
            nodes: w.nodes,
            complete: !w.timed_out,
        }
    }

    /// Bound of the partial assignment given by `prefix`, in score form.
    /// Exposed for admissibility checks.
    #[cfg(test)]
    pub fn prefix_bound(&self, prefix: &[AccelId]) -> f64 {
        let mut w = Walker::new(self, f64::INFINITY, None);
        for (depth, &a) in prefix.iter().enumerate() {
            w.apply(depth, a);
        }
        w.bound()
    }

    #[cfg(test)]
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    #[cfg(test)]
    pub fn values(&self) -> &[Vec<AccelId>] {
        &self.values
    }
}

pub(crate) struct SubtreeOutcome {
    pub found: Vec<Candidate>,
    pub nodes: u64,
    pub complete: bool,
}

struct Walker<'p, 'a> {
    p: &'p Problem<'a>,
    assign: Vec<AccelId>,
    /// Fixed execution plus transition time per DNN.
    fixed: Vec<f64>,
    decided: Vec<usize>,
    best: f64,
    found: Vec<Candidate>,
    nodes: u64,
    deadline: Option<Instant>,
    timed_out: bool,
}

impl<'p, 'a> Walker<'p, 'a> {
    fn new(p: &'p Problem<'a>, incumbent: f64, deadline: Option<Instant>) -> Self {
        let n = p.scenario.dnns().len();
        Self {
            p,
            assign: vec![usize::MAX; p.scenario.total_groups()],
            fixed: vec![0.0; n],
            decided: vec![0; n],
            best: incumbent,
            found: Vec::new(),
            nodes: 0,
            deadline,
            timed_out: false,
        }
    }

    fn apply(&mut self, depth: usize, a: AccelId) -> f64 {
        let layout = self.p.scenario.layout();
        let f = self.p.order[depth];
        let d = layout.dnn_of[f];
        let mut cost = layout.exec(f, a);
        if f > layout.offsets[d] {
            cost += layout.transition(f - 1, f, self.assign[f - 1], a);
        }
        let saved = self.fixed[d];
        self.fixed[d] += cost;
        self.decided[d] += 1;
        self.assign[f] = a;
        saved
    }

    fn undo(&mut self, depth: usize, saved: f64) {
        let layout = self.p.scenario.layout();
        let f = self.p.order[depth];
        let d = layout.dnn_of[f];
        self.fixed[d] = saved;
        self.decided[d] -= 1;
        self.assign[f] = usize::MAX;
    }

    fn bound(&self) -> f64 {
        let lbs = self
            .fixed
            .iter()
            .zip(&self.decided)
            .zip(&self.p.suffix_min)
            .map(|((fixed, &k), suffix)| fixed + suffix[k]);
        match self.p.objective {
            Objective::MinMaxLatency => lbs.fold(0.0, f64::max),
            Objective::MaxThroughput => -lbs.fold(0.0, |acc, t| acc + 1.0 / t),
        }
    }

    fn pruned(&self) -> bool {
        self.bound() > self.best + PRUNE_SLACK * self.best.abs()
    }

    fn tick(&mut self) -> bool {
        self.nodes += 1;
        if self.nodes.is_multiple_of(DEADLINE_CHECK_EVERY) {
            if let Some(deadline) = self.deadline {
                if Instant::now() >= deadline {
                    self.timed_out = true;
                }
            }
        }
        !self.timed_out
    }

    fn visit(&mut self, depth: usize) {
        if !self.tick() || self.pruned() {
            return;
        }
        if depth == self.p.depth() {
            self.leaf();
            return;
        }
        for k in 0..self.p.values[depth].len() {
            let a = self.p.values[depth][k];
            let saved = self.apply(depth, a);
            self.visit(depth + 1);
            self.undo(depth, saved);
            if self.timed_out {
                return;
            }
        }
    }

    fn leaf(&mut self) {
        let Some(value) = quick_objective(self.p.scenario, &self.assign, &[]) else {
            return;
        };
        let s = score(self.p.objective, value);
        if s < self.best {
            self.best = s;
            self.found.push(Candidate {
                assign: self.assign.clone(),
                serial_edges: Vec::new(),
                value,
                score: s,
            });
        }
    }

    fn collect(&mut self, depth: usize, stop: usize, out: &mut Vec<Vec<AccelId>>) {
        if !self.tick() || self.pruned() {
            return;
        }
        if depth == stop {
            out.push(self.p.order[..depth].iter().map(|&f| self.assign[f]).collect());
            return;
        }
        for k in 0..self.p.values[depth].len() {
            let a = self.p.values[depth][k];
            let saved = self.apply(depth, a);
            self.collect(depth + 1, stop, out);
            self.undo(depth, saved);
            if self.timed_out {
                return;
            }
        }
    }
}
