//! Domain types, scenario file parsing and structural validation.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contention::{ContentionError, ContentionModel, SlowdownGrid};

pub type AccelId = usize;

/// Tolerated same-accelerator overlap when a scenario file omits `epsilon_ms`.
pub const DEFAULT_EPSILON_MS: f64 = 0.05;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{0}")]
    Invalid(String),
}

impl From<serde_json::Error> for ParseError {
    fn from(e: serde_json::Error) -> Self {
        ParseError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

impl From<ContentionError> for ParseError {
    fn from(e: ContentionError) -> Self {
        ParseError::Invalid(e.to_string())
    }
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError::Invalid(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Accelerator {
    pub id: AccelId,
    pub name: String,
    /// Direct throughput profiling is unavailable on this accelerator.
    #[serde(default)]
    pub blackbox: bool,
}

/// Identifies group `group` of DNN `dnn`. For DNNs with more than one
/// iteration, `group` indexes the unrolled sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupRef {
    pub dnn: usize,
    pub group: usize,
}

impl GroupRef {
    pub fn new(dnn: usize, group: usize) -> Self {
        Self { dnn, group }
    }

    /// `"dnn.group"`, the key used in schedule files.
    pub fn key(&self) -> String {
        format!("{}.{}", self.dnn, self.group)
    }

    pub fn parse_key(s: &str) -> Option<Self> {
        let (n, i) = s.split_once('.')?;
        Some(Self::new(n.parse().ok()?, i.parse().ok()?))
    }
}

impl Serialize for GroupRef {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.key())
    }
}

impl fmt::Display for GroupRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.dnn, self.group)
    }
}

/// The atomic schedulable unit: one or more fused layers.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGroup {
    pub dnn: usize,
    pub index: usize,
    /// Standalone execution time in ms. Keys form the support set.
    pub exec_time: BTreeMap<AccelId, f64>,
    /// Requested memory throughput in GB/s; missing entries mean 0.
    pub req_throughput: BTreeMap<AccelId, f64>,
    /// Cost of leaving this group for another accelerator, keyed (from, to).
    pub tau_out: BTreeMap<(AccelId, AccelId), f64>,
    /// Cost of entering this group from another accelerator, keyed (from, to).
    pub tau_in: BTreeMap<(AccelId, AccelId), f64>,
}

impl LayerGroup {
    pub fn new(dnn: usize, index: usize) -> Self {
        Self {
            dnn,
            index,
            exec_time: BTreeMap::new(),
            req_throughput: BTreeMap::new(),
            tau_out: BTreeMap::new(),
            tau_in: BTreeMap::new(),
        }
    }

    pub fn id(&self) -> GroupRef {
        GroupRef::new(self.dnn, self.index)
    }

    pub fn supports(&self, accel: AccelId) -> bool {
        self.exec_time.contains_key(&accel)
    }

    pub fn throughput(&self, accel: AccelId) -> f64 {
        self.req_throughput.get(&accel).copied().unwrap_or(0.0)
    }

    pub fn tau_out_ms(&self, from: AccelId, to: AccelId) -> f64 {
        if from == to {
            0.0
        } else {
            self.tau_out.get(&(from, to)).copied().unwrap_or(0.0)
        }
    }

    pub fn tau_in_ms(&self, from: AccelId, to: AccelId) -> f64 {
        if from == to {
            0.0
        } else {
            self.tau_in.get(&(from, to)).copied().unwrap_or(0.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DnnSpec {
    pub name: String,
    pub groups: Vec<LayerGroup>,
    /// Back-to-back inferences; unrolled into `iterations` copies of `groups`.
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Maximize the sum of per-DNN inverse latencies.
    #[default]
    MaxThroughput,
    /// Minimize the largest per-DNN latency.
    #[serde(rename = "minmax_latency")]
    MinMaxLatency,
}

impl Objective {
    pub fn as_str(&self) -> &'static str {
        match self {
            Objective::MaxThroughput => "max_throughput",
            Objective::MinMaxLatency => "minmax_latency",
        }
    }
}

impl std::str::FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "max_throughput" => Ok(Objective::MaxThroughput),
            "minmax_latency" => Ok(Objective::MinMaxLatency),
            other => Err(format!(
                "unknown objective {other:?} (expected max_throughput or minmax_latency)"
            )),
        }
    }
}

/// Dense per-unrolled-group tables derived from the DNN list.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layout {
    pub accels: usize,
    /// First flat index of each DNN.
    pub offsets: Vec<usize>,
    pub lens: Vec<usize>,
    pub total: usize,
    pub dnn_of: Vec<usize>,
    /// Flat index -> (dnn, base group index).
    pub base: Vec<(usize, usize)>,
    /// `[flat * accels + a]`, infinite when unsupported.
    pub exec: Vec<f64>,
    pub thr: Vec<f64>,
    /// `[flat * accels^2 + from * accels + to]`.
    pub tau_out: Vec<f64>,
    pub tau_in: Vec<f64>,
}

impl Layout {
    fn build(accels: usize, dnns: &[DnnSpec]) -> Self {
        let lens: Vec<usize> = dnns.iter().map(|d| d.groups.len() * d.iterations).collect();
        let mut offsets = Vec::with_capacity(dnns.len());
        let mut total = 0;
        for &l in &lens {
            offsets.push(total);
            total += l;
        }
        let a2 = accels * accels;
        let mut layout = Layout {
            accels,
            offsets,
            lens,
            total,
            dnn_of: Vec::with_capacity(total),
            base: Vec::with_capacity(total),
            exec: vec![f64::INFINITY; total * accels],
            thr: vec![0.0; total * accels],
            tau_out: vec![0.0; total * a2],
            tau_in: vec![0.0; total * a2],
        };
        let mut flat = 0;
        for (n, dnn) in dnns.iter().enumerate() {
            for i in 0..layout.lens[n] {
                let b = i % dnn.groups.len();
                let g = &dnn.groups[b];
                layout.dnn_of.push(n);
                layout.base.push((n, b));
                for a in 0..accels {
                    if let Some(&t) = g.exec_time.get(&a) {
                        layout.exec[flat * accels + a] = t;
                    }
                    layout.thr[flat * accels + a] = g.throughput(a);
                    for to in 0..accels {
                        layout.tau_out[flat * a2 + a * accels + to] = g.tau_out_ms(a, to);
                        layout.tau_in[flat * a2 + a * accels + to] = g.tau_in_ms(a, to);
                    }
                }
                flat += 1;
            }
        }
        layout
    }

    #[inline]
    pub fn flat(&self, g: GroupRef) -> usize {
        self.offsets[g.dnn] + g.group
    }

    #[inline]
    pub fn group_ref(&self, flat: usize) -> GroupRef {
        let n = self.dnn_of[flat];
        GroupRef::new(n, flat - self.offsets[n])
    }

    #[inline]
    pub fn exec(&self, flat: usize, a: AccelId) -> f64 {
        self.exec[flat * self.accels + a]
    }

    #[inline]
    pub fn supports(&self, flat: usize, a: AccelId) -> bool {
        self.exec(flat, a).is_finite()
    }

    #[inline]
    pub fn thr(&self, flat: usize, a: AccelId) -> f64 {
        self.thr[flat * self.accels + a]
    }

    /// Serial cost of moving from `prev` (on `from`) to `next` (on `to`).
    #[inline]
    pub fn transition(&self, prev: usize, next: usize, from: AccelId, to: AccelId) -> f64 {
        if from == to {
            return 0.0;
        }
        let a2 = self.accels * self.accels;
        let k = from * self.accels + to;
        self.tau_out[prev * a2 + k] + self.tau_in[next * a2 + k]
    }
}

/// A validated problem instance. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    accelerators: Vec<Accelerator>,
    dnns: Vec<DnnSpec>,
    dependencies: Vec<(usize, usize)>,
    contention: ContentionModel,
    epsilon_ms: f64,
    objective: Objective,
    layout: Layout,
}

impl Scenario {
    pub fn new(
        accelerators: Vec<Accelerator>,
        dnns: Vec<DnnSpec>,
        dependencies: Vec<(usize, usize)>,
        contention: ContentionModel,
        epsilon_ms: f64,
        objective: Objective,
    ) -> Result<Self, ParseError> {
        validate_accelerators(&accelerators)?;
        validate_dnns(&dnns, accelerators.len())?;
        validate_dependencies(&dependencies, dnns.len())?;
        if contention.len() != accelerators.len() {
            return invalid(format!(
                "contention model covers {} accelerators but the scenario has {}",
                contention.len(),
                accelerators.len()
            ));
        }
        if !epsilon_ms.is_finite() || epsilon_ms < 0.0 {
            return invalid(format!("epsilon_ms must be >= 0, got {epsilon_ms}"));
        }
        let layout = Layout::build(accelerators.len(), &dnns);
        Ok(Self {
            accelerators,
            dnns,
            dependencies,
            contention,
            epsilon_ms,
            objective,
            layout,
        })
    }

    pub fn accelerators(&self) -> &[Accelerator] {
        &self.accelerators
    }

    pub fn dnns(&self) -> &[DnnSpec] {
        &self.dnns
    }

    pub fn dependencies(&self) -> &[(usize, usize)] {
        &self.dependencies
    }

    pub fn contention(&self) -> &ContentionModel {
        &self.contention
    }

    pub fn epsilon_ms(&self) -> f64 {
        self.epsilon_ms
    }

    pub fn objective(&self) -> Objective {
        self.objective
    }

    pub(crate) fn layout(&self) -> &Layout {
        &self.layout
    }

    /// Number of schedulable groups in DNN `n` after unrolling iterations.
    pub fn group_count(&self, n: usize) -> usize {
        self.layout.lens[n]
    }

    pub fn total_groups(&self) -> usize {
        self.layout.total
    }

    /// The layer group backing unrolled group `g`.
    pub fn group(&self, g: GroupRef) -> &LayerGroup {
        let (n, b) = self.layout.base[self.layout.flat(g)];
        &self.dnns[n].groups[b]
    }

    /// Every unrolled group in (dnn, group) order.
    pub fn group_refs(&self) -> impl Iterator<Item = GroupRef> + '_ {
        (0..self.layout.total).map(|f| self.layout.group_ref(f))
    }

    pub fn with_objective(mut self, objective: Objective) -> Self {
        self.objective = objective;
        self
    }

    pub fn with_epsilon(mut self, epsilon_ms: f64) -> Result<Self, ParseError> {
        if !epsilon_ms.is_finite() || epsilon_ms < 0.0 {
            return invalid(format!("epsilon_ms must be >= 0, got {epsilon_ms}"));
        }
        self.epsilon_ms = epsilon_ms;
        Ok(self)
    }

    pub fn with_contention(self, contention: ContentionModel) -> Result<Self, ParseError> {
        Scenario::new(
            self.accelerators,
            self.dnns,
            self.dependencies,
            contention,
            self.epsilon_ms,
            self.objective,
        )
    }

    pub fn with_dependencies(self, dependencies: Vec<(usize, usize)>) -> Result<Self, ParseError> {
        Scenario::new(
            self.accelerators,
            self.dnns,
            dependencies,
            self.contention,
            self.epsilon_ms,
            self.objective,
        )
    }

    /// Multiplies every execution time, transition cost and epsilon by `k`.
    /// Throughputs and the contention model are untouched.
    pub fn scale_times(&self, k: f64) -> Result<Self, ParseError> {
        let mut dnns = self.dnns.clone();
        for g in dnns.iter_mut().flat_map(|d| d.groups.iter_mut()) {
            g.exec_time.values_mut().for_each(|v| *v *= k);
            g.tau_out.values_mut().for_each(|v| *v *= k);
            g.tau_in.values_mut().for_each(|v| *v *= k);
        }
        Scenario::new(
            self.accelerators.clone(),
            dnns,
            self.dependencies.clone(),
            self.contention.clone(),
            self.epsilon_ms * k,
            self.objective,
        )
    }

    /// Serializes to the scenario JSON format.
    pub fn to_json(&self) -> String {
        let file = ScenarioFile {
            version: Some(1),
            accelerators: self.accelerators.clone(),
            dnns: self
                .dnns
                .iter()
                .map(|d| DnnFile {
                    name: d.name.clone(),
                    iterations: d.iterations,
                    groups: d.groups.iter().map(GroupFile::from_group).collect(),
                })
                .collect(),
            dependencies: self.dependencies.iter().map(|&(p, c)| [p, c]).collect(),
            contention: self.contention.to_file_block(),
            epsilon_ms: Some(self.epsilon_ms),
            objective: self.objective,
        };
        serde_json::to_string_pretty(&file).expect("scenario serializes")
    }
}

fn validate_accelerators(accels: &[Accelerator]) -> Result<(), ParseError> {
    if accels.is_empty() {
        return invalid("scenario needs at least one accelerator");
    }
    for (pos, a) in accels.iter().enumerate() {
        if a.id != pos {
            return invalid(format!(
                "accelerator ids must be dense 0..{}: found id {} at position {pos}",
                accels.len() - 1,
                a.id
            ));
        }
        if accels[..pos].iter().any(|b| b.name == a.name) {
            return invalid(format!("duplicate accelerator name {:?}", a.name));
        }
    }
    Ok(())
}

fn validate_dnns(dnns: &[DnnSpec], accels: usize) -> Result<(), ParseError> {
    if dnns.is_empty() {
        return invalid("scenario needs at least one dnn");
    }
    for (n, dnn) in dnns.iter().enumerate() {
        if dnn.groups.is_empty() {
            return invalid(format!("dnn {n} ({:?}) has no groups", dnn.name));
        }
        if dnn.iterations == 0 {
            return invalid(format!("dnn {n} ({:?}) iterations must be positive", dnn.name));
        }
        for (i, g) in dnn.groups.iter().enumerate() {
            let id = GroupRef::new(n, i);
            if g.dnn != n || g.index != i {
                return invalid(format!(
                    "group {id} carries mismatched index ({},{})",
                    g.dnn, g.index
                ));
            }
            validate_group(g, id, accels)?;
        }
    }
    Ok(())
}

fn validate_group(g: &LayerGroup, id: GroupRef, accels: usize) -> Result<(), ParseError> {
    if g.exec_time.is_empty() {
        return invalid(format!("group {id} has no exec_time entries"));
    }
    for (&a, &t) in &g.exec_time {
        if a >= accels {
            return invalid(format!("group {id} exec_time references unknown accelerator {a}"));
        }
        if !t.is_finite() || t <= 0.0 {
            return invalid(format!(
                "group {id} exec_time for accelerator {a} must be > 0, got {t}"
            ));
        }
    }
    for (&a, &v) in &g.req_throughput {
        if a >= accels {
            return invalid(format!("group {id} thr_gbps references unknown accelerator {a}"));
        }
        if !v.is_finite() || v < 0.0 {
            return invalid(format!(
                "group {id} thr_gbps for accelerator {a} must be >= 0, got {v}"
            ));
        }
    }
    for (name, map) in [("tau_out", &g.tau_out), ("tau_in", &g.tau_in)] {
        for (&(from, to), &v) in map {
            if from >= accels || to >= accels || from == to {
                return invalid(format!("group {id} has invalid {name} pair {from}-{to}"));
            }
            if !v.is_finite() || v < 0.0 {
                return invalid(format!(
                    "group {id} {name} for {from}-{to} must be >= 0, got {v}"
                ));
            }
        }
        for from in 0..accels {
            for to in 0..accels {
                if from != to && !map.contains_key(&(from, to)) {
                    return invalid(format!("group {id} missing {name} for {from}-{to}"));
                }
            }
        }
    }
    Ok(())
}

fn validate_dependencies(deps: &[(usize, usize)], dnns: usize) -> Result<(), ParseError> {
    for &(p, c) in deps {
        if p >= dnns || c >= dnns {
            return invalid(format!("dependency [{p}, {c}] references an unknown dnn"));
        }
        if p == c {
            return invalid(format!("dependency [{p}, {c}] is a self-loop"));
        }
    }
    if topological_order(dnns, deps).is_none() {
        return invalid("dependencies contain a cycle");
    }
    Ok(())
}

/// Kahn's algorithm, smallest ready index first. `None` on a cycle.
pub(crate) fn topological_order(n: usize, edges: &[(usize, usize)]) -> Option<Vec<usize>> {
    let mut indegree = vec![0usize; n];
    for &(_, c) in edges {
        indegree[c] += 1;
    }
    let mut ready: std::collections::BTreeSet<usize> =
        (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(next) = ready.pop_first() {
        order.push(next);
        for &(p, c) in edges {
            if p == next {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.insert(c);
                }
            }
        }
    }
    (order.len() == n).then_some(order)
}

// ---- file format ----

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    version: Option<u32>,
    accelerators: Vec<Accelerator>,
    dnns: Vec<DnnFile>,
    #[serde(default)]
    dependencies: Vec<[usize; 2]>,
    #[serde(default)]
    contention: BTreeMap<String, SlowdownGrid>,
    #[serde(default)]
    epsilon_ms: Option<f64>,
    #[serde(default)]
    objective: Objective,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DnnFile {
    name: String,
    #[serde(default = "one")]
    iterations: usize,
    groups: Vec<GroupFile>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupFile {
    exec_ms: BTreeMap<String, f64>,
    #[serde(default)]
    thr_gbps: BTreeMap<String, f64>,
    #[serde(default)]
    tau_out_ms: BTreeMap<String, f64>,
    #[serde(default)]
    tau_in_ms: BTreeMap<String, f64>,
}

impl GroupFile {
    fn from_group(g: &LayerGroup) -> Self {
        let accel_map = |m: &BTreeMap<AccelId, f64>| {
            m.iter().map(|(a, v)| (a.to_string(), *v)).collect()
        };
        let pair_map = |m: &BTreeMap<(AccelId, AccelId), f64>| {
            m.iter().map(|((f, t), v)| (format!("{f}-{t}"), *v)).collect()
        };
        GroupFile {
            exec_ms: accel_map(&g.exec_time),
            thr_gbps: accel_map(&g.req_throughput),
            tau_out_ms: pair_map(&g.tau_out),
            tau_in_ms: pair_map(&g.tau_in),
        }
    }

    fn into_group(self, dnn: usize, index: usize) -> Result<LayerGroup, ParseError> {
        let id = GroupRef::new(dnn, index);
        let accel_key = |k: &str, field: &str| -> Result<AccelId, ParseError> {
            k.parse()
                .map_err(|_| ParseError::Invalid(format!("group {id} {field} key {k:?} is not an accelerator id")))
        };
        let pair_key = |k: &str, field: &str| -> Result<(AccelId, AccelId), ParseError> {
            k.split_once('-')
                .and_then(|(f, t)| Some((f.parse().ok()?, t.parse().ok()?)))
                .ok_or_else(|| {
                    ParseError::Invalid(format!(
                        "group {id} {field} key {k:?} is not of the form \"from-to\""
                    ))
                })
        };
        let mut g = LayerGroup::new(dnn, index);
        for (k, v) in self.exec_ms {
            g.exec_time.insert(accel_key(&k, "exec_ms")?, v);
        }
        for (k, v) in self.thr_gbps {
            g.req_throughput.insert(accel_key(&k, "thr_gbps")?, v);
        }
        for (k, v) in self.tau_out_ms {
            g.tau_out.insert(pair_key(&k, "tau_out_ms")?, v);
        }
        for (k, v) in self.tau_in_ms {
            g.tau_in.insert(pair_key(&k, "tau_in_ms")?, v);
        }
        Ok(g)
    }
}

/// Parses and validates a scenario JSON document.
pub fn parse_scenario(text: &str) -> Result<Scenario, ParseError> {
    let file: ScenarioFile = serde_json::from_str(text)?;
    if let Some(v) = file.version {
        if v != 1 {
            return invalid(format!("unsupported scenario version {v}"));
        }
    }
    let contention = ContentionModel::from_file_block(&file.contention, file.accelerators.len())?;
    let mut dnns = Vec::with_capacity(file.dnns.len());
    for (n, d) in file.dnns.into_iter().enumerate() {
        let groups = d
            .groups
            .into_iter()
            .enumerate()
            .map(|(i, g)| g.into_group(n, i))
            .collect::<Result<Vec<_>, _>>()?;
        dnns.push(DnnSpec {
            name: d.name,
            groups,
            iterations: d.iterations,
        });
    }
    Scenario::new(
        file.accelerators,
        dnns,
        file.dependencies.into_iter().map(|[p, c]| (p, c)).collect(),
        contention,
        file.epsilon_ms.unwrap_or(DEFAULT_EPSILON_MS),
        file.objective,
    )
}

/// A total mapping of unrolled groups to accelerators, optionally with
/// extra serialization edges between DNNs (used by the serial baseline).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Schedule {
    pub assignment: BTreeMap<GroupRef, AccelId>,
    /// `(before, after)`: DNN `after` may not start until `before` completes.
    pub serial_edges: Vec<(usize, usize)>,
}

impl Schedule {
    /// Builds a schedule from a flat assignment in (dnn, group) order.
    pub fn from_flat(scenario: &Scenario, flat: &[AccelId]) -> Self {
        let layout = scenario.layout();
        Self {
            assignment: flat
                .iter()
                .enumerate()
                .map(|(f, &a)| (layout.group_ref(f), a))
                .collect(),
            serial_edges: Vec::new(),
        }
    }

    /// Every group of every DNN on `accel_of[dnn]`.
    pub fn whole_dnn(scenario: &Scenario, accel_of: &[AccelId]) -> Self {
        let flat: Vec<AccelId> = scenario.group_refs().map(|g| accel_of[g.dnn]).collect();
        Self::from_flat(scenario, &flat)
    }

    pub fn with_serial_edges(mut self, edges: Vec<(usize, usize)>) -> Self {
        self.serial_edges = edges;
        self
    }

    pub fn get(&self, g: GroupRef) -> Option<AccelId> {
        self.assignment.get(&g).copied()
    }

    /// Flat assignment, `None` unless every group is assigned.
    pub fn to_flat(&self, scenario: &Scenario) -> Option<Vec<AccelId>> {
        scenario.group_refs().map(|g| self.get(g)).collect()
    }

    /// Number of adjacent group pairs placed on different accelerators.
    pub fn transitions(&self) -> usize {
        self.assignment
            .iter()
            .zip(self.assignment.iter().skip(1))
            .filter(|((g0, a0), (g1, a1))| g0.dnn == g1.dnn && a0 != a1)
            .count()
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        for (g, a) in &self.assignment {
            map.insert(g.key(), (*a).into());
        }
        if !self.serial_edges.is_empty() {
            let edges: Vec<serde_json::Value> = self
                .serial_edges
                .iter()
                .map(|&(p, c)| serde_json::json!([p, c]))
                .collect();
            map.insert("serial_edges".into(), edges.into());
        }
        serde_json::Value::Object(map)
    }

    /// Parses `{"dnn.group": accel, ..., "serial_edges": [[p, c], ...]}`.
    /// Structural checks against a scenario are left to [`validate_schedule`].
    pub fn from_json(text: &str) -> Result<Self, ParseError> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let serde_json::Value::Object(map) = value else {
            return invalid("schedule must be a JSON object");
        };
        let mut schedule = Schedule::default();
        for (k, v) in map {
            if k == "serial_edges" {
                let edges: Vec<[usize; 2]> = serde_json::from_value(v)
                    .map_err(|e| ParseError::Invalid(format!("serial_edges: {e}")))?;
                schedule.serial_edges = edges.into_iter().map(|[p, c]| (p, c)).collect();
                continue;
            }
            let g = GroupRef::parse_key(&k)
                .ok_or_else(|| ParseError::Invalid(format!("schedule key {k:?} is not \"dnn.group\"")))?;
            let a = v
                .as_u64()
                .ok_or_else(|| ParseError::Invalid(format!("schedule value for {k} must be an accelerator id")))?;
            schedule.assignment.insert(g, a as AccelId);
        }
        Ok(schedule)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScheduleViolation {
    Unassigned(GroupRef),
    Unsupported { group: GroupRef, accel: AccelId },
    UnknownGroup(GroupRef),
    BadSerialEdge(usize, usize),
    SerialCycle,
}

impl fmt::Display for ScheduleViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Unassigned(g) => write!(f, "unassigned {g}"),
            Self::Unsupported { group, accel } => {
                write!(f, "{group} assigned to unsupported accelerator {accel}")
            }
            Self::UnknownGroup(g) => write!(f, "unknown group {g}"),
            Self::BadSerialEdge(p, c) => write!(f, "serial edge [{p}, {c}] is invalid"),
            Self::SerialCycle => write!(f, "serial edges and dependencies form a cycle"),
        }
    }
}

/// Structural check: totality and support sets. Timing feasibility is a
/// property of the evaluated timeline, not checked here.
pub fn validate_schedule(scenario: &Scenario, schedule: &Schedule) -> Vec<ScheduleViolation> {
    let mut out = Vec::new();
    for g in scenario.group_refs() {
        match schedule.get(g) {
            None => out.push(ScheduleViolation::Unassigned(g)),
            Some(a) if !scenario.group(g).supports(a) => {
                out.push(ScheduleViolation::Unsupported { group: g, accel: a })
            }
            Some(_) => {}
        }
    }
    for &g in schedule.assignment.keys() {
        if g.dnn >= scenario.dnns().len() || g.group >= scenario.group_count(g.dnn) {
            out.push(ScheduleViolation::UnknownGroup(g));
        }
    }
    let n = scenario.dnns().len();
    let mut edges = scenario.dependencies().to_vec();
    let mut edges_ok = true;
    for &(p, c) in &schedule.serial_edges {
        if p >= n || c >= n || p == c {
            out.push(ScheduleViolation::BadSerialEdge(p, c));
            edges_ok = false;
        } else {
            edges.push((p, c));
        }
    }
    if edges_ok && topological_order(n, &edges).is_none() {
        out.push(ScheduleViolation::SerialCycle);
    }
    out
}
