//! Shared-memory slowdown model.
//!
//! Each accelerator owns a table mapping (requested throughput, external
//! throughput) in GB/s to a multiplicative slowdown factor. Lookups are
//! bilinear with clamping at the table edges. A layer running alone sees
//! zero external demand and therefore a factor of exactly 1.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AccelId, GroupRef, LayerGroup};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ContentionError {
    #[error("invalid slowdown grid for accelerator {accel}: {reason}")]
    InvalidGrid { accel: AccelId, reason: String },
    #[error("no slowdown grid for accelerator {0}")]
    UnknownAccelerator(AccelId),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("group {0} is not among the running groups")]
    SelfNotRunning(GroupRef),
}

/// Slowdown table for one accelerator. `factor[r][e]` is the slowdown at
/// `req_axis[r]` requested and `ext_axis[e]` external GB/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlowdownGrid {
    #[serde(rename = "req_gbps")]
    req_axis: Vec<f64>,
    #[serde(rename = "ext_gbps")]
    ext_axis: Vec<f64>,
    factor: Vec<Vec<f64>>,
}

impl SlowdownGrid {
    pub fn new(
        req_axis: Vec<f64>,
        ext_axis: Vec<f64>,
        factor: Vec<Vec<f64>>,
    ) -> Result<Self, String> {
        check_axis("req_gbps", &req_axis)?;
        check_axis("ext_gbps", &ext_axis)?;
        if ext_axis[0] != 0.0 {
            return Err(format!("ext_gbps[0] must be 0, got {}", ext_axis[0]));
        }
        if factor.len() != req_axis.len() {
            return Err(format!(
                "factor has {} rows but req_gbps has {} points",
                factor.len(),
                req_axis.len()
            ));
        }
        for (r, row) in factor.iter().enumerate() {
            if row.len() != ext_axis.len() {
                return Err(format!(
                    "factor row {r} has {} columns but ext_gbps has {} points",
                    row.len(),
                    ext_axis.len()
                ));
            }
            if row[0] != 1.0 {
                return Err(format!("factor[{r}][0] must be 1.0, got {}", row[0]));
            }
            for (e, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 1.0 {
                    return Err(format!("factor[{r}][{e}] = {v} is below 1.0"));
                }
                if e > 0 && v < row[e - 1] {
                    return Err(format!(
                        "factor row {r} decreases along ext_gbps at column {e}"
                    ));
                }
            }
        }
        Ok(Self {
            req_axis,
            ext_axis,
            factor,
        })
    }

    /// The no-contention table: factor 1 everywhere.
    pub fn identity() -> Self {
        Self {
            req_axis: vec![0.0],
            ext_axis: vec![0.0],
            factor: vec![vec![1.0]],
        }
    }

    /// A table that jumps from 1 at zero external demand to `factor` at
    /// `knee_gbps` and stays there.
    pub fn step(factor: f64, knee_gbps: f64) -> Result<Self, String> {
        Self::new(vec![0.0], vec![0.0, knee_gbps], vec![vec![1.0, factor]])
    }

    pub fn req_axis(&self) -> &[f64] {
        &self.req_axis
    }

    pub fn ext_axis(&self) -> &[f64] {
        &self.ext_axis
    }

    pub fn factors(&self) -> &[Vec<f64>] {
        &self.factor
    }

    pub fn lookup(&self, requested: f64, external: f64) -> f64 {
        let (r, wr) = locate(&self.req_axis, requested);
        let (e, we) = locate(&self.ext_axis, external);
        let r1 = (r + 1).min(self.req_axis.len() - 1);
        let e1 = (e + 1).min(self.ext_axis.len() - 1);
        let lo = lerp(self.factor[r][e], self.factor[r][e1], we);
        let hi = lerp(self.factor[r1][e], self.factor[r1][e1], we);
        blend(lo, hi, wr)
    }
}

fn check_axis(name: &str, axis: &[f64]) -> Result<(), String> {
    if axis.is_empty() {
        return Err(format!("{name} must have at least one point"));
    }
    if axis.iter().any(|v| !v.is_finite()) {
        return Err(format!("{name} contains a non-finite value"));
    }
    if axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(format!("{name} must be strictly ascending"));
    }
    Ok(())
}

/// Cell index and in-cell weight for `x`, clamped to the axis range.
fn locate(axis: &[f64], x: f64) -> (usize, f64) {
    let last = axis.len() - 1;
    if last == 0 || x <= axis[0] || x.is_nan() {
        return (0, 0.0);
    }
    if x >= axis[last] {
        return (last - 1, 1.0);
    }
    let i = axis.partition_point(|&v| v <= x) - 1;
    (i, (x - axis[i]) / (axis[i + 1] - axis[i]))
}

// Both interpolants clamp to their endpoints so rounding can never push a
// value outside the cell, which keeps lookups monotone across cell edges.
fn lerp(a: f64, b: f64, w: f64) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    (a + w * (b - a)).clamp(lo, hi)
}

fn blend(a: f64, b: f64, w: f64) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    ((1.0 - w) * a + w * b).clamp(lo, hi)
}

/// Per-accelerator slowdown tables, indexed by accelerator id.
#[derive(Debug, Clone, PartialEq)]
pub struct ContentionModel {
    grids: Vec<SlowdownGrid>,
}

impl ContentionModel {
    pub fn new(grids: Vec<SlowdownGrid>) -> Self {
        Self { grids }
    }

    pub fn identity(accelerators: usize) -> Self {
        Self::new(vec![SlowdownGrid::identity(); accelerators])
    }

    /// Same table on every accelerator.
    pub fn uniform(accelerators: usize, grid: SlowdownGrid) -> Self {
        Self::new(vec![grid; accelerators])
    }

    pub fn grid(&self, accel: AccelId) -> Option<&SlowdownGrid> {
        self.grids.get(accel)
    }

    pub fn len(&self) -> usize {
        self.grids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grids.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.grids
            .iter()
            .all(|g| g.factor.iter().flatten().all(|&v| v == 1.0))
    }

    /// Builds the model from the scenario file's `contention` block.
    /// Accelerators without an entry get the identity table.
    pub fn from_file_block(
        block: &BTreeMap<String, SlowdownGrid>,
        accelerators: usize,
    ) -> Result<Self, ContentionError> {
        let mut grids = vec![SlowdownGrid::identity(); accelerators];
        for (key, raw) in block {
            let accel: AccelId = key.parse().map_err(|_| ContentionError::InvalidGrid {
                accel: usize::MAX,
                reason: format!("contention key {key:?} is not an accelerator id"),
            })?;
            if accel >= accelerators {
                return Err(ContentionError::UnknownAccelerator(accel));
            }
            grids[accel] = SlowdownGrid::new(
                raw.req_axis.clone(),
                raw.ext_axis.clone(),
                raw.factor.clone(),
            )
            .map_err(|reason| ContentionError::InvalidGrid { accel, reason })?;
        }
        Ok(Self { grids })
    }

    pub fn to_file_block(&self) -> BTreeMap<String, SlowdownGrid> {
        self.grids
            .iter()
            .enumerate()
            .map(|(a, g)| (a.to_string(), g.clone()))
            .collect()
    }
}

/// Slowdown factor for a layer on `accel` requesting `requested` GB/s while
/// other accelerators pull `external` GB/s from shared memory.
pub fn slowdown(
    model: &ContentionModel,
    accel: AccelId,
    requested: f64,
    external: f64,
) -> Result<f64, ContentionError> {
    let grid = model
        .grid(accel)
        .ok_or(ContentionError::UnknownAccelerator(accel))?;
    Ok(grid.lookup(requested, external))
}

/// Requested throughput of a black-box accelerator, transferred from the
/// GPU measurement through the ratio of memory-controller utilizations.
pub fn estimate_dsa_throughput(
    thr_gpu: f64,
    emc_util_gpu: f64,
    emc_util_dsa: f64,
) -> Result<f64, ContentionError> {
    for (name, v) in [
        ("thr_gpu", thr_gpu),
        ("emc_util_gpu", emc_util_gpu),
        ("emc_util_dsa", emc_util_dsa),
    ] {
        if !v.is_finite() || v <= 0.0 {
            return Err(ContentionError::Domain(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    for (name, v) in [("emc_util_gpu", emc_util_gpu), ("emc_util_dsa", emc_util_dsa)] {
        if v > 1.0 {
            return Err(ContentionError::Domain(format!(
                "{name} is a utilization fraction and must be <= 1, got {v}"
            )));
        }
    }
    Ok(thr_gpu / (emc_util_gpu / emc_util_dsa))
}

/// Sum of requested throughput over every running group except `me`.
pub fn external_demand(
    running: &[(&LayerGroup, AccelId)],
    me: GroupRef,
) -> Result<f64, ContentionError> {
    if !running.iter().any(|(g, _)| g.id() == me) {
        return Err(ContentionError::SelfNotRunning(me));
    }
    Ok(sum_external(
        running
            .iter()
            .filter(|(g, _)| g.id() != me)
            .map(|(g, a)| g.throughput(*a)),
    ))
}

#[inline]
pub(crate) fn sum_external(demands: impl Iterator<Item = f64>) -> f64 {
    demands.fold(0.0, |acc, d| acc + d)
}
