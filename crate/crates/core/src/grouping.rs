//! Collapses a raw layer list into minimal schedulable groups.
//!
//! A layer closes a group only when a transition after it is legal and
//! free of forced overhead: it is not fused with its successor, does not
//! need output reformatting, and the runtime allows switching accelerators
//! there. Everything else is merged forward.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::AccelId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawLayer {
    pub index: usize,
    #[serde(default)]
    pub kind: String,
    #[serde(default)]
    pub fusible_with_next: bool,
    #[serde(default)]
    pub reformat_on_exit: bool,
    #[serde(default = "yes")]
    pub transition_allowed_after: bool,
    pub supported_accelerators: BTreeSet<AccelId>,
}

fn yes() -> bool {
    true
}

impl RawLayer {
    /// A layer that imposes no merging.
    pub fn permissive(index: usize, supported: impl IntoIterator<Item = AccelId>) -> Self {
        Self {
            index,
            kind: String::new(),
            fusible_with_next: false,
            reformat_on_exit: false,
            transition_allowed_after: true,
            supported_accelerators: supported.into_iter().collect(),
        }
    }

    fn is_transition_point(&self) -> bool {
        !self.fusible_with_next && !self.reformat_on_exit && self.transition_allowed_after
    }
}

/// Inclusive layer span `[start_index, end_index]` forming one group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupBoundary {
    pub start_index: usize,
    pub end_index: usize,
    pub supported_accelerators: BTreeSet<AccelId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroupingError {
    #[error("layer list is empty")]
    Empty,
    #[error("layers {start}..={end} must share an accelerator but their support sets do not intersect")]
    EmptySupport { start: usize, end: usize },
    #[error("layer at position {position}: {reason}")]
    InvalidLayer { position: usize, reason: String },
}

pub fn group_layers(layers: &[RawLayer]) -> Result<Vec<GroupBoundary>, GroupingError> {
    if layers.is_empty() {
        return Err(GroupingError::Empty);
    }
    for (position, layer) in layers.iter().enumerate() {
        if layer.supported_accelerators.is_empty() {
            return Err(GroupingError::InvalidLayer {
                position,
                reason: "supported_accelerators is empty".into(),
            });
        }
    }

    let mut groups = Vec::new();
    let mut start = 0;
    let mut support = layers[0].supported_accelerators.clone();
    for (j, layer) in layers.iter().enumerate() {
        if j > start {
            support = support
                .intersection(&layer.supported_accelerators)
                .copied()
                .collect();
        }
        if layer.is_transition_point() || j + 1 == layers.len() {
            if support.is_empty() {
                return Err(GroupingError::EmptySupport {
                    start: layers[start].index,
                    end: layer.index,
                });
            }
            groups.push(GroupBoundary {
                start_index: layers[start].index,
                end_index: layer.index,
                supported_accelerators: std::mem::take(&mut support),
            });
            start = j + 1;
            if let Some(next) = layers.get(start) {
                support = next.supported_accelerators.clone();
            }
        }
    }
    Ok(groups)
}
