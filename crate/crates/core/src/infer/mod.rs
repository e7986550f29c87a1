//! Structure observer: estimates each node's signed parental set from a
//! single trajectory in two stages.
//!
//! 1. Supergraph selection keeps, per node, the `d` candidates with the
//!    largest empirical conditional influence `|nu_hat|`.
//! 2. Supergraph trimming conditions on the candidates jointly, finds the
//!    configurations that (nearly) maximize the next-step probability and
//!    keeps the coordinates that are fixed across all of them.
//!
//! Selection alone can also be stopped early and signed from `nu_hat`,
//! optionally shrinking each node to a known in-degree.

mod metrics;
mod select;
mod stats;
mod trim;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Sign;
use crate::simulate::Trajectory;

pub use metrics::{metrics, RecoveryMetrics};
pub use select::{sign_from_selection, supergraph_select};
pub use stats::{accumulate_subsets, EmpiricalStats, SubsetStats, MAX_SUBSET_SIZE};
pub use trim::{trim, trim_node, TrimOutcome};

#[derive(Debug, Error)]
pub enum InferError {
    #[error("trajectory has {n} states; at least 2 are needed")]
    TooShort { n: usize },
    #[error("conditioning cell of node {} given node {} is empty", .m + 1, .l + 1)]
    DegenerateCell { m: usize, l: usize },
    #[error("expected dimension {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("candidate set of size {0} exceeds the conditional table limit")]
    SubsetTooLarge(usize),
    #[error("degree cap d must be at least 1")]
    ZeroDegree,
    #[error("threshold tau = {tau} must be positive and at most a_min / 4 = {limit}")]
    BadThreshold { tau: f64, limit: f64 },
    #[error("node {}: no configuration of the candidate set was observed", .node + 1)]
    AllCellsEmpty { node: usize },
    #[error("trimming needs a selection-stage estimate")]
    WrongStage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    SelectionOnly,
    SelectionSigned,
    Full,
}

/// Estimated parental set of one node. All lists are sorted ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeEstimate {
    pub parents: Vec<usize>,
    pub positive: Vec<usize>,
    pub negative: Vec<usize>,
}

impl NodeEstimate {
    pub fn degree(&self) -> usize {
        self.parents.len()
    }

    pub fn sign_of(&self, j: usize) -> Option<Sign> {
        if self.positive.binary_search(&j).is_ok() {
            Some(Sign::Positive)
        } else if self.negative.binary_search(&j).is_ok() {
            Some(Sign::Negative)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphEstimate {
    pub stage: Stage,
    pub nodes: Vec<NodeEstimate>,
    pub warnings: Vec<String>,
}

impl GraphEstimate {
    pub fn p(&self) -> usize {
        self.nodes.len()
    }

    pub fn to_file(&self) -> EstimateFile {
        EstimateFile {
            p: self.p(),
            stage: self.stage,
            nodes: self
                .nodes
                .iter()
                .enumerate()
                .map(|(i, node)| EstimateNode {
                    id: i + 1,
                    parents: node
                        .parents
                        .iter()
                        .map(|&j| EstimateParent {
                            j: j + 1,
                            sign: node.sign_of(j),
                        })
                        .collect(),
                })
                .collect(),
            warnings: self.warnings.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("estimate serializes")
    }
}

/// JSON layout of an estimate, mirroring the model file's adjacency shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateFile {
    pub p: usize,
    pub stage: Stage,
    pub nodes: Vec<EstimateNode>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateNode {
    pub id: usize,
    pub parents: Vec<EstimateParent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateParent {
    pub j: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sign: Option<Sign>,
}

/// Which variant of the observer to run.
#[derive(Debug, Clone, PartialEq)]
pub enum ObserverMode {
    /// Selection with signs read off `nu_hat`.
    SelectionOnly,
    /// As `SelectionOnly`, but each node keeps only its top `d_m` candidates.
    KnownDegrees(Vec<usize>),
    /// Selection followed by trimming with threshold `tau`.
    Full { tau: f64 },
}

/// Runs the observer end to end on one trajectory.
pub fn observe(traj: &Trajectory, d: usize, mode: &ObserverMode) -> Result<GraphEstimate, InferError> {
    let stats = EmpiricalStats::accumulate(traj)?;
    let selected = supergraph_select(&stats, d)?;
    match mode {
        ObserverMode::SelectionOnly => sign_from_selection(&stats, &selected, None),
        ObserverMode::KnownDegrees(degrees) => sign_from_selection(&stats, &selected, Some(degrees)),
        ObserverMode::Full { tau } => {
            let sets: Vec<Vec<usize>> = selected.nodes.iter().map(|n| n.parents.clone()).collect();
            let tables = accumulate_subsets(traj, &sets)?;
            trim(&tables, &selected, *tau)
        }
    }
}

/// Checks the trimming threshold rule `0 < tau <= a_min / 4`.
pub fn check_threshold(tau: f64, a_min: f64) -> Result<(), InferError> {
    let limit = a_min / 4.0;
    if tau > 0.0 && tau <= limit + 1e-15 {
        Ok(())
    } else {
        Err(InferError::BadThreshold { tau, limit })
    }
}
