use serde::Serialize;

use super::GraphEstimate;
use crate::model::GraphTruth;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecoveryMetrics {
    /// 1 iff every estimated parental set equals the true one.
    pub exact_unsigned: u8,
    /// 1 iff additionally every sign label matches.
    pub exact_signed: u8,
    /// Fraction of true edges present in the estimate.
    pub edge_recall: f64,
    /// Fraction of the `p^2` ordered pairs classified correctly.
    pub edge_accuracy: f64,
}

pub fn metrics(estimate: &GraphEstimate, truth: &GraphTruth) -> RecoveryMetrics {
    let p = truth.p();
    assert_eq!(estimate.p(), p, "estimate and truth disagree on p");
    let mut unsigned = true;
    let mut signed = true;
    let mut found = 0usize;
    let mut false_edges = 0usize;
    for (m, node) in estimate.nodes.iter().enumerate() {
        if node.parents != truth.parents[m] {
            unsigned = false;
        }
        if node.positive != truth.positive[m] || node.negative != truth.negative[m] {
            signed = false;
        }
        for &j in &node.parents {
            if truth.is_parent(m, j) {
                found += 1;
            } else {
                false_edges += 1;
            }
        }
    }
    let total = truth.edge_count();
    let true_non_edges = p * p - total;
    let edge_recall = if total == 0 { 1.0 } else { found as f64 / total as f64 };
    let edge_accuracy = (found + true_non_edges - false_edges) as f64 / (p * p) as f64;
    RecoveryMetrics {
        exact_unsigned: unsigned as u8,
        exact_signed: (unsigned && signed) as u8,
        edge_recall,
        edge_accuracy,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infer::{NodeEstimate, Stage};

    fn truth_30() -> GraphTruth {
        let positive = (0..30).map(|m| vec![(m + 1) % 30, (m + 2) % 30, (m + 3) % 30]).collect();
        GraphTruth::new(positive, vec![Vec::new(); 30], 3)
    }

    fn estimate_of(truth: &GraphTruth) -> GraphEstimate {
        GraphEstimate {
            stage: Stage::Full,
            nodes: (0..truth.p())
                .map(|m| NodeEstimate {
                    parents: truth.parents[m].clone(),
                    positive: truth.positive[m].clone(),
                    negative: truth.negative[m].clone(),
                })
                .collect(),
            warnings: Vec::new(),
        }
    }

    #[test]
    fn perfect_estimate() {
        let t = truth_30();
        let m = metrics(&estimate_of(&t), &t);
        assert_eq!((m.exact_unsigned, m.exact_signed, m.edge_recall, m.edge_accuracy), (1, 1, 1.0, 1.0));
    }

    #[test]
    fn one_missing_edge() {
        let t = truth_30();
        let mut e = estimate_of(&t);
        let dropped = e.nodes[4].parents.remove(0);
        e.nodes[4].positive.retain(|&j| j != dropped);
        let m = metrics(&e, &t);
        assert_eq!(m.exact_unsigned, 0);
        assert!((m.edge_recall - 89.0 / 90.0).abs() < 1e-15);
    }

    #[test]
    fn empty_estimate() {
        let t = truth_30();
        let e = GraphEstimate {
            stage: Stage::Full,
            nodes: vec![NodeEstimate::default(); 30],
            warnings: Vec::new(),
        };
        let m = metrics(&e, &t);
        assert_eq!(m.edge_recall, 0.0);
        assert!((m.edge_accuracy - 0.9).abs() < 1e-15);
    }
}
