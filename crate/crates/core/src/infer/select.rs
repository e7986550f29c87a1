use std::cmp::Ordering;

use super::{EmpiricalStats, GraphEstimate, InferError, NodeEstimate, Stage};

fn by_rank(score: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    |&a, &b| {
        score[b]
            .partial_cmp(&score[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    }
}

/// The `keep` best candidates by decreasing score, ties by smaller index.
fn top(candidates: impl Iterator<Item = usize>, score: &[f64], keep: usize) -> Vec<usize> {
    let mut order: Vec<usize> = candidates.collect();
    let keep = keep.min(order.len());
    if keep == 0 {
        return Vec::new();
    }
    if keep < order.len() {
        order.select_nth_unstable_by(keep - 1, by_rank(score));
        order.truncate(keep);
    }
    order.sort_by(by_rank(score));
    order
}

/// Keeps, for every node, the `d` candidates with the largest `|nu_hat|`
/// (self-loops included).
pub fn supergraph_select(stats: &EmpiricalStats, d: usize) -> Result<GraphEstimate, InferError> {
    if d == 0 {
        return Err(InferError::ZeroDegree);
    }
    let p = stats.p();
    let keep = d.min(p);
    let mut warnings = Vec::new();
    if d > p {
        warnings.push(format!("degree cap {d} exceeds p = {p}; every node is selected"));
    }
    let constant: Vec<String> = (0..p)
        .filter(|&l| stats.marginal_count(l, true) == 0 || stats.marginal_count(l, false) == 0)
        .map(|l| (l + 1).to_string())
        .collect();
    if !constant.is_empty() {
        warnings.push(format!("constant nodes scored as zero influence: {}", constant.join(",")));
    }
    let mut nodes = Vec::with_capacity(p);
    for m in 0..p {
        let score = stats.abs_nu_row(m);
        let mut parents = top(0..p, &score, keep);
        parents.sort_unstable();
        nodes.push(NodeEstimate {
            parents,
            ..NodeEstimate::default()
        });
    }
    Ok(GraphEstimate {
        stage: Stage::SelectionOnly,
        nodes,
        warnings,
    })
}

/// Labels every selected candidate by the sign of `nu_hat`. With
/// `known_degrees`, node `m` first shrinks to its top `d_m` candidates.
pub fn sign_from_selection(
    stats: &EmpiricalStats,
    estimate: &GraphEstimate,
    known_degrees: Option<&[usize]>,
) -> Result<GraphEstimate, InferError> {
    let p = stats.p();
    if estimate.p() != p {
        return Err(InferError::DimensionMismatch {
            expected: p,
            found: estimate.p(),
        });
    }
    if let Some(deg) = known_degrees {
        if deg.len() != p {
            return Err(InferError::DimensionMismatch {
                expected: p,
                found: deg.len(),
            });
        }
    }
    let mut warnings = estimate.warnings.clone();
    let mut nodes = Vec::with_capacity(p);
    for (m, node) in estimate.nodes.iter().enumerate() {
        let score = stats.abs_nu_row(m);
        let mut parents = match known_degrees {
            Some(deg) => top(node.parents.iter().copied(), &score, deg[m]),
            None => node.parents.clone(),
        };
        parents.sort_unstable();
        let mut positive = Vec::new();
        let mut negative = Vec::new();
        for &l in &parents {
            let nu = stats.nu_hat(m, l).unwrap_or(0.0);
            if nu < 0.0 {
                negative.push(l);
            } else {
                if nu == 0.0 {
                    warnings.push(format!("node {}: zero influence from {}, labelled positive", m + 1, l + 1));
                }
                positive.push(l);
            }
        }
        nodes.push(NodeEstimate {
            parents,
            positive,
            negative,
        });
    }
    Ok(GraphEstimate {
        stage: Stage::SelectionSigned,
        nodes,
        warnings,
    })
}
