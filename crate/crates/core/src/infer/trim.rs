use super::{GraphEstimate, InferError, NodeEstimate, Stage, SubsetStats};

/// Result of trimming one candidate set.
#[derive(Debug, Clone, PartialEq)]
pub struct TrimOutcome {
    /// Largest conditional over observed configurations.
    pub v_star: f64,
    /// Configurations whose conditional exceeds `v_star - 2 tau`.
    pub maximizers: Vec<usize>,
    /// Candidate positions fixed at 1 across all maximizers.
    pub positive: Vec<usize>,
    /// Candidate positions fixed at 0 across all maximizers.
    pub negative: Vec<usize>,
    pub unobserved: usize,
}

impl TrimOutcome {
    pub fn is_empty(&self) -> bool {
        self.positive.is_empty() && self.negative.is_empty()
    }
}

/// Trims a table of `2^d` conditionals (`None` for unobserved cells).
/// Positions in the outcome index bits of the configuration.
pub fn trim_node(values: &[Option<f64>], d: usize, tau: f64, node: usize) -> Result<TrimOutcome, InferError> {
    debug_assert_eq!(values.len(), 1 << d);
    let v_star = values
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if v_star == f64::NEG_INFINITY {
        return Err(InferError::AllCellsEmpty { node });
    }
    let cut = v_star - 2.0 * tau;
    let maximizers: Vec<usize> = values
        .iter()
        .enumerate()
        .filter_map(|(c, v)| v.filter(|&v| v > cut).map(|_| c))
        .collect();
    let all_ones = maximizers.iter().fold(usize::MAX, |acc, &c| acc & c);
    let any_ones = maximizers.iter().fold(0, |acc, &c| acc | c);
    let positive = (0..d).filter(|k| all_ones >> k & 1 == 1).collect();
    let negative = (0..d).filter(|k| any_ones >> k & 1 == 0).collect();
    Ok(TrimOutcome {
        v_star,
        maximizers,
        positive,
        negative,
        unobserved: values.iter().filter(|v| v.is_none()).count(),
    })
}

/// Trims every node's candidate set and assigns signs.
pub fn trim(tables: &[SubsetStats], estimate: &GraphEstimate, tau: f64) -> Result<GraphEstimate, InferError> {
    if estimate.stage == Stage::Full {
        return Err(InferError::WrongStage);
    }
    if !(tau > 0.0) {
        return Err(InferError::BadThreshold { tau, limit: f64::NAN });
    }
    if tables.len() != estimate.p() {
        return Err(InferError::DimensionMismatch {
            expected: estimate.p(),
            found: tables.len(),
        });
    }
    let mut warnings = estimate.warnings.clone();
    let mut nodes = Vec::with_capacity(tables.len());
    for (m, table) in tables.iter().enumerate() {
        if table.candidates != estimate.nodes[m].parents {
            return Err(InferError::DimensionMismatch {
                expected: estimate.nodes[m].parents.len(),
                found: table.candidates.len(),
            });
        }
        let outcome = trim_node(&table.conditionals(), table.candidates.len(), tau, m)?;
        if outcome.unobserved > 0 {
            log::debug!(
                "node {}: {} of {} configurations unobserved, excluded from the maximizer search",
                m + 1,
                outcome.unobserved,
                table.counts.len()
            );
        }
        if outcome.is_empty() {
            warnings.push(format!("node {}: no candidate is fixed across the maximizers", m + 1));
        }
        let positive: Vec<usize> = outcome.positive.iter().map(|&k| table.candidates[k]).collect();
        let negative: Vec<usize> = outcome.negative.iter().map(|&k| table.candidates[k]).collect();
        let mut parents: Vec<usize> = positive.iter().chain(&negative).copied().collect();
        parents.sort_unstable();
        nodes.push(NodeEstimate {
            parents,
            positive,
            negative,
        });
    }
    Ok(GraphEstimate {
        stage: Stage::Full,
        nodes,
        warnings,
    })
}
