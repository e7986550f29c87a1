//! BAR model definition, validation, generation and the JSON model file.
//!
//! A model holds, for every node `i`, its signed parental set `S(i)` with
//! weights `a_ij`, a noise gain `b_i` and the shared noise rate `rho_w`.
//! Node indices are 0-based in the API and 1-based in the JSON file.

use std::fmt;
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Additive tolerance accepted on the row-sum identity and on the floors.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// Deviations at or below this are summation noise and are left untouched.
const ROW_SUM_SLACK: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parameter {name} = {value} is outside its admissible range")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("node {} has an empty parental set", .node + 1)]
    EmptyParentSet { node: usize },
    #[error("node {} lists parent {} more than once", .node + 1, .parent + 1)]
    DuplicateEdge { node: usize, parent: usize },
    #[error("node {} references parent {} outside 1..={p}", .node + 1, .parent + 1)]
    NodeOutOfRange { node: usize, parent: usize, p: usize },
    #[error("weight a[{},{}] = {weight} is below the floor a_min = {floor}", .node + 1, .parent + 1)]
    WeightBelowFloor { node: usize, parent: usize, weight: f64, floor: f64 },
    #[error("weight a[{},{}] = {weight} is not below 1", .node + 1, .parent + 1)]
    WeightTooLarge { node: usize, parent: usize, weight: f64 },
    #[error("noise gain b[{}] = {b} is below the floor b_min = {floor}", .node + 1)]
    NoiseBelowFloor { node: usize, b: f64, floor: f64 },
    #[error("noise gain b[{}] = {b} is not below 1", .node + 1)]
    NoiseTooLarge { node: usize, b: f64 },
    #[error("row {} sums to {sum} instead of 1", .node + 1)]
    RowSumViolation { node: usize, sum: f64 },
    #[error("no valid degree exists for a_min = {a_min}, b_min = {b_min}")]
    Infeasible { a_min: f64, b_min: f64 },
    #[error("node {} asks for degree {degree} but at most {max} is feasible", .node + 1)]
    DegreeTooLarge { node: usize, degree: usize, max: usize },
    #[error("model file lists {found} nodes for p = {expected}, or ids are not 1..=p in order")]
    NodeListMismatch { expected: usize, found: usize },
    #[error("model JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("model file: {0}")]
    Io(#[from] std::io::Error),
}

/// Polarity of an edge: `f_i(x_j) = x_j` for positive, `1 - x_j` for negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Positive,
    #[serde(rename = "-")]
    Negative,
}

impl Sign {
    pub fn symbol(self) -> &'static str {
        match self {
            Sign::Positive => "+",
            Sign::Negative => "-",
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// One nonzero entry `a_ij` of a row together with its sign label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedParent {
    pub source: usize,
    pub weight: f64,
    pub sign: Sign,
}

impl SignedParent {
    pub fn new(source: usize, weight: f64, sign: Sign) -> Self {
        Self {
            source,
            weight,
            sign,
        }
    }

    /// `f_i(x_source)` for this edge.
    #[inline]
    pub fn apply(&self, bit: bool) -> f64 {
        match (self.sign, bit) {
            (Sign::Positive, true) | (Sign::Negative, false) => 1.0,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeRow {
    pub b: f64,
    pub parents: Vec<SignedParent>,
}

/// Unvalidated model parameters. [`BarModel::new`] turns these into a model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub rho_w: f64,
    pub a_min: f64,
    pub b_min: f64,
    pub rows: Vec<NodeRow>,
}

/// Checks every parameter-space constraint and reports the first violation.
///
/// Nodes are checked in index order; within a node the order is parent
/// set, edge indices, weights, noise gain, row sum.
pub fn validate(spec: &ModelSpec) -> Result<(), ModelError> {
    check_open_unit("rho_w", spec.rho_w)?;
    check_open_unit("a_min", spec.a_min)?;
    check_open_unit("b_min", spec.b_min)?;
    if spec.rows.is_empty() {
        return Err(ModelError::InvalidParameter {
            name: "p",
            value: 0.0,
        });
    }
    let p = spec.rows.len();
    for (node, row) in spec.rows.iter().enumerate() {
        if row.parents.is_empty() {
            return Err(ModelError::EmptyParentSet { node });
        }
        let mut seen = vec![false; p];
        for parent in &row.parents {
            if parent.source >= p {
                return Err(ModelError::NodeOutOfRange {
                    node,
                    parent: parent.source,
                    p,
                });
            }
            if std::mem::replace(&mut seen[parent.source], true) {
                return Err(ModelError::DuplicateEdge {
                    node,
                    parent: parent.source,
                });
            }
        }
        for parent in &row.parents {
            if !(parent.weight >= spec.a_min - ROW_SUM_TOLERANCE) {
                return Err(ModelError::WeightBelowFloor {
                    node,
                    parent: parent.source,
                    weight: parent.weight,
                    floor: spec.a_min,
                });
            }
            if parent.weight >= 1.0 {
                return Err(ModelError::WeightTooLarge {
                    node,
                    parent: parent.source,
                    weight: parent.weight,
                });
            }
        }
        if !(row.b >= spec.b_min - ROW_SUM_TOLERANCE) {
            return Err(ModelError::NoiseBelowFloor {
                node,
                b: row.b,
                floor: spec.b_min,
            });
        }
        if row.b >= 1.0 {
            return Err(ModelError::NoiseTooLarge { node, b: row.b });
        }
        let sum = row.parents.iter().map(|a| a.weight).sum::<f64>() + row.b;
        if !((sum - 1.0).abs() <= ROW_SUM_TOLERANCE) {
            return Err(ModelError::RowSumViolation { node, sum });
        }
    }
    Ok(())
}

fn check_open_unit(name: &'static str, value: f64) -> Result<(), ModelError> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter { name, value })
    }
}

/// Largest in-degree compatible with the floors: `floor((1 - b_min) / a_min)`.
pub fn d_star(a_min: f64, b_min: f64) -> Result<usize, ModelError> {
    check_open_unit("a_min", a_min)?;
    check_open_unit("b_min", b_min)?;
    if a_min + b_min > 1.0 + ROW_SUM_TOLERANCE {
        return Err(ModelError::Infeasible { a_min, b_min });
    }
    let mut d = ((1.0 - b_min) / a_min + 1e-9).floor() as usize;
    // Guard the floor against representation error on either side.
    while d > 1 && a_min * d as f64 + b_min > 1.0 + ROW_SUM_TOLERANCE {
        d -= 1;
    }
    while a_min * (d + 1) as f64 + b_min <= 1.0 + ROW_SUM_TOLERANCE {
        d += 1;
    }
    Ok(d.max(1))
}

/// A validated BAR model. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct BarModel {
    rho_w: f64,
    a_min: f64,
    b_min: f64,
    rows: Vec<NodeRow>,
}

impl BarModel {
    /// Validates `spec` and rescales each weight row so that
    /// `sum_j a_ij + b_i = 1` holds to rounding.
    pub fn new(mut spec: ModelSpec) -> Result<Self, ModelError> {
        validate(&spec)?;
        for row in &mut spec.rows {
            let a_sum: f64 = row.parents.iter().map(|a| a.weight).sum();
            if (a_sum + row.b - 1.0).abs() > ROW_SUM_SLACK {
                let scale = (1.0 - row.b) / a_sum;
                for parent in &mut row.parents {
                    parent.weight *= scale;
                }
            }
        }
        Ok(Self {
            rho_w: spec.rho_w,
            a_min: spec.a_min,
            b_min: spec.b_min,
            rows: spec.rows,
        })
    }

    pub fn p(&self) -> usize {
        self.rows.len()
    }

    pub fn rho_w(&self) -> f64 {
        self.rho_w
    }

    pub fn a_min(&self) -> f64 {
        self.a_min
    }

    pub fn b_min(&self) -> f64 {
        self.b_min
    }

    pub fn rows(&self) -> &[NodeRow] {
        &self.rows
    }

    pub fn row(&self, node: usize) -> &NodeRow {
        &self.rows[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.rows[node].parents.len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.parents.len()).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.rows.iter().map(|r| r.parents.len()).max().unwrap_or(0)
    }

    /// `sum_j a_ij` for row `node`.
    pub fn row_sum(&self, node: usize) -> f64 {
        self.rows[node].parents.iter().map(|a| a.weight).sum()
    }

    pub fn max_row_sum(&self) -> f64 {
        (0..self.p()).map(|i| self.row_sum(i)).fold(0.0, f64::max)
    }

    /// Column sums of the unsigned weight matrix.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.p()];
        for row in &self.rows {
            for parent in &row.parents {
                sums[parent.source] += parent.weight;
            }
        }
        sums
    }

    pub fn has_sign_inversions(&self) -> bool {
        self.rows
            .iter()
            .flat_map(|r| &r.parents)
            .any(|a| a.sign == Sign::Negative)
    }

    /// Dense unsigned weight matrix, row-major `p x p`.
    pub fn weight_matrix(&self) -> Vec<f64> {
        let p = self.p();
        let mut m = vec![0.0; p * p];
        for (i, row) in self.rows.iter().enumerate() {
            for parent in &row.parents {
                m[i * p + parent.source] = parent.weight;
            }
        }
        m
    }

    /// Weight matrix with entries negated on sign-inverting edges.
    pub fn signed_weight_matrix(&self) -> Vec<f64> {
        let p = self.p();
        let mut m = vec![0.0; p * p];
        for (i, row) in self.rows.iter().enumerate() {
            for parent in &row.parents {
                m[i * p + parent.source] = match parent.sign {
                    Sign::Positive => parent.weight,
                    Sign::Negative => -parent.weight,
                };
            }
        }
        m
    }

    /// `sum_j a_ij f_i(x_j)`: the state-driven part of node `i`'s parameter.
    #[inline]
    pub fn drive(&self, node: usize, x: &[bool]) -> f64 {
        self.rows[node]
            .parents
            .iter()
            .map(|a| a.weight * a.apply(x[a.source]))
            .sum()
    }

    /// Bernoulli parameter of node `i` given state `x` and noise bit `w`.
    #[inline]
    pub fn bernoulli_parameter(&self, node: usize, x: &[bool], w: bool) -> f64 {
        let noise = if w { self.rows[node].b } else { 0.0 };
        self.drive(node, x) + noise
    }

    /// `P(X_i^{+1} = 1 | X = x)`, averaging out the noise bit.
    #[inline]
    pub fn next_one_probability(&self, node: usize, x: &[bool]) -> f64 {
        self.drive(node, x) + self.rows[node].b * self.rho_w
    }

    pub fn truth(&self) -> GraphTruth {
        let mut positive = Vec::with_capacity(self.p());
        let mut negative = Vec::with_capacity(self.p());
        for row in &self.rows {
            let mut pos: Vec<usize> = Vec::new();
            let mut neg: Vec<usize> = Vec::new();
            for parent in &row.parents {
                match parent.sign {
                    Sign::Positive => pos.push(parent.source),
                    Sign::Negative => neg.push(parent.source),
                }
            }
            positive.push(pos);
            negative.push(neg);
        }
        GraphTruth::new(positive, negative, self.max_degree())
    }

    pub fn to_spec(&self) -> ModelSpec {
        ModelSpec {
            rho_w: self.rho_w,
            a_min: self.a_min,
            b_min: self.b_min,
            rows: self.rows.clone(),
        }
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            p: self.p(),
            rho_w: self.rho_w,
            a_min: self.a_min,
            b_min: self.b_min,
            nodes: self
                .rows
                .iter()
                .enumerate()
                .map(|(i, row)| NodeFile {
                    id: i + 1,
                    b: row.b,
                    parents: row
                        .parents
                        .iter()
                        .map(|a| ParentFile {
                            j: a.source + 1,
                            a: a.weight,
                            sign: a.sign,
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn from_file(file: ModelFile) -> Result<Self, ModelError> {
        if file.nodes.len() != file.p || file.nodes.iter().enumerate().any(|(i, n)| n.id != i + 1)
        {
            return Err(ModelError::NodeListMismatch {
                expected: file.p,
                found: file.nodes.len(),
            });
        }
        let mut rows = Vec::with_capacity(file.p);
        for (node, n) in file.nodes.into_iter().enumerate() {
            let mut parents = Vec::with_capacity(n.parents.len());
            for a in n.parents {
                if a.j == 0 {
                    return Err(ModelError::NodeOutOfRange {
                        node,
                        parent: usize::MAX,
                        p: file.p,
                    });
                }
                parents.push(SignedParent::new(a.j - 1, a.a, a.sign));
            }
            rows.push(NodeRow { b: n.b, parents });
        }
        Self::new(ModelSpec {
            rho_w: file.rho_w,
            a_min: file.a_min,
            b_min: file.b_min,
            rows,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        Self::from_file(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Short content hash of the model file, used to tag trajectories.
    pub fn model_id(&self) -> String {
        let compact = serde_json::to_string(&self.to_file()).expect("model serializes");
        let digest = Sha256::digest(compact.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// On-disk model layout. Ids are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub p: usize,
    pub rho_w: f64,
    pub a_min: f64,
    pub b_min: f64,
    pub nodes: Vec<NodeFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeFile {
    pub id: usize,
    pub b: f64,
    pub parents: Vec<ParentFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParentFile {
    pub j: usize,
    pub a: f64,
    pub sign: Sign,
}

/// True signed parental sets, sorted by node index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphTruth {
    pub parents: Vec<Vec<usize>>,
    pub positive: Vec<Vec<usize>>,
    pub negative: Vec<Vec<usize>>,
    /// Global in-degree cap `d`.
    pub d: usize,
}

impl GraphTruth {
    pub fn new(mut positive: Vec<Vec<usize>>, mut negative: Vec<Vec<usize>>, d: usize) -> Self {
        assert_eq!(positive.len(), negative.len());
        let mut parents = Vec::with_capacity(positive.len());
        for (pos, neg) in positive.iter_mut().zip(negative.iter_mut()) {
            pos.sort_unstable();
            neg.sort_unstable();
            let mut all: Vec<usize> = pos.iter().chain(neg.iter()).copied().collect();
            all.sort_unstable();
            parents.push(all);
        }
        let d = d.max(parents.iter().map(Vec::len).max().unwrap_or(0));
        Self {
            parents,
            positive,
            negative,
            d,
        }
    }

    pub fn p(&self) -> usize {
        self.parents.len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.parents.iter().map(Vec::len).collect()
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    pub fn is_parent(&self, node: usize, source: usize) -> bool {
        self.parents[node].binary_search(&source).is_ok()
    }
}

/// Parameters of [`random_model`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub p: usize,
    /// In-degree `d_i` of every node.
    pub degrees: Vec<usize>,
    pub a_min: f64,
    pub b_min: f64,
    pub b_max: f64,
    pub rho_w: f64,
    /// Probability that an edge is labelled positive.
    pub sign_prob: f64,
    /// When set, weights are drawn uniformly in `[a_min, cap)` and
    /// `b_i = 1 - sum_j a_ij`; `b_max` is then ignored. This is the
    /// column-substochastic construction used for the hypercube walks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_cap: Option<f64>,
}

impl GeneratorParams {
    pub fn uniform_degree(p: usize, d: usize, a_min: f64, b_min: f64, b_max: f64, rho_w: f64) -> Self {
        Self {
            p,
            degrees: vec![d; p],
            a_min,
            b_min,
            b_max,
            rho_w,
            sign_prob: 0.5,
            weight_cap: None,
        }
    }
}

/// Draws every `d_i` uniformly from `1..=d_max` (capped at `p`).
pub fn random_degrees(p: usize, d_max: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hi = d_max.min(p).max(1);
    (0..p).map(|_| rng.random_range(1..=hi)).collect()
}

/// Generates a random valid model and its true graph.
///
/// Row supports are uniform over `d_i`-subsets of the nodes. Noise gains
/// are uniform on `[b_min, min(b_max, 1 - d_i a_min)]` and the remaining
/// mass `1 - b_i - d_i a_min` is spread over the row by a uniform point
/// of the simplex, on top of the floor `a_min`. The output is a
/// deterministic function of `(params, seed)`.
pub fn random_model(params: &GeneratorParams, seed: u64) -> Result<(BarModel, GraphTruth), ModelError> {
    let p = params.p;
    if p == 0 {
        return Err(ModelError::InvalidParameter {
            name: "p",
            value: 0.0,
        });
    }
    if params.degrees.len() != p {
        return Err(ModelError::NodeListMismatch {
            expected: p,
            found: params.degrees.len(),
        });
    }
    check_open_unit("rho_w", params.rho_w)?;
    if !(0.0..=1.0).contains(&params.sign_prob) {
        return Err(ModelError::InvalidParameter {
            name: "sign_prob",
            value: params.sign_prob,
        });
    }
    let d_max = d_star(params.a_min, params.b_min)?;
    if params.weight_cap.is_none() && params.b_max < params.b_min {
        return Err(ModelError::InvalidParameter {
            name: "b_max",
            value: params.b_max,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(p);
    for (node, &d_i) in params.degrees.iter().enumerate() {
        if d_i == 0 {
            return Err(ModelError::EmptyParentSet { node });
        }
        let max = d_max.min(p);
        if d_i > max {
            return Err(ModelError::DegreeTooLarge {
                node,
                degree: d_i,
                max,
            });
        }
        let mut support = index::sample(&mut rng, p, d_i).into_vec();
        support.sort_unstable();

        let (b, weights) = match params.weight_cap {
            None => {
                let b_hi = params.b_max.min(1.0 - d_i as f64 * params.a_min);
                if b_hi < params.b_min {
                    return Err(ModelError::DegreeTooLarge {
                        node,
                        degree: d_i,
                        max,
                    });
                }
                let b = if b_hi > params.b_min {
                    rng.random_range(params.b_min..=b_hi)
                } else {
                    params.b_min
                };
                let slack = (1.0 - b - d_i as f64 * params.a_min).max(0.0);
                let simplex = uniform_simplex(&mut rng, d_i);
                let weights: Vec<f64> = simplex.iter().map(|w| params.a_min + slack * w).collect();
                (b, weights)
            }
            Some(cap) => {
                if !(cap > params.a_min) || d_i as f64 * cap > 1.0 - params.b_min {
                    return Err(ModelError::InvalidParameter {
                        name: "weight_cap",
                        value: cap,
                    });
                }
                let weights: Vec<f64> = (0..d_i).map(|_| rng.random_range(params.a_min..cap)).collect();
                let b = 1.0 - weights.iter().sum::<f64>();
                (b, weights)
            }
        };

        let parents = support
            .into_iter()
            .zip(weights)
            .map(|(source, weight)| {
                let sign = if rng.random_bool(params.sign_prob) {
                    Sign::Positive
                } else {
                    Sign::Negative
                };
                SignedParent::new(source, weight, sign)
            })
            .collect();
        rows.push(NodeRow { b, parents });
    }

    let model = BarModel::new(ModelSpec {
        rho_w: params.rho_w,
        a_min: params.a_min,
        b_min: params.b_min,
        rows,
    })?;
    let mut truth = model.truth();
    truth.d = truth.d.max(params.degrees.iter().copied().max().unwrap_or(0));
    Ok((model, truth))
}

/// Uniform point of the probability simplex in `k` coordinates.
fn uniform_simplex<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 {
        draws.into_iter().map(|e| e / total).collect()
    } else {
        vec![1.0 / k as f64; k]
    }
}
