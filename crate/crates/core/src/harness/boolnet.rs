//! Noisy boolean networks and their rules-file format.
//!
//! ```text
//! # comment
//! noise = 0.1
//! ABA = ID(ABA)
//! OST1 = AND(ABA, !ABI1)
//! ```
//!
//! Each non-comment line defines one node as `<OP>(<lit>, ...)` with
//! `OP` one of `AND`, `OR`, `ID` (exactly one literal) and a literal either
//! a node name or `!name`. Nodes are numbered in order of definition.

use std::collections::HashMap;
use std::fmt;

use rand::seq::index;
use rand::Rng;
use thiserror::Error;

use crate::model::GraphTruth;
use crate::rng::stream_rng;
use crate::simulate::{StateVector, Trajectory, TrajectoryKind};

#[derive(Debug, Error, PartialEq)]
pub enum RulesError {
    #[error("line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("line {line}: unknown node {name}")]
    UnknownNode { line: usize, name: String },
    #[error("invalid network: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoolOp {
    And,
    Or,
    Id,
}

impl BoolOp {
    fn keyword(self) -> &'static str {
        match self {
            BoolOp::And => "AND",
            BoolOp::Or => "OR",
            BoolOp::Id => "ID",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Literal {
    pub node: usize,
    pub negated: bool,
}

impl Literal {
    fn eval(self, x: &[bool]) -> bool {
        x[self.node] != self.negated
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub op: BoolOp,
    pub literals: Vec<Literal>,
}

impl Rule {
    pub fn eval(&self, x: &[bool]) -> bool {
        match self.op {
            BoolOp::And => self.literals.iter().all(|l| l.eval(x)),
            BoolOp::Or => self.literals.iter().any(|l| l.eval(x)),
            BoolOp::Id => self.literals[0].eval(x),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.literals.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BooleanNetwork {
    names: Vec<String>,
    rules: Vec<Rule>,
    noise: f64,
}

/// Default flip probability when a rules file has no `noise` line.
pub const DEFAULT_NOISE: f64 = 0.1;

impl BooleanNetwork {
    pub fn new(names: Vec<String>, rules: Vec<Rule>, noise: f64) -> Result<Self, RulesError> {
        if names.len() != rules.len() || rules.is_empty() {
            return Err(RulesError::Invalid("need one rule per node".into()));
        }
        if !(0.0..0.5).contains(&noise) {
            return Err(RulesError::Invalid(format!("noise {noise} outside [0, 0.5)")));
        }
        for rule in &rules {
            if rule.literals.is_empty() || rule.literals.iter().any(|l| l.node >= rules.len()) {
                return Err(RulesError::Invalid("literal out of range or empty rule".into()));
            }
        }
        Ok(Self { names, rules, noise })
    }

    pub fn p(&self) -> usize {
        self.rules.len()
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn with_noise(mut self, noise: f64) -> Result<Self, RulesError> {
        if !(0.0..0.5).contains(&noise) {
            return Err(RulesError::Invalid(format!("noise {noise} outside [0, 0.5)")));
        }
        self.noise = noise;
        Ok(self)
    }

    /// Rule graph: literal nodes are parents, negated literals are
    /// sign-inverting.
    pub fn truth(&self) -> GraphTruth {
        let mut positive = Vec::with_capacity(self.p());
        let mut negative = Vec::with_capacity(self.p());
        for rule in &self.rules {
            positive.push(rule.literals.iter().filter(|l| !l.negated).map(|l| l.node).collect());
            negative.push(rule.literals.iter().filter(|l| l.negated).map(|l| l.node).collect());
        }
        let d = self.rules.iter().map(Rule::fan_in).max().unwrap_or(0);
        GraphTruth::new(positive, negative, d)
    }

    /// Short content id for trajectory headers.
    pub fn network_id(&self) -> String {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(self.to_string().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Display for BooleanNetwork {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "noise = {}", self.noise)?;
        for (name, rule) in self.names.iter().zip(&self.rules) {
            let lits: Vec<String> = rule
                .literals
                .iter()
                .map(|l| format!("{}{}", if l.negated { "!" } else { "" }, self.names[l.node]))
                .collect();
            writeln!(f, "{name} = {}({})", rule.op.keyword(), lits.join(", "))?;
        }
        Ok(())
    }
}

fn is_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

struct RawRule {
    line: usize,
    target: String,
    op: BoolOp,
    literals: Vec<(String, bool)>,
}

pub fn parse_rules(text: &str) -> Result<BooleanNetwork, RulesError> {
    let mut noise = DEFAULT_NOISE;
    let mut raw = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let err = |message: &str| RulesError::ParseError {
            line: line_no,
            message: message.to_string(),
        };
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (lhs, rhs) = content.split_once('=').ok_or_else(|| err("expected `<id> = <OP>(...)`"))?;
        let lhs = lhs.trim();
        let rhs = rhs.trim();
        if lhs == "noise" {
            noise = rhs.parse().map_err(|_| err("noise must be a real number"))?;
            continue;
        }
        if !is_name(lhs) {
            return Err(err("node id must be alphanumeric"));
        }
        let open = rhs.find('(').ok_or_else(|| err("missing `(`"))?;
        let body = rhs[open + 1..].strip_suffix(')').ok_or_else(|| err("missing `)`"))?;
        let op = match rhs[..open].trim() {
            "AND" => BoolOp::And,
            "OR" => BoolOp::Or,
            "ID" => BoolOp::Id,
            other => return Err(err(&format!("unsupported operator `{other}`"))),
        };
        let mut literals = Vec::new();
        for lit in body.split(',') {
            let lit = lit.trim();
            let (name, negated) = match lit.strip_prefix('!') {
                Some(rest) => (rest.trim(), true),
                None => (lit, false),
            };
            if !is_name(name) {
                return Err(err(&format!("bad literal `{lit}`")));
            }
            literals.push((name.to_string(), negated));
        }
        if op == BoolOp::Id && literals.len() != 1 {
            return Err(err("ID takes exactly one literal"));
        }
        raw.push(RawRule {
            line: line_no,
            target: lhs.to_string(),
            op,
            literals,
        });
    }
    if raw.is_empty() {
        return Err(RulesError::Invalid("no rules".into()));
    }
    let mut index_of = HashMap::new();
    for r in &raw {
        if index_of.insert(r.target.clone(), index_of.len()).is_some() {
            return Err(RulesError::ParseError {
                line: r.line,
                message: format!("node {} defined twice", r.target),
            });
        }
    }
    let mut names = Vec::with_capacity(raw.len());
    let mut rules = Vec::with_capacity(raw.len());
    for r in raw {
        let mut literals: Vec<Literal> = Vec::with_capacity(r.literals.len());
        for (name, negated) in r.literals {
            let node = *index_of.get(&name).ok_or_else(|| RulesError::UnknownNode {
                line: r.line,
                name: name.clone(),
            })?;
            if literals.iter().any(|l| l.node == node) {
                return Err(RulesError::ParseError {
                    line: r.line,
                    message: format!("node {name} appears twice in one rule"),
                });
            }
            literals.push(Literal { node, negated });
        }
        names.push(r.target);
        rules.push(Rule { op: r.op, literals });
    }
    BooleanNetwork::new(names, rules, noise)
}

/// Evaluates every rule on `x`, then flips each output with probability
/// `noise`. One uniform per node.
pub fn boolean_step_into<R: Rng>(net: &BooleanNetwork, x: &[bool], out: &mut [bool], rng: &mut R) {
    for (i, rule) in net.rules.iter().enumerate() {
        let flip = rng.random::<f64>() < net.noise;
        out[i] = rule.eval(x) != flip;
    }
}

pub fn boolean_step<R: Rng>(net: &BooleanNetwork, x: &StateVector, rng: &mut R) -> StateVector {
    let mut out = vec![false; net.p()];
    boolean_step_into(net, x.bits(), &mut out, rng);
    StateVector::new(out)
}

/// Simulates `n` states after `burn_in` steps from a uniform random state.
pub fn sample_boolean_trajectory(net: &BooleanNetwork, n: usize, burn_in: usize, seed: u64) -> Trajectory {
    let p = net.p();
    let mut rng = stream_rng(seed, 0);
    let mut x = StateVector::random(p, &mut rng).into_bits();
    let mut next = vec![false; p];
    for _ in 0..burn_in {
        boolean_step_into(net, &x, &mut next, &mut rng);
        std::mem::swap(&mut x, &mut next);
    }
    let mut traj = Trajectory::with_capacity(p, n, seed, net.network_id(), TrajectoryKind::BooleanNet);
    for k in 0..n {
        if k > 0 {
            boolean_step_into(net, &x, &mut next, &mut rng);
            std::mem::swap(&mut x, &mut next);
        }
        traj.push(&x).expect("state width matches network");
    }
    traj
}

/// Random AND/OR network: uniform `fan_in`-subsets of parents, uniform
/// operator, each literal negated with probability 1/2.
pub fn random_andor_network(p: usize, fan_in: usize, noise: f64, seed: u64) -> Result<BooleanNetwork, RulesError> {
    if fan_in == 0 || fan_in > p {
        return Err(RulesError::Invalid(format!("fan-in {fan_in} not in 1..={p}")));
    }
    let mut rng = stream_rng(seed, 0);
    let mut rules = Vec::with_capacity(p);
    for _ in 0..p {
        let mut parents = index::sample(&mut rng, p, fan_in).into_vec();
        parents.sort_unstable();
        let op = if rng.random_bool(0.5) { BoolOp::And } else { BoolOp::Or };
        let literals = parents
            .into_iter()
            .map(|node| Literal {
                node,
                negated: rng.random_bool(0.5),
            })
            .collect();
        rules.push(Rule { op, literals });
    }
    let names = (1..=p).map(|i| i.to_string()).collect();
    BooleanNetwork::new(names, rules, noise)
}
