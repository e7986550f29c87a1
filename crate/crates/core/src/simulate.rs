//! Trajectory simulation: the BAR update, grand-coupled chain pairs and the
//! single-site hypercube walks.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::bounds::mixing_bound_raw;
use crate::exactchain::{ExactChain, ExactError};
use crate::model::BarModel;
use crate::rng::{stream_rng, BarRng};

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error("state has {found} bits but the model has {expected} nodes")]
    StateLength { expected: usize, found: usize },
    #[error("trajectory length must be at least 1")]
    EmptyTrajectory,
    #[error("exact stationary initialization: {0}")]
    ExactTooLarge(#[from] ExactError),
    #[error("lazy probability {0} is outside [0, 1)")]
    LazyProbability(f64),
    #[error("trajectory file: {0}")]
    Io(#[from] std::io::Error),
    #[error("trajectory file line {line}: {message}")]
    Format { line: usize, message: String },
}

/// A point of `{0,1}^p`. Bit `i` is the state of node `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StateVector(Vec<bool>);

impl StateVector {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn zeros(p: usize) -> Self {
        Self(vec![false; p])
    }

    pub fn ones(p: usize) -> Self {
        Self(vec![true; p])
    }

    /// State whose node `i` carries bit `i` of `index`.
    pub fn from_index(index: usize, p: usize) -> Self {
        Self((0..p).map(|i| index >> i & 1 == 1).collect())
    }

    pub fn random<R: Rng>(p: usize, rng: &mut R) -> Self {
        Self((0..p).map(|_| rng.random_bool(0.5)).collect())
    }

    pub fn to_index(&self) -> usize {
        self.0.iter().enumerate().fold(0, |acc, (i, &b)| acc | (b as usize) << i)
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn into_bits(self) -> Vec<bool> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn hamming(&self, other: &StateVector) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Process that produced a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryKind {
    Bar,
    Rw,
    LazyRw,
    BooleanNet,
}

impl TrajectoryKind {
    pub fn name(self) -> &'static str {
        match self {
            TrajectoryKind::Bar => "bar",
            TrajectoryKind::Rw => "rw",
            TrajectoryKind::LazyRw => "lazy_rw",
            TrajectoryKind::BooleanNet => "boolean_net",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "bar" => Some(TrajectoryKind::Bar),
            "rw" => Some(TrajectoryKind::Rw),
            "lazy_rw" => Some(TrajectoryKind::LazyRw),
            "boolean_net" => Some(TrajectoryKind::BooleanNet),
            _ => None,
        }
    }
}

/// A seeded run of states, stored flat (`n * p` bits, state-major).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    p: usize,
    bits: Vec<bool>,
    pub seed: u64,
    pub model_id: String,
    pub kind: TrajectoryKind,
}

impl Trajectory {
    pub fn new(p: usize, seed: u64, model_id: impl Into<String>, kind: TrajectoryKind) -> Self {
        Self {
            p,
            bits: Vec::new(),
            seed,
            model_id: model_id.into(),
            kind,
        }
    }

    pub fn with_capacity(p: usize, n: usize, seed: u64, model_id: impl Into<String>, kind: TrajectoryKind) -> Self {
        let mut t = Self::new(p, seed, model_id, kind);
        t.bits.reserve(n * p);
        t
    }

    pub fn from_states(states: &[Vec<bool>], seed: u64, model_id: impl Into<String>, kind: TrajectoryKind) -> Result<Self, SimulateError> {
        let p = states.first().ok_or(SimulateError::EmptyTrajectory)?.len();
        let mut t = Self::with_capacity(p, states.len(), seed, model_id, kind);
        for s in states {
            t.push(s)?;
        }
        Ok(t)
    }

    pub fn push(&mut self, state: &[bool]) -> Result<(), SimulateError> {
        if state.len() != self.p {
            return Err(SimulateError::StateLength {
                expected: self.p,
                found: state.len(),
            });
        }
        self.bits.extend_from_slice(state);
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.bits.len().checked_div(self.p).unwrap_or(0)
    }

    pub fn state(&self, k: usize) -> &[bool] {
        &self.bits[k * self.p..(k + 1) * self.p]
    }

    pub fn states(&self) -> impl Iterator<Item = &[bool]> {
        self.bits.chunks_exact(self.p.max(1))
    }

    /// Subsequence of states `range`, keeping metadata.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Trajectory {
        Trajectory {
            p: self.p,
            bits: self.bits[range.start * self.p..range.end * self.p].to_vec(),
            seed: self.seed,
            model_id: self.model_id.clone(),
            kind: self.kind,
        }
    }

    /// Fraction of recorded states with node `i` on.
    pub fn fraction_on(&self, i: usize) -> f64 {
        self.states().filter(|s| s[i]).count() as f64 / self.n() as f64
    }

    /// CSV dump: `#`-prefixed header lines, a column line, one row per step.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# model_id={}", self.model_id)?;
        writeln!(out, "# seed={}", self.seed)?;
        writeln!(out, "# kind={}", self.kind.name())?;
        let header: Vec<String> = (1..=self.p).map(|i| format!("x{i}")).collect();
        writeln!(out, "{}", header.join(","))?;
        let mut line = String::with_capacity(2 * self.p);
        for s in self.states() {
            line.clear();
            for (i, &b) in s.iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                line.push(if b { '1' } else { '0' });
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<(), SimulateError> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self, SimulateError> {
        let mut seed = 0;
        let mut model_id = String::new();
        let mut kind = TrajectoryKind::Bar;
        let mut p = None;
        let mut bits = Vec::new();
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let bad = |message: &str| SimulateError::Format {
                line: lineno,
                message: message.to_string(),
            };
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(meta) = trimmed.strip_prefix('#') {
                if let Some((key, value)) = meta.trim().split_once('=') {
                    match key.trim() {
                        "model_id" => model_id = value.trim().to_string(),
                        "seed" => seed = value.trim().parse().map_err(|_| bad("bad seed"))?,
                        "kind" => kind = TrajectoryKind::parse(value.trim()).ok_or_else(|| bad("unknown kind"))?,
                        _ => {}
                    }
                }
                continue;
            }
            if p.is_none() {
                p = Some(trimmed.split(',').count());
                if trimmed.starts_with('x') {
                    continue;
                }
            }
            let width = p.unwrap_or(0);
            let mut count = 0;
            for field in trimmed.split(',') {
                bits.push(match field.trim() {
                    "0" => false,
                    "1" => true,
                    _ => return Err(bad("expected 0 or 1")),
                });
                count += 1;
            }
            if count != width {
                return Err(bad("row width differs from header"));
            }
        }
        let p = p.ok_or(SimulateError::EmptyTrajectory)?;
        if bits.is_empty() {
            return Err(SimulateError::EmptyTrajectory);
        }
        Ok(Self {
            p,
            bits,
            seed,
            model_id,
            kind,
        })
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self, SimulateError> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}

/// Where the first recorded state comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    Explicit(StateVector),
    /// Run for the coupling mixing bound at `theta = 1/8` from a uniform
    /// random state before recording.
    BurnIn,
    /// Draw the first state from the exact stationary law (small `p` only).
    ExactStationary,
}

/// Burn-in tolerance for [`Init::BurnIn`].
pub const BURN_IN_THETA: f64 = 0.125;

fn check_state(model: &BarModel, x: &[bool]) -> Result<(), SimulateError> {
    if x.len() != model.p() {
        return Err(SimulateError::StateLength {
            expected: model.p(),
            found: x.len(),
        });
    }
    Ok(())
}

/// One BAR update driven by explicit noise bits `w` and uniforms `u`.
///
/// Node `i` turns on iff `u[i] <= sum_j a_ij f_i(x_j) + b_i w[i]`.
pub fn bar_step_with(model: &BarModel, x: &[bool], w: &[bool], u: &[f64], out: &mut [bool]) {
    for i in 0..model.p() {
        let q = model.bernoulli_parameter(i, x, w[i]);
        debug_assert!(
            (-1e-12..=1.0 + 1e-12).contains(&q),
            "Bernoulli parameter {q} out of range at node {i}"
        );
        out[i] = u[i] <= q;
    }
}

/// One BAR update writing into `out`. Draws `w_i` then `u_i` per node.
pub fn bar_step_into<R: Rng>(model: &BarModel, x: &[bool], out: &mut [bool], rng: &mut R) {
    let rho = model.rho_w();
    for i in 0..model.p() {
        let w = rng.random::<f64>() < rho;
        let u: f64 = rng.random();
        let q = model.bernoulli_parameter(i, x, w);
        debug_assert!(
            (-1e-12..=1.0 + 1e-12).contains(&q),
            "Bernoulli parameter {q} out of range at node {i}"
        );
        out[i] = u <= q;
    }
}

pub fn bar_step<R: Rng>(model: &BarModel, x: &StateVector, rng: &mut R) -> StateVector {
    let mut out = vec![false; model.p()];
    bar_step_into(model, x.bits(), &mut out, rng);
    StateVector(out)
}

/// Steps a BAR chain from `x` for `steps` updates, in place.
pub fn advance<R: Rng>(model: &BarModel, x: &mut Vec<bool>, steps: usize, rng: &mut R) {
    let mut next = vec![false; model.p()];
    for _ in 0..steps {
        bar_step_into(model, x, &mut next, rng);
        std::mem::swap(x, &mut next);
    }
}

/// Number of burn-in steps used by [`Init::BurnIn`].
pub fn burn_in_steps(model: &BarModel) -> usize {
    mixing_bound_raw(model.p(), model.max_row_sum(), BURN_IN_THETA).primary as usize
}

/// Draws the first state for `init` from `rng`.
pub fn initial_state<R: Rng>(model: &BarModel, init: &Init, rng: &mut R) -> Result<Vec<bool>, SimulateError> {
    match init {
        Init::Explicit(x) => {
            check_state(model, x.bits())?;
            Ok(x.bits().to_vec())
        }
        Init::BurnIn => {
            let mut x = StateVector::random(model.p(), rng).into_bits();
            advance(model, &mut x, burn_in_steps(model), rng);
            Ok(x)
        }
        Init::ExactStationary => {
            let chain = ExactChain::build(model)?;
            Ok(chain.sample_stationary(rng).into_bits())
        }
    }
}

/// Simulates `n` states of the BAR chain. Deterministic in `seed`.
pub fn sample_trajectory(model: &BarModel, n: usize, init: &Init, seed: u64) -> Result<Trajectory, SimulateError> {
    let mut rng = stream_rng(seed, 0);
    sample_trajectory_with(model, n, init, seed, &mut rng)
}

/// As [`sample_trajectory`], drawing from a caller-supplied generator.
pub fn sample_trajectory_with<R: Rng>(
    model: &BarModel,
    n: usize,
    init: &Init,
    seed: u64,
    rng: &mut R,
) -> Result<Trajectory, SimulateError> {
    if n == 0 {
        return Err(SimulateError::EmptyTrajectory);
    }
    let x0 = initial_state(model, init, rng)?;
    Ok(run_from(model, x0, n, seed, rng))
}

/// Simulates from an exact chain's stationary law without rebuilding it.
pub fn sample_stationary_trajectory(model: &BarModel, chain: &ExactChain, n: usize, seed: u64) -> Result<Trajectory, SimulateError> {
    if n == 0 {
        return Err(SimulateError::EmptyTrajectory);
    }
    let mut rng = stream_rng(seed, 0);
    let x0 = chain.sample_stationary(&mut rng).into_bits();
    Ok(run_from(model, x0, n, seed, &mut rng))
}

fn run_from<R: Rng>(model: &BarModel, x0: Vec<bool>, n: usize, seed: u64, rng: &mut R) -> Trajectory {
    let p = model.p();
    let mut traj = Trajectory::with_capacity(p, n, seed, model.model_id(), TrajectoryKind::Bar);
    traj.bits.extend_from_slice(&x0);
    let mut x = x0;
    let mut next = vec![false; p];
    for _ in 1..n {
        bar_step_into(model, &x, &mut next, rng);
        traj.bits.extend_from_slice(&next);
        std::mem::swap(&mut x, &mut next);
    }
    traj
}

/// One synchronized update of two chains sharing every `w_i` and `u_i`.
pub fn coupled_step_into<R: Rng>(model: &BarModel, x: &[bool], y: &[bool], x_out: &mut [bool], y_out: &mut [bool], rng: &mut R) {
    let rho = model.rho_w();
    for i in 0..model.p() {
        let w = rng.random::<f64>() < rho;
        let u: f64 = rng.random();
        x_out[i] = u <= model.bernoulli_parameter(i, x, w);
        y_out[i] = u <= model.bernoulli_parameter(i, y, w);
    }
}

pub fn coupled_step<R: Rng>(model: &BarModel, x: &StateVector, y: &StateVector, rng: &mut R) -> (StateVector, StateVector) {
    let p = model.p();
    let mut xo = vec![false; p];
    let mut yo = vec![false; p];
    coupled_step_into(model, x.bits(), y.bits(), &mut xo, &mut yo, rng);
    (StateVector(xo), StateVector(yo))
}

/// Outcome of one coupled replica.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingTime {
    Met(u64),
    /// The chains had not met after `max_steps` updates.
    Censored,
}

/// Coalescence-time sample with its censoring horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSample {
    pub times: Vec<CouplingTime>,
    pub max_steps: u64,
}

impl CouplingSample {
    pub fn censored(&self) -> usize {
        self.times.iter().filter(|t| matches!(t, CouplingTime::Censored)).count()
    }

    /// Empirical `P(T > n)`; censored replicas count as exceeding any
    /// `n < max_steps`.
    pub fn tail(&self, n: u64) -> f64 {
        let over = self
            .times
            .iter()
            .filter(|t| match t {
                CouplingTime::Met(m) => *m > n,
                CouplingTime::Censored => true,
            })
            .count();
        over as f64 / self.times.len() as f64
    }

    /// Mean of the observed times, treating censored replicas as `max_steps`
    /// (a lower estimate when censoring occurs).
    pub fn mean(&self) -> f64 {
        let total: f64 = self
            .times
            .iter()
            .map(|t| match t {
                CouplingTime::Met(m) => *m as f64,
                CouplingTime::Censored => self.max_steps as f64,
            })
            .sum();
        total / self.times.len() as f64
    }

    /// Smallest `n` with `P(T > n) <= theta`, if reached before censoring.
    pub fn quantile_time(&self, theta: f64) -> Option<u64> {
        let mut met: Vec<u64> = self
            .times
            .iter()
            .filter_map(|t| match t {
                CouplingTime::Met(m) => Some(*m),
                CouplingTime::Censored => None,
            })
            .collect();
        met.sort_unstable();
        let total = self.times.len();
        let allowed = (theta * total as f64).floor() as usize;
        let need = total.saturating_sub(allowed);
        if need == 0 {
            return Some(0);
        }
        met.get(need - 1).copied()
    }
}

fn coupling_replicas<F>(replicas: usize, max_steps: u64, seed: u64, run: F) -> CouplingSample
where
    F: Fn(&mut BarRng) -> CouplingTime + Sync,
{
    let times = (0..replicas as u64)
        .into_par_iter()
        .map(|r| run(&mut stream_rng(seed, r)))
        .collect();
    CouplingSample { times, max_steps }
}

/// Samples `T = min{n >= 0 : X^n = Y^n}` for the grand coupling, one
/// independent stream per replica.
pub fn coupling_time(
    model: &BarModel,
    x0: &StateVector,
    y0: &StateVector,
    max_steps: u64,
    seed: u64,
    replicas: usize,
) -> Result<CouplingSample, SimulateError> {
    check_state(model, x0.bits())?;
    check_state(model, y0.bits())?;
    let p = model.p();
    Ok(coupling_replicas(replicas, max_steps, seed, |rng| {
        let mut x = x0.bits().to_vec();
        let mut y = y0.bits().to_vec();
        let mut xn = vec![false; p];
        let mut yn = vec![false; p];
        for step in 0..=max_steps {
            if x == y {
                return CouplingTime::Met(step);
            }
            if step == max_steps {
                break;
            }
            coupled_step_into(model, &x, &y, &mut xn, &mut yn, rng);
            std::mem::swap(&mut x, &mut xn);
            std::mem::swap(&mut y, &mut yn);
        }
        CouplingTime::Censored
    }))
}

/// Heuristic lower estimate of the worst-case mean coupling time: the max
/// of the mean over the all-zeros/all-ones pair and `random_pairs` uniform
/// random pairs.
pub fn worst_case_coupling_estimate(
    model: &BarModel,
    max_steps: u64,
    seed: u64,
    replicas: usize,
    random_pairs: usize,
) -> Result<f64, SimulateError> {
    let p = model.p();
    let mut pairs = vec![(StateVector::zeros(p), StateVector::ones(p))];
    let mut rng = stream_rng(seed, u64::MAX);
    for _ in 0..random_pairs {
        pairs.push((StateVector::random(p, &mut rng), StateVector::random(p, &mut rng)));
    }
    let mut worst = 0.0f64;
    for (k, (x, y)) in pairs.iter().enumerate() {
        let sample = coupling_time(model, x, y, max_steps, crate::rng::derive_seed(seed, &[k as u64]), replicas)?;
        worst = worst.max(sample.mean());
    }
    Ok(worst)
}

fn check_lazy(lazy_prob: f64) -> Result<(), SimulateError> {
    if (0.0..1.0).contains(&lazy_prob) {
        Ok(())
    } else {
        Err(SimulateError::LazyProbability(lazy_prob))
    }
}

/// Single-site update with explicit draws: stay if `stay_u < lazy_prob`,
/// otherwise refresh `node` using noise bit `w` and uniform `u`.
pub fn rw_step_with(model: &BarModel, x: &[bool], lazy_prob: f64, stay_u: f64, node: usize, w: bool, u: f64, out: &mut [bool]) {
    out.copy_from_slice(x);
    if stay_u < lazy_prob {
        return;
    }
    out[node] = u <= model.bernoulli_parameter(node, x, w);
}

fn rw_draws<R: Rng>(model: &BarModel, lazy_prob: f64, rng: &mut R) -> (f64, usize, bool, f64) {
    let stay_u = if lazy_prob > 0.0 { rng.random::<f64>() } else { 1.0 };
    let node = rng.random_range(0..model.p());
    let w = rng.random::<f64>() < model.rho_w();
    let u = rng.random::<f64>();
    (stay_u, node, w, u)
}

pub fn rw_step_into<R: Rng>(model: &BarModel, x: &[bool], lazy_prob: f64, out: &mut [bool], rng: &mut R) {
    let (stay_u, node, w, u) = rw_draws(model, lazy_prob, rng);
    rw_step_with(model, x, lazy_prob, stay_u, node, w, u, out);
}

pub fn rw_step<R: Rng>(model: &BarModel, x: &StateVector, lazy_prob: f64, rng: &mut R) -> Result<StateVector, SimulateError> {
    check_lazy(lazy_prob)?;
    check_state(model, x.bits())?;
    let mut out = vec![false; model.p()];
    rw_step_into(model, x.bits(), lazy_prob, &mut out, rng);
    Ok(StateVector(out))
}

/// Both walks stay or move together, pick the same node and share `w`, `u`.
pub fn coupled_rw_step_into<R: Rng>(
    model: &BarModel,
    x: &[bool],
    y: &[bool],
    lazy_prob: f64,
    x_out: &mut [bool],
    y_out: &mut [bool],
    rng: &mut R,
) {
    let (stay_u, node, w, u) = rw_draws(model, lazy_prob, rng);
    rw_step_with(model, x, lazy_prob, stay_u, node, w, u, x_out);
    rw_step_with(model, y, lazy_prob, stay_u, node, w, u, y_out);
}

/// Simulates the (lazy) hypercube walk from `x0`.
pub fn sample_rw_trajectory(model: &BarModel, n: usize, x0: &StateVector, lazy_prob: f64, seed: u64) -> Result<Trajectory, SimulateError> {
    check_lazy(lazy_prob)?;
    check_state(model, x0.bits())?;
    if n == 0 {
        return Err(SimulateError::EmptyTrajectory);
    }
    let kind = if lazy_prob > 0.0 {
        TrajectoryKind::LazyRw
    } else {
        TrajectoryKind::Rw
    };
    let mut rng = stream_rng(seed, 0);
    let p = model.p();
    let mut traj = Trajectory::with_capacity(p, n, seed, model.model_id(), kind);
    traj.bits.extend_from_slice(x0.bits());
    let mut x = x0.bits().to_vec();
    let mut next = vec![false; p];
    for _ in 1..n {
        rw_step_into(model, &x, lazy_prob, &mut next, &mut rng);
        traj.bits.extend_from_slice(&next);
        std::mem::swap(&mut x, &mut next);
    }
    Ok(traj)
}

/// Coupling-time sample for the coupled hypercube walks.
pub fn rw_coupling_time(
    model: &BarModel,
    x0: &StateVector,
    y0: &StateVector,
    lazy_prob: f64,
    max_steps: u64,
    seed: u64,
    replicas: usize,
) -> Result<CouplingSample, SimulateError> {
    check_lazy(lazy_prob)?;
    check_state(model, x0.bits())?;
    check_state(model, y0.bits())?;
    let p = model.p();
    Ok(coupling_replicas(replicas, max_steps, seed, |rng| {
        let mut x = x0.bits().to_vec();
        let mut y = y0.bits().to_vec();
        let mut xn = vec![false; p];
        let mut yn = vec![false; p];
        for step in 0..=max_steps {
            if x == y {
                return CouplingTime::Met(step);
            }
            if step == max_steps {
                break;
            }
            coupled_rw_step_into(model, &x, &y, lazy_prob, &mut xn, &mut yn, rng);
            std::mem::swap(&mut x, &mut xn);
            std::mem::swap(&mut y, &mut yn);
        }
        CouplingTime::Censored
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelSpec, NodeRow, Sign, SignedParent};
    use proptest::prelude::*;

    fn self_loop() -> BarModel {
        BarModel::new(ModelSpec {
            rho_w: 0.5,
            a_min: 0.1,
            b_min: 0.1,
            rows: vec![NodeRow {
                b: 0.4,
                parents: vec![SignedParent::new(0, 0.6, Sign::Positive)],
            }],
        })
        .unwrap()
    }

    #[test]
    fn forced_draws_hit_the_certain_branches() {
        let m = self_loop();
        let mut out = [false];
        bar_step_with(&m, &[true], &[true], &[0.999_999], &mut out);
        assert!(out[0]);
        bar_step_with(&m, &[false], &[false], &[1e-12], &mut out);
        assert!(!out[0]);
    }

    #[test]
    fn single_state_trajectory() {
        let m = self_loop();
        let t = sample_trajectory(&m, 1, &Init::Explicit(StateVector::new(vec![true])), 3).unwrap();
        assert_eq!(t.n(), 1);
        assert_eq!(t.state(0), &[true]);
    }

    #[test]
    fn equal_starts_couple_at_zero() {
        let m = self_loop();
        let x = StateVector::new(vec![true]);
        let s = coupling_time(&m, &x, &x, 10, 1, 100).unwrap();
        assert!(s.times.iter().all(|t| *t == CouplingTime::Met(0)));
    }

    #[test]
    fn fully_lazy_walk_never_moves() {
        let m = self_loop();
        let mut out = [false];
        rw_step_with(&m, &[true], 1.0, 0.3, 0, false, 0.9, &mut out);
        assert!(out[0]);
    }

    #[test]
    fn csv_round_trip() {
        let m = self_loop();
        let t = sample_trajectory(&m, 50, &Init::BurnIn, 11).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = Trajectory::read_csv(&buf[..]).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn quantile_time_counts_censoring() {
        let s = CouplingSample {
            times: vec![CouplingTime::Met(1), CouplingTime::Met(3), CouplingTime::Met(2), CouplingTime::Censored],
            max_steps: 10,
        };
        assert_eq!(s.quantile_time(0.25), Some(3));
        assert_eq!(s.quantile_time(0.0), None);
        assert_eq!(s.tail(2), 0.5);
    }

    proptest! {
        #[test]
        fn walk_changes_at_most_one_bit(seed in any::<u64>(), lazy in 0.0f64..0.9) {
            let params = crate::model::GeneratorParams::uniform_degree(6, 2, 0.1, 0.1, 0.3, 0.5);
            let (m, _) = crate::model::random_model(&params, seed).unwrap();
            let t = sample_rw_trajectory(&m, 200, &StateVector::zeros(6), lazy, seed).unwrap();
            for k in 1..t.n() {
                let diff = t.state(k).iter().zip(t.state(k - 1)).filter(|(a, b)| a != b).count();
                prop_assert!(diff <= 1);
            }
        }

        #[test]
        fn coupled_chains_stay_together(seed in any::<u64>()) {
            let params = crate::model::GeneratorParams::uniform_degree(5, 2, 0.1, 0.1, 0.3, 0.5);
            let (m, _) = crate::model::random_model(&params, seed).unwrap();
            let mut rng = stream_rng(seed, 0);
            let mut x = StateVector::random(5, &mut rng);
            let mut y = x.clone();
            for _ in 0..200 {
                let (a, b) = coupled_step(&m, &x, &y, &mut rng);
                prop_assert_eq!(&a, &b);
                x = a;
                y = b;
            }
        }
    }
}
