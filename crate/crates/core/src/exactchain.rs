//! Exact analysis of small chains on the full state space `{0,1}^p`.
//!
//! States are indexed by the integer whose bit `i` is node `i`. The
//! transition matrix is held dense, so memory grows as `4^p`.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{BarModel, GraphTruth, Sign};
use crate::simulate::StateVector;

/// Largest `p` accepted at all.
pub const MAX_EXACT_P: usize = 20;

/// Memory budget for the dense transition matrix.
pub const MAX_DENSE_BYTES: usize = 4 << 30;

const STATIONARY_TOLERANCE: f64 = 1e-12;
const STATIONARY_MAX_ITERATIONS: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum ExactError {
    #[error("p = {p} is too large for the dense chain (limit {limit})")]
    TooLarge { p: usize, limit: usize },
    #[error("conditioning event has zero stationary probability")]
    DegenerateConditioning,
    #[error("node index {0} out of range")]
    NodeOutOfRange(usize),
    #[error("subset and values differ in length, or the subset repeats a node")]
    BadSubset,
    #[error("distance to stationarity did not reach {theta} within {max_steps} steps")]
    NotMixed { theta: f64, max_steps: usize },
    #[error("theta = {0} is outside (0, 1)")]
    BadTheta(f64),
    #[error("stationary linear system is singular")]
    SingularSystem,
    #[error("exact chain output: {0}")]
    Io(#[from] std::io::Error),
}

/// Largest `p` whose dense transition fits [`MAX_DENSE_BYTES`].
pub fn dense_limit() -> usize {
    let mut p = 0;
    while p < MAX_EXACT_P && (1usize << (2 * (p + 1))).saturating_mul(8) <= MAX_DENSE_BYTES {
        p += 1;
    }
    p
}

#[derive(Debug, Clone)]
pub struct ExactChain {
    p: usize,
    /// `q[x * p + i] = P(X_i^{+1} = 1 | X = x)`.
    q: Vec<f64>,
    /// Row-major `2^p x 2^p`.
    transition: Vec<f64>,
    stationary: Vec<f64>,
    stationary_residual: f64,
}

impl ExactChain {
    /// Builds the dense transition matrix and solves for the stationary law.
    pub fn build(model: &BarModel) -> Result<Self, ExactError> {
        let p = model.p();
        let limit = dense_limit();
        if p > limit {
            return Err(ExactError::TooLarge { p, limit });
        }
        let size = 1usize << p;
        let q: Vec<f64> = (0..size)
            .into_par_iter()
            .flat_map_iter(|x| {
                let state = StateVector::from_index(x, p);
                (0..p)
                    .map(move |i| model.next_one_probability(i, state.bits()))
                    .collect::<Vec<_>>()
            })
            .collect();
        let mut transition = vec![0.0; size * size];
        transition
            .par_chunks_mut(size)
            .enumerate()
            .for_each(|(x, row)| fill_product_row(&q[x * p..(x + 1) * p], row));
        let mut chain = Self {
            p,
            q,
            transition,
            stationary: Vec::new(),
            stationary_residual: f64::INFINITY,
        };
        chain.solve_stationary()?;
        Ok(chain)
    }

    fn solve_stationary(&mut self) -> Result<(), ExactError> {
        let size = self.size();
        let mut pi = vec![1.0 / size as f64; size];
        let mut residual = f64::INFINITY;
        for _ in 0..STATIONARY_MAX_ITERATIONS {
            let mut next = self.push_forward(&pi);
            let total: f64 = next.iter().sum();
            next.iter_mut().for_each(|v| *v /= total);
            residual = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
            pi = next;
            if residual < STATIONARY_TOLERANCE {
                break;
            }
        }
        if residual >= STATIONARY_TOLERANCE {
            pi = self.solve_stationary_direct()?;
        }
        self.stationary_residual = {
            let image = self.push_forward(&pi);
            image.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum()
        };
        self.stationary = pi;
        Ok(())
    }

    /// Solves `pi (P - I) = 0`, `sum pi = 1` by LU, replacing the last
    /// balance equation with the normalization.
    fn solve_stationary_direct(&self) -> Result<Vec<f64>, ExactError> {
        let size = self.size();
        let mut m = DMatrix::<f64>::zeros(size, size);
        for x in 0..size {
            for y in 0..size {
                m[(y, x)] = self.transition[x * size + y] - if x == y { 1.0 } else { 0.0 };
            }
        }
        for x in 0..size {
            m[(size - 1, x)] = 1.0;
        }
        let mut rhs = DVector::<f64>::zeros(size);
        rhs[size - 1] = 1.0;
        let sol = m.lu().solve(&rhs).ok_or(ExactError::SingularSystem)?;
        Ok(sol.iter().copied().collect())
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn size(&self) -> usize {
        1 << self.p
    }

    pub fn transition(&self) -> &[f64] {
        &self.transition
    }

    pub fn transition_entry(&self, from: usize, to: usize) -> f64 {
        self.transition[from * self.size() + to]
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    /// L1 norm of `pi P - pi` for the stored stationary vector.
    pub fn stationary_residual(&self) -> f64 {
        self.stationary_residual
    }

    /// `P(X_i^{+1} = 1 | X = x)` for state index `x`.
    pub fn next_one(&self, x: usize, i: usize) -> f64 {
        self.q[x * self.p + i]
    }

    /// Row vector times transition matrix.
    pub fn push_forward(&self, mu: &[f64]) -> Vec<f64> {
        let size = self.size();
        let chunk = (size / rayon::current_num_threads().max(1)).max(64);
        mu.par_chunks(chunk)
            .enumerate()
            .map(|(c, block)| {
                let mut acc = vec![0.0; size];
                for (k, &weight) in block.iter().enumerate() {
                    if weight == 0.0 {
                        continue;
                    }
                    let row = &self.transition[(c * chunk + k) * size..(c * chunk + k + 1) * size];
                    for (a, &t) in acc.iter_mut().zip(row) {
                        *a += weight * t;
                    }
                }
                acc
            })
            .reduce(
                || vec![0.0; size],
                |mut a, b| {
                    a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                    a
                },
            )
    }

    /// Draws a state from the stationary law.
    pub fn sample_stationary<R: Rng>(&self, rng: &mut R) -> StateVector {
        let target: f64 = rng.random();
        let mut acc = 0.0;
        for (x, &w) in self.stationary.iter().enumerate() {
            acc += w;
            if target < acc {
                return StateVector::from_index(x, self.p);
            }
        }
        StateVector::from_index(self.size() - 1, self.p)
    }

    /// `d(n)` for `n = 0..=n_max`: worst-case total variation distance to
    /// stationarity over all deterministic starts.
    pub fn tv_curve(&self, n_max: usize) -> Vec<f64> {
        let mut curve = Vec::with_capacity(n_max + 1);
        let mut walker = TvWalker::new(self);
        curve.push(walker.distance());
        for _ in 0..n_max {
            walker.step();
            curve.push(walker.distance());
        }
        curve
    }

    pub fn tv_to_stationarity(&self, n: usize) -> f64 {
        *self.tv_curve(n).last().expect("curve is non-empty")
    }

    /// `min{n : d(n) <= theta}`, searched up to `max_steps`.
    pub fn exact_mixing_time(&self, theta: f64, max_steps: usize) -> Result<usize, ExactError> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(ExactError::BadTheta(theta));
        }
        let mut walker = TvWalker::new(self);
        for n in 0..=max_steps {
            if walker.distance() <= theta {
                return Ok(n);
            }
            walker.step();
        }
        Err(ExactError::NotMixed { theta, max_steps })
    }

    fn check_node(&self, i: usize) -> Result<(), ExactError> {
        if i < self.p {
            Ok(())
        } else {
            Err(ExactError::NodeOutOfRange(i))
        }
    }

    fn subset_mask(&self, subset: &[usize], values: &[bool]) -> Result<(usize, usize), ExactError> {
        if subset.len() != values.len() {
            return Err(ExactError::BadSubset);
        }
        let mut mask = 0usize;
        let mut pattern = 0usize;
        for (&i, &v) in subset.iter().zip(values) {
            self.check_node(i)?;
            if mask >> i & 1 == 1 {
                return Err(ExactError::BadSubset);
            }
            mask |= 1 << i;
            pattern |= (v as usize) << i;
        }
        Ok((mask, pattern))
    }

    /// Stationary `P(X_S = v)`.
    pub fn joint(&self, subset: &[usize], values: &[bool]) -> Result<f64, ExactError> {
        let (mask, pattern) = self.subset_mask(subset, values)?;
        Ok(self
            .stationary
            .iter()
            .enumerate()
            .filter(|(x, _)| x & mask == pattern)
            .map(|(_, w)| w)
            .sum())
    }

    /// Stationary `P(X_S = v, X_i^{+1} = next)`.
    pub fn joint_with_next(&self, i: usize, subset: &[usize], values: &[bool], next: bool) -> Result<f64, ExactError> {
        self.check_node(i)?;
        let (mask, pattern) = self.subset_mask(subset, values)?;
        Ok(self
            .stationary
            .iter()
            .enumerate()
            .filter(|(x, _)| x & mask == pattern)
            .map(|(x, w)| {
                let q = self.next_one(x, i);
                w * if next { q } else { 1.0 - q }
            })
            .sum())
    }

    /// `P(X_i^{+1} = 1 | X_S = v)` under the stationary law.
    pub fn exact_conditional(&self, i: usize, subset: &[usize], values: &[bool]) -> Result<f64, ExactError> {
        let denom = self.joint(subset, values)?;
        if denom <= 0.0 {
            return Err(ExactError::DegenerateConditioning);
        }
        Ok(self.joint_with_next(i, subset, values, true)? / denom)
    }

    /// `P(X_j = 1 | X_l = v)` under the stationary law.
    pub fn bit_given(&self, j: usize, l: usize, v: bool) -> Result<f64, ExactError> {
        let denom = self.joint(&[l], &[v])?;
        if denom <= 0.0 {
            return Err(ExactError::DegenerateConditioning);
        }
        if j == l {
            return Ok(if v { 1.0 } else { 0.0 });
        }
        Ok(self.joint(&[j, l], &[true, v])? / denom)
    }

    /// Stationary marginals `P(X_i = 1)`.
    pub fn marginals(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.p];
        for (x, &w) in self.stationary.iter().enumerate() {
            for (i, o) in out.iter_mut().enumerate() {
                if x >> i & 1 == 1 {
                    *o += w;
                }
            }
        }
        out
    }

    /// Conditional influence `P(X_m^{+1}=1 | X_l=1) - P(X_m^{+1}=1 | X_l=0)`.
    pub fn exact_nu(&self, m: usize, l: usize) -> Result<f64, ExactError> {
        Ok(self.exact_conditional(m, &[l], &[true])? - self.exact_conditional(m, &[l], &[false])?)
    }

    /// All `nu_{m|l}` at once, row-major by `m`.
    pub fn nu_matrix(&self) -> Result<Vec<f64>, ExactError> {
        let p = self.p;
        let mut on = vec![0.0; p];
        let mut next_on = vec![0.0; p * p];
        let mut next_total = vec![0.0; p];
        for (x, &w) in self.stationary.iter().enumerate() {
            for l in 0..p {
                if x >> l & 1 == 1 {
                    on[l] += w;
                }
            }
            for m in 0..p {
                let mass = w * self.next_one(x, m);
                next_total[m] += mass;
                for l in 0..p {
                    if x >> l & 1 == 1 {
                        next_on[m * p + l] += mass;
                    }
                }
            }
        }
        let mut nu = vec![0.0; p * p];
        for m in 0..p {
            for l in 0..p {
                let p1 = on[l];
                let p0 = 1.0 - on[l];
                if p1 <= 0.0 || p0 <= 0.0 {
                    return Err(ExactError::DegenerateConditioning);
                }
                let with_one = next_on[m * p + l] / p1;
                let with_zero = (next_total[m] - next_on[m * p + l]) / p0;
                nu[m * p + l] = with_one - with_zero;
            }
        }
        Ok(nu)
    }

    /// Lagged pair `P(X_m^{+1} = a, X_l = b)` for all `m, l, a, b`, indexed
    /// `[((m * p + l) * 2 + a) * 2 + b]`.
    pub fn lagged_pairs(&self) -> Vec<f64> {
        let p = self.p;
        let mut out = vec![0.0; p * p * 4];
        for (x, &w) in self.stationary.iter().enumerate() {
            for m in 0..p {
                let q = self.next_one(x, m);
                for l in 0..p {
                    let b = x >> l & 1;
                    let base = (m * p + l) * 4;
                    out[base + 2 + b] += w * q;
                    out[base + b] += w * (1.0 - q);
                }
            }
        }
        out
    }

    pub fn write_stationary_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "state,probability")?;
        for (x, w) in self.stationary.iter().enumerate() {
            writeln!(out, "{},{w:e}", StateVector::from_index(x, self.p))?;
        }
        Ok(())
    }

    pub fn save_stationary_csv(&self, path: impl AsRef<Path>) -> Result<(), ExactError> {
        self.write_stationary_csv(std::io::BufWriter::new(std::fs::File::create(path)?))?;
        Ok(())
    }
}

pub fn write_tv_csv<W: Write>(curve: &[f64], mut out: W) -> std::io::Result<()> {
    writeln!(out, "n,d_n")?;
    for (n, d) in curve.iter().enumerate() {
        writeln!(out, "{n},{d:e}")?;
    }
    Ok(())
}

/// Fills `row[y] = prod_i q_i^{y_i} (1 - q_i)^{1 - y_i}` by doubling.
fn fill_product_row(q: &[f64], row: &mut [f64]) {
    row[0] = 1.0;
    for (i, &qi) in q.iter().enumerate() {
        let half = 1 << i;
        for k in 0..half {
            let v = row[k];
            row[k + half] = v * qi;
            row[k] = v * (1.0 - qi);
        }
    }
}

/// Evolves every point-mass start in lockstep.
struct TvWalker<'a> {
    chain: &'a ExactChain,
    rows: Vec<f64>,
}

impl<'a> TvWalker<'a> {
    fn new(chain: &'a ExactChain) -> Self {
        let size = chain.size();
        let mut rows = vec![0.0; size * size];
        for x in 0..size {
            rows[x * size + x] = 1.0;
        }
        Self { chain, rows }
    }

    fn step(&mut self) {
        let size = self.chain.size();
        let t = &self.chain.transition;
        let mut next = vec![0.0; size * size];
        next.par_chunks_mut(size).zip(self.rows.par_chunks(size)).for_each(|(out, row)| {
            for (k, &weight) in row.iter().enumerate() {
                if weight == 0.0 {
                    continue;
                }
                let trow = &t[k * size..(k + 1) * size];
                for (o, &v) in out.iter_mut().zip(trow) {
                    *o += weight * v;
                }
            }
        });
        self.rows = next;
    }

    fn distance(&self) -> f64 {
        let size = self.chain.size();
        let pi = &self.chain.stationary;
        self.rows
            .par_chunks(size)
            .map(|row| 0.5 * row.iter().zip(pi).map(|(a, b)| (a - b).abs()).sum::<f64>())
            .reduce(|| 0.0, f64::max)
    }
}

/// Stationary marginals from the linear fixed point
/// `p = A_hat p + A f_bar + rho_w b`, where `A_hat` negates inverting edges
/// and `(A f_bar)_i` sums the weights of node `i`'s inverting edges.
pub fn stationary_marginals(model: &BarModel) -> Result<Vec<f64>, ExactError> {
    let p = model.p();
    let a_hat = model.signed_weight_matrix();
    let mut lhs = DMatrix::<f64>::identity(p, p);
    for i in 0..p {
        for j in 0..p {
            lhs[(i, j)] -= a_hat[i * p + j];
        }
    }
    let rhs = DVector::from_iterator(
        p,
        model.rows().iter().map(|row| {
            let inverted: f64 = row.parents.iter().filter(|a| a.sign == Sign::Negative).map(|a| a.weight).sum();
            inverted + model.rho_w() * row.b
        }),
    );
    let sol = lhs.lu().solve(&rhs).ok_or(ExactError::SingularSystem)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(ExactError::SingularSystem);
    }
    Ok(sol.iter().copied().collect())
}

/// Gelfand estimate `||A_hat^k||_inf^{1/k}` of the spectral radius of the
/// signed weight matrix, with `k = 2^squarings`.
pub fn spectral_radius_estimate(model: &BarModel, squarings: u32) -> f64 {
    let p = model.p();
    let mut m = DMatrix::from_row_slice(p, p, &model.signed_weight_matrix());
    let mut k = 1.0;
    for _ in 0..squarings {
        m = &m * &m;
        k *= 2.0;
    }
    let norm = (0..p).map(|i| m.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    norm.powf(1.0 / k)
}

/// Per-node identifiability margins and sign-consistency flags.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginReport {
    pub chi: Vec<f64>,
    pub sign_consistent: Vec<bool>,
    pub identifiable: bool,
    /// `nu_{m|l}` row-major.
    pub nu: Vec<f64>,
}

impl MarginReport {
    pub fn min_chi(&self) -> f64 {
        self.chi.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Margin `chi_m = min_{l in S(m)} |nu| - max_{l not in S(m)} |nu|` and the
/// sign checks, from a full `nu` matrix.
pub fn margin_from_nu(nu: &[f64], truth: &GraphTruth) -> MarginReport {
    let p = truth.p();
    let mut chi = Vec::with_capacity(p);
    let mut sign_consistent = Vec::with_capacity(p);
    for m in 0..p {
        let row = &nu[m * p..(m + 1) * p];
        let parent_min = truth.parents[m].iter().map(|&l| row[l].abs()).fold(f64::INFINITY, f64::min);
        let other_max = (0..p).filter(|l| !truth.is_parent(m, *l)).map(|l| row[l].abs()).fold(0.0, f64::max);
        chi.push(parent_min - other_max);
        let signs_ok =
            truth.positive[m].iter().all(|&l| row[l] > 0.0) && truth.negative[m].iter().all(|&l| row[l] < 0.0);
        sign_consistent.push(signs_ok);
    }
    let identifiable = chi.iter().all(|&c| c > 0.0) && sign_consistent.iter().all(|&s| s);
    MarginReport {
        chi,
        sign_consistent,
        identifiable,
        nu: nu.to_vec(),
    }
}

pub fn identifiability_margin(chain: &ExactChain, truth: &GraphTruth) -> Result<MarginReport, ExactError> {
    Ok(margin_from_nu(&chain.nu_matrix()?, truth))
}
