//! Counting statistics over the transitions of a trajectory.
//!
//! Every count is taken over the common window of `n - 1` transitions
//! `X^k -> X^{k+1}`, `k = 0..n-2`, so empirical conditionals are proper
//! probabilities.

use rayon::prelude::*;

use super::InferError;
use crate::simulate::Trajectory;

/// Marginal and lagged-pair counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmpiricalStats {
    p: usize,
    transitions: u64,
    /// `#{k : X_l^k = 1}`.
    on: Vec<u64>,
    /// `#{k : X_m^{k+1} = 1}`.
    next_on: Vec<u64>,
    /// `#{k : X_m^{k+1} = 1, X_l^k = 1}`, row-major by `m`.
    co_on: Vec<u64>,
}

/// Column bitsets of a trajectory over the transition window: bit `k` of
/// `current(i)` is `X_i^k` and bit `k` of `next(i)` is `X_i^{k+1}`.
struct PackedColumns {
    words: usize,
    current: Vec<u64>,
    next: Vec<u64>,
}

impl PackedColumns {
    fn new(traj: &Trajectory) -> Self {
        let p = traj.p();
        let n = traj.n();
        let t = n - 1;
        let full_words = n.div_ceil(64);
        let mut full = vec![0u64; p * full_words];
        for (k, state) in traj.states().enumerate() {
            let (word, shift) = (k / 64, k % 64);
            for (i, &bit) in state.iter().enumerate() {
                full[i * full_words + word] |= (bit as u64) << shift;
            }
        }
        let words = t.div_ceil(64);
        let tail_mask = if t.is_multiple_of(64) { u64::MAX } else { (1u64 << (t % 64)) - 1 };
        let mut current = vec![0u64; p * words];
        let mut next = vec![0u64; p * words];
        for i in 0..p {
            let col = &full[i * full_words..(i + 1) * full_words];
            let cur = &mut current[i * words..(i + 1) * words];
            let nxt = &mut next[i * words..(i + 1) * words];
            for w in 0..words {
                let hi = col.get(w + 1).copied().unwrap_or(0);
                cur[w] = col[w];
                nxt[w] = (col[w] >> 1) | (hi << 63);
            }
            cur[words - 1] &= tail_mask;
            nxt[words - 1] &= tail_mask;
        }
        Self { words, current, next }
    }

    fn current(&self, i: usize) -> &[u64] {
        &self.current[i * self.words..(i + 1) * self.words]
    }

    fn next(&self, i: usize) -> &[u64] {
        &self.next[i * self.words..(i + 1) * self.words]
    }

    /// Fills rows `m0..m0 + rows.len() / p` of the co-occurrence matrix,
    /// `out[m][l] = |next(m) & current(l)|`, tile by tile.
    fn co_occurrence_block(&self, m0: usize, p: usize, out: &mut [u64]) {
        #[cfg(target_arch = "x86_64")]
        {
            if std::arch::is_x86_feature_detected!("popcnt") {
                // SAFETY: the CPU supports `popcnt`, checked just above.
                unsafe { self.co_occurrence_block_popcnt(m0, p, out) };
                return;
            }
        }
        self.co_occurrence_block_portable(m0, p, out);
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "popcnt")]
    unsafe fn co_occurrence_block_popcnt(&self, m0: usize, p: usize, out: &mut [u64]) {
        self.co_occurrence_block_portable(m0, p, out);
    }

    #[inline(always)]
    fn co_occurrence_block_portable(&self, m0: usize, p: usize, out: &mut [u64]) {
        let rows = out.len() / p;
        for l0 in (0..p).step_by(TILE_COLUMNS) {
            let l1 = (l0 + TILE_COLUMNS).min(p);
            for r in 0..rows {
                let nm = self.next(m0 + r);
                let row = &mut out[r * p..(r + 1) * p];
                for l in l0..l1 {
                    row[l] = popcount_and(nm, self.current(l));
                }
            }
        }
    }
}

/// Rows and columns per tile of the co-occurrence matrix.
const TILE_ROWS: usize = 16;
const TILE_COLUMNS: usize = 32;

fn popcount(words: &[u64]) -> u64 {
    words.iter().map(|w| w.count_ones() as u64).sum()
}

#[inline(always)]
fn popcount_and(a: &[u64], b: &[u64]) -> u64 {
    a.iter().zip(b).map(|(x, y)| (x & y).count_ones() as u64).sum()
}

impl EmpiricalStats {
    /// One pass over the trajectory. The `p^2` pair counts are bitset
    /// intersections, computed row-parallel.
    pub fn accumulate(traj: &Trajectory) -> Result<Self, InferError> {
        let n = traj.n();
        if n < 2 {
            return Err(InferError::TooShort { n });
        }
        let p = traj.p();
        let cols = PackedColumns::new(traj);
        let on: Vec<u64> = (0..p).map(|l| popcount(cols.current(l))).collect();
        let next_on: Vec<u64> = (0..p).map(|m| popcount(cols.next(m))).collect();
        let mut co_on = vec![0u64; p * p];
        co_on
            .par_chunks_mut(p * TILE_ROWS)
            .enumerate()
            .for_each(|(block, out)| cols.co_occurrence_block(block * TILE_ROWS, p, out));
        Ok(Self {
            p,
            transitions: (n - 1) as u64,
            on,
            next_on,
            co_on,
        })
    }

    /// Adds the counts of another segment. Splitting a trajectory into
    /// `0..=k` and `k..n` (sharing state `k`) and merging gives the counts
    /// of the whole.
    pub fn merge(&mut self, other: &EmpiricalStats) -> Result<(), InferError> {
        if other.p != self.p {
            return Err(InferError::DimensionMismatch {
                expected: self.p,
                found: other.p,
            });
        }
        self.transitions += other.transitions;
        for (a, b) in self.on.iter_mut().zip(&other.on) {
            *a += b;
        }
        for (a, b) in self.next_on.iter_mut().zip(&other.next_on) {
            *a += b;
        }
        for (a, b) in self.co_on.iter_mut().zip(&other.co_on) {
            *a += b;
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of transitions in the window (`n - 1`).
    pub fn transitions(&self) -> u64 {
        self.transitions
    }

    /// `#{k : X_l^k = bit}`.
    pub fn marginal_count(&self, l: usize, bit: bool) -> u64 {
        if bit {
            self.on[l]
        } else {
            self.transitions - self.on[l]
        }
    }

    /// `#{k : X_m^{k+1} = 1, X_l^k = bit}`.
    pub fn pair_count(&self, m: usize, l: usize, bit: bool) -> u64 {
        let both = self.co_on[m * self.p + l];
        if bit {
            both
        } else {
            self.next_on[m] - both
        }
    }

    pub fn next_count(&self, m: usize) -> u64 {
        self.next_on[m]
    }

    /// `P_hat(X_l = 1)` over the window.
    pub fn marginal(&self, l: usize) -> f64 {
        self.on[l] as f64 / self.transitions as f64
    }

    /// `P_hat(X_m^{+1} = 1 | X_l = bit)`, or `None` for an empty cell.
    pub fn conditional(&self, m: usize, l: usize, bit: bool) -> Option<f64> {
        let denom = self.marginal_count(l, bit);
        (denom > 0).then(|| self.pair_count(m, l, bit) as f64 / denom as f64)
    }

    /// Empirical conditional influence `nu_hat_{m|l}`.
    pub fn nu_hat(&self, m: usize, l: usize) -> Result<f64, InferError> {
        match (self.conditional(m, l, true), self.conditional(m, l, false)) {
            (Some(a), Some(b)) => Ok(a - b),
            _ => Err(InferError::DegenerateCell { m, l }),
        }
    }

    /// `|nu_hat_{m|l}|` for every `l`, with empty cells scored as zero.
    pub fn abs_nu_row(&self, m: usize) -> Vec<f64> {
        let row = &self.co_on[m * self.p..(m + 1) * self.p];
        let next = self.next_on[m];
        row.iter()
            .zip(&self.on)
            .map(|(&both, &on)| {
                let off = self.transitions - on;
                if on == 0 || off == 0 {
                    0.0
                } else {
                    (both as f64 / on as f64 - (next - both) as f64 / off as f64).abs()
                }
            })
            .collect()
    }

    /// All `nu_hat_{m|l}`, row-major by `m`; `None` marks empty cells.
    pub fn nu_hat_matrix(&self) -> Vec<Option<f64>> {
        let p = self.p;
        (0..p * p).map(|k| self.nu_hat(k / p, k % p).ok()).collect()
    }
}

/// Conditional counts of one node's next state given the configuration of
/// its candidate parents. Configuration bit `k` is the state of the `k`-th
/// candidate (candidates sorted ascending).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetStats {
    pub node: usize,
    pub candidates: Vec<usize>,
    /// `#{k : X_S^k = x}` per configuration.
    pub counts: Vec<u64>,
    /// `#{k : X_S^k = x, X_node^{k+1} = 1}` per configuration.
    pub ones: Vec<u64>,
}

/// Largest candidate set for which the `2^d` table is built.
pub const MAX_SUBSET_SIZE: usize = 24;

impl SubsetStats {
    pub fn transitions(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `P_hat(X_node^{+1} = 1 | X_S = config)`, or `None` when unobserved.
    pub fn conditional(&self, config: usize) -> Option<f64> {
        let c = self.counts[config];
        (c > 0).then(|| self.ones[config] as f64 / c as f64)
    }

    pub fn conditionals(&self) -> Vec<Option<f64>> {
        (0..self.counts.len()).map(|c| self.conditional(c)).collect()
    }
}

/// Builds a [`SubsetStats`] for every node from its candidate set.
pub fn accumulate_subsets(traj: &Trajectory, candidate_sets: &[Vec<usize>]) -> Result<Vec<SubsetStats>, InferError> {
    let n = traj.n();
    if n < 2 {
        return Err(InferError::TooShort { n });
    }
    let p = traj.p();
    if candidate_sets.len() != p {
        return Err(InferError::DimensionMismatch {
            expected: p,
            found: candidate_sets.len(),
        });
    }
    for set in candidate_sets {
        if set.len() > MAX_SUBSET_SIZE {
            return Err(InferError::SubsetTooLarge(set.len()));
        }
        if let Some(&bad) = set.iter().find(|&&j| j >= p) {
            return Err(InferError::DimensionMismatch { expected: p, found: bad + 1 });
        }
    }
    Ok(candidate_sets
        .par_iter()
        .enumerate()
        .map(|(node, set)| {
            let mut candidates = set.clone();
            candidates.sort_unstable();
            candidates.dedup();
            let size = 1usize << candidates.len();
            let mut counts = vec![0u64; size];
            let mut ones = vec![0u64; size];
            for k in 0..n - 1 {
                let state = traj.state(k);
                let config = candidates
                    .iter()
                    .enumerate()
                    .fold(0usize, |acc, (bit, &j)| acc | (state[j] as usize) << bit);
                counts[config] += 1;
                if traj.state(k + 1)[node] {
                    ones[config] += 1;
                }
            }
            SubsetStats {
                node,
                candidates,
                counts,
                ones,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::TrajectoryKind;
    use proptest::prelude::*;

    fn traj(states: &[&[u8]]) -> Trajectory {
        let states: Vec<Vec<bool>> = states.iter().map(|s| s.iter().map(|&b| b == 1).collect()).collect();
        Trajectory::from_states(&states, 0, "t", TrajectoryKind::Bar).unwrap()
    }

    #[test]
    fn four_state_example() {
        let t = traj(&[&[0, 0], &[1, 1], &[0, 1], &[1, 0]]);
        let s = EmpiricalStats::accumulate(&t).unwrap();
        assert_eq!(s.conditional(0, 1, true), Some(0.5));
        assert_eq!(s.conditional(0, 1, false), Some(1.0));
        assert!((s.nu_hat(0, 1).unwrap() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn constant_trajectory() {
        let row: &[u8] = &[1, 0];
        let t = traj(&[row; 6]);
        let s = EmpiricalStats::accumulate(&t).unwrap();
        assert_eq!(s.marginal_count(0, true), 5);
        assert_eq!(s.marginal_count(1, false), 5);
        assert!(matches!(s.nu_hat(0, 1), Err(InferError::DegenerateCell { m: 0, l: 1 })));
    }

    #[test]
    fn too_short() {
        let t = traj(&[&[1]]);
        assert!(matches!(EmpiricalStats::accumulate(&t), Err(InferError::TooShort { n: 1 })));
    }

    fn random_traj(p: usize, n: usize, seed: u64) -> Trajectory {
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(seed, 0);
        let states: Vec<Vec<bool>> = (0..n).map(|_| (0..p).map(|_| rng.random_bool(0.4)).collect()).collect();
        Trajectory::from_states(&states, seed, "r", TrajectoryKind::Bar).unwrap()
    }

    proptest! {
        #[test]
        fn counts_match_naive(p in 1usize..6, n in 2usize..200, seed in any::<u64>()) {
            let t = random_traj(p, n, seed);
            let s = EmpiricalStats::accumulate(&t).unwrap();
            for m in 0..p {
                for l in 0..p {
                    for bit in [false, true] {
                        let naive = (0..n - 1).filter(|&k| t.state(k + 1)[m] && t.state(k)[l] == bit).count() as u64;
                        prop_assert_eq!(s.pair_count(m, l, bit), naive);
                        prop_assert!(s.pair_count(m, l, bit) <= s.marginal_count(l, bit));
                    }
                }
            }
        }

        #[test]
        fn merge_of_split_equals_whole(p in 1usize..5, n in 3usize..300, cut in 1usize..299, seed in any::<u64>()) {
            let cut = cut.min(n - 2);
            let t = random_traj(p, n, seed);
            let whole = EmpiricalStats::accumulate(&t).unwrap();
            let mut left = EmpiricalStats::accumulate(&t.slice(0..cut + 1)).unwrap();
            let right = EmpiricalStats::accumulate(&t.slice(cut..n)).unwrap();
            left.merge(&right).unwrap();
            prop_assert_eq!(left, whole);
        }

        #[test]
        fn subset_configurations_partition_the_window(p in 1usize..6, n in 2usize..200, seed in any::<u64>()) {
            let t = random_traj(p, n, seed);
            let sets: Vec<Vec<usize>> = (0..p).map(|m| (0..p).filter(|j| (j + m) % 2 == 0).collect()).collect();
            for s in accumulate_subsets(&t, &sets).unwrap() {
                prop_assert_eq!(s.transitions(), (n - 1) as u64);
                prop_assert!(s.ones.iter().zip(&s.counts).all(|(o, c)| o <= c));
            }
        }
    }
}
