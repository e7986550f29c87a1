#![allow(dead_code)]

use bar_core::model::{random_degrees, random_model, BarModel, GeneratorParams, GraphTruth, ModelSpec, NodeRow, Sign, SignedParent};

pub fn row(b: f64, parents: &[(usize, f64, Sign)]) -> NodeRow {
    NodeRow {
        b,
        parents: parents.iter().map(|&(j, a, s)| SignedParent::new(j, a, s)).collect(),
    }
}

pub fn model(rho_w: f64, rows: Vec<NodeRow>) -> BarModel {
    BarModel::new(ModelSpec {
        rho_w,
        a_min: 0.1,
        b_min: 0.1,
        rows,
    })
    .unwrap()
}

/// One node with a self-loop of weight 0.6, b = 0.4, rho_w = 0.5.
pub fn self_loop(sign: Sign) -> BarModel {
    model(0.5, vec![row(0.4, &[(0, 0.6, sign)])])
}

/// Random model with in-degrees in `1..=d_max` and mixed signs.
pub fn small_random(p: usize, d_max: usize, seed: u64) -> (BarModel, GraphTruth) {
    let params = GeneratorParams {
        p,
        degrees: random_degrees(p, d_max, seed ^ 0x5eed),
        a_min: 0.1,
        b_min: 0.1,
        b_max: 0.4,
        rho_w: 0.5,
        sign_prob: 0.5,
        weight_cap: None,
    };
    random_model(&params, seed).unwrap()
}

/// Like [`small_random`] with every edge positive and a given `rho_w`.
pub fn sign_free_random(p: usize, d_max: usize, rho_w: f64, seed: u64) -> (BarModel, GraphTruth) {
    let params = GeneratorParams {
        p,
        degrees: random_degrees(p, d_max, seed ^ 0x5eed),
        a_min: 0.1,
        b_min: 0.1,
        b_max: 0.4,
        rho_w,
        sign_prob: 1.0,
        weight_cap: None,
    };
    random_model(&params, seed).unwrap()
}

/// All `k`-subsets of `0..p` in lexicographic order.
pub fn subsets(p: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, p: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for j in start..p {
            cur.push(j);
            rec(j + 1, p, k, cur, out);
            cur.pop();
        }
    }
    rec(0, p, k, &mut cur, &mut out);
    out
}

/// Bits of `config` as a value vector of length `k`.
pub fn config_bits(config: usize, k: usize) -> Vec<bool> {
    (0..k).map(|i| config >> i & 1 == 1).collect()
}
