//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Exits 0 so that `cargo test` reports the outcome without failing the
//! build; set `BAR_ACCEPTANCE_STRICT=1` to exit 1 when any criterion fails.
//! `BAR_ACCEPTANCE_ONLY=5,6` runs a subset.

use std::time::{Duration, Instant};

use bar_core::bounds::{fano_lower_bound, mixing_bound, rw_analysis, rw_weight_ceiling, stationary_floors};
use bar_core::exactchain::{margin_from_nu, stationary_marginals, ExactChain};
use bar_core::harness::{random_andor_network, run_sweep, InitKind, ModelSource, ObserverKind, SweepConfig};
use bar_core::infer::{accumulate_subsets, supergraph_select, EmpiricalStats};
use bar_core::model::{random_degrees, random_model, BarModel, GeneratorParams, GraphTruth};
use bar_core::rng::stream_rng;
use bar_core::simulate::{
    coupled_step_into, coupling_time, rw_coupling_time, sample_stationary_trajectory, sample_trajectory, Init,
    StateVector,
};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed <= Duration::from_secs(limit_s)
}

fn small_model(p: usize, d_max: usize, sign_prob: f64, rho_w: f64, seed: u64) -> (BarModel, GraphTruth) {
    let params = GeneratorParams {
        p,
        degrees: random_degrees(p, d_max, seed.wrapping_mul(31).wrapping_add(7)),
        a_min: 0.1,
        b_min: 0.1,
        b_max: 0.4,
        rho_w,
        sign_prob,
        weight_cap: None,
    };
    random_model(&params, seed).expect("feasible generator parameters")
}

fn recovery_instance() -> GeneratorParams {
    GeneratorParams::uniform_degree(30, 3, 0.1, 0.1, 0.2, 0.5)
}

const RECOVERY_SEED: u64 = 106;

fn c1_mixing() -> Outcome {
    let start = Instant::now();
    let mut checks = 0;
    let mut violations = Vec::new();
    let mut worst_ratio: f64 = 0.0;
    for k in 0..50u64 {
        let p = 2 + (k % 7) as usize;
        let (m, _) = small_model(p, 3, 0.5, 0.5, 1000 + k);
        let chain = ExactChain::build(&m).unwrap();
        for theta in [0.25, 0.125, 0.0625] {
            let bound = mixing_bound(&m, theta).unwrap().primary;
            let exact = chain.exact_mixing_time(theta, 1_000_000).unwrap();
            checks += 1;
            worst_ratio = worst_ratio.max(exact as f64 / bound.max(1) as f64);
            if exact as u64 > bound {
                violations.push(format!("model {k} theta {theta}: {exact} > {bound}"));
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        violations.is_empty() && within(elapsed, 120),
        format!(
            "{} violations in {checks} checks, max exact/bound {worst_ratio:.3}, {:.1} s{}",
            violations.len(),
            elapsed.as_secs_f64(),
            violations.first().map(|v| format!(" ({v})")).unwrap_or_default()
        ),
    )
}

fn c2_marginals() -> Outcome {
    let start = Instant::now();
    let mut sign_free_err: f64 = 0.0;
    for k in 0..20u64 {
        let rho = 0.2 + 0.03 * k as f64;
        let (m, _) = small_model(2 + (k % 7) as usize, 3, 1.0, rho, 2000 + k);
        let chain = ExactChain::build(&m).unwrap();
        for v in chain.marginals() {
            sign_free_err = sign_free_err.max((v - rho).abs());
        }
    }
    let mut solve_err: f64 = 0.0;
    for k in 0..20u64 {
        let (m, _) = small_model(2 + (k % 7) as usize, 3, 0.5, 0.5, 2100 + k);
        let chain = ExactChain::build(&m).unwrap();
        let solved = stationary_marginals(&m).unwrap();
        for (a, b) in solved.iter().zip(chain.marginals()) {
            solve_err = solve_err.max((a - b).abs());
        }
    }
    let elapsed = start.elapsed();
    outcome(
        sign_free_err < 1e-9 && solve_err < 1e-9 && within(elapsed, 60),
        format!(
            "sign-free max |p_i - rho_w| {sign_free_err:.1e}, linear solve vs enumeration {solve_err:.1e}, {:.1} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn subsets(p: usize, k: usize) -> Vec<Vec<usize>> {
    (0usize..1 << p)
        .filter(|s| s.count_ones() as usize == k)
        .map(|s| (0..p).filter(|i| s >> i & 1 == 1).collect())
        .collect()
}

fn c3_floors() -> Outcome {
    let start = Instant::now();
    let mut violations = 0;
    let mut checks = 0;
    for k in 0..20u64 {
        let p = 2 + (k % 5) as usize;
        let (m, _) = small_model(p, 3, 0.5, 0.5, 3000 + k);
        let d = m.max_degree();
        let f = stationary_floors(&m, d, 0.125, true).unwrap();
        let chain = ExactChain::build(&m).unwrap();
        for v in chain.marginals() {
            checks += 2;
            violations += (v < f.beta - 1e-12) as usize + (1.0 - v < f.beta - 1e-12) as usize;
        }
        for v in chain.lagged_pairs() {
            checks += 1;
            violations += (v < f.beta_check - 1e-12) as usize;
        }
        for set in subsets(p, d) {
            for c in 0..1usize << d {
                let values: Vec<bool> = (0..d).map(|i| c >> i & 1 == 1).collect();
                checks += 1;
                violations += (chain.joint(&set, &values).unwrap() < f.beta_bar - 1e-12) as usize;
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        violations == 0 && within(elapsed, 120),
        format!("{violations} violations in {checks} checks, {:.1} s", elapsed.as_secs_f64()),
    )
}

fn c4_consistency() -> Outcome {
    let start = Instant::now();
    let (m, truth) = small_model(5, 2, 0.5, 0.5, 4000);
    let p = m.p();
    let chain = ExactChain::build(&m).unwrap();
    let traj = sample_stationary_trajectory(&m, &chain, 1_000_000, 4001).unwrap();
    let stats = EmpiricalStats::accumulate(&traj).unwrap();
    let nu = chain.nu_matrix().unwrap();
    let mut nu_err: f64 = 0.0;
    for mm in 0..p {
        for l in 0..p {
            nu_err = nu_err.max((stats.nu_hat(mm, l).unwrap() - nu[mm * p + l]).abs());
        }
    }
    // true parents plus the next non-parent
    let sets: Vec<Vec<usize>> = (0..p)
        .map(|i| {
            let mut s = truth.parents[i].clone();
            if let Some(extra) = (0..p).find(|j| !truth.is_parent(i, *j)) {
                s.push(extra);
            }
            s.sort_unstable();
            s
        })
        .collect();
    let tables = accumulate_subsets(&traj, &sets).unwrap();
    let mut cond_err: f64 = 0.0;
    for (i, table) in tables.iter().enumerate() {
        let k = table.candidates.len();
        for c in 0..1usize << k {
            let values: Vec<bool> = (0..k).map(|q| c >> q & 1 == 1).collect();
            let exact = chain.exact_conditional(i, &table.candidates, &values).unwrap();
            let err = table.conditional(c).map_or(f64::INFINITY, |est| (est - exact).abs());
            cond_err = cond_err.max(err);
        }
    }
    let elapsed = start.elapsed();
    outcome(
        nu_err < 0.01 && cond_err < 0.01 && within(elapsed, 60),
        format!(
            "p = {p}, n = 1e6: max |nu_hat - nu| {nu_err:.4}, max subset-conditional error {cond_err:.4}, {:.1} s",
            elapsed.as_secs_f64()
        ),
    )
}

/// Re-certifies that the recovery instance is margin-identifiable from a long
/// trajectory; the exact chain is out of reach at p = 30.
fn certify_recovery_instance() -> (bool, String) {
    let (m, truth) = random_model(&recovery_instance(), RECOVERY_SEED).unwrap();
    let traj = sample_trajectory(&m, 1_000_000, &Init::BurnIn, 77).unwrap();
    let stats = EmpiricalStats::accumulate(&traj).unwrap();
    let nu: Vec<f64> = stats.nu_hat_matrix().into_iter().map(|v| v.unwrap_or(0.0)).collect();
    let report = margin_from_nu(&nu, &truth);
    // nu_hat error is about 0.002 at this length
    let ok = report.identifiable && report.min_chi() > 0.01;
    (
        ok,
        format!(
            "instance {RECOVERY_SEED}: estimated margin {:.4}, sign-consistent {}",
            report.min_chi(),
            report.sign_consistent.iter().all(|&s| s)
        ),
    )
}

fn recovery_sweep(mode: ObserverKind, n: usize, trials: usize, seed: u64) -> SweepConfig {
    SweepConfig {
        source: ModelSource::Generator {
            params: recovery_instance(),
            model_seed: RECOVERY_SEED,
            per_trial: false,
        },
        n_grid: vec![n],
        trials,
        seed,
        mode,
        d: 3,
        tau: 0.025,
        init: InitKind::BurnIn,
        output: None,
        record_wall_time: false,
        boolean_burn_in: 100,
    }
}

fn c5_known_degrees(cert: &(bool, String)) -> Outcome {
    let start = Instant::now();
    let report = run_sweep(&recovery_sweep(ObserverKind::KnownDegrees, 2000, 100, 5)).unwrap();
    let rate = report.summary(2000).unwrap().exact_signed;
    let elapsed = start.elapsed();
    outcome(
        cert.0 && rate >= 0.8 && within(elapsed, 600),
        format!(
            "{}; P(exact signed) at n = 2000: {rate:.2} over 100 trials (need 0.80), {:.1} s",
            cert.1,
            elapsed.as_secs_f64()
        ),
    )
}

fn c6_full(cert: &(bool, String)) -> Outcome {
    let start = Instant::now();
    let report = run_sweep(&recovery_sweep(ObserverKind::Full, 14_000, 50, 6)).unwrap();
    let rate = report.summary(14_000).unwrap().exact_signed;
    let elapsed = start.elapsed();
    outcome(
        cert.0 && rate >= 0.7 && within(elapsed, 1200),
        format!(
            "{}; P(exact signed) at n = 14000, tau = 0.025: {rate:.2} over 50 trials (need 0.70), {:.1} s",
            cert.1,
            elapsed.as_secs_f64()
        ),
    )
}

fn c7_andor() -> Outcome {
    let start = Instant::now();
    let config = SweepConfig {
        source: ModelSource::RandomAndOr {
            p: 43,
            fan_in: 2,
            noise: 0.1,
            network_seed: 1,
            per_trial: false,
        },
        n_grid: vec![19_000],
        trials: 20,
        seed: 7,
        mode: ObserverKind::Full,
        d: 5,
        tau: 0.025,
        init: InitKind::BurnIn,
        output: None,
        record_wall_time: false,
        boolean_burn_in: 100,
    };
    let report = run_sweep(&config).unwrap();
    let good = report
        .rows
        .iter()
        .filter(|r| r.metrics.is_some_and(|m| m.edge_recall >= 0.95))
        .count();
    let recall = report.summary(19_000).unwrap().edge_recall;
    let elapsed = start.elapsed();
    let net = random_andor_network(43, 2, 0.1, 1).unwrap();
    outcome(
        good as f64 >= 0.8 * 20.0 && within(elapsed, 1200),
        format!(
            "network {}: {good}/20 trials with edge recall >= 0.95 (need 16), mean recall {recall:.3}, {:.1} s",
            net.network_id(),
            elapsed.as_secs_f64()
        ),
    )
}

fn c8_fano() -> Outcome {
    let got = fano_lower_bound(30, &[3; 30], 0.1).unwrap();
    let binom = (30.0 * 29.0 * 28.0 / 6.0f64).ln();
    let oracle = (0.9 * 30.0 * binom / 30.0).ceil() as u64;
    outcome(got == 8 && oracle == 8, format!("fano_lower_bound(30, d = 3, 0.1) = {got}, direct {oracle}"))
}

fn c9_coupling() -> Outcome {
    let start = Instant::now();
    let mut divergences = 0;
    let mut worst_tail: f64 = 0.0;
    for k in 0..20u64 {
        let p = 2 + (k % 7) as usize;
        let (m, _) = small_model(p, 3, 0.5, 0.5, 9000 + k);
        let mut rng = stream_rng(9000 + k, 0);
        let mut x: Vec<bool> = (0..p).map(|_| rng.random_bool(0.5)).collect();
        let mut y: Vec<bool> = x.iter().map(|b| !b).collect();
        let (mut xn, mut yn) = (vec![false; p], vec![false; p]);
        let mut guard = 0;
        while x != y && guard < 100_000 {
            coupled_step_into(&m, &x, &y, &mut xn, &mut yn, &mut rng);
            std::mem::swap(&mut x, &mut xn);
            std::mem::swap(&mut y, &mut yn);
            guard += 1;
        }
        if x != y {
            divergences += 1;
            continue;
        }
        for _ in 0..10_000 {
            coupled_step_into(&m, &x, &y, &mut xn, &mut yn, &mut rng);
            std::mem::swap(&mut x, &mut xn);
            std::mem::swap(&mut y, &mut yn);
            if x != y {
                divergences += 1;
                break;
            }
        }
        let bound = mixing_bound(&m, 0.125).unwrap().primary;
        let sample = coupling_time(&m, &StateVector::zeros(p), &StateVector::ones(p), bound + 1, 9100 + k, 10_000).unwrap();
        worst_tail = worst_tail.max(sample.tail(bound));
    }
    outcome(
        divergences == 0 && worst_tail <= 0.135,
        format!(
            "{divergences} divergences over 20 x 1e4 post-meeting steps, max P(T > bound(1/8)) {worst_tail:.4} (need <= 0.135), {:.1} s",
            start.elapsed().as_secs_f64()
        ),
    )
}

fn c10_walks() -> Outcome {
    let start = Instant::now();
    let mut models = 0;
    let mut rejected = 0;
    let mut violations = 0;
    let mut arithmetic_err: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    let mut seed = 10_000u64;
    while models < 20 {
        seed += 1;
        let p = 2 + (seed % 7) as usize;
        let degrees = random_degrees(p, 2, seed ^ 0xabc);
        let cap = rw_weight_ceiling(&degrees, 1.0).unwrap();
        let params = GeneratorParams {
            p,
            degrees,
            a_min: 0.05,
            b_min: 0.1,
            b_max: 1.0,
            rho_w: 0.5,
            sign_prob: 0.5,
            weight_cap: Some(cap),
        };
        let (m, _) = random_model(&params, seed).unwrap();
        let lazy = 0.5;
        let analysis = rw_analysis(&m, 0.125, lazy).unwrap();
        let Ok((bound_rw, bound_lazy)) = analysis.bounds() else {
            rejected += 1;
            continue;
        };
        models += 1;
        let weights = m.weight_matrix();
        for j in 0..p {
            let col: f64 = (0..p).map(|i| weights[i * p + j]).sum();
            arithmetic_err = arithmetic_err.max((analysis.contraction[j] - (col + p as f64 - 1.0) / p as f64).abs());
        }
        let (x0, y0) = (StateVector::zeros(p), StateVector::ones(p));
        for (phi, bound) in [(0.0, bound_rw), (lazy, bound_lazy)] {
            let sample = rw_coupling_time(&m, &x0, &y0, phi, 20 * bound, seed, 2000).unwrap();
            match sample.quantile_time(0.125) {
                Some(t) => {
                    worst_ratio = worst_ratio.max(t as f64 / bound as f64);
                    violations += (t > bound) as usize;
                }
                None => violations += 1,
            }
        }
    }
    outcome(
        violations == 0 && arithmetic_err < 1e-12,
        format!(
            "{violations} violations on 20 models ({rejected} draws not column-substochastic), \
             max empirical/bound {worst_ratio:.3}, contraction arithmetic error {arithmetic_err:.1e}, {:.1} s",
            start.elapsed().as_secs_f64()
        ),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn c11_scaling() -> Outcome {
    let n = 5000;
    let mut medians = Vec::new();
    for p in [100usize, 200, 400] {
        let (m, _) = random_model(&GeneratorParams::uniform_degree(p, 3, 0.1, 0.1, 0.2, 0.5), 11).unwrap();
        let traj = sample_trajectory(&m, n, &Init::BurnIn, 12).unwrap();
        let mut times = Vec::new();
        for run in 0..10 {
            let t = Instant::now();
            let stats = EmpiricalStats::accumulate(&traj).unwrap();
            let est = supergraph_select(&stats, 3).unwrap();
            std::hint::black_box(est);
            if run > 0 {
                times.push(t.elapsed().as_secs_f64() * 1e3);
            }
        }
        medians.push(median(times));
    }
    let r1 = medians[1] / medians[0];
    let r2 = medians[2] / medians[1];
    outcome(
        r1 <= 2.5 && r2 <= 2.5,
        format!(
            "median ms at p = 100/200/400: {:.2}/{:.2}/{:.2}; growth per doubling {r1:.2}x, {r2:.2}x (need <= 2.5x)",
            medians[0], medians[1], medians[2]
        ),
    )
}

type Criterion<'a> = (usize, &'static str, Box<dyn Fn() -> Outcome + 'a>);

fn main() {
    let only: Option<Vec<usize>> = std::env::var("BAR_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let wanted = |k: usize| only.as_ref().is_none_or(|o| o.contains(&k));
    let strict = std::env::var("BAR_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");

    let cert = if wanted(5) || wanted(6) {
        Some(certify_recovery_instance())
    } else {
        None
    };
    let criteria: Vec<Criterion> = vec![
        (1, "exact mixing time within the coupling bound", Box::new(c1_mixing)),
        (2, "stationary marginals: sign-free value and linear solve", Box::new(c2_marginals)),
        (3, "stationary floors hold exhaustively", Box::new(c3_floors)),
        (4, "estimator consistency at n = 1e6", Box::new(c4_consistency)),
        (5, "known-degrees recovery at n = 2000", Box::new(|| c5_known_degrees(cert.as_ref().unwrap()))),
        (6, "full observer recovery at n = 14000", Box::new(|| c6_full(cert.as_ref().unwrap()))),
        (7, "AND/OR network edge recall at n = 19000", Box::new(c7_andor)),
        (8, "Fano lower bound", Box::new(c8_fano)),
        (9, "coupling permanence and tail", Box::new(c9_coupling)),
        (10, "hypercube walk coupling bounds", Box::new(c10_walks)),
        (11, "selection-stage scaling in p", Box::new(c11_scaling)),
    ];
    let mut failed = Vec::new();
    let mut ran = 0;
    for (k, name, run) in &criteria {
        if !wanted(*k) {
            continue;
        }
        ran += 1;
        let o = run();
        println!("{} criterion {k:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.push(*k);
        }
    }
    println!("acceptance: {}/{ran} passed{}", ran - failed.len(), if failed.is_empty() {
        String::new()
    } else {
        format!(", failed {failed:?}")
    });
    if strict && !failed.is_empty() {
        std::process::exit(1);
    }
}
