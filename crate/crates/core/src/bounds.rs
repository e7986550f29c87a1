//! Closed-form bounds: mixing times, stationary probability floors, sample
//! complexities, the Fano lower bound and the hypercube-walk analysis.
//!
//! All logarithms are natural. The sample-complexity formulas carry an
//! unknown absolute constant `C` from a concentration inequality; it is an
//! explicit argument and outputs are only meaningful up to it.

use serde::Serialize;
use thiserror::Error;

use crate::exactchain::{stationary_marginals, ExactError};
use crate::model::BarModel;

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("{name} = {value} is outside its admissible range")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("degree {d} is not in 1..={p}")]
    BadDegree { d: usize, p: usize },
    #[error("max column sum {max_col_sum} is not below 1; walk bounds are undefined")]
    NotColumnSubstochastic { max_col_sum: f64 },
    #[error("stationary marginals: {0}")]
    Exact(#[from] ExactError),
}

fn check_open_unit(name: &'static str, value: f64) -> Result<(), BoundsError> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(BoundsError::OutOfRange { name, value })
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<(), BoundsError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(BoundsError::OutOfRange { name, value })
    }
}

/// `ceil(x)` that ignores a few ulps of representation error above an
/// integer.
fn ceil_tolerant(x: f64) -> f64 {
    (x - 1e-9 * x.abs().max(1.0)).ceil()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MixingBound {
    pub primary: u64,
    pub loose: u64,
}

/// Coupling bound on `t_mix(theta)` for a chain with `p` nodes and max row
/// sum `r`: `ceil(log(theta (1 - r) / p) / log r)` and the looser
/// `ceil((log p - log(theta (1 - r))) / (1 - r))`.
pub fn mixing_bound_raw(p: usize, r: f64, theta: f64) -> MixingBound {
    let p = p as f64;
    let primary = ceil_tolerant((theta * (1.0 - r) / p).ln() / r.ln()).max(0.0);
    let loose = ceil_tolerant((p.ln() - (theta * (1.0 - r)).ln()) / (1.0 - r)).max(0.0);
    MixingBound {
        primary: primary as u64,
        loose: loose as u64,
    }
}

pub fn mixing_bound(model: &BarModel, theta: f64) -> Result<MixingBound, BoundsError> {
    check_open_unit("theta", theta)?;
    Ok(mixing_bound_raw(model.p(), model.max_row_sum(), theta))
}

/// Which expression supplied the marginal floor `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaSource {
    ClosedForm,
    SignFree,
    Refined,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub p: usize,
    pub d: usize,
    pub theta: f64,
    pub rho_w: f64,
    pub max_row_sum: f64,
    pub max_col_sum: f64,
    /// `min(rho_w (1 - r), 1 - max_i(rowsum_i + rho_w b_i))`.
    pub beta_closed_form: f64,
    /// `min(rho_w, 1 - rho_w)`, only for models without inverting edges.
    pub beta_sign_free: Option<f64>,
    /// `min_i p_i` and `1 - max_i p_i` from the linear-system marginals.
    pub beta_refined: Option<f64>,
    pub beta: f64,
    pub beta_source: BetaSource,
    pub beta_tilde: f64,
    pub beta_check: f64,
    pub beta_bar: f64,
    pub c_bar: f64,
    pub mixing_bound_primary: u64,
    pub mixing_bound_loose: u64,
}

/// Floors on stationary probabilities for a model with in-degree cap `d`.
///
/// With `refine` set, the marginals are also solved exactly from the
/// linear fixed point and the resulting floor is max'd in.
pub fn stationary_floors(model: &BarModel, d: usize, theta: f64, refine: bool) -> Result<BoundsReport, BoundsError> {
    check_open_unit("theta", theta)?;
    let p = model.p();
    if d < model.max_degree() || d > p.max(model.max_degree()) {
        return Err(BoundsError::BadDegree { d, p });
    }
    let rho = model.rho_w();
    let r = model.max_row_sum();
    let saturation = (0..p)
        .map(|i| model.row_sum(i) + rho * model.row(i).b)
        .fold(0.0, f64::max);
    let pair_floor = ((1.0 - r) * rho).min(1.0 - saturation);

    let beta_closed_form = (rho * (1.0 - r)).min(1.0 - saturation);
    let beta_sign_free = (!model.has_sign_inversions()).then(|| rho.min(1.0 - rho));
    let beta_refined = if refine {
        let marginals = stationary_marginals(model)?;
        let lo = marginals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = marginals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(lo.min(1.0 - hi))
    } else {
        None
    };

    let mut beta = beta_closed_form;
    let mut beta_source = BetaSource::ClosedForm;
    if let Some(b) = beta_sign_free {
        if b > beta {
            beta = b;
            beta_source = BetaSource::SignFree;
        }
    }
    if let Some(b) = beta_refined {
        if b > beta {
            beta = b;
            beta_source = BetaSource::Refined;
        }
    }

    let c_bar = 1.0 / pair_floor;
    let bound = mixing_bound_raw(p, r, theta);
    Ok(BoundsReport {
        p,
        d,
        theta,
        rho_w: rho,
        max_row_sum: r,
        max_col_sum: model.column_sums().into_iter().fold(0.0, f64::max),
        beta_closed_form,
        beta_sign_free,
        beta_refined,
        beta,
        beta_source,
        beta_tilde: beta * (1.0 - r) * rho,
        beta_check: beta * pair_floor,
        beta_bar: pair_floor.powi(d as i32) * (1.0 - r) * rho,
        c_bar,
        mixing_bound_primary: bound.primary,
        mixing_bound_loose: bound.loose,
    })
}

/// `ln C(n, k)` through log-gamma.
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    assert!(k <= n, "ln_binomial needs k <= n");
    if k == 0 || k == n {
        return 0.0;
    }
    libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0)
}

/// Samples sufficient for supergraph selection:
/// `1 + 1152 log(4 p^2 C / gamma) t_mix / (eps^2 beta_tilde^3)`, rounded up.
/// Returned as `f64` because realistic inputs overflow any integer type.
pub fn sample_complexity_selection(
    p: usize,
    gamma: f64,
    theta: f64,
    eps: f64,
    beta_tilde: f64,
    t_mix: f64,
    c: f64,
) -> Result<f64, BoundsError> {
    check_open_unit("gamma", gamma)?;
    check_open_unit("theta", theta)?;
    if theta > 0.125 {
        return Err(BoundsError::OutOfRange {
            name: "theta",
            value: theta,
        });
    }
    check_positive("eps", eps)?;
    check_positive("beta_tilde", beta_tilde)?;
    check_positive("t_mix", t_mix)?;
    check_positive("C", c)?;
    let p = p as f64;
    let log_term = (4.0 * p * p * c / gamma).ln();
    Ok((1.0 + 1152.0 * log_term * t_mix / (eps * eps * beta_tilde.powi(3))).ceil())
}

/// Samples sufficient for supergraph trimming:
/// `1 + 288 log(2^{d+1} C p C(p,d) / gamma) t_mix / (eps^2 beta_bar^3)`.
pub fn sample_complexity_trimming(
    p: usize,
    d: usize,
    gamma: f64,
    eps_tilde: f64,
    beta_bar: f64,
    t_mix: f64,
    c: f64,
) -> Result<f64, BoundsError> {
    if d == 0 || d > p {
        return Err(BoundsError::BadDegree { d, p });
    }
    check_open_unit("gamma", gamma)?;
    check_positive("eps_tilde", eps_tilde)?;
    check_positive("beta_bar", beta_bar)?;
    check_positive("t_mix", t_mix)?;
    check_positive("C", c)?;
    let log_term = (d as f64 + 1.0) * std::f64::consts::LN_2 + c.ln() + (p as f64).ln() + ln_binomial(p, d) - gamma.ln();
    Ok((1.0 + 288.0 * log_term * t_mix / (eps_tilde * eps_tilde * beta_bar.powi(3))).ceil())
}

/// Information-theoretic minimum sample count for estimators with error
/// probability at most `eps`: `ceil((1 - eps)/p sum_i log C(p, d_i))`.
pub fn fano_lower_bound(p: usize, degrees: &[usize], eps: f64) -> Result<u64, BoundsError> {
    check_open_unit("eps", eps)?;
    for &d in degrees {
        if d == 0 || d > p {
            return Err(BoundsError::BadDegree { d, p });
        }
    }
    let total: f64 = degrees.iter().map(|&d| ln_binomial(p, d)).sum();
    Ok(ceil_tolerant((1.0 - eps) / p as f64 * total).max(0.0) as u64)
}

/// Single-site walk analysis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RwAnalysis {
    pub theta: f64,
    pub lazy_prob: f64,
    pub column_sums: Vec<f64>,
    pub max_col_sum: f64,
    pub col_substochastic: bool,
    /// Expected Hamming distance after one coupled step from a pair that
    /// differs only at node `j`: `(colsum_j + p - 1) / p`.
    pub contraction: Vec<f64>,
    pub bound_rw: Option<u64>,
    pub bound_lazy: Option<u64>,
}

impl RwAnalysis {
    pub fn bounds(&self) -> Result<(u64, u64), BoundsError> {
        match (self.bound_rw, self.bound_lazy) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(BoundsError::NotColumnSubstochastic {
                max_col_sum: self.max_col_sum,
            }),
        }
    }
}

/// `ceil(p / (1 - maxcol) (log p + log(1/theta)))`, then the lazy variant
/// with an extra `1 / (1 - lazy_prob)`.
pub fn rw_bound_raw(p: usize, max_col_sum: f64, theta: f64, lazy_prob: f64) -> (u64, u64) {
    let base = p as f64 / (1.0 - max_col_sum) * ((p as f64).ln() + (1.0 / theta).ln());
    let rw = ceil_tolerant(base).max(0.0) as u64;
    let lazy = ceil_tolerant(base / (1.0 - lazy_prob)).max(0.0) as u64;
    (rw, lazy)
}

pub fn rw_analysis(model: &BarModel, theta: f64, lazy_prob: f64) -> Result<RwAnalysis, BoundsError> {
    check_open_unit("theta", theta)?;
    if !(0.0..1.0).contains(&lazy_prob) {
        return Err(BoundsError::OutOfRange {
            name: "lazy_prob",
            value: lazy_prob,
        });
    }
    let p = model.p();
    let column_sums = model.column_sums();
    let max_col_sum = column_sums.iter().copied().fold(0.0, f64::max);
    let contraction = column_sums.iter().map(|c| (c + p as f64 - 1.0) / p as f64).collect();
    let col_substochastic = max_col_sum < 1.0;
    let (bound_rw, bound_lazy) = if col_substochastic {
        let (a, b) = rw_bound_raw(p, max_col_sum, theta, lazy_prob);
        (Some(a), Some(b))
    } else {
        (None, None)
    };
    Ok(RwAnalysis {
        theta,
        lazy_prob,
        column_sums,
        max_col_sum,
        col_substochastic,
        contraction,
        bound_rw,
        bound_lazy,
    })
}

/// Weight ceiling `1 / (sum_i d_i / p + sqrt(c p log p))` under which
/// random supports give column-substochastic weights with high probability.
pub fn rw_weight_ceiling(degrees: &[usize], c: f64) -> Result<f64, BoundsError> {
    check_positive("c", c)?;
    let p = degrees.len() as f64;
    let mean: f64 = degrees.iter().sum::<usize>() as f64 / p;
    Ok(1.0 / (mean + (c * p * p.ln()).sqrt()))
}
