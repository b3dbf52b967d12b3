//! Wilcoxon signed-rank test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::EvalError;

/// Largest number of non-zero differences handled by the exact branch.
pub const EXACT_MAX_N: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    TwoSided,
    /// `a` tends to exceed `b`.
    Greater,
    /// `a` tends to fall below `b`.
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Non-zero differences kept.
    pub n: usize,
    pub zeros_dropped: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    /// `min(W+, W−)`; 0 when every difference is zero.
    pub w: f64,
    pub p: f64,
    pub method: Method,
    pub alternative: Alternative,
    /// Set when every difference was zero; `p` is then 1.
    pub all_zero: bool,
}

/// Ranks of `|d|` over the non-zero differences, ties sharing their average
/// rank, paired with the sign of each difference.
pub fn signed_ranks(d: &[f64]) -> Vec<(f64, bool)> {
    let mut nz: Vec<f64> = d.iter().copied().filter(|x| *x != 0.0).collect();
    nz.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let mut out = Vec::with_capacity(nz.len());
    let mut i = 0;
    while i < nz.len() {
        let mut j = i;
        while j + 1 < nz.len() && nz[j + 1].abs() == nz[i].abs() {
            j += 1;
        }
        // positions i..=j share ranks i+1..=j+1
        let rank = (i + j + 2) as f64 / 2.0;
        for x in &nz[i..=j] {
            out.push((rank, *x > 0.0));
        }
        i = j + 1;
    }
    out
}

/// `P(T ≤ w)` for the signed-rank statistic under the null, by dynamic
/// programming over doubled ranks (average ranks are multiples of ½).
fn exact_cdf(ranks: &[f64], w: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0.0f64; total + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let limit = (2.0 * w).round() as usize;
    let below: f64 = counts.iter().take(limit.min(total) + 1).sum();
    below / 2f64.powi(ranks.len() as i32)
}

pub fn exact_p(ranks: &[f64], w_plus: f64, alt: Alternative) -> f64 {
    let sum: f64 = ranks.iter().sum();
    let w_minus = sum - w_plus;
    let p = match alt {
        Alternative::TwoSided => 2.0 * exact_cdf(ranks, w_plus.min(w_minus)),
        // P(T ≥ W+) = P(T ≤ W−) by symmetry of the null distribution
        Alternative::Greater => exact_cdf(ranks, w_minus),
        Alternative::Less => exact_cdf(ranks, w_plus),
    };
    p.min(1.0)
}

/// Normal approximation to `P(T ≤ w)` with continuity correction and an
/// Edgeworth term for the (negative) excess kurtosis of the signed-rank
/// statistic. Moments come from the actual ranks, which accounts for ties.
fn approx_cdf(ranks: &[f64], w: f64) -> f64 {
    let mean: f64 = ranks.iter().sum::<f64>() / 2.0;
    // W+ is a sum of independent r·B with B ~ Bernoulli(½)
    let var: f64 = ranks.iter().map(|r| r * r).sum::<f64>() / 4.0;
    let kappa4: f64 = -ranks.iter().map(|r| r.powi(4)).sum::<f64>() / 8.0;
    let z = (w + 0.5 - mean) / var.sqrt();
    let excess = kappa4 / (var * var);
    let phi = Normal::standard();
    let density = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    (phi.cdf(z) - density * excess / 24.0 * (z * z * z - 3.0 * z)).clamp(0.0, 1.0)
}

pub fn normal_p(ranks: &[f64], w_plus: f64, alt: Alternative) -> f64 {
    let sum: f64 = ranks.iter().sum();
    let w_minus = sum - w_plus;
    if ranks.iter().all(|r| *r == 0.0) {
        return 1.0;
    }
    let p = match alt {
        Alternative::TwoSided => 2.0 * approx_cdf(ranks, w_plus.min(w_minus)),
        Alternative::Greater => approx_cdf(ranks, w_minus),
        Alternative::Less => approx_cdf(ranks, w_plus),
    };
    p.min(1.0)
}

/// Paired test on `a − b`: exact below [`EXACT_MAX_N`] non-zero
/// differences, normal approximation above.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64], alt: Alternative) -> Result<WilcoxonResult, EvalError> {
    wilcoxon_with(a, b, alt, None)
}

/// As [`wilcoxon_signed_rank`] with the method optionally forced.
pub fn wilcoxon_with(
    a: &[f64],
    b: &[f64],
    alt: Alternative,
    method: Option<Method>,
) -> Result<WilcoxonResult, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::Invalid(format!("paired samples differ in length: {} vs {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(EvalError::Invalid("no paired samples".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(EvalError::Invalid("non-finite sample".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let signed = signed_ranks(&d);
    let n = signed.len();
    let zeros_dropped = d.len() - n;
    let method = method.unwrap_or(if n <= EXACT_MAX_N { Method::Exact } else { Method::NormalApprox });
    if n == 0 {
        return Ok(WilcoxonResult {
            n,
            zeros_dropped,
            w_plus: 0.0,
            w_minus: 0.0,
            w: 0.0,
            p: 1.0,
            method,
            alternative: alt,
            all_zero: true,
        });
    }
    let w_plus: f64 = signed.iter().filter(|(_, pos)| *pos).map(|(r, _)| r).sum();
    let w_minus: f64 = signed.iter().filter(|(_, pos)| !*pos).map(|(r, _)| r).sum();
    let ranks: Vec<f64> = signed.iter().map(|(r, _)| *r).collect();
    let p = match method {
        Method::Exact => exact_p(&ranks, w_plus, alt),
        Method::NormalApprox => normal_p(&ranks, w_plus, alt),
    };
    Ok(WilcoxonResult {
        n,
        zeros_dropped,
        w_plus,
        w_minus,
        w: w_plus.min(w_minus),
        p,
        method,
        alternative: alt,
        all_zero: false,
    })
}

/// Compares responses against a constant (such as the neutral 4 of a 7-point scale).
pub fn wilcoxon_vs_constant(a: &[f64], c: f64, alt: Alternative) -> Result<WilcoxonResult, EvalError> {
    wilcoxon_signed_rank(a, &vec![c; a.len()], alt)
}
