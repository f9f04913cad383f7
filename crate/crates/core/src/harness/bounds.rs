//! Asymptotic lower-bound envelope for the common-threshold problem.

use crate::error::{param, CsbError, Result};
use crate::knapsack::allocation_equivalent_theta;
use crate::problem::CsbInstance;

fn xlogx_ratio(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (x / y).ln()
    }
}

/// KL divergence between Bernoulli(p) and Bernoulli(q), with `0 ln 0 = 0`.
pub fn kl_bernoulli(p: f64, q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(param("p", format!("{p} is outside [0, 1]")));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(param("q", format!("{q} is outside [0, 1]")));
    }
    if p == q {
        return Ok(0.0);
    }
    if q == 0.0 || q == 1.0 {
        return Err(param("q", format!("d({p}, {q}) is infinite")));
    }
    Ok(xlogx_ratio(p, q) + xlogx_ratio(1.0 - p, 1.0 - q))
}

/// `sum over the M highest-loss arms of (mu_i - mu_(K-M)) ln t / d(mu_(K-M), mu_i)`
/// where `mu_(K-M)` is the largest loss among arms that should stay
/// uncovered. The vanishing correction factor is dropped.
pub fn lower_bound_envelope(instance: &CsbInstance, t: u64) -> Result<f64> {
    if !instance.theta().is_common() {
        return Err(param("theta", "envelope needs a common threshold"));
    }
    let k = instance.k();
    let m = allocation_equivalent_theta(instance.threshold(0), instance.budget(), k)?.m_arms;
    if m == k {
        return Ok(0.0);
    }
    let mut sorted = instance.mu().to_vec();
    sorted.sort_by(f64::total_cmp);
    let boundary = sorted[k - m - 1];
    if sorted[k - m] == boundary {
        return Err(CsbError::UndefinedBound(format!(
            "tie at the cover boundary (mu = {boundary})"
        )));
    }
    let log_t = (t as f64).ln();
    sorted[k - m..]
        .iter()
        .map(|&mu| Ok((mu - boundary) * log_t / kl_bernoulli(boundary, mu)?))
        .sum()
}
