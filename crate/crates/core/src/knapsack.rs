//! 0-1 knapsack oracle and threshold-equivalence utilities.
//!
//! Covering arm `i` costs its threshold `theta_i` and saves its mean loss
//! `mu_i`, so the optimal cover is the 0-1 knapsack with values `mu`,
//! weights `theta` and capacity `q`. Real inputs are solved by scaling to
//! integers; [`solve_bruteforce`] is the exhaustive reference.

use crate::error::{param, CsbError, Result};
use crate::problem::{CsbInstance, FEASIBILITY_SLACK};

const MAX_EXHAUSTIVE: usize = 20;
/// Slack used when snapping scaled reals to the integer grid.
const GRID_EPS: f64 = 1e-7;
const VALUE_TIE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct KnapsackSolution {
    /// 0-based chosen items, ascending.
    pub chosen: Vec<usize>,
    pub total_value: f64,
    pub total_weight: f64,
}

impl KnapsackSolution {
    fn from_chosen(chosen: Vec<usize>, values: &[f64], weights: &[f64]) -> Self {
        let total_value = chosen.iter().map(|&i| values[i]).sum();
        let total_weight = chosen.iter().map(|&i| weights[i]).sum();
        Self {
            chosen,
            total_value,
            total_weight,
        }
    }
}

fn check_lengths(values: &[f64], weights: &[f64]) -> Result<()> {
    if values.len() != weights.len() {
        return Err(param(
            "weights",
            format!("{} weights for {} values", weights.len(), values.len()),
        ));
    }
    Ok(())
}

/// Exhaustive search over all subsets.
///
/// Equal-value subsets are ranked by fewer items, then by the
/// lexicographically smallest index sequence.
pub fn solve_bruteforce(
    values: &[f64],
    weights: &[f64],
    capacity: f64,
) -> Result<KnapsackSolution> {
    check_lengths(values, weights)?;
    let n = values.len();
    if n > MAX_EXHAUSTIVE {
        return Err(CsbError::TooManyItems(n));
    }

    let mut best_mask = 0u32;
    let mut best_value = 0.0;
    for mask in 1u32..(1 << n) {
        let mut w = 0.0;
        let mut v = 0.0;
        for i in 0..n {
            if mask & (1 << i) != 0 {
                w += weights[i];
                v += values[i];
            }
        }
        if w > capacity + FEASIBILITY_SLACK {
            continue;
        }
        let better = if v > best_value + VALUE_TIE {
            true
        } else if v >= best_value - VALUE_TIE {
            subset_precedes(mask, best_mask)
        } else {
            false
        };
        if better {
            best_mask = mask;
            best_value = v;
        }
    }

    let chosen = (0..n).filter(|i| best_mask & (1 << i) != 0).collect();
    Ok(KnapsackSolution::from_chosen(chosen, values, weights))
}

/// Tie order: fewer items first, then lexicographically smaller index list.
fn subset_precedes(a: u32, b: u32) -> bool {
    match a.count_ones().cmp(&b.count_ones()) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        // with equal sizes the set holding the lowest differing index wins
        std::cmp::Ordering::Equal => {
            let diff = a ^ b;
            diff != 0 && a & (diff & diff.wrapping_neg()) != 0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct ScaledProblem {
    pub values: Vec<i64>,
    pub weights: Vec<usize>,
    pub capacity: usize,
}

/// Weights round up and capacity rounds down, so any set feasible on the
/// grid is feasible in real units.
pub(crate) fn scale_problem(
    values: &[f64],
    weights: &[f64],
    capacity: f64,
    scale: u64,
) -> Result<ScaledProblem> {
    check_lengths(values, weights)?;
    if scale == 0 {
        return Err(param("scale_s", "must be at least 1"));
    }
    let s = scale as f64;
    let raw_cap = (capacity * s + GRID_EPS).floor();
    if !raw_cap.is_finite() || raw_cap > u32::MAX as f64 {
        return Err(CsbError::CapacityOverflow(capacity * s));
    }
    let weights: Vec<usize> = weights
        .iter()
        .map(|w| (w * s - GRID_EPS).ceil().max(0.0) as usize)
        .collect();
    let total: usize = weights.iter().sum();
    Ok(ScaledProblem {
        values: values.iter().map(|v| (v * s).round() as i64).collect(),
        capacity: (raw_cap.max(0.0) as usize).min(total),
        weights,
    })
}

/// Integer 0-1 knapsack by dynamic programming over capacity.
///
/// Among equal values the smaller item count wins.
pub(crate) fn solve_integer(problem: &ScaledProblem) -> Vec<usize> {
    let n = problem.values.len();
    let cap = problem.capacity;
    // (value, -items) maximized lexicographically
    let mut best: Vec<(i64, i64)> = vec![(0, 0); cap + 1];
    let mut take = vec![false; n * (cap + 1)];

    for i in 0..n {
        let w = problem.weights[i];
        let v = problem.values[i];
        if w > cap {
            continue;
        }
        let row = &mut take[i * (cap + 1)..(i + 1) * (cap + 1)];
        for c in (w..=cap).rev() {
            let (pv, pn) = best[c - w];
            let cand = (pv + v, pn - 1);
            if cand > best[c] {
                best[c] = cand;
                row[c] = true;
            }
        }
    }

    let mut chosen = Vec::new();
    let mut c = cap;
    for i in (0..n).rev() {
        if take[i * (cap + 1) + c] {
            chosen.push(i);
            c -= problem.weights[i];
        }
    }
    chosen.reverse();
    chosen
}

/// Scaled dynamic-programming solve; `O(K * scale * capacity)` time.
///
/// Returned value and weight are in original (unscaled) units.
pub fn solve_scaled_dp(
    values: &[f64],
    weights: &[f64],
    capacity: f64,
    scale: u64,
) -> Result<KnapsackSolution> {
    let problem = scale_problem(values, weights, capacity, scale)?;
    let chosen = solve_integer(&problem);
    Ok(KnapsackSolution::from_chosen(chosen, values, weights))
}

/// One element of the common-threshold candidate set together with the
/// number of arms it lets the budget cover.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaCandidate {
    pub value: f64,
    pub arms: usize,
}

/// `{q/k, q/(k-1), ..., min(1, q)}` in ascending order.
pub fn theta_candidates(k: usize, q: f64) -> Result<Vec<ThetaCandidate>> {
    if k == 0 {
        return Err(param("k", "must be at least 1"));
    }
    if !(q > 0.0) || !q.is_finite() {
        return Err(param("q", format!("{q} must be positive")));
    }
    // smallest m with q / m <= 1
    let m_min = ((q - 1e-9).ceil() as usize).max(1);
    let mut out: Vec<ThetaCandidate> = (m_min..=k)
        .rev()
        .map(|m| ThetaCandidate {
            value: q / m as f64,
            arms: m,
        })
        .collect();
    let ends_at_one = out.last().is_some_and(|c| (c.value - 1.0).abs() < 1e-12);
    if q >= 1.0 && !ends_at_one {
        out.push(ThetaCandidate {
            value: 1.0,
            arms: ((q + 1e-9).floor() as usize).min(k),
        });
    }
    if let Some(last) = out.last_mut() {
        // land exactly on 1.0 when q is integral
        if (last.value - 1.0).abs() < 1e-12 {
            last.value = 1.0;
        }
    }
    Ok(out)
}

pub fn theta_candidate_set(k: usize, q: f64) -> Result<Vec<f64>> {
    Ok(theta_candidates(k, q)?
        .into_iter()
        .map(|c| c.value)
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceResult {
    /// Arms coverable at the common threshold.
    pub m_arms: usize,
    /// Allocation-equivalent member of the candidate set.
    pub theta_hat: f64,
    pub candidate_set: Vec<f64>,
}

/// The candidate-set threshold that yields the same optimal loss as
/// `theta_c`: `M = min(floor(q / theta_c), k)`, `theta_hat = q / M`.
pub fn allocation_equivalent_theta(theta_c: f64, q: f64, k: usize) -> Result<EquivalenceResult> {
    if !(theta_c > 0.0 && theta_c <= 1.0) {
        return Err(param("theta_c", format!("{theta_c} is outside (0, 1]")));
    }
    if q < theta_c {
        return Err(param(
            "q",
            format!("budget {q} is below the threshold {theta_c}; no arm can be covered"),
        ));
    }
    let candidates = theta_candidates(k, q)?;
    let m_arms = ((q / theta_c + 1e-9).floor() as usize).min(k);
    // q / M exceeds 1 only for fractional q; a full unit already covers the arm
    let theta_hat = candidates
        .iter()
        .find(|c| c.arms == m_arms)
        .map(|c| c.value)
        .unwrap_or(1.0);
    Ok(EquivalenceResult {
        m_arms,
        theta_hat,
        candidate_set: candidates.into_iter().map(|c| c.value).collect(),
    })
}

/// Residual budget left by the optimal cover, spread over the arms.
pub fn residual_gamma(instance: &CsbInstance) -> f64 {
    let opt = crate::problem::optimal_allocation(instance);
    let used: f64 = opt.covered.iter().map(|&i| instance.threshold(i)).sum();
    let r = (instance.budget() - used).max(0.0);
    // float noise from an exactly spent budget
    let r = if r < FEASIBILITY_SLACK { 0.0 } else { r };
    r / instance.k() as f64
}
