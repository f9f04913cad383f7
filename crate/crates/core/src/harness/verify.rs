//! Self-checks behind `csb verify`: scaled DP against exhaustive search, and
//! both threshold searches against a loss-certain environment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::estimation::{CommonSearch, PerArmSearch};
use crate::knapsack::{allocation_equivalent_theta, solve_bruteforce, solve_scaled_dp};
use crate::problem::{environment_step, CsbInstance, Threshold, FEASIBILITY_SLACK};
use crate::rng::ReplicationRng;

pub const VERIFY_SCALE: u64 = 10_000;
const MAX_SEARCH_ROUNDS: usize = 1_000_000;

#[derive(Debug, Clone, Default, Serialize)]
pub struct CheckResult {
    pub cases: usize,
    pub passed: usize,
    pub failures: Vec<String>,
}

impl CheckResult {
    fn record(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.cases += 1;
        if ok {
            self.passed += 1;
        } else if self.failures.len() < 10 {
            self.failures.push(describe());
        }
    }

    pub fn all_passed(&self) -> bool {
        self.cases == self.passed
    }
}

fn unit_open_closed(rng: &mut ChaCha8Rng) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Random knapsacks with `k <= 12`, values and weights in (0, 1] and
/// capacity uniform in (0, sum of weights).
pub fn knapsack_equivalence(cases: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut res = CheckResult::default();
    for _ in 0..cases {
        let k = rng.random_range(1..=12);
        let values: Vec<f64> = (0..k).map(|_| unit_open_closed(&mut rng)).collect();
        let weights: Vec<f64> = (0..k).map(|_| unit_open_closed(&mut rng)).collect();
        let capacity = unit_open_closed(&mut rng) * weights.iter().sum::<f64>();
        let exact = solve_bruteforce(&values, &weights, capacity).expect("k <= 12");
        let dp =
            solve_scaled_dp(&values, &weights, capacity, VERIFY_SCALE).expect("small capacity");
        let tol = 2.0 * k as f64 / VERIFY_SCALE as f64;
        let ok = dp.total_weight <= capacity + FEASIBILITY_SLACK
            && dp.total_value >= exact.total_value - tol;
        res.record(ok, || {
            format!(
                "k={k} cap={capacity}: dp value {} weight {} vs exact {}",
                dp.total_value, dp.total_weight, exact.total_value
            )
        });
    }
    res
}

/// Common-threshold search with every arm certain to lose: the estimate
/// must be the smallest candidate at or above the true threshold.
pub fn noiseless_common(cases: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut res = CheckResult::default();
    for case in 0..cases {
        let k = rng.random_range(2..=20);
        let theta = rng.random_range(0.05..=1.0);
        let q = rng.random_range(theta..=k as f64);
        let inst = CsbInstance::new(vec![1.0; k], Threshold::Common(theta), q).expect("valid");
        let expected = allocation_equivalent_theta(theta, q, k)
            .expect("q >= theta")
            .theta_hat;
        let mut search = CommonSearch::new(k, q, 0.1, 0.1).expect("valid");
        let mut env = ReplicationRng::new(seed, case as u64);
        let mut rounds = 0;
        while !search.is_done() && rounds < MAX_SEARCH_ROUNDS {
            let fb =
                environment_step(&inst, &search.allocation(k), &mut env.env).expect("feasible");
            search.step(&fb).expect("not done");
            rounds += 1;
        }
        let got = search.estimate().map(|c| c.value);
        res.record(got == Some(expected), || {
            format!("k={k} q={q} theta={theta}: got {got:?}, expected {expected}")
        });
    }
    res
}

/// Per-arm search with every arm certain to lose: each estimate must land
/// in `[theta_i, theta_i + gamma]`.
pub fn noiseless_per_arm(cases: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut res = CheckResult::default();
    for case in 0..cases {
        let k = rng.random_range(1..=8);
        let theta: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..=1.0)).collect();
        // at least one unit so any single estimate can always be tested
        let q = rng.random_range(1.0..=k.max(1) as f64);
        let gamma = rng.random_range(1e-3..=0.05);
        let inst =
            CsbInstance::new(vec![1.0; k], Threshold::PerArm(theta.clone()), q).expect("valid");
        let mut search = PerArmSearch::new(k, q, gamma, 0.1, 0.1).expect("valid");
        let mut streams = ReplicationRng::new(seed, case as u64);
        let mut rounds = 0;
        while !search.is_done() && rounds < MAX_SEARCH_ROUNDS {
            let (alloc, tested) = search.allocation(q, &mut streams.policy);
            let fb = environment_step(&inst, &alloc, &mut streams.env).expect("feasible");
            search.step(&fb, &tested);
            rounds += 1;
        }
        let est = search.estimates();
        let ok = search.is_done()
            && est
                .iter()
                .zip(&theta)
                .all(|(&e, &t)| e >= t && e <= t + gamma);
        res.record(ok, || {
            format!("k={k} q={q} gamma={gamma}: theta {theta:?} estimate {est:?}")
        });
    }
    res
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub knapsack: CheckResult,
    pub noiseless_common: CheckResult,
    pub noiseless_per_arm: CheckResult,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.knapsack.all_passed()
            && self.noiseless_common.all_passed()
            && self.noiseless_per_arm.all_passed()
    }
}

pub fn run_verification(cases: usize, seed: u64) -> VerifyReport {
    VerifyReport {
        knapsack: knapsack_equivalence(cases, seed),
        noiseless_common: noiseless_common(cases, seed.wrapping_add(1)),
        noiseless_per_arm: noiseless_per_arm(cases, seed.wrapping_add(2)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_verification_passes() {
        let report = run_verification(25, 7);
        assert!(report.all_passed(), "{report:?}");
        assert_eq!(report.knapsack.cases, 25);
    }
}
