//! Problem instances, the censoring environment and pseudo-regret accounting.
//!
//! An instance is a vector of Bernoulli mean losses `mu`, activation
//! thresholds (one shared value or one per arm) and a divisible budget `q`.
//! Arm `i` only reports (and incurs) its loss when its allocation is
//! strictly below its threshold.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CsbError, Result};
use crate::knapsack;

/// Tolerance on `sum(a) <= q` absorbing float accumulation.
pub const FEASIBILITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Threshold {
    Common(f64),
    PerArm(Vec<f64>),
}

impl Threshold {
    pub fn is_common(&self) -> bool {
        matches!(self, Threshold::Common(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsbInstance {
    mu: Vec<f64>,
    theta: Threshold,
    budget: f64,
}

impl CsbInstance {
    pub fn new(mu: Vec<f64>, theta: Threshold, budget: f64) -> Result<Self> {
        let bad = |msg: String| Err(CsbError::InvalidInstance(msg));
        if mu.is_empty() {
            return bad("mu must contain at least one arm".into());
        }
        if let Some((i, m)) = mu
            .iter()
            .enumerate()
            .find(|(_, m)| !(0.0..=1.0).contains(*m))
        {
            return bad(format!("mu[{}] = {m} is outside [0, 1]", i + 1));
        }
        let valid_theta = |t: f64| t > 0.0 && t <= 1.0;
        match &theta {
            Threshold::Common(t) if !valid_theta(*t) => {
                return bad(format!("theta = {t} is outside (0, 1]"));
            }
            Threshold::PerArm(ts) => {
                if ts.len() != mu.len() {
                    return bad(format!(
                        "theta has {} entries but mu has {}",
                        ts.len(),
                        mu.len()
                    ));
                }
                if let Some((i, t)) = ts.iter().enumerate().find(|(_, t)| !valid_theta(**t)) {
                    return bad(format!("theta[{}] = {t} is outside (0, 1]", i + 1));
                }
            }
            _ => {}
        }
        if !(budget >= 0.0) || !budget.is_finite() {
            return bad(format!("budget q = {budget} must be a non-negative number"));
        }
        Ok(Self { mu, theta, budget })
    }

    /// K = 20, q = 6, common threshold 0.6, mu_i = 0.25 + (i - 1) / 50.
    pub fn instance1() -> Self {
        let mu = (0..20).map(|i| 0.25 + i as f64 / 50.0).collect();
        Self::new(mu, Threshold::Common(0.6), 6.0).expect("valid")
    }

    /// K = 5, q = 2, per-arm thresholds.
    pub fn instance2() -> Self {
        Self::new(
            vec![0.9, 0.89, 0.87, 0.6, 0.3],
            Threshold::PerArm(vec![0.7, 0.7, 0.7, 0.6, 0.35]),
            2.0,
        )
        .expect("valid")
    }

    pub fn k(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn theta(&self) -> &Threshold {
        &self.theta
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn threshold(&self, arm: usize) -> f64 {
        match &self.theta {
            Threshold::Common(t) => *t,
            Threshold::PerArm(ts) => ts[arm],
        }
    }

    /// Thresholds expanded to one entry per arm.
    pub fn thresholds(&self) -> Vec<f64> {
        (0..self.k()).map(|i| self.threshold(i)).collect()
    }

    pub fn with_budget(&self, budget: f64) -> Result<Self> {
        Self::new(self.mu.clone(), self.theta.clone(), budget)
    }

    pub fn with_theta(&self, theta: Threshold) -> Result<Self> {
        Self::new(self.mu.clone(), theta, self.budget)
    }

    /// Whether arm `arm` reports its loss under allocation `amount`.
    pub fn is_exposed(&self, arm: usize, amount: f64) -> bool {
        amount < self.threshold(arm)
    }
}

/// Per-arm resource fractions for one round.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    amounts: Vec<f64>,
}

impl Allocation {
    pub fn new(amounts: Vec<f64>) -> Result<Self> {
        if let Some((i, a)) = amounts
            .iter()
            .enumerate()
            .find(|(_, a)| !(0.0..=1.0).contains(*a))
        {
            return Err(CsbError::InvalidAllocation(format!(
                "amount for arm {} = {a} is outside [0, 1]",
                i + 1
            )));
        }
        Ok(Self { amounts })
    }

    pub fn zeros(k: usize) -> Self {
        Self {
            amounts: vec![0.0; k],
        }
    }

    /// `amount` on each arm in `covered`, zero elsewhere.
    pub fn covering(k: usize, covered: impl IntoIterator<Item = usize>, amount: f64) -> Self {
        let mut amounts = vec![0.0; k];
        for i in covered {
            amounts[i] = amount;
        }
        Self { amounts }
    }

    pub(crate) fn from_amounts_unchecked(amounts: Vec<f64>) -> Self {
        debug_assert!(amounts.iter().all(|a| (0.0..=1.0).contains(a)));
        Self { amounts }
    }

    pub fn amounts(&self) -> &[f64] {
        &self.amounts
    }

    pub fn total(&self) -> f64 {
        self.amounts.iter().sum()
    }

    pub fn is_feasible(&self, budget: f64) -> bool {
        self.total() <= budget + FEASIBILITY_SLACK
    }

    fn check(&self, instance: &CsbInstance) -> Result<()> {
        if self.amounts.len() != instance.k() {
            return Err(CsbError::InvalidAllocation(format!(
                "allocation has {} arms, instance has {}",
                self.amounts.len(),
                instance.k()
            )));
        }
        if !self.is_feasible(instance.budget()) {
            return Err(CsbError::Infeasible {
                total: self.total(),
                budget: instance.budget(),
            });
        }
        Ok(())
    }
}

/// Censored observation for one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Feedback {
    /// `Y_i = X_i * 1{a_i < theta_i}`.
    pub losses: Vec<bool>,
    /// `a_i < theta_i`.
    pub observed: Vec<bool>,
    /// Uncensored draws `X_i`, kept for diagnostics only.
    pub latent: Vec<bool>,
}

impl Feedback {
    pub fn realized_loss(&self) -> usize {
        self.losses.iter().filter(|&&l| l).count()
    }
}

/// Draws one latent Bernoulli vector, one draw per arm in index order.
pub fn draw_latent<R: Rng + ?Sized>(mu: &[f64], rng: &mut R) -> Vec<bool> {
    mu.iter().map(|&m| rng.random_bool(m)).collect()
}

/// One round of the censoring protocol.
pub fn environment_step<R: Rng + ?Sized>(
    instance: &CsbInstance,
    alloc: &Allocation,
    rng: &mut R,
) -> Result<Feedback> {
    alloc.check(instance)?;
    let latent = draw_latent(instance.mu(), rng);
    let observed: Vec<bool> = alloc
        .amounts()
        .iter()
        .enumerate()
        .map(|(i, &a)| instance.is_exposed(i, a))
        .collect();
    let losses = latent
        .iter()
        .zip(&observed)
        .map(|(&x, &o)| x && o)
        .collect();
    Ok(Feedback {
        losses,
        observed,
        latent,
    })
}

/// The loss-minimizing cover of an instance.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalCover {
    /// 0-based arms receiving their threshold, ascending.
    pub covered: Vec<usize>,
    pub mean_loss: f64,
}

/// Largest instance size solved exhaustively; larger ones use the scaled DP.
pub const EXHAUSTIVE_LIMIT: usize = 20;
const OPTIMUM_SCALE: u64 = 10_000;

pub fn optimal_allocation(instance: &CsbInstance) -> OptimalCover {
    let weights = instance.thresholds();
    let solution = if instance.k() <= EXHAUSTIVE_LIMIT {
        knapsack::solve_bruteforce(instance.mu(), &weights, instance.budget())
    } else {
        knapsack::solve_scaled_dp(instance.mu(), &weights, instance.budget(), OPTIMUM_SCALE)
    }
    .expect("instance sizes and scale are within solver limits");
    let mean_loss = (0..instance.k())
        .filter(|i| !solution.chosen.contains(i))
        .map(|i| instance.mu()[i])
        .sum();
    OptimalCover {
        covered: solution.chosen,
        mean_loss,
    }
}

/// Expected loss of `alloc` minus the optimal expected loss.
pub fn round_regret(instance: &CsbInstance, alloc: &Allocation, optimal_mean_loss: f64) -> f64 {
    expected_loss(instance, alloc) - optimal_mean_loss
}

pub fn expected_loss(instance: &CsbInstance, alloc: &Allocation) -> f64 {
    alloc
        .amounts()
        .iter()
        .enumerate()
        .filter(|(i, &a)| instance.is_exposed(*i, a))
        .map(|(i, _)| instance.mu()[i])
        .sum()
}

/// Per-round pseudo-regret of one replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretTrace {
    pub per_round: Vec<f64>,
    pub cumulative: Vec<f64>,
    /// Rounds spent in threshold estimation.
    pub phase1_rounds: usize,
    /// False when the horizon ran out before estimation finished.
    pub estimation_done: bool,
    /// Final threshold estimate, one entry per arm.
    pub theta_estimate: Vec<f64>,
}

impl RegretTrace {
    pub(crate) fn with_capacity(horizon: usize) -> Self {
        Self {
            per_round: Vec::with_capacity(horizon),
            cumulative: Vec::with_capacity(horizon),
            phase1_rounds: 0,
            estimation_done: false,
            theta_estimate: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, regret: f64) {
        let total = self.cumulative.last().copied().unwrap_or(0.0) + regret;
        self.per_round.push(regret);
        self.cumulative.push(total);
    }

    pub fn len(&self) -> usize {
        self.per_round.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_round.is_empty()
    }

    pub fn final_regret(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::ReplicationRng;
    use proptest::prelude::*;

    fn approx(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn builds_reference_instances() {
        let i1 = CsbInstance::instance1();
        assert_eq!(i1.k(), 20);
        assert!(approx(i1.mu()[0], 0.25));
        assert!(approx(i1.mu()[1], 0.27));
        assert!(approx(i1.mu()[19], 0.63));
        let i2 = CsbInstance::instance2();
        assert_eq!(i2.k(), 5);
        assert_eq!(i2.threshold(4), 0.35);
    }

    #[test]
    fn zero_budget_is_valid() {
        let inst = CsbInstance::new(vec![0.5], Threshold::Common(0.5), 0.0).unwrap();
        assert_eq!(inst.budget(), 0.0);
    }

    #[test]
    fn rejects_bad_instances() {
        assert!(CsbInstance::new(vec![], Threshold::Common(0.5), 1.0).is_err());
        assert!(CsbInstance::new(vec![1.2], Threshold::Common(0.5), 1.0).is_err());
        assert!(CsbInstance::new(vec![0.2], Threshold::Common(0.0), 1.0).is_err());
        assert!(CsbInstance::new(vec![0.2], Threshold::Common(1.5), 1.0).is_err());
        assert!(CsbInstance::new(vec![0.2], Threshold::Common(0.5), -1.0).is_err());
        assert!(CsbInstance::new(vec![0.2, 0.3], Threshold::PerArm(vec![0.5]), 1.0).is_err());
    }

    #[test]
    fn threshold_equality_is_censored() {
        let inst = CsbInstance::new(vec![1.0, 1.0], Threshold::Common(0.6), 1.0).unwrap();
        let alloc = Allocation::new(vec![0.6, 0.0]).unwrap();
        let mut rng = ReplicationRng::new(0, 0);
        let fb = environment_step(&inst, &alloc, &mut rng.env).unwrap();
        assert_eq!(fb.latent, vec![true, true]);
        assert_eq!(fb.losses, vec![false, true]);
        assert_eq!(fb.observed, vec![false, true]);
    }

    #[test]
    fn full_coverage_silences_all_arms() {
        let inst = CsbInstance::new(vec![0.9; 4], Threshold::Common(0.7), 4.0).unwrap();
        let alloc = Allocation::new(vec![1.0; 4]).unwrap();
        let mut rng = ReplicationRng::new(1, 0);
        for _ in 0..100 {
            let fb = environment_step(&inst, &alloc, &mut rng.env).unwrap();
            assert!(fb.losses.iter().all(|l| !l));
            assert!(fb.observed.iter().all(|o| !o));
        }
    }

    #[test]
    fn infeasible_allocation_reports_sum() {
        let inst = CsbInstance::instance2();
        let alloc = Allocation::new(vec![1.0, 1.0, 0.5, 0.0, 0.0]).unwrap();
        let mut rng = ReplicationRng::new(0, 0);
        match environment_step(&inst, &alloc, &mut rng.env) {
            Err(CsbError::Infeasible { total, budget }) => {
                assert_eq!(total, 2.5);
                assert_eq!(budget, 2.0);
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn empirical_mean_of_uncovered_arm() {
        let inst = CsbInstance::instance1();
        let alloc = Allocation::zeros(inst.k());
        let mut rng = ReplicationRng::new(11, 0);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| {
                environment_step(&inst, &alloc, &mut rng.env)
                    .unwrap()
                    .losses[0]
            })
            .count();
        let mean = hits as f64 / n as f64;
        assert!((mean - 0.25).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn observed_frequency_tracks_mu() {
        // chi-square goodness of fit over the observed arms, 4 dof at 0.999
        let inst = CsbInstance::new(
            vec![0.1, 0.3, 0.5, 0.7, 0.9],
            Threshold::PerArm(vec![0.5; 5]),
            1.0,
        )
        .unwrap();
        let alloc = Allocation::new(vec![0.5, 0.0, 0.0, 0.5, 0.0]).unwrap();
        let mut rng = ReplicationRng::new(5, 0);
        let n = 20_000;
        let mut hits = [0usize; 5];
        for _ in 0..n {
            let fb = environment_step(&inst, &alloc, &mut rng.env).unwrap();
            for (h, (&lost, &seen)) in hits.iter_mut().zip(fb.losses.iter().zip(&fb.observed)) {
                assert!(!lost || seen);
                *h += lost as usize;
            }
        }
        assert_eq!(hits[0], 0);
        assert_eq!(hits[3], 0);
        let chi2: f64 = [1, 2, 4]
            .iter()
            .map(|&i| {
                let p = inst.mu()[i];
                let e1 = n as f64 * p;
                let e0 = n as f64 * (1.0 - p);
                let o1 = hits[i] as f64;
                (o1 - e1).powi(2) / e1 + ((n as f64 - o1) - e0).powi(2) / e0
            })
            .sum();
        // 3 dof, 0.999 quantile
        assert!(chi2 < 16.27, "chi2 {chi2}");
    }

    #[test]
    fn optimum_of_instance2() {
        let opt = optimal_allocation(&CsbInstance::instance2());
        assert_eq!(opt.covered, vec![0, 1, 3]);
        assert!(approx(opt.mean_loss, 1.17));
    }

    #[test]
    fn optimum_of_instance1_covers_top_ten() {
        let opt = optimal_allocation(&CsbInstance::instance1());
        assert_eq!(opt.covered, (10..20).collect::<Vec<_>>());
        assert!(approx(opt.mean_loss, 3.40));
    }

    #[test]
    fn optimum_with_ample_budget_covers_everything() {
        let inst = CsbInstance::new(
            vec![0.2, 0.4, 0.6],
            Threshold::PerArm(vec![0.3, 0.5, 0.9]),
            1.7,
        )
        .unwrap();
        let opt = optimal_allocation(&inst);
        assert_eq!(opt.covered, vec![0, 1, 2]);
        assert_eq!(opt.mean_loss, 0.0);
    }

    #[test]
    fn regret_examples_on_instance2() {
        let inst = CsbInstance::instance2();
        let opt = optimal_allocation(&inst);
        let theta = inst.thresholds();
        let mut a = vec![0.0; 5];
        for i in [0, 1, 4] {
            a[i] = theta[i];
        }
        let r = round_regret(&inst, &Allocation::new(a).unwrap(), opt.mean_loss);
        assert!(approx(r, 0.3));

        let r0 = round_regret(&inst, &Allocation::zeros(5), opt.mean_loss);
        assert!(approx(r0, 2.39));

        let best = Allocation::covering(5, [0, 1], 0.7);
        let mut best = best.amounts().to_vec();
        best[3] = 0.6;
        let r_opt = round_regret(&inst, &Allocation::new(best).unwrap(), opt.mean_loss);
        assert!(approx(r_opt, 0.0));
    }

    #[test]
    fn same_stream_is_bit_reproducible() {
        let inst = CsbInstance::instance1();
        let alloc = Allocation::covering(20, 0..10, 0.6);
        let mut a = ReplicationRng::new(3, 9);
        let mut b = ReplicationRng::new(3, 9);
        for _ in 0..50 {
            assert_eq!(
                environment_step(&inst, &alloc, &mut a.env).unwrap(),
                environment_step(&inst, &alloc, &mut b.env).unwrap()
            );
        }
    }

    fn instance_and_alloc() -> impl Strategy<Value = (CsbInstance, Allocation)> {
        (1usize..8).prop_flat_map(|k| {
            (
                prop::collection::vec(0.0..=1.0f64, k),
                prop::collection::vec(0.01..=1.0f64, k),
                prop::collection::vec(0.0..=1.0f64, k),
                0.0..1.0f64,
            )
                .prop_map(|(mu, theta, raw, frac)| {
                    let q = frac * theta.iter().sum::<f64>();
                    let total: f64 = raw.iter().sum();
                    let scale = if total > q { q / total } else { 1.0 };
                    let amounts = raw.iter().map(|a| a * scale).collect();
                    (
                        CsbInstance::new(mu, Threshold::PerArm(theta), q).unwrap(),
                        Allocation::new(amounts).unwrap(),
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn pseudo_regret_is_bounded((inst, alloc) in instance_and_alloc()) {
            let opt = optimal_allocation(&inst);
            let r = round_regret(&inst, &alloc, opt.mean_loss);
            prop_assert!(r >= -1e-12);
            prop_assert!(r <= inst.mu().iter().sum::<f64>() + 1e-12);
        }

        #[test]
        fn losses_imply_observation((inst, alloc) in instance_and_alloc(), seed in any::<u64>()) {
            let mut rng = ReplicationRng::new(seed, 0);
            let fb = environment_step(&inst, &alloc, &mut rng.env).unwrap();
            for i in 0..inst.k() {
                prop_assert!(!fb.losses[i] || fb.observed[i]);
            }
        }
    }
}
