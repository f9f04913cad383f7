//! Regret-minimization learners.
//!
//! Both learners first estimate thresholds (see [`crate::estimation`]) and
//! then treat the remaining rounds as a semi-bandit over the arms left
//! uncovered: with a common threshold the uncovered set has fixed size and
//! multiple-play Thompson sampling picks it; with per-arm thresholds a
//! knapsack oracle over posterior samples (or lower confidence indices)
//! decides which arms to cover.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::estimation::{CommonSearch, PerArmSearch};
use crate::knapsack::{allocation_equivalent_theta, scale_problem, solve_integer, ScaledProblem};
use crate::problem::{
    draw_latent, environment_step, optimal_allocation, round_regret, Allocation, CsbInstance,
    Feedback, RegretTrace,
};
use crate::rng::ReplicationRng;

/// Beta posterior tallies. `s` and `f` start at one (uniform prior).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BetaCounts {
    pub s: Vec<u64>,
    pub f: Vec<u64>,
    pub pulls: Vec<u64>,
}

impl BetaCounts {
    pub fn new(k: usize) -> Self {
        Self {
            s: vec![1; k],
            f: vec![1; k],
            pulls: vec![0; k],
        }
    }

    pub fn k(&self) -> usize {
        self.s.len()
    }

    pub fn posterior_mean(&self, arm: usize) -> f64 {
        self.s[arm] as f64 / (self.s[arm] + self.f[arm]) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyConfig {
    /// Knapsack value/weight scaling factor.
    pub scale_s: u64,
    /// Rounds between oracle solves.
    pub resolve_period: u64,
    /// Multiplier inside the square root of the confidence radius.
    pub lcb_exploration: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            scale_s: 10_000,
            resolve_period: 1,
            lcb_exploration: 1.5,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scale_s < 1 {
            return Err(param("scale_s", "must be at least 1"));
        }
        if self.resolve_period < 1 {
            return Err(param("resolve_period", "must be at least 1"));
        }
        if !(self.lcb_exploration >= 0.0) {
            return Err(param("lcb_exploration", "must be non-negative"));
        }
        Ok(())
    }
}

pub fn posterior_sample<R: Rng + ?Sized>(counts: &BetaCounts, rng: &mut R) -> Vec<f64> {
    counts
        .s
        .iter()
        .zip(&counts.f)
        .map(|(&s, &f)| {
            Beta::new(s as f64, f as f64)
                .expect("beta parameters are at least one")
                .sample(rng)
        })
        .collect()
}

/// The `k - m_arms` arms with the smallest samples, lower index first on
/// ties, returned in ascending index order.
pub fn mpts_select(samples: &[f64], m_arms: usize) -> Vec<usize> {
    let k = samples.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| samples[a].total_cmp(&samples[b]).then(a.cmp(&b)));
    let mut uncovered: Vec<usize> = order.into_iter().take(k.saturating_sub(m_arms)).collect();
    uncovered.sort_unstable();
    uncovered
}

fn complement(k: usize, chosen: &[usize]) -> Vec<usize> {
    let mut covered = vec![false; k];
    for &i in chosen {
        covered[i] = true;
    }
    (0..k).filter(|&i| !covered[i]).collect()
}

/// One knapsack solve over `(values, theta_hat, q)`; returns the arms left
/// uncovered.
pub fn cts_select(
    samples: &[f64],
    theta_hat: &[f64],
    q: f64,
    cfg: &PolicyConfig,
) -> Result<Vec<usize>> {
    let problem = scale_problem(samples, theta_hat, q, cfg.scale_s)?;
    Ok(complement(samples.len(), &solve_integer(&problem)))
}

/// Stateful oracle that re-solves every `resolve_period` rounds and skips
/// solves whose integer inputs repeat the previous ones.
#[derive(Debug, Clone)]
pub struct KnapsackOracle {
    cfg: PolicyConfig,
    last: Option<(ScaledProblem, Vec<usize>)>,
    since_solve: u64,
    solves: u64,
}

impl KnapsackOracle {
    pub fn new(cfg: PolicyConfig) -> Self {
        Self {
            cfg,
            last: None,
            since_solve: 0,
            solves: 0,
        }
    }

    /// Number of DP solves actually run.
    pub fn solves(&self) -> u64 {
        self.solves
    }

    pub fn select(&mut self, values: &[f64], theta_hat: &[f64], q: f64) -> Result<Vec<usize>> {
        if let Some((_, uncovered)) = &self.last {
            if self.since_solve < self.cfg.resolve_period {
                self.since_solve += 1;
                return Ok(uncovered.clone());
            }
        }
        let problem = scale_problem(values, theta_hat, q, self.cfg.scale_s)?;
        self.since_solve = 1;
        if let Some((prev, uncovered)) = &self.last {
            if *prev == problem {
                return Ok(uncovered.clone());
            }
        }
        let uncovered = complement(values.len(), &solve_integer(&problem));
        self.solves += 1;
        self.last = Some((problem, uncovered.clone()));
        Ok(uncovered)
    }
}

/// Optimistic (for losses) index: empirical mean minus a confidence radius,
/// floored at zero. Arms never observed get zero.
pub fn lcb_index(counts: &BetaCounts, t: u64, cfg: &PolicyConfig) -> Vec<f64> {
    let log_t = (t.max(1) as f64).ln();
    (0..counts.k())
        .map(|i| {
            let n = counts.pulls[i].max(1) as f64;
            let mean = (counts.s[i] - 1) as f64 / n;
            let radius = (cfg.lcb_exploration * log_t / n).sqrt();
            (mean - radius).max(0.0)
        })
        .collect()
}

/// Feeds the observed losses of the uncovered arms into their posteriors.
pub fn posterior_update(counts: &mut BetaCounts, uncovered: &[usize], feedback: &Feedback) {
    for &i in uncovered {
        if feedback.losses[i] {
            counts.s[i] += 1;
        } else {
            counts.f[i] += 1;
        }
        counts.pulls[i] += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Estimation,
    Exploitation,
}

/// Per-round callback payload.
#[derive(Debug)]
pub struct RoundEvent<'a> {
    /// 1-based round.
    pub round: usize,
    pub phase: Phase,
    pub allocation: &'a Allocation,
    /// Arms left at zero resource during exploitation.
    pub uncovered: Option<&'a [usize]>,
    pub regret: f64,
}

pub type Observer<'o> = &'o mut dyn FnMut(&RoundEvent);

fn covering_allocation(
    k: usize,
    uncovered: &[usize],
    amounts: impl Fn(usize) -> f64,
) -> Allocation {
    let mut a: Vec<f64> = (0..k).map(&amounts).collect();
    for &i in uncovered {
        a[i] = 0.0;
    }
    Allocation::from_amounts_unchecked(a)
}

/// Multiple-play Thompson sampling with `m_arms` arms covered at `theta_hat`,
/// from round `start` through `horizon`.
#[allow(clippy::too_many_arguments)]
fn mpts_phase(
    instance: &CsbInstance,
    theta_hat: f64,
    m_arms: usize,
    start: usize,
    horizon: usize,
    optimal_loss: f64,
    rng: &mut ReplicationRng,
    trace: &mut RegretTrace,
    observe: Observer,
) -> Result<()> {
    let k = instance.k();
    let mut counts = BetaCounts::new(k);
    for round in start..=horizon {
        let samples = posterior_sample(&counts, &mut rng.policy);
        let uncovered = mpts_select(&samples, m_arms);
        let alloc = covering_allocation(k, &uncovered, |_| theta_hat);
        let fb = environment_step(instance, &alloc, &mut rng.env)?;
        posterior_update(&mut counts, &uncovered, &fb);
        let regret = round_regret(instance, &alloc, optimal_loss);
        trace.push(regret);
        observe(&RoundEvent {
            round,
            phase: Phase::Exploitation,
            allocation: &alloc,
            uncovered: Some(&uncovered),
            regret,
        });
    }
    Ok(())
}

fn check_horizon(horizon: usize) -> Result<()> {
    if horizon < 1 {
        return Err(param("horizon", "must be at least 1"));
    }
    Ok(())
}

fn require_common(instance: &CsbInstance) -> Result<()> {
    if !instance.theta().is_common() {
        return Err(param("theta", "this learner needs a common threshold"));
    }
    Ok(())
}

/// Common-threshold learner: binary search over the candidate set, then
/// multiple-play Thompson sampling.
pub fn run_csb_st(
    instance: &CsbInstance,
    horizon: usize,
    delta: f64,
    epsilon: f64,
    rng: &mut ReplicationRng,
) -> Result<RegretTrace> {
    let opt = optimal_allocation(instance).mean_loss;
    run_csb_st_with(instance, horizon, delta, epsilon, opt, rng, &mut |_| {})
}

pub fn run_csb_st_with(
    instance: &CsbInstance,
    horizon: usize,
    delta: f64,
    epsilon: f64,
    optimal_loss: f64,
    rng: &mut ReplicationRng,
    observe: Observer,
) -> Result<RegretTrace> {
    check_horizon(horizon)?;
    require_common(instance)?;
    let k = instance.k();
    let q = instance.budget();
    if !(q > 0.0) {
        return Err(param("q", "threshold search needs a positive budget"));
    }
    let mut search = CommonSearch::new(k, q, delta, epsilon)?;
    let mut trace = RegretTrace::with_capacity(horizon);

    let mut round = 0;
    while !search.is_done() && round < horizon {
        round += 1;
        let alloc = search.allocation(k);
        let fb = environment_step(instance, &alloc, &mut rng.env)?;
        search.step(&fb)?;
        let regret = round_regret(instance, &alloc, optimal_loss);
        trace.push(regret);
        observe(&RoundEvent {
            round,
            phase: Phase::Estimation,
            allocation: &alloc,
            uncovered: None,
            regret,
        });
    }
    trace.phase1_rounds = round;
    trace.estimation_done = search.is_done();

    let Some(estimate) = search.estimate() else {
        trace.theta_estimate = vec![search.current().value; k];
        return Ok(trace);
    };
    trace.theta_estimate = vec![estimate.value; k];
    debug_assert!(estimate.arms <= k);
    mpts_phase(
        instance,
        estimate.value,
        estimate.arms,
        round + 1,
        horizon,
        optimal_loss,
        rng,
        &mut trace,
        observe,
    )?;
    Ok(trace)
}

/// Exploitation phase only, with the threshold handed in rather than
/// estimated.
pub fn run_csb_st_known(
    instance: &CsbInstance,
    horizon: usize,
    rng: &mut ReplicationRng,
    observe: Observer,
) -> Result<RegretTrace> {
    check_horizon(horizon)?;
    require_common(instance)?;
    let eq = allocation_equivalent_theta(instance.threshold(0), instance.budget(), instance.k())?;
    let opt = optimal_allocation(instance).mean_loss;
    let mut trace = RegretTrace::with_capacity(horizon);
    trace.estimation_done = true;
    trace.theta_estimate = vec![eq.theta_hat; instance.k()];
    mpts_phase(
        instance,
        eq.theta_hat,
        eq.m_arms,
        1,
        horizon,
        opt,
        rng,
        &mut trace,
        observe,
    )?;
    Ok(trace)
}

/// Stochastic multiple-play bandit: each round the learner plays exactly
/// `plays` arms and observes each played arm's Bernoulli loss.
#[derive(Debug, Clone)]
pub struct MultiPlayBandit {
    pub mu: Vec<f64>,
    pub plays: usize,
}

impl MultiPlayBandit {
    /// Plays the `plays` arms with the smallest posterior samples; returns
    /// the played set of every round.
    pub fn run_thompson(&self, horizon: usize, rng: &mut ReplicationRng) -> Vec<Vec<usize>> {
        let k = self.mu.len();
        let mut s = vec![1u64; k];
        let mut f = vec![1u64; k];
        let mut history = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let latent = draw_latent(&self.mu, &mut rng.env);
            let samples: Vec<f64> = (0..k)
                .map(|i| {
                    Beta::new(s[i] as f64, f[i] as f64)
                        .expect("positive")
                        .sample(&mut rng.policy)
                })
                .collect();
            let mut order: Vec<usize> = (0..k).collect();
            order.sort_by(|&a, &b| samples[a].total_cmp(&samples[b]).then(a.cmp(&b)));
            let mut played: Vec<usize> = order[..self.plays.min(k)].to_vec();
            played.sort_unstable();
            for &i in &played {
                if latent[i] {
                    s[i] += 1;
                } else {
                    f[i] += 1;
                }
            }
            history.push(played);
        }
        history
    }
}

/// Per-arm threshold learner: parallel bisections, then combinatorial
/// Thompson sampling (or the lower-confidence-index comparator when
/// `use_lcb`) over a knapsack oracle on the estimated thresholds.
#[allow(clippy::too_many_arguments)]
pub fn run_csb_dt(
    instance: &CsbInstance,
    horizon: usize,
    delta: f64,
    epsilon: f64,
    gamma: f64,
    cfg: &PolicyConfig,
    use_lcb: bool,
    rng: &mut ReplicationRng,
) -> Result<RegretTrace> {
    let opt = optimal_allocation(instance).mean_loss;
    run_csb_dt_with(
        instance,
        horizon,
        delta,
        epsilon,
        gamma,
        cfg,
        use_lcb,
        opt,
        rng,
        &mut |_| {},
    )
}

#[allow(clippy::too_many_arguments)]
pub fn run_csb_dt_with(
    instance: &CsbInstance,
    horizon: usize,
    delta: f64,
    epsilon: f64,
    gamma: f64,
    cfg: &PolicyConfig,
    use_lcb: bool,
    optimal_loss: f64,
    rng: &mut ReplicationRng,
    observe: Observer,
) -> Result<RegretTrace> {
    check_horizon(horizon)?;
    cfg.validate()?;
    let k = instance.k();
    let q = instance.budget();
    let mut search = PerArmSearch::new(k, q, gamma, delta, epsilon)?;
    let mut trace = RegretTrace::with_capacity(horizon);

    let mut round = 0;
    while !search.is_done() && round < horizon {
        round += 1;
        let (alloc, tested) = search.allocation(q, &mut rng.policy);
        let fb = environment_step(instance, &alloc, &mut rng.env)?;
        search.step(&fb, &tested);
        let regret = round_regret(instance, &alloc, optimal_loss);
        trace.push(regret);
        observe(&RoundEvent {
            round,
            phase: Phase::Estimation,
            allocation: &alloc,
            uncovered: None,
            regret,
        });
    }
    trace.phase1_rounds = round;
    trace.estimation_done = search.is_done();
    let theta_hat = search.estimates();
    trace.theta_estimate = theta_hat.clone();
    if !search.is_done() {
        return Ok(trace);
    }

    let mut counts = BetaCounts::new(k);
    let mut oracle = KnapsackOracle::new(*cfg);
    for round in round + 1..=horizon {
        let values = if use_lcb {
            lcb_index(&counts, round as u64, cfg)
        } else {
            posterior_sample(&counts, &mut rng.policy)
        };
        let uncovered = oracle.select(&values, &theta_hat, q)?;
        let alloc = covering_allocation(k, &uncovered, |i| theta_hat[i]);
        let fb = environment_step(instance, &alloc, &mut rng.env)?;
        posterior_update(&mut counts, &uncovered, &fb);
        let regret = round_regret(instance, &alloc, optimal_loss);
        trace.push(regret);
        observe(&RoundEvent {
            round,
            phase: Phase::Exploitation,
            allocation: &alloc,
            uncovered: Some(&uncovered),
            regret,
        });
    }
    Ok(trace)
}
