use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CsbError, Result};
use crate::harness::bounds::lower_bound_envelope;
use crate::harness::config::{ExperimentConfig, PolicyKind};
use crate::knapsack::allocation_equivalent_theta;
use crate::policies::{run_csb_dt_with, run_csb_st_with};
use crate::problem::{optimal_allocation, CsbInstance, RegretTrace, Threshold};
use crate::rng::ReplicationRng;

const Z_95: f64 = 1.96;

/// Mean cumulative regret across replications with a normal-approximation
/// 95% band.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateTrace {
    pub label: String,
    pub policy: PolicyKind,
    pub replications: usize,
    pub mean: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    pub phase1_mean: f64,
    pub phase1_max: usize,
    /// Fraction of replications whose estimation phase finished.
    pub estimation_completed: f64,
    /// Fraction of replications whose estimate is allocation equivalent to
    /// the truth.
    pub recovery_rate: f64,
    pub lower_bound: Option<f64>,
}

impl AggregateTrace {
    pub fn horizon(&self) -> usize {
        self.mean.len()
    }

    pub fn final_regret(&self) -> f64 {
        self.mean.last().copied().unwrap_or(0.0)
    }
}

/// Whether a replication's estimate is good enough for an optimal cover.
pub fn threshold_recovered(
    instance: &CsbInstance,
    trace: &RegretTrace,
    gamma: Option<f64>,
) -> bool {
    if !trace.estimation_done {
        return false;
    }
    match instance.theta() {
        Threshold::Common(t) => allocation_equivalent_theta(*t, instance.budget(), instance.k())
            .map(|eq| (trace.theta_estimate[0] - eq.theta_hat).abs() < 1e-12)
            .unwrap_or(false),
        Threshold::PerArm(ts) => {
            let g = gamma.unwrap_or(0.0);
            trace
                .theta_estimate
                .iter()
                .zip(ts)
                .all(|(&e, &t)| e >= t && e <= t + g + 1e-12)
        }
    }
}

/// Runs one replication of `policy` on `instance`.
pub fn run_replication(
    config: &ExperimentConfig,
    instance: &CsbInstance,
    policy: PolicyKind,
    optimal_loss: f64,
    replication: u64,
) -> Result<RegretTrace> {
    let mut rng = ReplicationRng::new(config.master_seed, replication);
    match policy {
        PolicyKind::CsbSt => run_csb_st_with(
            instance,
            config.horizon,
            config.delta,
            config.epsilon,
            optimal_loss,
            &mut rng,
            &mut |_| {},
        ),
        PolicyKind::CsbDt | PolicyKind::CsbDtUcb => run_csb_dt_with(
            instance,
            config.horizon,
            config.delta,
            config.epsilon,
            config.gamma.unwrap_or(0.0),
            &config.policy_config,
            policy == PolicyKind::CsbDtUcb,
            optimal_loss,
            &mut rng,
            &mut |_| {},
        ),
    }
}

/// Mean and 95% band per round. Traces must share a length.
pub fn aggregate(traces: &[RegretTrace]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let r = traces.len();
    let horizon = traces.first().map_or(0, |t| t.len());
    let mut mean = Vec::with_capacity(horizon);
    let mut low = Vec::with_capacity(horizon);
    let mut high = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let m = traces.iter().map(|tr| tr.cumulative[t]).sum::<f64>() / r as f64;
        let half = if r > 1 {
            let var = traces
                .iter()
                .map(|tr| (tr.cumulative[t] - m).powi(2))
                .sum::<f64>()
                / (r - 1) as f64;
            Z_95 * var.sqrt() / (r as f64).sqrt()
        } else {
            0.0
        };
        mean.push(m);
        low.push(m - half);
        high.push(m + half);
    }
    (mean, low, high)
}

/// Runs every replication of one policy and reduces them in replication
/// order. Replications run on the current rayon pool.
pub fn run_policy(
    config: &ExperimentConfig,
    policy: PolicyKind,
    label: &str,
) -> Result<AggregateTrace> {
    config.validate()?;
    let instance = config.instance()?;
    let optimal_loss = optimal_allocation(&instance).mean_loss;
    let traces: Vec<RegretTrace> = (0..config.replications as u64)
        .into_par_iter()
        .map(|rep| run_replication(config, &instance, policy, optimal_loss, rep))
        .collect::<Result<_>>()?;

    let (mean, ci_low, ci_high) = aggregate(&traces);
    let r = traces.len() as f64;
    let phase1_mean = traces.iter().map(|t| t.phase1_rounds as f64).sum::<f64>() / r;
    let phase1_max = traces.iter().map(|t| t.phase1_rounds).max().unwrap_or(0);
    let completed = traces.iter().filter(|t| t.estimation_done).count() as f64 / r;
    let recovered = traces
        .iter()
        .filter(|t| threshold_recovered(&instance, t, config.gamma))
        .count() as f64
        / r;
    let lower_bound = if instance.theta().is_common() {
        lower_bound_envelope(&instance, config.horizon as u64).ok()
    } else {
        None
    };

    Ok(AggregateTrace {
        label: label.to_string(),
        policy,
        replications: traces.len(),
        mean,
        ci_low,
        ci_high,
        phase1_mean,
        phase1_max,
        estimation_completed: completed,
        recovery_rate: recovered,
        lower_bound,
    })
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<AggregateTrace> {
    run_policy(config, config.policy, &config.label())
}

/// The configured policy followed by every `compare` policy, all on the
/// same seeds.
pub fn run_all(config: &ExperimentConfig) -> Result<Vec<AggregateTrace>> {
    std::iter::once(config.policy)
        .chain(config.compare.iter().copied())
        .map(|p| {
            let label = if p == config.policy {
                config.label()
            } else {
                p.to_string()
            };
            run_policy(config, p, &label)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Q,
    ThetaC,
}

impl std::str::FromStr for SweepParam {
    type Err = CsbError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "q" => Ok(SweepParam::Q),
            "theta_c" => Ok(SweepParam::ThetaC),
            other => Err(CsbError::InvalidParameter {
                name: "param",
                reason: format!("cannot sweep `{other}` (expected q or theta_c)"),
            }),
        }
    }
}

impl SweepParam {
    fn name(&self) -> &'static str {
        match self {
            SweepParam::Q => "q",
            SweepParam::ThetaC => "theta_c",
        }
    }
}

/// One aggregate per value, all sharing the configured master seed.
pub fn sweep(
    config: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
) -> Result<Vec<AggregateTrace>> {
    values
        .iter()
        .map(|&v| {
            let mut c = config.clone();
            match param {
                SweepParam::Q => c.instance.q = v,
                SweepParam::ThetaC => {
                    if !c.instance.theta.is_common() {
                        return Err(CsbError::InvalidParameter {
                            name: "param",
                            reason: "theta_c sweeps need a common threshold".into(),
                        });
                    }
                    c.instance.theta = Threshold::Common(v);
                }
            }
            run_policy(&c, c.policy, &format!("{}={}", param.name(), v))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ExperimentConfig;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig::from_json(
            r#"{
                "instance": {"mu": {"linear": {"start": 0.25, "step": 0.02, "k": 20}}, "theta": 0.6, "q": 6},
                "horizon": 300, "delta": 0.1, "epsilon": 0.1, "policy": "csb-st",
                "replications": 4, "master_seed": 3
            }"#,
        )
        .unwrap()
    }

    fn synthetic(values: &[f64]) -> RegretTrace {
        let mut t = RegretTrace::with_capacity(values.len());
        for &v in values {
            t.push(v);
        }
        t
    }

    #[test]
    fn single_replication_collapses_band() {
        let mut c = small_config();
        c.replications = 1;
        let agg = run_experiment(&c).unwrap();
        assert_eq!(agg.mean, agg.ci_low);
        assert_eq!(agg.mean, agg.ci_high);
    }

    #[test]
    fn experiment_is_deterministic() {
        let c = small_config();
        assert_eq!(run_experiment(&c).unwrap(), run_experiment(&c).unwrap());
    }

    #[test]
    fn identical_traces_average_to_themselves() {
        let t = synthetic(&[0.5, 0.25, 0.0, 1.0]);
        let (mean, lo, hi) = aggregate(&[t.clone(), t.clone(), t.clone()]);
        assert_eq!(mean, t.cumulative);
        assert_eq!(lo, t.cumulative);
        assert_eq!(hi, t.cumulative);
    }

    #[test]
    fn band_shrinks_with_replications() {
        // alternating 0 / 2 gives a fixed sample variance
        let make = |r: usize| -> Vec<RegretTrace> {
            (0..r)
                .map(|i| synthetic(&[if i % 2 == 0 { 0.0 } else { 2.0 }]))
                .collect()
        };
        let width = |r: usize| {
            let (_, lo, hi) = aggregate(&make(r));
            hi[0] - lo[0]
        };
        let ratio = width(16) / width(64);
        // sample sd drifts slightly with r; 1/sqrt(r) scaling gives 2
        assert!((ratio - 2.0).abs() < 0.06, "{ratio}");
    }

    #[test]
    fn band_orders_mean() {
        let agg = run_experiment(&small_config()).unwrap();
        for t in 0..agg.horizon() {
            assert!(agg.ci_low[t] <= agg.mean[t] && agg.mean[t] <= agg.ci_high[t]);
        }
        assert!(agg.lower_bound.is_some());
    }

    #[test]
    fn single_value_sweep_equals_run() {
        let c = small_config();
        let s = sweep(&c, SweepParam::Q, &[6.0]).unwrap();
        let r = run_experiment(&c).unwrap();
        assert_eq!(s[0].mean, r.mean);
        assert_eq!(s[0].label, "q=6");
    }

    #[test]
    fn sweep_rejects_unknown_param() {
        assert!("budget".parse::<SweepParam>().is_err());
        assert_eq!("theta_c".parse::<SweepParam>().unwrap(), SweepParam::ThetaC);
    }
}
