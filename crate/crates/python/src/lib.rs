//! Python bindings for `csb-core`.

use std::path::PathBuf;

use csb_core::estimation;
use csb_core::harness::{self, AggregateTrace};
use csb_core::knapsack::{self, KnapsackSolution};
use csb_core::policies::{self, PolicyConfig};
use csb_core::{Allocation, CsbError, CsbInstance, RegretTrace, ReplicationRng, Threshold};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

create_exception!(
    csb,
    CsbException,
    PyValueError,
    "Raised for invalid instances, parameters or configs."
);

fn err(e: CsbError) -> PyErr {
    CsbException::new_err(e.to_string())
}

#[derive(FromPyObject)]
enum ThetaArg {
    Common(f64),
    PerArm(Vec<f64>),
}

impl From<ThetaArg> for Threshold {
    fn from(t: ThetaArg) -> Self {
        match t {
            ThetaArg::Common(v) => Threshold::Common(v),
            ThetaArg::PerArm(v) => Threshold::PerArm(v),
        }
    }
}

/// A censored semi-bandit instance: loss means, thresholds and budget.
///
/// `theta` is a float for a common threshold or a list for per-arm ones.
#[pyclass(name = "CsbInstance", frozen, from_py_object)]
#[derive(Clone)]
struct PyInstance(CsbInstance);

#[pymethods]
impl PyInstance {
    #[new]
    fn new(mu: Vec<f64>, theta: ThetaArg, q: f64) -> PyResult<Self> {
        CsbInstance::new(mu, theta.into(), q).map(Self).map_err(err)
    }

    /// Twenty arms with linearly spaced means, common threshold 0.6, budget 6.
    #[staticmethod]
    fn instance1() -> Self {
        Self(CsbInstance::instance1())
    }

    /// Five arms with per-arm thresholds and budget 2.
    #[staticmethod]
    fn instance2() -> Self {
        Self(CsbInstance::instance2())
    }

    #[getter]
    fn k(&self) -> usize {
        self.0.k()
    }

    #[getter]
    fn mu(&self) -> Vec<f64> {
        self.0.mu().to_vec()
    }

    /// Per-arm thresholds (a common threshold is repeated `k` times).
    #[getter]
    fn theta(&self) -> Vec<f64> {
        self.0.thresholds()
    }

    #[getter]
    fn q(&self) -> f64 {
        self.0.budget()
    }

    fn is_common(&self) -> bool {
        self.0.theta().is_common()
    }

    /// `(covered_arms, optimal_mean_loss)` with 0-based arm indices.
    fn optimal_allocation(&self) -> (Vec<usize>, f64) {
        let opt = csb_core::optimal_allocation(&self.0);
        (opt.covered, opt.mean_loss)
    }

    /// Pseudo-regret of one round played with `amounts`.
    fn round_regret(&self, amounts: Vec<f64>) -> PyResult<f64> {
        let alloc = Allocation::new(amounts).map_err(err)?;
        if alloc.amounts().len() != self.0.k() {
            return Err(PyValueError::new_err("allocation length must equal k"));
        }
        let opt = csb_core::optimal_allocation(&self.0).mean_loss;
        Ok(csb_core::round_regret(&self.0, &alloc, opt))
    }

    /// Environment step with a fresh stream: returns `(losses, observed)`.
    fn step(&self, amounts: Vec<f64>, seed: u64) -> PyResult<(Vec<bool>, Vec<bool>)> {
        let alloc = Allocation::new(amounts).map_err(err)?;
        let mut rng = ReplicationRng::new(seed, 0);
        let fb = csb_core::environment_step(&self.0, &alloc, &mut rng.env).map_err(err)?;
        Ok((fb.losses, fb.observed))
    }

    fn __repr__(&self) -> String {
        let theta = match self.0.theta() {
            Threshold::Common(t) => t.to_string(),
            Threshold::PerArm(ts) => format!("{ts:?}"),
        };
        format!(
            "CsbInstance(k={}, theta={theta}, q={})",
            self.0.k(),
            self.0.budget()
        )
    }
}

/// One replication's regret record.
#[pyclass(name = "RegretTrace", frozen, get_all)]
struct PyTrace {
    per_round: Vec<f64>,
    cumulative: Vec<f64>,
    phase1_rounds: usize,
    estimation_done: bool,
    theta_estimate: Vec<f64>,
}

#[pymethods]
impl PyTrace {
    fn final_regret(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    fn __len__(&self) -> usize {
        self.per_round.len()
    }
}

impl From<RegretTrace> for PyTrace {
    fn from(t: RegretTrace) -> Self {
        Self {
            per_round: t.per_round,
            cumulative: t.cumulative,
            phase1_rounds: t.phase1_rounds,
            estimation_done: t.estimation_done,
            theta_estimate: t.theta_estimate,
        }
    }
}

/// Mean regret curve and band across replications.
#[pyclass(name = "AggregateTrace", frozen, get_all)]
struct PyAggregate {
    label: String,
    policy: String,
    replications: usize,
    mean: Vec<f64>,
    ci_low: Vec<f64>,
    ci_high: Vec<f64>,
    phase1_mean: f64,
    phase1_max: usize,
    recovery_rate: f64,
    lower_bound: Option<f64>,
}

#[pymethods]
impl PyAggregate {
    fn final_regret(&self) -> f64 {
        self.mean.last().copied().unwrap_or(0.0)
    }
}

impl From<AggregateTrace> for PyAggregate {
    fn from(a: AggregateTrace) -> Self {
        Self {
            label: a.label,
            policy: a.policy.to_string(),
            replications: a.replications,
            mean: a.mean,
            ci_low: a.ci_low,
            ci_high: a.ci_high,
            phase1_mean: a.phase1_mean,
            phase1_max: a.phase1_max,
            recovery_rate: a.recovery_rate,
            lower_bound: a.lower_bound,
        }
    }
}

type Solution = (Vec<usize>, f64, f64);

fn solution(s: KnapsackSolution) -> Solution {
    (s.chosen, s.total_value, s.total_weight)
}

/// Exact 0-1 knapsack by enumeration (at most 20 items):
/// `(chosen, total_value, total_weight)`.
#[pyfunction]
fn solve_bruteforce(values: Vec<f64>, weights: Vec<f64>, capacity: f64) -> PyResult<Solution> {
    knapsack::solve_bruteforce(&values, &weights, capacity)
        .map(solution)
        .map_err(err)
}

/// 0-1 knapsack by dynamic programming on weights scaled by `scale`.
#[pyfunction]
#[pyo3(signature = (values, weights, capacity, scale = 10_000))]
fn solve_scaled_dp(
    values: Vec<f64>,
    weights: Vec<f64>,
    capacity: f64,
    scale: u64,
) -> PyResult<Solution> {
    knapsack::solve_scaled_dp(&values, &weights, capacity, scale)
        .map(solution)
        .map_err(err)
}

#[pyfunction]
fn theta_candidate_set(k: usize, q: f64) -> PyResult<Vec<f64>> {
    knapsack::theta_candidate_set(k, q).map_err(err)
}

/// `(m_arms, theta_hat)` for a common threshold.
#[pyfunction]
fn allocation_equivalent_theta(theta_c: f64, q: f64, k: usize) -> PyResult<(usize, f64)> {
    let eq = knapsack::allocation_equivalent_theta(theta_c, q, k).map_err(err)?;
    Ok((eq.m_arms, eq.theta_hat))
}

#[pyfunction]
fn st_window(k: usize, q: f64, delta: f64, epsilon: f64) -> PyResult<usize> {
    estimation::st_window(k, q, delta, epsilon).map_err(err)
}

#[pyfunction]
fn dt_window(k: usize, gamma: f64, delta: f64, epsilon: f64) -> PyResult<usize> {
    estimation::dt_window(k, gamma, delta, epsilon).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (instance, horizon, delta = 0.1, epsilon = 0.1, seed = 0, replication = 0))]
fn run_csb_st(
    py: Python<'_>,
    instance: PyInstance,
    horizon: usize,
    delta: f64,
    epsilon: f64,
    seed: u64,
    replication: u64,
) -> PyResult<PyTrace> {
    py.detach(|| {
        let mut rng = ReplicationRng::new(seed, replication);
        policies::run_csb_st(&instance.0, horizon, delta, epsilon, &mut rng)
    })
    .map(PyTrace::from)
    .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (instance, horizon, gamma, delta = 0.1, epsilon = 0.1, seed = 0, replication = 0, lcb = false))]
#[allow(clippy::too_many_arguments)]
fn run_csb_dt(
    py: Python<'_>,
    instance: PyInstance,
    horizon: usize,
    gamma: f64,
    delta: f64,
    epsilon: f64,
    seed: u64,
    replication: u64,
    lcb: bool,
) -> PyResult<PyTrace> {
    py.detach(|| {
        let mut rng = ReplicationRng::new(seed, replication);
        let cfg = PolicyConfig::default();
        policies::run_csb_dt(
            &instance.0,
            horizon,
            delta,
            epsilon,
            gamma,
            &cfg,
            lcb,
            &mut rng,
        )
    })
    .map(PyTrace::from)
    .map_err(err)
}

#[pyfunction]
fn kl_bernoulli(p: f64, q: f64) -> PyResult<f64> {
    harness::kl_bernoulli(p, q).map_err(err)
}

#[pyfunction]
fn lower_bound_envelope(instance: PyInstance, t: u64) -> PyResult<f64> {
    harness::lower_bound_envelope(&instance.0, t).map_err(err)
}

/// Runs a JSON experiment config (policy plus any `compare` policies).
/// Nothing is written to disk.
#[pyfunction]
#[pyo3(signature = (path, seed = None, replications = None))]
fn run_config(
    py: Python<'_>,
    path: PathBuf,
    seed: Option<u64>,
    replications: Option<usize>,
) -> PyResult<Vec<PyAggregate>> {
    py.detach(|| {
        let mut config = harness::load_config(&path)?;
        if let Some(s) = seed {
            config.master_seed = s;
        }
        if let Some(r) = replications {
            config.replications = r;
        }
        harness::run_all(&config)
    })
    .map(|v| v.into_iter().map(PyAggregate::from).collect())
    .map_err(err)
}

#[pymodule]
fn csb(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CsbException", m.py().get_type::<CsbException>())?;
    m.add_class::<PyInstance>()?;
    m.add_class::<PyTrace>()?;
    m.add_class::<PyAggregate>()?;
    m.add_function(wrap_pyfunction!(solve_bruteforce, m)?)?;
    m.add_function(wrap_pyfunction!(solve_scaled_dp, m)?)?;
    m.add_function(wrap_pyfunction!(theta_candidate_set, m)?)?;
    m.add_function(wrap_pyfunction!(allocation_equivalent_theta, m)?)?;
    m.add_function(wrap_pyfunction!(st_window, m)?)?;
    m.add_function(wrap_pyfunction!(dt_window, m)?)?;
    m.add_function(wrap_pyfunction!(run_csb_st, m)?)?;
    m.add_function(wrap_pyfunction!(run_csb_dt, m)?)?;
    m.add_function(wrap_pyfunction!(kl_bernoulli, m)?)?;
    m.add_function(wrap_pyfunction!(lower_bound_envelope, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
