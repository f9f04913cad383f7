//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "name": "instance1",
//!   "instance": {
//!     "mu": { "linear": { "start": 0.25, "step": 0.02, "k": 20 } },
//!     "theta": 0.6,
//!     "q": 6
//!   },
//!   "horizon": 5000,
//!   "delta": 0.1,
//!   "epsilon": 0.1,
//!   "policy": "csb-st",
//!   "replications": 50,
//!   "master_seed": 1
//! }
//! ```
//!
//! `mu` is either an explicit list or a linear generator; `theta` is a
//! number (common threshold) or a list (per arm). Per-arm learners also
//! need `gamma`. Optional: `compare` (extra policies run on the same
//! seeds), `policy_config`, `output_dir`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CsbError, Result};
use crate::policies::PolicyConfig;
use crate::problem::{CsbInstance, Threshold};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    CsbSt,
    CsbDt,
    CsbDtUcb,
}

impl PolicyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyKind::CsbSt => "csb-st",
            PolicyKind::CsbDt => "csb-dt",
            PolicyKind::CsbDtUcb => "csb-dt-ucb",
        }
    }

    pub fn needs_common_threshold(&self) -> bool {
        matches!(self, PolicyKind::CsbSt)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = CsbError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csb-st" => Ok(PolicyKind::CsbSt),
            "csb-dt" => Ok(PolicyKind::CsbDt),
            "csb-dt-ucb" => Ok(PolicyKind::CsbDtUcb),
            other => Err(config_err("policy", format!("unknown policy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearMu {
    pub start: f64,
    pub step: f64,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MuSpec {
    List(Vec<f64>),
    Generator { linear: LinearMu },
}

impl MuSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            MuSpec::List(v) => v.clone(),
            MuSpec::Generator { linear } => (0..linear.k)
                .map(|i| linear.start + i as f64 * linear.step)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub mu: MuSpec,
    pub theta: Threshold,
    pub q: f64,
}

impl InstanceSpec {
    pub fn build(&self) -> Result<CsbInstance> {
        CsbInstance::new(self.mu.values(), self.theta.clone(), self.q)
    }
}

fn default_replications() -> usize {
    50
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub instance: InstanceSpec,
    pub horizon: usize,
    pub delta: f64,
    pub epsilon: f64,
    #[serde(default)]
    pub gamma: Option<f64>,
    pub policy: PolicyKind,
    #[serde(default)]
    pub compare: Vec<PolicyKind>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub policy_config: PolicyConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn config_err(path: &str, message: impl Into<String>) -> CsbError {
    CsbError::Config {
        path: path.to_string(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_err(&path, e.into_inner().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(config_err("horizon", "must be at least 1"));
        }
        if self.replications < 1 {
            return Err(config_err("replications", "must be at least 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(config_err("delta", "must lie in (0, 1)"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(config_err("epsilon", "must lie in (0, 1)"));
        }
        self.instance
            .build()
            .map_err(|e| config_err("instance", e.to_string()))?;
        if let Err(e) = self.policy_config.validate() {
            return Err(config_err("policy_config", e.to_string()));
        }
        for (path, policy) in std::iter::once(("policy".to_string(), self.policy)).chain(
            self.compare
                .iter()
                .enumerate()
                .map(|(i, p)| (format!("compare[{i}]"), *p)),
        ) {
            let common = self.instance.theta.is_common();
            if policy.needs_common_threshold() && !common {
                return Err(config_err(
                    &path,
                    format!("{policy} needs a common threshold but instance.theta is per-arm"),
                ));
            }
            if !policy.needs_common_threshold() {
                if common {
                    return Err(config_err(
                        &path,
                        format!("{policy} needs per-arm thresholds but instance.theta is a single value"),
                    ));
                }
                match self.gamma {
                    Some(g) if g > 0.0 => {}
                    Some(_) => return Err(config_err("gamma", "must be positive")),
                    None => return Err(config_err("gamma", format!("required by {policy}"))),
                }
            }
        }
        Ok(())
    }

    pub fn instance(&self) -> Result<CsbInstance> {
        self.instance.build()
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.policy.to_string())
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CsbError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ExperimentConfig::from_json(&text)
}
