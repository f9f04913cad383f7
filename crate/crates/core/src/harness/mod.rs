//! Experiment configuration, replication, aggregation and reporting.

pub mod bounds;
pub mod config;
pub mod experiment;
pub mod output;
pub mod svg;
pub mod verify;

pub use bounds::{kl_bernoulli, lower_bound_envelope};
pub use config::{load_config, ExperimentConfig, PolicyKind};
pub use experiment::{run_all, run_experiment, run_policy, sweep, AggregateTrace, SweepParam};
pub use output::{emit_outputs, CSV_FILE, SUMMARY_FILE, SVG_FILE};
