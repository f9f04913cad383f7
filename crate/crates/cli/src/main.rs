use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use csb_core::harness::verify::run_verification;
use csb_core::harness::{self, AggregateTrace, ExperimentConfig, SweepParam};

#[derive(Parser)]
#[command(name = "csb", version, about = "Censored semi-bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `replications`.
    #[arg(long)]
    reps: Option<usize>,
    /// Overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for replications (default: available parallelism).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured policy (and any `compare` policies).
    Run(RunArgs),
    /// Run the configured policy once per parameter value.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// `q` or `theta_c`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Check the knapsack DP against exhaustive search and both threshold
    /// searches against a loss-certain environment.
    Verify {
        #[arg(long, default_value_t = 200)]
        cases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn prepare(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut config = harness::load_config(&args.config)
        .with_context(|| format!("loading {}", args.config.display()))?;
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if let Some(reps) = args.reps {
        config.replications = reps;
    }
    if let Some(out) = &args.out {
        config.output_dir = out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            bail!("--jobs must be at least 1");
        }
        builder = builder.num_threads(j);
    }
    Ok(builder.build()?.install(f))
}

fn report(config: &ExperimentConfig, traces: &[AggregateTrace]) -> Result<()> {
    let files = harness::emit_outputs(traces, &config.output_dir)?;
    for tr in traces {
        println!(
            "{:<16} final regret {:>10.3}  [{:.3}, {:.3}]  phase-1 mean {:.1} rounds  recovery {:.2}",
            tr.label,
            tr.final_regret(),
            tr.ci_low.last().copied().unwrap_or(0.0),
            tr.ci_high.last().copied().unwrap_or(0.0),
            tr.phase1_mean,
            tr.recovery_rate,
        );
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run(args) => {
            let config = prepare(&args)?;
            let traces = with_pool(args.jobs, || harness::run_all(&config))??;
            report(&config, &traces)?;
        }
        Command::Sweep { run, param, values } => {
            let config = prepare(&run)?;
            let param: SweepParam = param.parse()?;
            let traces = with_pool(run.jobs, || harness::sweep(&config, param, &values))??;
            report(&config, &traces)?;
        }
        Command::Verify { cases, seed } => {
            let report = run_verification(cases, seed);
            for (name, check) in [
                ("knapsack dp vs exhaustive", &report.knapsack),
                ("noiseless common threshold", &report.noiseless_common),
                ("noiseless per-arm thresholds", &report.noiseless_per_arm),
            ] {
                let status = if check.all_passed() { "PASS" } else { "FAIL" };
                println!("{status} {name}: {}/{}", check.passed, check.cases);
                for f in &check.failures {
                    println!("    {f}");
                }
            }
            if !report.all_passed() {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
