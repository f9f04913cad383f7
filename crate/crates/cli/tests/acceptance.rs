//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use csb_core::estimation::{st_window, CommonSearch, PerArmSearch};
use csb_core::harness::verify::{knapsack_equivalence, noiseless_common, noiseless_per_arm};
use csb_core::harness::{
    load_config, run_all, run_experiment, sweep, AggregateTrace, ExperimentConfig, SweepParam,
    CSV_FILE, SUMMARY_FILE,
};
use csb_core::knapsack::theta_candidate_set;
use csb_core::policies::{run_csb_st_known, MultiPlayBandit};
use csb_core::{environment_step, CsbInstance, ReplicationRng};

const SEED: u64 = 2020;
const SEARCH_RUNS: u64 = 100;
const MAX_SEARCH_ROUNDS: usize = 1_000_000;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn config(name: &str) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn finals(traces: &[AggregateTrace]) -> Vec<f64> {
    traces.iter().map(AggregateTrace::final_regret).collect()
}

fn fmt_values(values: &[f64], regrets: &[f64]) -> String {
    values
        .iter()
        .zip(regrets)
        .map(|(v, r)| format!("{v} -> {r:.2}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn failures(list: &[String]) -> String {
    if list.is_empty() {
        String::new()
    } else {
        format!("; {}", list.join("; "))
    }
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn knapsack_oracle() -> Outcome {
    let start = Instant::now();
    let res = knapsack_equivalence(200, SEED);
    let elapsed = start.elapsed();
    verdict(
        res.all_passed() && elapsed < Duration::from_secs(10),
        format!(
            "{}/{} within 2K/S, {elapsed:.2?}{}",
            res.passed,
            res.cases,
            failures(&res.failures)
        ),
    )
}

fn common_recovery() -> Outcome {
    let inst = CsbInstance::instance1();
    let (k, q) = (inst.k(), inst.budget());
    let w = st_window(k, q, 0.1, 0.1).map_err(|e| e.to_string())?;
    let size = theta_candidate_set(k, q).map_err(|e| e.to_string())?.len();
    let bound = 2 * w * (size as f64).log2().ceil() as usize;
    let mut hits = 0;
    let mut longest = 0;
    for rep in 0..SEARCH_RUNS {
        let mut rng = ReplicationRng::new(SEED, rep);
        let mut search = CommonSearch::new(k, q, 0.1, 0.1).map_err(|e| e.to_string())?;
        while !search.is_done() {
            let fb = environment_step(&inst, &search.allocation(k), &mut rng.env)
                .map_err(|e| e.to_string())?;
            search.step(&fb).map_err(|e| e.to_string())?;
        }
        longest = longest.max(search.rounds_used());
        if search.estimate().map(|c| c.value) == Some(0.6) {
            hits += 1;
        }
    }
    verdict(
        hits >= 85 && longest <= bound,
        format!("{hits}/{SEARCH_RUNS} recovered 0.6, longest phase {longest} <= {bound} rounds"),
    )
}

fn per_arm_recovery() -> Outcome {
    let inst = CsbInstance::instance2();
    let (k, q, gamma) = (inst.k(), inst.budget(), 1e-3);
    let theta = inst.thresholds();
    let mut hits = 0;
    let mut unfinished = 0;
    for rep in 0..SEARCH_RUNS {
        let mut rng = ReplicationRng::new(SEED, rep);
        let mut search = PerArmSearch::new(k, q, gamma, 0.1, 0.1).map_err(|e| e.to_string())?;
        while !search.is_done() && search.rounds_used() < MAX_SEARCH_ROUNDS {
            let (alloc, tested) = search.allocation(q, &mut rng.policy);
            let fb = environment_step(&inst, &alloc, &mut rng.env).map_err(|e| e.to_string())?;
            search.step(&fb, &tested);
        }
        if !search.is_done() {
            unfinished += 1;
            continue;
        }
        let est = search.estimates();
        if est
            .iter()
            .zip(&theta)
            .all(|(&e, &t)| e >= t && e <= t + gamma)
        {
            hits += 1;
        }
    }
    verdict(
        hits >= 85,
        format!("{hits}/{SEARCH_RUNS} within [theta, theta + gamma], {unfinished} unfinished"),
    )
}

fn noiseless() -> Outcome {
    let common = noiseless_common(50, SEED);
    let per_arm = noiseless_per_arm(50, SEED + 1);
    verdict(
        common.all_passed() && per_arm.all_passed(),
        format!(
            "common {}/{}, per-arm {}/{}{}{}",
            common.passed,
            common.cases,
            per_arm.passed,
            per_arm.cases,
            failures(&common.failures),
            failures(&per_arm.failures)
        ),
    )
}

fn sublinear() -> Outcome {
    let cfg = config("instance1.json");
    let start = Instant::now();
    let agg = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let half = agg.mean[cfg.horizon / 2 - 1];
    let end = agg.final_regret();
    let envelope = agg.lower_bound.ok_or("no envelope reported")?;
    verdict(
        end - half <= half && end >= 0.1 * envelope && elapsed < Duration::from_secs(60),
        format!(
            "R({})={half:.2}, R({})={end:.2}, envelope {envelope:.2}, {:.2?}",
            cfg.horizon / 2,
            cfg.horizon,
            elapsed
        ),
    )
}

fn budget_trend() -> Outcome {
    let values = [2.0, 6.0, 10.0];
    let r = finals(
        &sweep(&config("instance1.json"), SweepParam::Q, &values).map_err(|e| e.to_string())?,
    );
    verdict(
        r.windows(2).all(|w| w[0] < w[1]),
        format!("q sweep, want increasing: {}", fmt_values(&values, &r)),
    )
}

fn threshold_trend() -> Outcome {
    let values = [0.3, 0.6, 0.9];
    let r = finals(
        &sweep(&config("instance1.json"), SweepParam::ThetaC, &values)
            .map_err(|e| e.to_string())?,
    );
    verdict(
        r.windows(2).all(|w| w[0] > w[1]),
        format!(
            "theta_c sweep, want decreasing: {}",
            fmt_values(&values, &r)
        ),
    )
}

fn cts_vs_lcb() -> Outcome {
    let traces = run_all(&config("fig3.json")).map_err(|e| e.to_string())?;
    let [cts, lcb] = traces.as_slice() else {
        return Err(format!("expected two series, got {}", traces.len()));
    };
    verdict(
        cts.final_regret() <= lcb.final_regret(),
        format!(
            "{} {:.2} vs {} {:.2}",
            cts.label,
            cts.final_regret(),
            lcb.label,
            lcb.final_regret()
        ),
    )
}

fn reduction_to_multiple_play() -> Outcome {
    let inst = CsbInstance::instance1();
    let horizon = 5000;
    let bandit = MultiPlayBandit {
        mu: inst.mu().to_vec(),
        plays: 10,
    };
    for seed in 0..10 {
        let mut csb = Vec::with_capacity(horizon);
        run_csb_st_known(
            &inst,
            horizon,
            &mut ReplicationRng::new(seed, 0),
            &mut |e| csb.push(e.uncovered.expect("exploitation round").to_vec()),
        )
        .map_err(|e| e.to_string())?;
        let mp = bandit.run_thompson(horizon, &mut ReplicationRng::new(seed, 0));
        if csb.len() != mp.len() {
            return Err(format!("seed {seed}: {} vs {} rounds", csb.len(), mp.len()));
        }
        if let Some(t) = csb.iter().zip(&mp).position(|(a, b)| a != b) {
            return Err(format!("seed {seed}: sequences diverge at round {}", t + 1));
        }
    }
    Ok(format!("10 seeds x {horizon} rounds identical"))
}

fn run_cli(out: &Path) -> Result<(), String> {
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/fig3.json");
    let status = Command::new(env!("CARGO_BIN_EXE_csb"))
        .arg("run")
        .arg("--config")
        .arg(&cfg)
        .args(["--reps", "4", "--jobs", "2", "--out"])
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(String::from_utf8_lossy(&status.stderr).into_owned());
    }
    Ok(())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let outs: Vec<PathBuf> = ["a", "b"].iter().map(|n| dir.path().join(n)).collect();
    for out in &outs {
        run_cli(out)?;
    }
    for f in [CSV_FILE, SUMMARY_FILE] {
        let a = std::fs::read(outs[0].join(f)).map_err(|e| e.to_string())?;
        let b = std::fs::read(outs[1].join(f)).map_err(|e| e.to_string())?;
        if a != b {
            return Err(format!("{f} differs between runs"));
        }
    }
    Ok(format!("{CSV_FILE} and {SUMMARY_FILE} byte-identical"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("knapsack DP matches exhaustive search", knapsack_oracle),
        ("common threshold recovery", common_recovery),
        ("per-arm threshold recovery", per_arm_recovery),
        ("noiseless searches", noiseless),
        ("sublinear regret on instance 1", sublinear),
        ("regret increases with budget", budget_trend),
        ("regret decreases with threshold", threshold_trend),
        ("CTS no worse than LCB on instance 2", cts_vs_lcb),
        (
            "known threshold reduces to multiple-play TS",
            reduction_to_multiple_play,
        ),
        ("csb run is deterministic", determinism),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        let (status, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{status} {:>2}. {name}: {detail}", n + 1);
    }
    println!(
        "acceptance: {}/{} passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
