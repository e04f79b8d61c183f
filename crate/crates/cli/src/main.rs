//! Command-line front end for the sphere-indexed queueing experiments.
//!
//! Exit status: 0 on success, 1 on invalid input or runtime error, 2 when
//! the run completes but one of its checks fails.

use clap::{Args, Parser, Subcommand};
use sphereq::runner::{
    parse_config, run_experiment, run_selfcheck, CheckOutcome, ExperimentConfig, RunReport,
};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

const DEMO_FIXED_N: &str = include_str!("../../../configs/demo-fixed-n.toml");
const DEMO_VARYING_N: &str = include_str!("../../../configs/demo-varying-n.toml");

#[derive(Parser)]
#[command(
    name = "sphereq",
    version,
    about = "Heavy-traffic experiments for queues with qubit-sphere indexed arrivals"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Replications per ladder cell.
    #[arg(long)]
    reps: Option<usize>,
    /// Write per-replication path CSVs.
    #[arg(long)]
    paths: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the algebra and reflection invariant suites.
    Selfcheck {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Fixed-n ladder demo (one class, r = 16, 64, 256, k = 1..3).
    DemoFixedN {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Varying-n ladder demo (n = 1..4).
    DemoVaryingN {
        #[command(flatten)]
        overrides: Overrides,
    },
}

fn apply(mut cfg: ExperimentConfig, o: &Overrides) -> ExperimentConfig {
    if let Some(out) = &o.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = o.seed {
        cfg.seed = seed;
    }
    if let Some(reps) = o.reps {
        cfg.reps = reps;
    }
    cfg.emit_paths |= o.paths;
    cfg
}

fn print_checks(checks: &[CheckOutcome]) {
    for c in checks {
        let tag = if c.pass { "PASS" } else { "FAIL" };
        println!(
            "{tag} {} ({} cases, {} failures, max error {:e})",
            c.name, c.cases, c.failures, c.max_error
        );
    }
}

fn print_report(r: &RunReport) {
    if !r.cells.is_empty() {
        println!(
            "{:>10} {:>5} {:>7} {:>8} {:>8} {:>8} {:>10}",
            "mode", "level", "r", "theta_k", "ks", "crit", "fluid"
        );
        for c in &r.cells {
            println!(
                "{:>10} {:>5} {:>7} {:>8.4} {:>8.4} {:>8.4} {:>10.5}",
                c.mode,
                c.level,
                c.r,
                c.theta_k,
                c.comparison.ks,
                c.comparison.ks_critical_1pct,
                c.fluid_sup_dev
            );
        }
    }
    print_checks(&r.checks);
    for f in &r.files {
        println!("wrote {}", f.display());
    }
    for (name, secs) in &r.timings {
        eprintln!("time {name}: {secs:.2} s");
    }
}

fn run(src: Result<ExperimentConfig, String>, o: &Overrides) -> ExitCode {
    let cfg = match src {
        Ok(cfg) => apply(cfg, o),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match run_experiment(&cfg) {
        Ok(report) => {
            print_report(&report);
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, overrides } => {
            let src = std::fs::read_to_string(&config)
                .map_err(|e| format!("{}: {e}", config.display()))
                .and_then(|s| parse_config(&s).map_err(|e| e.to_string()));
            run(src, &overrides)
        }
        Command::DemoFixedN { overrides } => run(
            parse_config(DEMO_FIXED_N).map_err(|e| e.to_string()),
            &overrides,
        ),
        Command::DemoVaryingN { overrides } => run(
            parse_config(DEMO_VARYING_N).map_err(|e| e.to_string()),
            &overrides,
        ),
        Command::Selfcheck { seed } => {
            let start = Instant::now();
            let checks = run_selfcheck(seed);
            print_checks(&checks);
            eprintln!("time selfcheck: {:.2} s", start.elapsed().as_secs_f64());
            if checks.iter().all(|c| c.pass) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
    }
}
