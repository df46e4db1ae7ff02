use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use soco::algos::Lookahead;
use soco::bench::{self, AlgoId, AlgoSpec, ExperimentOptions, Scenario};
use soco::{verify, Error};

#[derive(Parser)]
#[command(name = "soco", version, about = "Online control with noisy multi-step predictions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and write one CSV row per (algorithm, W, seed).
    Run(RunArgs),
    /// Summarize a finished run: mean regret, standard error and bounds per group.
    Bounds {
        #[arg(long = "from")]
        from: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in property checks.
    Selftest {
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// planning, quadrotor or lowerbound
    #[arg(long)]
    scenario: String,
    /// Comma-separated list of rhig, rhgd, ogd, afhc, chc.
    #[arg(long, value_delimiter = ',', required = true)]
    algo: Vec<String>,
    /// Comma-separated lookahead windows; integers or "inf".
    #[arg(long = "W", value_delimiter = ',', default_value = "3")]
    w: Vec<String>,
    #[arg(long, default_value_t = 200)]
    seeds: usize,
    #[arg(long)]
    gamma: Option<f64>,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// key = value file overriding scenario parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra key=value overrides, applied after --config.
    #[arg(long = "set")]
    set: Vec<String>,
    /// CHC commitment level; defaults to min(3, W).
    #[arg(long)]
    v: Option<usize>,
    #[arg(long = "base-seed", default_value_t = 0)]
    base_seed: u64,
    #[arg(long)]
    threads: Option<usize>,
    /// Record wall time per run.
    #[arg(long)]
    timing: bool,
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn default_commitment(w: Lookahead, horizon: usize) -> usize {
    match w {
        Lookahead::Finite(w) => w.clamp(1, 3),
        Lookahead::Infinite => horizon.clamp(1, 3),
    }
}

fn build_scenario(args: &RunArgs) -> Result<Scenario, Error> {
    let mut scenario = Scenario::by_name(&args.scenario)?;
    let mut pairs = Vec::new();
    if let Some(g) = args.gamma {
        pairs.push(("gamma".to_string(), g.to_string()));
    }
    if let Some(path) = &args.config {
        pairs.extend(bench::parse_config(&std::fs::read_to_string(path)?)?);
    }
    for s in &args.set {
        let (k, v) = s.split_once('=').ok_or_else(|| Error::Config(format!("--set expects key=value, got {s:?}")))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    scenario.apply(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
    Ok(scenario)
}

fn run(args: RunArgs) -> Result<bool, Error> {
    let scenario = build_scenario(&args)?;
    let windows = args.w.iter().map(|w| w.parse::<Lookahead>()).collect::<Result<Vec<_>, _>>()?;
    let mut algorithms = Vec::new();
    for name in &args.algo {
        let algo: AlgoId = name.trim().parse()?;
        if algo == AlgoId::Ogd {
            algorithms.push(AlgoSpec::new(algo, Lookahead::Finite(0)));
            continue;
        }
        for &w in &windows {
            algorithms.push(match algo {
                AlgoId::Chc => AlgoSpec::chc(w, args.v.unwrap_or(default_commitment(w, scenario.horizon()))),
                _ => AlgoSpec::new(algo, w),
            });
        }
    }
    let opts = ExperimentOptions {
        n_seeds: args.seeds,
        base_seed: args.base_seed,
        threads: args.threads,
        timing: args.timing,
    };
    let reports = bench::run_experiment(&scenario, &algorithms, &opts)?;
    if let soco::bench::ScenarioKind::Quadrotor(_) = scenario.kind {
        eprintln!("L = {:.6} (largest Hessian eigenvalue)", scenario.cost_spec()?.smoothness());
    }
    let mut out = output(&args.out)?;
    bench::write_reports_csv(reports.iter().map(|r| &r.row), &mut out)?;
    out.flush()?;
    let mut clean = true;
    for r in reports.iter().filter(|r| r.error.is_some()) {
        clean = false;
        eprintln!(
            "{} W={} seed={}: {}",
            r.row.algorithm,
            r.row.lookahead,
            r.row.seed,
            r.error.as_deref().unwrap_or_default()
        );
    }
    Ok(clean)
}

fn bounds(from: PathBuf, out: Option<PathBuf>) -> Result<bool, Error> {
    let rows = bench::read_reports_csv(File::open(from)?)?;
    let summaries = bench::summarize(&rows);
    let mut w = output(&out)?;
    bench::write_summary_csv(&summaries, &mut w)?;
    w.flush()?;
    Ok(true)
}

fn selftest(seed: u64) -> Result<bool, Error> {
    let mut ok = true;
    for check in verify::selftest(seed)? {
        println!("{} {}: {}", if check.passed { "PASS" } else { "FAIL" }, check.name, check.detail);
        ok &= check.passed;
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Bounds { from, out } => bounds(from, out),
        Command::Selftest { seed } => selftest(seed),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
