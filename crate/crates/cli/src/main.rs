//! `bsus`: run SuS / BSuS, replicated experiments and DMC references.

mod config;
mod error;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bsus_core::benchmarks::{benchmark, dmc_estimate, run_experiment, Algorithm, ExperimentConfig};
use bsus_core::bsus::TreeRecord;
use bsus_core::{Execution, RngStream};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use config::{load_config, Overrides};
use error::CliError;
use output::{rows_csv, to_json, write_atomic};

#[derive(Parser)]
#[command(name = "bsus", version, about = "Subset Simulation and Branching Subset Simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One SuS run; writes tree.json and summary.json.
    RunSus(RunArgs),
    /// One BSuS run; writes tree.json and summary.json.
    RunBsus(RunArgs),
    /// Replicated runs; writes runs.csv and report.json.
    Experiment(ExperimentArgs),
    /// Direct Monte Carlo reference probability; writes dmc.json.
    DmcReference(DmcArgs),
    /// Prints one line per node of a saved tree.json.
    Report(ReportArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// TOML experiment config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    benchmark: Option<String>,
    /// Total input dimension (extra coordinates are dummies).
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Level size.
    #[arg(long)]
    n: Option<usize>,
    /// Level probability.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    graph_budget: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            benchmark: self.benchmark.clone(),
            dim: self.dim,
            seed: self.seed,
            level_size: self.n,
            level_probability: self.p,
            graph_budget: self.graph_budget,
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Sus,
    Bsus,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_enum)]
    algorithm: Option<AlgorithmArg>,
    #[arg(long)]
    replications: Option<usize>,
    /// Worker threads for replications (default: logical cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct DmcArgs {
    #[arg(long)]
    benchmark: String,
    #[arg(long)]
    dim: Option<usize>,
    /// Threshold `b`; defaults to the benchmark's failure threshold.
    #[arg(long, allow_hyphen_values = true)]
    threshold: Option<f64>,
    #[arg(long, default_value_t = 10_000_000)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// A tree.json written by run-sus or run-bsus.
    tree: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::RunSus(args) => single_run(&args.common, Algorithm::Sus),
        Command::RunBsus(args) => single_run(&args.common, Algorithm::Bsus),
        Command::Experiment(args) => experiment(&args),
        Command::DmcReference(args) => dmc_reference(&args),
        Command::Report(args) => report(&args.tree),
    }
}

fn resolve(common: &CommonArgs, mut overrides: Overrides) -> Result<ExperimentConfig, CliError> {
    if common.config.is_none() && common.benchmark.is_none() {
        return Err(CliError::Validation("pass --config or --benchmark".into()));
    }
    if overrides.level_size.is_none() && common.config.is_none() {
        overrides.level_size = Some(500);
    }
    load_config(common.config.as_deref(), &overrides)
}

#[derive(Serialize)]
struct RunSummary<'a> {
    benchmark: &'a str,
    algorithm: Algorithm,
    seed: u64,
    threshold: Option<f64>,
    estimate: Option<f64>,
    cov: Option<f64>,
    eval_count: u64,
    levels: usize,
    branches: usize,
    maxima_found: Option<usize>,
}

fn single_run(common: &CommonArgs, algorithm: Algorithm) -> Result<(), CliError> {
    let config = resolve(
        common,
        Overrides {
            algorithm: Some(algorithm),
            ..common.overrides()
        },
    )?;
    let prepared = config.prepare()?;
    let (row, record) = prepared.run_with_record(config.seed)?;
    let summary = RunSummary {
        benchmark: &config.benchmark,
        algorithm,
        seed: config.seed,
        threshold: prepared.threshold(),
        estimate: row.estimate,
        cov: row.cov,
        eval_count: row.eval_count,
        levels: row.levels,
        branches: row.branches,
        maxima_found: row.maxima_found,
    };
    let summary_json = to_json(&summary)?;
    write_atomic(&common.out.join("tree.json"), &to_json(&record)?)?;
    write_atomic(&common.out.join("summary.json"), &summary_json)?;
    print!("{}", String::from_utf8_lossy(&summary_json));
    Ok(())
}

/// Runs `f` on a pool of `workers` threads; one worker means sequential.
fn with_workers<T: Send>(
    workers: Option<usize>,
    f: impl FnOnce(Execution) -> T + Send,
) -> Result<T, CliError> {
    if workers == Some(0) {
        return Err(CliError::Validation("--workers must be >= 1".into()));
    }
    if workers == Some(1) {
        return Ok(f(Execution::Sequential));
    }
    #[cfg(feature = "parallel")]
    {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(w) = workers {
            builder = builder.num_threads(w);
        }
        let pool = builder.build().map_err(|e| CliError::Runtime(e.to_string()))?;
        Ok(pool.install(|| f(Execution::Parallel)))
    }
    #[cfg(not(feature = "parallel"))]
    Ok(f(Execution::Sequential))
}

#[derive(Serialize)]
struct ReportJson<'a> {
    config: &'a ExperimentConfig,
    aggregates: &'a bsus_core::benchmarks::Aggregates,
    kde: &'a [(f64, f64)],
}

fn experiment(args: &ExperimentArgs) -> Result<(), CliError> {
    let config = resolve(
        &args.common,
        Overrides {
            algorithm: args.algorithm.map(|a| match a {
                AlgorithmArg::Sus => Algorithm::Sus,
                AlgorithmArg::Bsus => Algorithm::Bsus,
            }),
            replications: args.replications,
            ..args.common.overrides()
        },
    )?;
    let report = with_workers(args.workers, |exec| run_experiment(&config, exec))??;
    let json = to_json(&ReportJson {
        config: &report.config,
        aggregates: &report.aggregates,
        kde: &report.kde,
    })?;
    write_atomic(&args.common.out.join("runs.csv"), &rows_csv(&report.rows)?)?;
    write_atomic(&args.common.out.join("report.json"), &json)?;
    print!("{}", String::from_utf8_lossy(&to_json(&report.aggregates)?));
    Ok(())
}

#[derive(Serialize)]
struct DmcJson<'a> {
    benchmark: &'a str,
    dim: usize,
    threshold: f64,
    seed: u64,
    samples: u64,
    hits: u64,
    estimate: f64,
    cov: Option<f64>,
}

fn dmc_reference(args: &DmcArgs) -> Result<(), CliError> {
    let bench = benchmark(&args.benchmark, args.dim)?;
    let threshold = args
        .threshold
        .or(bench.failure_threshold)
        .ok_or_else(|| CliError::Validation(format!("{} has no failure threshold; pass --threshold", bench.name)))?;
    let stream = RngStream::new(args.seed);
    let est = with_workers(args.workers, |exec| {
        dmc_estimate(bench.pf.as_ref(), threshold, args.samples, exec, &stream)
    })??;
    let json = to_json(&DmcJson {
        benchmark: bench.name,
        dim: bench.dim(),
        threshold,
        seed: args.seed,
        samples: est.samples,
        hits: est.hits,
        estimate: est.estimate,
        cov: est.cov,
    })?;
    write_atomic(&args.out.join("dmc.json"), &json)?;
    print!("{}", String::from_utf8_lossy(&json));
    Ok(())
}

fn report(path: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    let record: TreeRecord = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{} is not a tree record: {e}", path.display())))?;
    println!(
        "level size {}  level probability {}  evaluations {}  nodes {}",
        record.level_size,
        record.level_probability,
        record.eval_count,
        record.nodes.len()
    );
    for line in record.summary_lines() {
        println!("{line}");
    }
    Ok(())
}
