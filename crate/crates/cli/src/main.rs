//! `tiersim`: run pipeline simulations, the pool and scheduler sweeps, and
//! windowed stream queries.
//!
//! Exit codes: 0 on success, 1 when a run fails, 2 on usage or validation
//! errors.

use std::fs;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use tiersim_core::harness::{
    self, cmd_simulate, cmd_sweep_pools, cmd_sweep_schedulers, deltas_against, fmt_makespan, fmt_utilization,
    render_csv, render_svg, resolve_pool, ChartMetric, ExperimentSpec, HarnessError, ResultTable,
};
use tiersim_core::platform::{Contention, PoolConfig};
use tiersim_core::workload::parse_workload;
use tiersim_core::{canonical_ds_workload, CommMode, SchedulerKind, WorkloadDag};
use tiersim_stream::{evaluate, neubot_series, parse_query, BoundedBuffer, HistoricStore, StreamError, StreamTuple};

#[derive(Parser)]
#[command(name = "tiersim", version, about = "Two-tier pipeline scheduling simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scheduler on one pool.
    Simulate(SimulateArgs),
    /// Run one scheduler over the ARM x Xeon pool grid plus the edge-only and server-only pools.
    SweepPools(SweepPoolsArgs),
    /// Run several schedulers on one pool and compare them with round robin.
    SweepSchedulers(SweepSchedulersArgs),
    /// Evaluate a continuous query once against a store and live tuples.
    StreamEval(StreamEvalArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum ContentionArg {
    None,
    Serial,
}

#[derive(Clone, Copy, ValueEnum)]
enum CommModeArg {
    Location,
    Static,
}

/// Settings shared by the simulation commands. Flags override the recipe.
#[derive(Args)]
struct RunArgs {
    /// Experiment recipe (JSON); relative paths inside it resolve against its directory.
    #[arg(long)]
    recipe: Option<PathBuf>,
    /// Workload DAG (JSON). Defaults to the shipped 16-task pipeline.
    #[arg(long)]
    workload: Option<PathBuf>,
    /// Pipeline instances submitted.
    #[arg(long)]
    instances: Option<u32>,
    /// Seconds between instance arrivals.
    #[arg(long)]
    delay: Option<f64>,
    /// Link bandwidth in Mbit/s.
    #[arg(long)]
    mbps: Option<f64>,
    #[arg(long, value_enum)]
    contention: Option<ContentionArg>,
    #[arg(long, value_enum)]
    comm_mode: Option<CommModeArg>,
    /// Push outputs of exit tasks run on the backend back to the frontend.
    #[arg(long, value_enum)]
    result_return: Option<OnOff>,
    /// Write the result table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write a bar chart of makespans as SVG.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Pool file (JSON). Defaults to 3 ARM, 1 Volta, 3 Xeon, 1 Tesla, 1 Alveo.
    #[arg(long)]
    pool: Option<PathBuf>,
    #[arg(long, default_value = "eft")]
    scheduler: SchedulerKind,
    /// Write every task placement as CSV.
    #[arg(long)]
    timeline: Option<PathBuf>,
}

#[derive(Args)]
struct SweepPoolsArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, default_value = "eft")]
    scheduler: SchedulerKind,
    /// ARM counts of the grid, `N` or `MIN-MAX`.
    #[arg(long, value_parser = parse_count_range)]
    arm: Option<RangeInclusive<u32>>,
    /// Xeon counts of the grid, `N` or `MIN-MAX`.
    #[arg(long, value_parser = parse_count_range)]
    xeon: Option<RangeInclusive<u32>>,
}

#[derive(Args)]
struct SweepSchedulersArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    pool: Option<PathBuf>,
    /// Comma-separated schedulers. Defaults to eft,etf,rr.
    #[arg(long, value_delimiter = ',')]
    schedulers: Option<Vec<SchedulerKind>>,
    /// Write a bar chart of mean utilization as SVG.
    #[arg(long)]
    util_svg: Option<PathBuf>,
}

#[derive(Args)]
struct StreamEvalArgs {
    /// Historic store file.
    #[arg(long)]
    store: PathBuf,
    /// Query text.
    #[arg(long, conflicts_with = "query_file", required_unless_present = "query_file")]
    query: Option<String>,
    /// File holding the query text.
    #[arg(long)]
    query_file: Option<PathBuf>,
    /// Evaluation time, seconds since the epoch. Defaults to the newest tuple seen.
    #[arg(long, allow_negative_numbers = true)]
    now: Option<i64>,
    /// Registration time of the query. Defaults to `now`.
    #[arg(long, allow_negative_numbers = true)]
    registered_at: Option<i64>,
    /// Live tuples in store line format, pushed through the buffer before evaluating.
    #[arg(long)]
    live: Option<PathBuf>,
    /// Push this many synthetic speed-test tuples, continuing after the store's last tuple.
    #[arg(long, conflicts_with = "live")]
    live_synthetic: Option<u32>,
    /// Live buffer capacity in tuples; overflow spills into the store.
    #[arg(long, default_value_t = 64)]
    capacity: usize,
    /// Recreate the store with this many days of synthetic speed-test data ending at `now`.
    #[arg(long)]
    synthesize_days: Option<u32>,
    /// Seconds between synthetic tuples.
    #[arg(long, default_value_t = 600)]
    step: i64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn parse_count_range(s: &str) -> Result<RangeInclusive<u32>, String> {
    let bad = || format!("expected N or MIN-MAX, got `{s}`");
    let (lo, hi) = s.split_once('-').unwrap_or((s, s));
    let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
    let hi: u32 = hi.trim().parse().map_err(|_| bad())?;
    if lo == 0 || lo > hi {
        return Err(bad());
    }
    Ok(lo..=hi)
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn usage(error: impl Into<anyhow::Error>) -> Self {
        Self { code: 2, error: error.into() }
    }

    fn runtime(error: impl Into<anyhow::Error>) -> Self {
        Self { code: 1, error: error.into() }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        if e.is_validation() { Failure::usage(e) } else { Failure::runtime(e) }
    }
}

impl From<StreamError> for Failure {
    fn from(e: StreamError) -> Self {
        match e {
            StreamError::Io { .. } | StreamError::EmptyWindow => Failure::runtime(e),
            _ => Failure::usage(e),
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::SweepPools(a) => sweep_pools(a),
        Command::SweepSchedulers(a) => sweep_schedulers(a),
        Command::StreamEval(a) => stream_eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn relative_to(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p.as_mut().filter(|p| p.is_relative()) {
        *path = base.join(&*path);
    }
}

/// Recipe with flags applied on top.
fn experiment(run: &RunArgs) -> Result<ExperimentSpec, Failure> {
    let mut spec = match &run.recipe {
        Some(path) => {
            let mut spec = ExperimentSpec::from_json(&harness::read_file(path)?)?;
            let base = path.parent().unwrap_or(Path::new("."));
            relative_to(base, &mut spec.workload);
            relative_to(base, &mut spec.csv);
            relative_to(base, &mut spec.svg);
            relative_to(base, &mut spec.timeline);
            spec
        }
        None => ExperimentSpec::default(),
    };
    if let Some(w) = &run.workload {
        spec.workload = Some(w.clone());
    }
    if let Some(n) = run.instances {
        spec.instances = n;
    }
    if let Some(d) = run.delay {
        spec.delay = d;
    }
    if let Some(m) = run.comm_mode {
        spec.comm_mode = match m {
            CommModeArg::Location => CommMode::Location,
            CommModeArg::Static => CommMode::Static,
        };
    }
    if let Some(r) = run.result_return {
        spec.result_return = matches!(r, OnOff::On);
    }
    if run.csv.is_some() {
        spec.csv = run.csv.clone();
    }
    if run.svg.is_some() {
        spec.svg = run.svg.clone();
    }
    Ok(spec)
}

/// Applies link flags to the recipe link and to an inline pool's link.
fn apply_link_flags(run: &RunArgs, spec: &mut ExperimentSpec) -> Outcome {
    let links = std::iter::once(&mut spec.link).chain(spec.pool.as_mut().map(|p| &mut p.link));
    for link in links {
        if let Some(rate) = run.mbps {
            if !(rate.is_finite() && rate > 0.0) {
                return Err(Failure::usage(anyhow!("--mbps must be positive, got {rate}")));
            }
            link.rate = rate;
        }
        if let Some(c) = run.contention {
            link.contention = match c {
                ContentionArg::None => Contention::None,
                ContentionArg::Serial => Contention::Serialized,
            };
        }
    }
    Ok(())
}

fn load_pool(path: &Path) -> Result<PoolConfig, Failure> {
    let mut config = PoolConfig::from_json(&harness::read_file(path)?).map_err(HarnessError::from)?;
    if config.label.is_none() {
        config.label = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    }
    Ok(config)
}

fn load_workload(spec: &ExperimentSpec) -> Result<WorkloadDag, Failure> {
    match &spec.workload {
        Some(path) => Ok(parse_workload(&harness::read_file(path)?).map_err(HarnessError::from)?),
        None => Ok(canonical_ds_workload()),
    }
}

fn write_output(path: &Path, contents: &str) -> Outcome {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).map_err(Failure::runtime)?;
    }
    Ok(harness::write_file(path, contents)?)
}

fn emit(spec: &ExperimentSpec, table: &ResultTable, title: &str) -> Outcome {
    if let Some(path) = &spec.csv {
        write_output(path, &render_csv(table)?)?;
    }
    if let Some(path) = &spec.svg {
        write_output(path, &render_svg(table, ChartMetric::Makespan, title)?)?;
    }
    Ok(())
}

fn print_table(table: &ResultTable) {
    println!("{:<14} {:<5} {:>9} {:>13} {:>9}", "pool", "sched", "instances", "makespan_s", "mean_util");
    for r in &table.rows {
        println!(
            "{:<14} {:<5} {:>9} {:>13} {:>9}",
            r.pool,
            r.scheduler,
            r.instances,
            fmt_makespan(r.makespan_s),
            fmt_utilization(r.mean_utilization)
        );
    }
}

fn simulate(a: SimulateArgs) -> Outcome {
    let mut spec = experiment(&a.run)?;
    if let Some(path) = &a.pool {
        spec.pool = Some(load_pool(path)?);
    }
    if a.timeline.is_some() {
        spec.timeline = a.timeline.clone();
    }
    apply_link_flags(&a.run, &mut spec)?;
    let dag = load_workload(&spec)?;
    let (pool, link) = resolve_pool(spec.pool.as_ref(), spec.link)?;
    let options = tiersim_core::SimOptions { link, ..spec.options() };
    let (table, timeline) = cmd_simulate(&dag, &pool, a.scheduler, spec.submission()?, options)?;
    print_table(&table);
    emit(&spec, &table, &format!("{} on {}", a.scheduler.name(), pool.label))?;
    if let Some(path) = &spec.timeline {
        write_output(path, &timeline.export())?;
    }
    Ok(())
}

fn sweep_pools(a: SweepPoolsArgs) -> Outcome {
    let mut spec = experiment(&a.run)?;
    apply_link_flags(&a.run, &mut spec)?;
    let mut sweep = spec.sweep.clone().unwrap_or_default();
    if let Some(r) = a.arm.clone() {
        sweep.arm_range = r;
    }
    if let Some(r) = a.xeon.clone() {
        sweep.xeon_range = r;
    }
    let scheduler = match spec.scheduler_kinds()?.as_slice() {
        [] => a.scheduler,
        [one] => *one,
        _ => return Err(Failure::usage(anyhow!("a pool sweep takes one scheduler"))),
    };
    let dag = load_workload(&spec)?;
    let result = cmd_sweep_pools(&dag, &sweep, scheduler, spec.submission()?, spec.options())?;
    print_table(&result.table);
    let best = &result.table.rows[result.best];
    println!("best configuration: {} (makespan {} s)", best.pool, fmt_makespan(best.makespan_s));
    emit(&spec, &result.table, &format!("Execution time per pool configuration ({})", scheduler.name()))
}

fn sweep_schedulers(a: SweepSchedulersArgs) -> Outcome {
    let mut spec = experiment(&a.run)?;
    if let Some(path) = &a.pool {
        spec.pool = Some(load_pool(path)?);
    }
    apply_link_flags(&a.run, &mut spec)?;
    let schedulers = match &a.schedulers {
        Some(s) => s.clone(),
        None if !spec.schedulers.is_empty() => spec.scheduler_kinds()?,
        None => SchedulerKind::ALL.to_vec(),
    };
    let dag = load_workload(&spec)?;
    let (pool, link) = resolve_pool(spec.pool.as_ref(), spec.link)?;
    let options = tiersim_core::SimOptions { link, ..spec.options() };
    let table = cmd_sweep_schedulers(&dag, &pool, &schedulers, spec.submission()?, options)?;
    print_table(&table);
    let baseline = SchedulerKind::Rr.name();
    if let Some(deltas) = deltas_against(&table, baseline) {
        for d in deltas {
            println!("{}", d.render(baseline));
        }
    }
    emit(&spec, &table, &format!("Execution time per scheduler on {}", pool.label))?;
    if let Some(path) = &a.util_svg {
        write_output(path, &render_svg(&table, ChartMetric::MeanUtilization, &format!("Mean utilization on {}", pool.label))?)?;
    }
    Ok(())
}

fn read_live(path: &Path) -> Result<Vec<StreamTuple>, Failure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(Failure::runtime)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| StreamTuple::decode(l).map_err(|e| Failure::usage(anyhow!("{}:{}: {e}", path.display(), i + 1))))
        .collect()
}

fn stream_eval(a: StreamEvalArgs) -> Outcome {
    let text = match (&a.query, &a.query_file) {
        (Some(q), _) => q.clone(),
        (None, Some(p)) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display())).map_err(Failure::runtime)?,
        (None, None) => unreachable!("clap requires one of them"),
    };
    let query = parse_query(&text).map_err(Failure::usage)?;
    let name = query.historic_source.clone();
    let live_tuples = a.live.as_deref().map(read_live).transpose()?.unwrap_or_default();

    let store = match a.synthesize_days {
        Some(days) => {
            let end = a.now.ok_or_else(|| Failure::usage(anyhow!("--synthesize-days needs --now")))?;
            if a.step <= 0 {
                return Err(Failure::usage(anyhow!("--step must be positive")));
            }
            let store = HistoricStore::create(name, &a.store)?;
            let start = end - i64::from(days) * 86_400;
            let history: Vec<_> = neubot_series(a.seed, start, end, a.step).collect();
            store.append_all(&history)?;
            store
        }
        None => HistoricStore::open(name, &a.store)?,
    };
    let store = Arc::new(store);
    let buffer = BoundedBuffer::new(a.capacity, store.clone())?;
    let live_tuples = match a.live_synthetic {
        Some(n) => {
            if a.step <= 0 {
                return Err(Failure::usage(anyhow!("--step must be positive")));
            }
            let from = store.last_timestamp().map_or(a.now.unwrap_or(0), |t| t + a.step);
            neubot_series(a.seed.wrapping_add(1), from, from + i64::from(n) * a.step, a.step).collect()
        }
        None => live_tuples,
    };
    for t in live_tuples {
        buffer.push(t)?;
    }
    let newest = buffer.snapshot().last().map(|t| t.timestamp).or(store.last_timestamp());
    let now = a.now.or(newest).ok_or_else(|| Failure::usage(anyhow!("no data and no --now")))?;
    let bound = query.register(a.registered_at.unwrap_or(now));
    store.reset_stats();
    let result = evaluate(&bound, &store, &buffer, now)?;
    println!("query: {query}");
    println!("result: {}", result.encode());
    println!("store lines decoded: {}", store.stats().lines_decoded);
    Ok(())
}
