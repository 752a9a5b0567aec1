//! Experiment drivers behind the command-line front end: single runs, the
//! pool-configuration sweep, the scheduler sweep, and CSV/SVG emission.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{run_simulation_with, CommMode, EngineError, SimOptions, Timeline};
use crate::metrics::{summarize, MetricsError, RunSummary};
use crate::platform::{build_pool, enumerate_sweep, standard_config, LinkModel, PlatformError, PoolConfig, PoolSweepSpec, ResourcePool};
use crate::schedulers::SchedulerKind;
use crate::workload::{JobSubmission, WorkloadDag, WorkloadError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Platform(#[from] PlatformError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("result table is empty")]
    EmptyTable,
    #[error("duplicate row for pool '{pool}' and scheduler '{scheduler}'")]
    DuplicateRow { pool: String, scheduler: String },
    #[error("bad recipe: {0}")]
    Recipe(String),
}

impl HarnessError {
    /// True for errors caused by bad input rather than a failing run.
    pub fn is_validation(&self) -> bool {
        !matches!(self, HarnessError::Io { .. })
    }
}

pub fn read_file(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    fs::write(path, contents).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })
}

/// Experiment recipe, as stored under `experiments/`. Missing keys take the
/// defaults of the reference setup: 100 instances at once over a 12 Mbps link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub workload: Option<PathBuf>,
    pub instances: u32,
    pub delay: f64,
    pub link: LinkModel,
    pub comm_mode: CommMode,
    pub result_return: bool,
    pub sweep: Option<PoolSweepSpec>,
    pub pool: Option<PoolConfig>,
    pub schedulers: Vec<String>,
    pub csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub timeline: Option<PathBuf>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            workload: None,
            instances: 100,
            delay: 0.0,
            link: LinkModel::default(),
            comm_mode: CommMode::Location,
            result_return: true,
            sweep: None,
            pool: None,
            schedulers: Vec::new(),
            csv: None,
            svg: None,
            timeline: None,
        }
    }
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Recipe(e.to_string()))
    }

    pub fn submission(&self) -> Result<JobSubmission, HarnessError> {
        Ok(JobSubmission::new(self.instances, self.delay)?)
    }

    pub fn options(&self) -> SimOptions {
        SimOptions { link: self.link, comm_mode: self.comm_mode, result_return: self.result_return }
    }

    pub fn scheduler_kinds(&self) -> Result<Vec<SchedulerKind>, HarnessError> {
        self.schedulers
            .iter()
            .map(|s| s.parse().map_err(|e: crate::schedulers::UnknownScheduler| HarnessError::Recipe(e.to_string())))
            .collect()
    }
}

/// The configuration the pool sweep identifies: 3 ARM, 1 Volta, 3 Xeon,
/// 1 Tesla, 1 Alveo.
pub fn best_pool_config() -> PoolConfig {
    standard_config("3arm-3xeon", [3, 1, 3, 1, 1])
}

/// Rows of one experiment, unique by (pool, scheduler).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<RunSummary>,
}

impl ResultTable {
    pub fn new(rows: Vec<RunSummary>) -> Result<Self, HarnessError> {
        for (i, r) in rows.iter().enumerate() {
            if rows[..i].iter().any(|o| o.pool == r.pool && o.scheduler == r.scheduler) {
                return Err(HarnessError::DuplicateRow { pool: r.pool.clone(), scheduler: r.scheduler.clone() });
            }
        }
        Ok(Self { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Index of the row with the smallest makespan; first on ties.
    pub fn best(&self) -> Option<usize> {
        (0..self.rows.len()).min_by(|&a, &b| self.rows[a].makespan_s.total_cmp(&self.rows[b].makespan_s).then(a.cmp(&b)))
    }

    pub fn row(&self, pool: &str, scheduler: &str) -> Option<&RunSummary> {
        self.rows.iter().find(|r| r.pool == pool && r.scheduler == scheduler)
    }
}

fn run_one(
    dag: &WorkloadDag,
    pool: &ResourcePool,
    scheduler: SchedulerKind,
    submission: JobSubmission,
    options: SimOptions,
) -> Result<(RunSummary, Timeline), HarnessError> {
    let timeline = run_simulation_with(dag, submission, pool, scheduler, options)?;
    let summary = summarize(&timeline, pool)?;
    Ok((summary, timeline))
}

/// One run on a fixed pool.
pub fn cmd_simulate(
    dag: &WorkloadDag,
    pool: &ResourcePool,
    scheduler: SchedulerKind,
    submission: JobSubmission,
    options: SimOptions,
) -> Result<(ResultTable, Timeline), HarnessError> {
    let (summary, timeline) = run_one(dag, pool, scheduler, submission, options)?;
    Ok((ResultTable::new(vec![summary])?, timeline))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolSweepResult {
    pub table: ResultTable,
    /// Row index of the minimum-makespan configuration.
    pub best: usize,
}

/// Runs every pool of `sweep` (concurrently); rows keep enumeration order.
pub fn cmd_sweep_pools(
    dag: &WorkloadDag,
    sweep: &PoolSweepSpec,
    scheduler: SchedulerKind,
    submission: JobSubmission,
    options: SimOptions,
) -> Result<PoolSweepResult, HarnessError> {
    let pools = enumerate_sweep(sweep)?;
    let rows = pools
        .par_iter()
        .map(|pool| run_one(dag, pool, scheduler, submission, options).map(|(s, _)| s))
        .collect::<Result<Vec<_>, _>>()?;
    let table = ResultTable::new(rows)?;
    let best = table.best().ok_or(HarnessError::EmptyTable)?;
    Ok(PoolSweepResult { table, best })
}

/// Runs each scheduler on `pool`; rows in the order given.
pub fn cmd_sweep_schedulers(
    dag: &WorkloadDag,
    pool: &ResourcePool,
    schedulers: &[SchedulerKind],
    submission: JobSubmission,
    options: SimOptions,
) -> Result<ResultTable, HarnessError> {
    let rows = schedulers
        .par_iter()
        .map(|&s| run_one(dag, pool, s, submission, options).map(|(r, _)| r))
        .collect::<Result<Vec<_>, _>>()?;
    ResultTable::new(rows)
}

/// Relative change of one row against a baseline row, in percent.
#[derive(Debug, Clone, PartialEq)]
pub struct Delta {
    pub scheduler: String,
    /// Negative when the makespan is shorter than the baseline's.
    pub makespan_pct: f64,
    pub utilization_pct: f64,
}

impl Delta {
    pub fn render(&self, baseline: &str) -> String {
        format!(
            "{}: makespan {:+.1}% vs {baseline}, mean utilization {:+.1}% vs {baseline}",
            self.scheduler, self.makespan_pct, self.utilization_pct
        )
    }
}

/// Deltas of every row against the row scheduled by `baseline`.
pub fn deltas_against(table: &ResultTable, baseline: &str) -> Option<Vec<Delta>> {
    let base = table.rows.iter().find(|r| r.scheduler.eq_ignore_ascii_case(baseline))?;
    Some(
        table
            .rows
            .iter()
            .filter(|r| !std::ptr::eq(*r, base))
            .map(|r| Delta {
                scheduler: r.scheduler.clone(),
                makespan_pct: 100.0 * (r.makespan_s - base.makespan_s) / base.makespan_s,
                utilization_pct: 100.0 * (r.mean_utilization - base.mean_utilization) / base.mean_utilization,
            })
            .collect(),
    )
}

pub const CSV_HEADER: [&str; 5] = ["pool", "scheduler", "instances", "makespan_s", "mean_utilization"];

pub fn fmt_makespan(v: f64) -> String {
    format!("{v:.3}")
}

pub fn fmt_utilization(v: f64) -> String {
    format!("{v:.4}")
}

pub fn render_csv(table: &ResultTable) -> Result<String, HarnessError> {
    if table.is_empty() {
        return Err(HarnessError::EmptyTable);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| HarnessError::Io { path: PathBuf::from("<csv>"), source: e.into() };
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in &table.rows {
        w.write_record([
            r.pool.clone(),
            r.scheduler.clone(),
            r.instances.to_string(),
            fmt_makespan(r.makespan_s),
            fmt_utilization(r.mean_utilization),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Io { path: PathBuf::from("<csv>"), source: e.into_error() })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChartMetric {
    Makespan,
    MeanUtilization,
}

impl ChartMetric {
    fn value(&self, r: &RunSummary) -> String {
        match self {
            ChartMetric::Makespan => fmt_makespan(r.makespan_s),
            ChartMetric::MeanUtilization => fmt_utilization(r.mean_utilization),
        }
    }

    fn axis_label(&self) -> &'static str {
        match self {
            ChartMetric::Makespan => "execution time (s)",
            ChartMetric::MeanUtilization => "mean resource utilization",
        }
    }
}

fn bar_label(r: &RunSummary, table: &ResultTable) -> String {
    let same_pool = table.rows.iter().all(|o| o.pool == r.pool);
    if same_pool {
        r.scheduler.clone()
    } else {
        r.pool.clone()
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Static bar chart, one bar per row, heights linear in the metric from zero.
/// Each bar carries the exact CSV value in `data-value`.
pub fn render_svg(table: &ResultTable, metric: ChartMetric, title: &str) -> Result<String, HarnessError> {
    if table.is_empty() {
        return Err(HarnessError::EmptyTable);
    }
    const BAR_W: f64 = 48.0;
    const GAP: f64 = 16.0;
    const PLOT_H: f64 = 300.0;
    const LEFT: f64 = 70.0;
    const TOP: f64 = 40.0;
    const BOTTOM: f64 = 90.0;

    let values: Vec<String> = table.rows.iter().map(|r| metric.value(r)).collect();
    let parsed: Vec<f64> = values.iter().map(|v| v.parse().expect("formatted number")).collect();
    let max = parsed.iter().copied().fold(0.0, f64::max);
    let scale = if max > 0.0 { PLOT_H / max } else { 0.0 };
    let width = LEFT + GAP + table.len() as f64 * (BAR_W + GAP) + 20.0;
    let height = TOP + PLOT_H + BOTTOM;
    let base_y = TOP + PLOT_H;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, width / 2.0, xml_escape(title));
    let _ = writeln!(svg, r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{base_y}" stroke="black"/>"#);
    let _ = writeln!(svg, r#"<line x1="{LEFT}" y1="{base_y}" x2="{}" y2="{base_y}" stroke="black"/>"#, width - 10.0);
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" transform="rotate(-90 16 {})" text-anchor="middle">{}</text>"#,
        TOP + PLOT_H / 2.0,
        TOP + PLOT_H / 2.0,
        metric.axis_label()
    );
    for (i, (row, (text, v))) in table.rows.iter().zip(values.iter().zip(&parsed)).enumerate() {
        let x = LEFT + GAP + i as f64 * (BAR_W + GAP);
        let h = v * scale;
        let y = base_y - h;
        let label = xml_escape(&bar_label(row, table));
        let _ = writeln!(
            svg,
            r##"<rect class="bar" x="{x}" y="{y}" width="{BAR_W}" height="{h}" fill="#4472c4" data-label="{label}" data-value="{text}"/>"##
        );
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{text}</text>"#, x + BAR_W / 2.0, y - 4.0);
        let ly = base_y + 14.0;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{ly}" text-anchor="end" transform="rotate(-40 {} {ly})">{label}</text>"#,
            x + BAR_W / 2.0,
            x + BAR_W / 2.0
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Pool named by a recipe or flag, falling back to the best configuration.
pub fn resolve_pool(config: Option<&PoolConfig>, link: LinkModel) -> Result<(ResourcePool, LinkModel), HarnessError> {
    match config {
        Some(c) => Ok((build_pool(c)?, c.link)),
        None => Ok((build_pool(&best_pool_config())?, link)),
    }
}
