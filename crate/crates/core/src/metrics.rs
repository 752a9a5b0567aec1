//! Makespan and utilization summaries of a timeline.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{makespan, EngineError, Timeline};
use crate::platform::ResourcePool;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("makespan is zero")]
    ZeroMakespan,
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtilizationReport {
    /// Seconds each pool PE spent executing, in pool order.
    pub busy: Vec<f64>,
    /// `busy / makespan` per PE.
    pub fraction: Vec<f64>,
    /// Mean of `fraction` over every PE of the pool, idle ones included.
    pub mean_utilization: f64,
}

/// Busy time counts execution intervals only; transfers occupy the link,
/// not the PE.
pub fn utilization(timeline: &Timeline, pool: &ResourcePool) -> Result<UtilizationReport, MetricsError> {
    let span = makespan(timeline)?;
    if span <= 0.0 {
        return Err(MetricsError::ZeroMakespan);
    }
    let mut busy = vec![0.0; pool.len()];
    for r in &timeline.records {
        if let Some(i) = pool.instances.iter().position(|pe| pe.id.0 == r.pe) {
            busy[i] += r.finish - r.exec_start;
        }
    }
    let fraction: Vec<f64> = busy.iter().map(|b| b / span).collect();
    let mean_utilization = fraction.iter().sum::<f64>() / fraction.len() as f64;
    Ok(UtilizationReport { busy, fraction, mean_utilization })
}

/// One bar of a sweep chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub pool: String,
    pub scheduler: String,
    pub instances: u32,
    pub makespan_s: f64,
    pub mean_utilization: f64,
}

pub fn summarize(timeline: &Timeline, pool: &ResourcePool) -> Result<RunSummary, MetricsError> {
    let report = utilization(timeline, pool)?;
    Ok(RunSummary {
        pool: timeline.pool_label.clone(),
        scheduler: timeline.scheduler.clone(),
        instances: timeline.submission.instances,
        makespan_s: makespan(timeline)?,
        mean_utilization: report.mean_utilization,
    })
}
