//! Deterministic discrete-event simulation of DAG jobs on a two-tier pool.
//!
//! Events are totally ordered by `(time, kind, job, task, pe)` with
//! `JobArrival < TransferFinish < TaskFinish`. After the last event of an
//! instant has been applied, every ready task is placed by the policy, one
//! decision at a time; placements are final and PEs run their queue in
//! decision order.
//!
//! Timing of one placement: the input transfer starts when both the decision
//! is made and the PE is free (and, with a serialized link, the link is
//! free); execution follows the transfer. Outputs that must reach the
//! frontend after execution (exit results, or every backend output in static
//! mode) travel over the link without holding the PE.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::platform::{transfer_time, Contention, LinkModel, PeId, ResourcePool, Tier};
use crate::schedulers::{ReadyTask, SchedulerContext, SchedulerKind, SchedulingDecision};
use crate::workload::{validate_dag, JobSubmission, TaskId, ValidationReport, WorkloadDag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct JobId(pub u32);

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// How transfer volumes are charged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommMode {
    /// Data moves only when producer and consumer tiers differ.
    #[default]
    Location,
    /// Backend tasks fetch all their inputs from and push their output to the
    /// frontend; frontend tasks pay nothing.
    Static,
}

impl FromStr for CommMode {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "location" => Ok(CommMode::Location),
            "static" => Ok(CommMode::Static),
            other => Err(EngineError::BadOption(format!("unknown comm mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub link: LinkModel,
    pub comm_mode: CommMode,
    /// Ship exit-task outputs produced on the backend back to the frontend.
    pub result_return: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { link: LinkModel::default(), comm_mode: CommMode::Location, result_return: true }
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("resource pool is empty")]
    EmptyPool,
    #[error("task {task} has no execution time for PE kind '{kind}'")]
    MissingProfile { task: TaskId, kind: String },
    #[error("invalid workload: {0}")]
    InvalidDag(ValidationReport),
    #[error("timeline is empty")]
    EmptyTimeline,
    #[error("{0}")]
    BadOption(String),
}

/// Index-based view of a DAG resolved against a pool.
#[derive(Debug, Clone)]
pub struct RunView {
    pub task_ids: Vec<TaskId>,
    /// Per task: (predecessor index, edge megabits).
    pub preds: Vec<Vec<(usize, f64)>>,
    pub succs: Vec<Vec<usize>>,
    /// Execution seconds, `[task][pe]`.
    pub exec: Vec<Vec<f64>>,
    pub output_volume: Vec<f64>,
    pub is_exit: Vec<bool>,
    pub raw_input_volume: f64,
    pub pe_tier: Vec<Tier>,
    pub pe_ids: Vec<PeId>,
}

impl RunView {
    pub fn new(dag: &WorkloadDag, pool: &ResourcePool) -> Result<Self, EngineError> {
        if pool.is_empty() {
            return Err(EngineError::EmptyPool);
        }
        let report = validate_dag(dag);
        if !report.is_empty() {
            return Err(EngineError::InvalidDag(report));
        }
        let index: HashMap<TaskId, usize> = dag.tasks.iter().enumerate().map(|(i, t)| (t.id, i)).collect();
        let n = dag.tasks.len();
        let mut preds = vec![Vec::new(); n];
        let mut succs = vec![Vec::new(); n];
        for e in &dag.edges {
            let (s, d) = (index[&e.src], index[&e.dst]);
            preds[d].push((s, e.volume));
            succs[s].push(d);
        }
        let mut exec = Vec::with_capacity(n);
        for t in &dag.tasks {
            let row = pool
                .instances
                .iter()
                .map(|pe| {
                    t.exec_time(&pe.kind.name)
                        .ok_or_else(|| EngineError::MissingProfile { task: t.id, kind: pe.kind.name.clone() })
                })
                .collect::<Result<Vec<_>, _>>()?;
            exec.push(row);
        }
        Ok(Self {
            task_ids: dag.tasks.iter().map(|t| t.id).collect(),
            is_exit: succs.iter().map(|s| s.is_empty()).collect(),
            preds,
            succs,
            exec,
            output_volume: dag.tasks.iter().map(|t| t.output_volume).collect(),
            raw_input_volume: dag.raw_input_volume,
            pe_tier: pool.instances.iter().map(|pe| pe.tier()).collect(),
            pe_ids: pool.instances.iter().map(|pe| pe.id).collect(),
        })
    }

    pub fn task_count(&self) -> usize {
        self.task_ids.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    JobArrival = 0,
    TransferFinish = 1,
    TaskFinish = 2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEvent {
    pub time: f64,
    pub kind: EventKind,
    pub job: JobId,
    pub task: Option<TaskId>,
    pub pe: Option<PeId>,
    /// Run-view index of `task`.
    task_index: usize,
}

impl SimEvent {
    fn job_arrival(time: f64, job: JobId) -> Self {
        Self { time, kind: EventKind::JobArrival, job, task: None, pe: None, task_index: 0 }
    }
}

impl Eq for SimEvent {}

impl Ord for SimEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.kind.cmp(&other.kind))
            .then(self.job.cmp(&other.job))
            .then(self.task.cmp(&other.task))
            .then(self.pe.cmp(&other.pe))
    }
}

impl PartialOrd for SimEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeState {
    pub pe: PeId,
    /// Earliest time a newly placed task may begin its transfer.
    pub available_at: f64,
}

/// Tier holding each finished task's output, per job.
#[derive(Debug, Clone, PartialEq)]
pub struct DataLocation {
    tiers: Vec<Vec<Option<Tier>>>,
}

impl DataLocation {
    pub fn new(jobs: usize, tasks: usize) -> Self {
        Self { tiers: vec![vec![None; tasks]; jobs] }
    }

    pub fn tier(&self, job: JobId, task_index: usize) -> Option<Tier> {
        self.tiers[job.0 as usize][task_index]
    }

    pub fn set(&mut self, job: JobId, task_index: usize, tier: Tier) {
        self.tiers[job.0 as usize][task_index] = Some(tier);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRecord {
    pub job: JobId,
    pub task: TaskId,
    pub pe: u32,
    pub kind: String,
    pub transfer_start: f64,
    pub exec_start: f64,
    pub finish: f64,
    /// Input megabits that crossed the link.
    pub transferred_volume: f64,
    /// End of the post-execution output transfer, if there was one.
    pub return_finish: Option<f64>,
    pub returned_volume: f64,
}

impl ScheduleRecord {
    pub fn completion(&self) -> f64 {
        self.return_finish.map_or(self.finish, |r| r.max(self.finish))
    }
}

/// Complete output of one run: one record per (job, task), sorted by
/// (finish, job, task).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    pub records: Vec<ScheduleRecord>,
    pub pool_label: String,
    pub scheduler: String,
    pub submission: JobSubmission,
    pub options: SimOptions,
    pub first_arrival: f64,
}

impl Timeline {
    pub const EXPORT_HEADER: &'static str =
        "job,task,pe,kind,transfer_start,exec_start,finish,transferred_mb,return_finish,returned_mb";

    /// One line per record in timeline order, after a header line.
    pub fn export(&self) -> String {
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(Self::EXPORT_HEADER);
        out.push('\n');
        for r in &self.records {
            let ret = r.return_finish.map(|t| t.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.job, r.task, r.pe, r.kind, r.transfer_start, r.exec_start, r.finish, r.transferred_volume, ret,
                r.returned_volume
            ));
        }
        out
    }
}

/// Time from the first job arrival to the last completion, result returns
/// included.
pub fn makespan(timeline: &Timeline) -> Result<f64, EngineError> {
    if timeline.records.is_empty() {
        return Err(EngineError::EmptyTimeline);
    }
    let last = timeline.records.iter().map(ScheduleRecord::completion).fold(f64::NEG_INFINITY, f64::max);
    Ok(last - timeline.first_arrival)
}

/// What the policy saw and chose at one decision, for offline checking.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTrace {
    pub clock: f64,
    pub task_index: usize,
    pub pe_available: Vec<f64>,
    pub link_available_at: f64,
    /// (tier holding the data, megabits) for each input.
    pub inputs: Vec<(Tier, f64)>,
    pub decision: SchedulingDecision,
}

/// Mutable simulation state.
pub struct SimState<'a> {
    view: RunView,
    pool: &'a ResourcePool,
    scheduler: SchedulerKind,
    options: SimOptions,
    submission: JobSubmission,
    clock: f64,
    pending: BinaryHeap<Reverse<SimEvent>>,
    ready: Vec<ReadyTask>,
    pe_states: Vec<PeState>,
    locations: DataLocation,
    link_available_at: f64,
    rr_cursor: usize,
    /// Unfinished predecessor counts, `[job][task]`.
    waiting_on: Vec<Vec<usize>>,
    /// Index into `records`, `[job][task]`.
    record_of: Vec<Vec<Option<usize>>>,
    records: Vec<ScheduleRecord>,
    trace: Option<Vec<DecisionTrace>>,
}

impl<'a> SimState<'a> {
    pub fn new(
        dag: &WorkloadDag,
        submission: JobSubmission,
        pool: &'a ResourcePool,
        scheduler: SchedulerKind,
        options: SimOptions,
    ) -> Result<Self, EngineError> {
        let view = RunView::new(dag, pool)?;
        let jobs = submission.instances as usize;
        let n = view.task_count();
        let waiting_on = vec![view.preds.iter().map(Vec::len).collect::<Vec<_>>(); jobs];
        let mut pending = BinaryHeap::with_capacity(jobs * n);
        for j in 0..submission.instances {
            pending.push(Reverse(SimEvent::job_arrival(submission.arrival_time(j), JobId(j))));
        }
        Ok(Self {
            pool,
            scheduler,
            options,
            submission,
            clock: 0.0,
            pending,
            ready: Vec::new(),
            pe_states: pool.instances.iter().map(|pe| PeState { pe: pe.id, available_at: 0.0 }).collect(),
            locations: DataLocation::new(jobs, n),
            link_available_at: 0.0,
            rr_cursor: 0,
            waiting_on,
            record_of: vec![vec![None; n]; jobs],
            records: Vec::with_capacity(jobs * n),
            trace: None,
            view,
        })
    }

    pub fn enable_trace(&mut self) {
        self.trace = Some(Vec::new());
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn ready(&self) -> &[ReadyTask] {
        &self.ready
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    pub fn peek_event(&self) -> Option<&SimEvent> {
        self.pending.peek().map(|Reverse(e)| e)
    }

    /// Pops and applies the minimum pending event. Returns `false` once the
    /// pending set is empty.
    pub fn step(&mut self) -> bool {
        match self.pending.pop() {
            Some(Reverse(event)) => {
                self.advance(event);
                true
            }
            None => false,
        }
    }

    /// Applies `event`, which must be the minimum of the pending set. Once no
    /// other event shares its instant, ready tasks are placed.
    pub fn advance(&mut self, event: SimEvent) {
        debug_assert!(event.time >= self.clock, "clock must not decrease");
        debug_assert!(self.peek_event().is_none_or(|next| *next >= event));
        self.clock = event.time;
        match event.kind {
            EventKind::JobArrival => {
                for i in 0..self.view.task_count() {
                    if self.view.preds[i].is_empty() {
                        self.make_ready(event.job, i);
                    }
                }
            }
            EventKind::TaskFinish => self.on_task_finish(event),
            EventKind::TransferFinish => {
                if self.options.comm_mode == CommMode::Static {
                    self.release_successors(event.job, event.task_index);
                }
            }
        }
        let instant_done = self.peek_event().is_none_or(|next| next.time > self.clock);
        if instant_done {
            self.dispatch();
        }
    }

    fn on_task_finish(&mut self, event: SimEvent) {
        let pe = event.pe.expect("task-finish carries a PE").0 as usize;
        let (job, idx) = (event.job, event.task_index);
        let tier = self.view.pe_tier[pe];
        self.locations.set(job, idx, tier);

        let push = match self.options.comm_mode {
            CommMode::Location => tier == Tier::Backend && self.view.is_exit[idx] && self.options.result_return,
            CommMode::Static => tier == Tier::Backend,
        };
        if push {
            let volume = self.view.output_volume[idx];
            let mut start = self.clock;
            if volume > 0.0 && self.options.link.contention == Contention::Serialized {
                start = start.max(self.link_available_at);
            }
            let end = start + transfer_time(volume, &self.options.link);
            if volume > 0.0 && self.options.link.contention == Contention::Serialized {
                self.link_available_at = end;
            }
            let rec = &mut self.records[self.record_of[job.0 as usize][idx].unwrap()];
            rec.return_finish = Some(end);
            rec.returned_volume = volume;
            self.pending.push(Reverse(SimEvent {
                time: end,
                kind: EventKind::TransferFinish,
                job,
                task: event.task,
                pe: event.pe,
                task_index: idx,
            }));
        }
        if !(push && self.options.comm_mode == CommMode::Static) {
            self.release_successors(job, idx);
        }
    }

    fn release_successors(&mut self, job: JobId, idx: usize) {
        for k in 0..self.view.succs[idx].len() {
            let s = self.view.succs[idx][k];
            let waiting = &mut self.waiting_on[job.0 as usize][s];
            *waiting -= 1;
            if *waiting == 0 {
                self.make_ready(job, s);
            }
        }
    }

    fn make_ready(&mut self, job: JobId, index: usize) {
        let task = ReadyTask { ready_at: self.clock, job, task: self.view.task_ids[index], index };
        let pos = self.ready.partition_point(|r| r.queue_cmp(&task).is_lt());
        self.ready.insert(pos, task);
    }

    fn context(&self) -> SchedulerContext<'_> {
        SchedulerContext {
            clock: self.clock,
            ready: &self.ready,
            pe_states: &self.pe_states,
            data_locations: &self.locations,
            link: self.options.link,
            link_available_at: self.link_available_at,
            comm_mode: self.options.comm_mode,
            view: &self.view,
            rr_cursor: self.rr_cursor,
        }
    }

    fn dispatch(&mut self) {
        while !self.ready.is_empty() {
            let ctx = self.context();
            let decision = self.scheduler.select(&ctx);
            let pos = self
                .ready
                .iter()
                .position(|r| r.job == decision.job && r.task == decision.task)
                .expect("decision names a ready task");
            let task = self.ready[pos];
            let pe = decision.pe.0 as usize;
            let plan = ctx.plan(&task, pe);
            let traced = self.trace.is_some().then(|| DecisionTrace {
                clock: self.clock,
                task_index: task.index,
                pe_available: self.pe_states.iter().map(|s| s.available_at).collect(),
                link_available_at: self.link_available_at,
                inputs: ctx.inputs(&task),
                decision,
            });
            if let (Some(trace), Some(entry)) = (self.trace.as_mut(), traced) {
                trace.push(entry);
            }
            debug_assert_eq!(plan.exec_start, decision.predicted_start);
            debug_assert_eq!(plan.finish, decision.predicted_finish);

            self.ready.remove(pos);
            if self.scheduler == SchedulerKind::Rr {
                self.rr_cursor = (self.rr_cursor + 1) % self.pe_states.len();
            }
            self.pe_states[pe].available_at = plan.finish;
            if plan.volume > 0.0 && self.options.link.contention == Contention::Serialized {
                self.link_available_at = plan.exec_start;
            }
            self.record_of[task.job.0 as usize][task.index] = Some(self.records.len());
            self.records.push(ScheduleRecord {
                job: task.job,
                task: task.task,
                pe: decision.pe.0,
                kind: self.pool.instances[pe].kind.name.clone(),
                transfer_start: plan.transfer_start,
                exec_start: plan.exec_start,
                finish: plan.finish,
                transferred_volume: plan.volume,
                return_finish: None,
                returned_volume: 0.0,
            });
            self.pending.push(Reverse(SimEvent {
                time: plan.finish,
                kind: EventKind::TaskFinish,
                job: task.job,
                task: Some(task.task),
                pe: Some(decision.pe),
                task_index: task.index,
            }));
        }
    }

    pub fn run_to_end(mut self) -> (Timeline, Option<Vec<DecisionTrace>>) {
        while self.step() {}
        debug_assert!(self.ready.is_empty());
        debug_assert_eq!(self.records.len(), self.submission.instances as usize * self.view.task_count());
        let mut records = self.records;
        records.sort_by(|a, b| a.finish.total_cmp(&b.finish).then(a.job.cmp(&b.job)).then(a.task.cmp(&b.task)));
        let timeline = Timeline {
            records,
            pool_label: self.pool.label.clone(),
            scheduler: self.scheduler.name().to_string(),
            submission: self.submission,
            options: self.options,
            first_arrival: 0.0,
        };
        (timeline, self.trace)
    }
}

/// Runs a submission to completion with default options on `link`.
pub fn run_simulation(
    dag: &WorkloadDag,
    submission: JobSubmission,
    pool: &ResourcePool,
    scheduler: SchedulerKind,
    link: LinkModel,
) -> Result<Timeline, EngineError> {
    run_simulation_with(dag, submission, pool, scheduler, SimOptions { link, ..SimOptions::default() })
}

pub fn run_simulation_with(
    dag: &WorkloadDag,
    submission: JobSubmission,
    pool: &ResourcePool,
    scheduler: SchedulerKind,
    options: SimOptions,
) -> Result<Timeline, EngineError> {
    Ok(SimState::new(dag, submission, pool, scheduler, options)?.run_to_end().0)
}

/// Like [`run_simulation_with`], also returning every scheduling decision.
pub fn run_traced(
    dag: &WorkloadDag,
    submission: JobSubmission,
    pool: &ResourcePool,
    scheduler: SchedulerKind,
    options: SimOptions,
) -> Result<(Timeline, Vec<DecisionTrace>), EngineError> {
    let mut state = SimState::new(dag, submission, pool, scheduler, options)?;
    state.enable_trace();
    let (timeline, trace) = state.run_to_end();
    Ok((timeline, trace.unwrap_or_default()))
}
