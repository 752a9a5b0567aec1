//! Scheduling policies: Earliest Finish Time, Earliest Task First and Round
//! Robin.
//!
//! Every policy is a pure function of a [`SchedulerContext`]. Timing
//! predictions come from [`SchedulerContext::plan`], the same routine the
//! engine uses to commit a decision, so predicted and realized times agree.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::engine::{CommMode, DataLocation, JobId, PeState, RunView};
use crate::platform::{crossing_volume, transfer_time, Contention, LinkModel, PeId, Tier};
use crate::workload::TaskId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchedulerKind {
    Eft,
    Etf,
    Rr,
}

impl SchedulerKind {
    pub const ALL: [SchedulerKind; 3] = [SchedulerKind::Eft, SchedulerKind::Etf, SchedulerKind::Rr];

    pub fn name(&self) -> &'static str {
        match self {
            SchedulerKind::Eft => "EFT",
            SchedulerKind::Etf => "ETF",
            SchedulerKind::Rr => "RR",
        }
    }

    pub fn select(&self, ctx: &SchedulerContext<'_>) -> SchedulingDecision {
        match self {
            SchedulerKind::Eft => select_eft(ctx),
            SchedulerKind::Etf => select_etf(ctx),
            SchedulerKind::Rr => select_rr(ctx),
        }
    }
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown scheduler '{0}' (expected eft, etf or rr)")]
pub struct UnknownScheduler(pub String);

impl FromStr for SchedulerKind {
    type Err = UnknownScheduler;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "eft" => Ok(SchedulerKind::Eft),
            "etf" => Ok(SchedulerKind::Etf),
            "rr" => Ok(SchedulerKind::Rr),
            _ => Err(UnknownScheduler(s.to_string())),
        }
    }
}

/// A task instance waiting for placement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadyTask {
    pub ready_at: f64,
    pub job: JobId,
    pub task: TaskId,
    /// Position of `task` in the run view.
    pub index: usize,
}

impl ReadyTask {
    /// Queue order: ready time, then job id, then task id.
    pub fn queue_cmp(&self, other: &Self) -> Ordering {
        self.ready_at
            .total_cmp(&other.ready_at)
            .then(self.job.cmp(&other.job))
            .then(self.task.cmp(&other.task))
    }
}

/// Predicted timing of running one ready task on one PE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plan {
    pub transfer_start: f64,
    pub exec_start: f64,
    pub finish: f64,
    /// Megabits moved over the link before execution.
    pub volume: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulingDecision {
    pub job: JobId,
    pub task: TaskId,
    pub pe: PeId,
    pub predicted_start: f64,
    pub predicted_finish: f64,
}

/// Snapshot a policy decides from.
#[derive(Debug, Clone, Copy)]
pub struct SchedulerContext<'a> {
    pub clock: f64,
    /// Sorted by [`ReadyTask::queue_cmp`]; never empty when a decision is requested.
    pub ready: &'a [ReadyTask],
    pub pe_states: &'a [PeState],
    pub data_locations: &'a DataLocation,
    pub link: LinkModel,
    /// Earliest start of the next transfer when the link is serialized.
    pub link_available_at: f64,
    pub comm_mode: CommMode,
    pub view: &'a RunView,
    pub rr_cursor: usize,
}

impl SchedulerContext<'_> {
    /// Inputs of `task` as (tier where the data sits, megabits). Entry tasks
    /// read raw sensor data from the frontend.
    pub fn inputs(&self, task: &ReadyTask) -> Vec<(Tier, f64)> {
        let view = self.view;
        if view.preds[task.index].is_empty() {
            return vec![(Tier::Frontend, view.raw_input_volume)];
        }
        view.preds[task.index]
            .iter()
            .map(|&(p, vol)| {
                let tier = match self.comm_mode {
                    CommMode::Location => self
                        .data_locations
                        .tier(task.job, p)
                        .expect("a ready task's predecessors have finished"),
                    // outputs of every task are shipped back to the frontend
                    CommMode::Static => Tier::Frontend,
                };
                (tier, vol)
            })
            .collect()
    }

    /// Megabits that must cross the link before `task` can start on `pe`.
    pub fn input_volume(&self, task: &ReadyTask, pe: usize) -> f64 {
        let consumer = self.view.pe_tier[pe];
        self.inputs(task).into_iter().map(|(tier, vol)| crossing_volume(tier, consumer, vol)).sum()
    }

    pub fn plan(&self, task: &ReadyTask, pe: usize) -> Plan {
        let volume = self.input_volume(task, pe);
        let mut transfer_start = self.clock.max(self.pe_states[pe].available_at);
        if volume > 0.0 && self.link.contention == Contention::Serialized {
            transfer_start = transfer_start.max(self.link_available_at);
        }
        let exec_start = transfer_start + transfer_time(volume, &self.link);
        let finish = exec_start + self.view.exec[task.index][pe];
        Plan { transfer_start, exec_start, finish, volume }
    }

    fn decision(&self, task: &ReadyTask, pe: usize, plan: &Plan) -> SchedulingDecision {
        SchedulingDecision {
            job: task.job,
            task: task.task,
            pe: self.pe_states[pe].pe,
            predicted_start: plan.exec_start,
            predicted_finish: plan.finish,
        }
    }

    fn head(&self) -> &ReadyTask {
        self.ready.first().expect("scheduler invoked with an empty ready set")
    }
}

/// Places the head ready task on the PE with the smallest predicted finish,
/// lower PE id on ties.
pub fn select_eft(ctx: &SchedulerContext<'_>) -> SchedulingDecision {
    let task = ctx.head();
    let (pe, plan) = (0..ctx.pe_states.len())
        .map(|pe| (pe, ctx.plan(task, pe)))
        .min_by(|a, b| a.1.finish.total_cmp(&b.1.finish).then(a.0.cmp(&b.0)))
        .expect("pool is nonempty");
    ctx.decision(task, pe, &plan)
}

/// Picks the (ready task, PE) pair with the earliest predicted start; ties by
/// finish, job id, task id, PE id.
pub fn select_etf(ctx: &SchedulerContext<'_>) -> SchedulingDecision {
    assert!(!ctx.ready.is_empty(), "scheduler invoked with an empty ready set");
    let mut best: Option<(&ReadyTask, usize, Plan)> = None;
    for task in ctx.ready {
        for pe in 0..ctx.pe_states.len() {
            let plan = ctx.plan(task, pe);
            let better = match &best {
                None => true,
                Some((bt, bpe, bp)) => plan
                    .exec_start
                    .total_cmp(&bp.exec_start)
                    .then(plan.finish.total_cmp(&bp.finish))
                    .then(task.job.cmp(&bt.job))
                    .then(task.task.cmp(&bt.task))
                    .then(pe.cmp(bpe))
                    .is_lt(),
            };
            if better {
                best = Some((task, pe, plan));
            }
        }
    }
    let (task, pe, plan) = best.unwrap();
    ctx.decision(task, pe, &plan)
}

/// Places the head ready task on the PE at the round-robin cursor. The caller
/// advances the cursor.
pub fn select_rr(ctx: &SchedulerContext<'_>) -> SchedulingDecision {
    let task = ctx.head();
    let pe = ctx.rr_cursor % ctx.pe_states.len();
    let plan = ctx.plan(task, pe);
    ctx.decision(task, pe, &plan)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::platform::{build_pool, KindDecl, PoolConfig};
    use crate::workload::{DagEdge, TaskSpec, WorkloadDag};

    fn pool(kinds: &[(&str, &str, u32)]) -> crate::platform::ResourcePool {
        build_pool(&PoolConfig {
            label: None,
            kinds: kinds.iter().map(|(n, t, _)| KindDecl { name: n.to_string(), tier: t.to_string() }).collect(),
            counts: kinds.iter().map(|(n, _, c)| (n.to_string(), *c)).collect(),
            link: LinkModel::default(),
        })
        .unwrap()
    }

    fn task(id: u32, profile: &[(&str, f64)]) -> TaskSpec {
        TaskSpec {
            id: TaskId(id),
            name: format!("t{id}"),
            exec_profile: profile.iter().map(|(k, v)| (k.to_string(), *v)).collect::<BTreeMap<_, _>>(),
            output_volume: 0.0,
        }
    }

    struct Fixture {
        view: RunView,
        states: Vec<PeState>,
        locations: DataLocation,
    }

    impl Fixture {
        fn new(dag: &WorkloadDag, pool: &crate::platform::ResourcePool) -> Self {
            let view = RunView::new(dag, pool).unwrap();
            let states = pool.instances.iter().map(|pe| PeState { pe: pe.id, available_at: 0.0 }).collect();
            let locations = DataLocation::new(1, dag.tasks.len());
            Self { view, states, locations }
        }

        fn ctx<'a>(&'a self, clock: f64, ready: &'a [ReadyTask], cursor: usize) -> SchedulerContext<'a> {
            SchedulerContext {
                clock,
                ready,
                pe_states: &self.states,
                data_locations: &self.locations,
                link: LinkModel::default(),
                link_available_at: 0.0,
                comm_mode: CommMode::Location,
                view: &self.view,
                rr_cursor: cursor,
            }
        }
    }

    fn ready(job: u32, task: u32, index: usize) -> ReadyTask {
        ReadyTask { ready_at: 0.0, job: JobId(job), task: TaskId(task), index }
    }

    #[test]
    fn tokens_are_case_insensitive() {
        assert_eq!("EFT".parse::<SchedulerKind>().unwrap(), SchedulerKind::Eft);
        assert_eq!("etf".parse::<SchedulerKind>().unwrap(), SchedulerKind::Etf);
        assert_eq!("Rr".parse::<SchedulerKind>().unwrap(), SchedulerKind::Rr);
        assert!("heft".parse::<SchedulerKind>().is_err());
    }

    #[test]
    fn eft_prefers_fast_pe() {
        let dag = WorkloadDag { tasks: vec![task(0, &[("fast", 2.0), ("slow", 5.0)])], edges: vec![], raw_input_volume: 0.0 };
        let p = pool(&[("slow", "frontend", 1), ("fast", "frontend", 1)]);
        let fx = Fixture::new(&dag, &p);
        let r = [ready(0, 0, 0)];
        let d = select_eft(&fx.ctx(7.0, &r, 0));
        assert_eq!(d.pe, PeId(1));
        assert_eq!(d.predicted_finish, 9.0);
    }

    #[test]
    fn eft_offloads_when_transfer_pays_off() {
        // frontend: 4 s; backend: 12 Mb at 12 Mbps = 1 s, then 2 s
        let dag = WorkloadDag { tasks: vec![task(0, &[("edge", 4.0), ("dc", 2.0)])], edges: vec![], raw_input_volume: 12.0 };
        let p = pool(&[("edge", "frontend", 1), ("dc", "backend", 1)]);
        let fx = Fixture::new(&dag, &p);
        let r = [ready(0, 0, 0)];
        let ctx = fx.ctx(10.0, &r, 0);
        assert_eq!(ctx.plan(&r[0], 0).finish, 14.0);
        assert_eq!(ctx.plan(&r[0], 1).finish, 13.0);
        let d = select_eft(&ctx);
        assert_eq!(d.pe, PeId(1));
        assert_eq!(d.predicted_start, 11.0);
        assert_eq!(d.predicted_finish, 13.0);
    }

    #[test]
    fn eft_ties_go_to_lower_pe() {
        let dag = WorkloadDag { tasks: vec![task(0, &[("k", 3.0)])], edges: vec![], raw_input_volume: 0.0 };
        let p = pool(&[("k", "frontend", 3)]);
        let fx = Fixture::new(&dag, &p);
        let r = [ready(0, 0, 0)];
        assert_eq!(select_eft(&fx.ctx(0.0, &r, 0)).pe, PeId(0));
    }

    #[test]
    fn etf_breaks_start_ties_by_task_id() {
        let dag = WorkloadDag {
            tasks: vec![task(3, &[("k", 1.0)]), task(7, &[("k", 1.0)])],
            edges: vec![],
            raw_input_volume: 0.0,
        };
        let p = pool(&[("k", "frontend", 1)]);
        let fx = Fixture::new(&dag, &p);
        let r = [ready(0, 3, 0), ready(0, 7, 1)];
        let d = select_etf(&fx.ctx(0.0, &r, 0));
        assert_eq!(d.task, TaskId(3));
    }

    #[test]
    fn etf_picks_the_earliest_startable_pair() {
        // p0 busy until 2; A is slow on p1, B is fast on p1
        let dag = WorkloadDag {
            tasks: vec![task(0, &[("k0", 1.0), ("k1", 9.0)]), task(1, &[("k0", 1.0), ("k1", 3.0)])],
            edges: vec![],
            raw_input_volume: 0.0,
        };
        let p = pool(&[("k0", "frontend", 1), ("k1", "frontend", 1)]);
        let mut fx = Fixture::new(&dag, &p);
        fx.states[0].available_at = 2.0;
        let r = [ready(0, 0, 0), ready(0, 1, 1)];
        let ctx = fx.ctx(0.0, &r, 0);
        // brute force over all four pairs
        let mut pairs: Vec<(f64, f64, u32, usize)> = Vec::new();
        for t in &r {
            for pe in 0..2 {
                let pl = ctx.plan(t, pe);
                pairs.push((pl.exec_start, pl.finish, t.task.0, pe));
            }
        }
        pairs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let d = select_etf(&ctx);
        assert_eq!((d.predicted_start, d.predicted_finish, d.task.0, d.pe.0 as usize), pairs[0]);
        assert_eq!((d.task, d.pe, d.predicted_start, d.predicted_finish), (TaskId(1), PeId(1), 0.0, 3.0));
    }

    #[test]
    fn single_task_single_pe_policies_agree() {
        let dag = WorkloadDag { tasks: vec![task(0, &[("k", 4.0)])], edges: vec![], raw_input_volume: 0.0 };
        let p = pool(&[("k", "frontend", 1)]);
        let fx = Fixture::new(&dag, &p);
        let r = [ready(0, 0, 0)];
        let ctx = fx.ctx(1.0, &r, 0);
        assert_eq!(select_eft(&ctx), select_etf(&ctx));
        assert_eq!(select_eft(&ctx), select_rr(&ctx));
    }

    #[test]
    fn rr_cycles_over_pool_order() {
        let dag = WorkloadDag { tasks: vec![task(0, &[("k", 4.0)])], edges: vec![], raw_input_volume: 0.0 };
        let p = pool(&[("k", "frontend", 3)]);
        let fx = Fixture::new(&dag, &p);
        let r = [ready(0, 0, 0)];
        let mut cursor = 0;
        let mut chosen = Vec::new();
        for _ in 0..4 {
            chosen.push(select_rr(&fx.ctx(0.0, &r, cursor)).pe.0);
            cursor = (cursor + 1) % 3;
        }
        assert_eq!(chosen, vec![0, 1, 2, 0]);

        let one = pool(&[("k", "frontend", 1)]);
        let fx = Fixture::new(&dag, &one);
        assert_eq!(select_rr(&fx.ctx(0.0, &r, 0)).pe, PeId(0));
    }

    #[test]
    fn static_mode_charges_all_inputs_on_backend() {
        let dag = WorkloadDag {
            tasks: vec![task(0, &[("e", 1.0), ("b", 1.0)]), task(1, &[("e", 1.0), ("b", 1.0)])],
            edges: vec![DagEdge { src: TaskId(0), dst: TaskId(1), volume: 6.0 }],
            raw_input_volume: 12.0,
        };
        let p = pool(&[("e", "frontend", 1), ("b", "backend", 1)]);
        let mut fx = Fixture::new(&dag, &p);
        fx.locations.set(JobId(0), 0, Tier::Backend);
        let r = [ready(0, 1, 1)];
        let mut ctx = fx.ctx(0.0, &r, 0);
        assert_eq!(ctx.input_volume(&r[0], 1), 0.0);
        assert_eq!(ctx.input_volume(&r[0], 0), 6.0);
        ctx.comm_mode = CommMode::Static;
        assert_eq!(ctx.input_volume(&r[0], 1), 6.0);
        assert_eq!(ctx.input_volume(&r[0], 0), 0.0);
    }
}
