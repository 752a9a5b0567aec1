//! Random instance generators and brute-force oracles shared by the
//! integration suites. Nothing here calls into the engine's planning code.

#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::prelude::*;
use tiersim_core::platform::{build_pool, KindDecl, LinkModel, PoolConfig, ResourcePool, Tier};
use tiersim_core::workload::{DagEdge, TaskId, TaskSpec, WorkloadDag};

pub const KINDS: [(&str, &str); 4] =
    [("edge-a", "frontend"), ("edge-b", "frontend"), ("dc-a", "backend"), ("dc-b", "backend")];

/// Random DAG over the four test kinds. Times are multiples of 0.5 s and
/// volumes multiples of 1.5 Mb so that every sum is exact at 12 Mbps.
pub fn random_dag(rng: &mut impl Rng, max_tasks: usize) -> WorkloadDag {
    let n = rng.gen_range(1..=max_tasks);
    let density = rng.gen_range(0.15..0.6);
    let tasks = (0..n)
        .map(|i| TaskSpec {
            id: TaskId(i as u32),
            name: format!("t{i}"),
            exec_profile: KINDS
                .iter()
                .map(|(k, _)| (k.to_string(), rng.gen_range(1..=20) as f64 * 0.5))
                .collect::<BTreeMap<_, _>>(),
            output_volume: rng.gen_range(0..=16) as f64 * 1.5,
        })
        .collect::<Vec<_>>();
    let mut edges = Vec::new();
    for dst in 0..n {
        for (src, producer) in tasks.iter().enumerate().take(dst) {
            if rng.gen_bool(density) {
                edges.push(DagEdge { src: TaskId(src as u32), dst: TaskId(dst as u32), volume: producer.output_volume });
            }
        }
    }
    WorkloadDag { tasks, edges, raw_input_volume: rng.gen_range(0..=24) as f64 * 1.5 }
}

pub fn random_pool(rng: &mut impl Rng, max_pes: u32) -> ResourcePool {
    let total = rng.gen_range(1..=max_pes);
    let mut counts: BTreeMap<String, u32> = BTreeMap::new();
    for _ in 0..total {
        let (k, _) = KINDS[rng.gen_range(0..KINDS.len())];
        *counts.entry(k.to_string()).or_default() += 1;
    }
    build_pool(&PoolConfig {
        label: Some("random".into()),
        kinds: KINDS.iter().map(|(n, t)| KindDecl { name: n.to_string(), tier: t.to_string() }).collect(),
        counts,
        link: LinkModel::default(),
    })
    .unwrap()
}

/// Single-job instance flattened for the oracles.
pub struct Instance {
    pub n: usize,
    pub preds: Vec<Vec<(usize, f64)>>,
    pub exec: Vec<Vec<f64>>,
    pub out: Vec<f64>,
    pub is_exit: Vec<bool>,
    pub raw: f64,
    pub tiers: Vec<Tier>,
    pub rate: f64,
    pub result_return: bool,
}

impl Instance {
    pub fn new(dag: &WorkloadDag, pool: &ResourcePool, rate: f64, result_return: bool) -> Self {
        let pos = |id: TaskId| dag.tasks.iter().position(|t| t.id == id).unwrap();
        let n = dag.tasks.len();
        let mut preds = vec![Vec::new(); n];
        let mut has_succ = vec![false; n];
        for e in &dag.edges {
            preds[pos(e.dst)].push((pos(e.src), e.volume));
            has_succ[pos(e.src)] = true;
        }
        Self {
            n,
            preds,
            exec: dag
                .tasks
                .iter()
                .map(|t| pool.instances.iter().map(|pe| t.exec_profile[&pe.kind.name]).collect())
                .collect(),
            out: dag.tasks.iter().map(|t| t.output_volume).collect(),
            is_exit: has_succ.iter().map(|s| !s).collect(),
            raw: dag.raw_input_volume,
            tiers: pool.instances.iter().map(|pe| pe.tier()).collect(),
            rate,
            result_return,
        }
    }

    fn transfer_in(&self, task: usize, pe: usize, placed: &[Option<(usize, f64)>]) -> f64 {
        let here = self.tiers[pe];
        let mb: f64 = if self.preds[task].is_empty() {
            if here == Tier::Backend { self.raw } else { 0.0 }
        } else {
            self.preds[task]
                .iter()
                .map(|&(p, v)| if self.tiers[placed[p].unwrap().0] != here { v } else { 0.0 })
                .sum()
        };
        mb / self.rate
    }

    fn completion(&self, task: usize, pe: usize, finish: f64) -> f64 {
        if self.result_return && self.is_exit[task] && self.tiers[pe] == Tier::Backend {
            finish + self.out[task] / self.rate
        } else {
            finish
        }
    }

    /// Makespan of placing tasks in `order` on the given PEs, each task
    /// starting its transfer once its inputs exist and its PE is free.
    pub fn evaluate(&self, order: &[(usize, usize)]) -> f64 {
        let mut placed: Vec<Option<(usize, f64)>> = vec![None; self.n];
        let mut free = vec![0.0f64; self.tiers.len()];
        let mut span = 0.0f64;
        for &(t, pe) in order {
            let ready = self.preds[t].iter().map(|&(p, _)| placed[p].unwrap().1).fold(0.0, f64::max);
            let start = ready.max(free[pe]) + self.transfer_in(t, pe, &placed);
            let finish = start + self.exec[t][pe];
            placed[t] = Some((pe, finish));
            free[pe] = finish;
            span = span.max(self.completion(t, pe, finish));
        }
        span
    }

    /// Smallest makespan over every topological order and every placement,
    /// found by depth-first branch and bound. Schedules whose makespan is not
    /// below `bound` are pruned; returns infinity if none is.
    pub fn exhaustive_optimum(&self, bound: f64) -> f64 {
        let min_exec: Vec<f64> = self.exec.iter().map(|r| r.iter().copied().fold(f64::INFINITY, f64::min)).collect();
        let mut tail = vec![0.0; self.n];
        // tasks are generated in topological order (edges go low -> high)
        for t in (0..self.n).rev() {
            let succ_tail = (t + 1..self.n)
                .filter(|&s| self.preds[s].iter().any(|&(p, _)| p == t))
                .map(|s| tail[s])
                .fold(0.0, f64::max);
            tail[t] = min_exec[t] + succ_tail;
        }
        let mut best = bound;
        let mut placed = vec![None; self.n];
        let mut free = vec![0.0; self.tiers.len()];
        self.branch(&mut placed, &mut free, 0.0, 0, &tail, &mut best);
        if best < bound { best } else { f64::INFINITY }
    }

    fn branch(
        &self,
        placed: &mut Vec<Option<(usize, f64)>>,
        free: &mut Vec<f64>,
        span: f64,
        done: usize,
        tail: &[f64],
        best: &mut f64,
    ) {
        if done == self.n {
            if span < *best {
                *best = span;
            }
            return;
        }
        for t in 0..self.n {
            if placed[t].is_some() || self.preds[t].iter().any(|&(p, _)| placed[p].is_none()) {
                continue;
            }
            let ready = self.preds[t].iter().map(|&(p, _)| placed[p].unwrap().1).fold(0.0, f64::max);
            if ready + tail[t] >= *best {
                return;
            }
            for pe in 0..self.tiers.len() {
                let start = ready.max(free[pe]) + self.transfer_in(t, pe, placed);
                let finish = start + self.exec[t][pe];
                let new_span = span.max(self.completion(t, pe, finish));
                if new_span >= *best || finish - self.exec[t][pe] + tail[t] >= *best {
                    continue;
                }
                let saved = free[pe];
                placed[t] = Some((pe, finish));
                free[pe] = finish;
                self.branch(placed, free, new_span, done + 1, tail, best);
                free[pe] = saved;
                placed[t] = None;
            }
        }
    }
}

use tiersim_core::engine::{run_traced, CommMode, SimOptions};
use tiersim_core::platform::{Contention, PeId};
use tiersim_core::workload::JobSubmission;
use tiersim_core::{makespan, run_simulation_with, SchedulerKind};

/// Outcome of checking one random single-job EFT instance.
pub struct EftCheck {
    pub engine: f64,
    pub replayed: f64,
    pub optimum: f64,
}

/// Runs EFT on a random instance and checks it against the oracles:
/// every decision minimizes finish time over all PEs (lowest id on ties),
/// replaying the engine's placements reproduces its makespan, and the
/// exhaustive optimum is no worse than the engine.
pub fn check_eft_instance(rng: &mut impl Rng) -> Result<EftCheck, String> {
    let dag = random_dag(rng, 8);
    let pool = random_pool(rng, 3);
    let options = SimOptions { result_return: rng.gen_bool(0.5), ..SimOptions::default() };
    let inst = Instance::new(&dag, &pool, options.link.rate, options.result_return);
    let (timeline, trace) = run_traced(&dag, JobSubmission::at_once(1), &pool, SchedulerKind::Eft, options)
        .map_err(|e| e.to_string())?;
    let engine = makespan(&timeline).map_err(|e| e.to_string())?;

    let mut placed: Vec<Option<(usize, f64)>> = vec![None; inst.n];
    let mut free = vec![0.0f64; pool.len()];
    let mut order = Vec::new();
    for step in &trace {
        let t = step.task_index;
        let ready = inst.preds[t].iter().map(|&(p, _)| placed[p].expect("predecessor placed").1).fold(0.0, f64::max);
        if ready != step.clock {
            return Err(format!("task {t} dispatched at {} but ready at {ready}", step.clock));
        }
        let finishes: Vec<f64> = (0..pool.len())
            .map(|pe| ready.max(free[pe]) + inst.transfer_in(t, pe, &placed) + inst.exec[t][pe])
            .collect();
        let best = finishes.iter().copied().fold(f64::INFINITY, f64::min);
        let expected = finishes.iter().position(|&f| f == best).unwrap();
        let chosen = pool.instances.iter().position(|pe| pe.id == step.decision.pe).unwrap();
        if chosen != expected {
            return Err(format!("task {t}: chose PE {chosen} finishing {} but PE {expected} finishes {best}", finishes[chosen]));
        }
        placed[t] = Some((chosen, best));
        free[chosen] = best;
        order.push((t, chosen));
    }
    if order.len() != inst.n {
        return Err(format!("{} decisions for {} tasks", order.len(), inst.n));
    }
    let replayed = inst.evaluate(&order);
    if replayed != engine {
        return Err(format!("replayed makespan {replayed} differs from engine {engine}"));
    }
    let optimum = inst.exhaustive_optimum(engine + 1e-9);
    if optimum > engine {
        return Err(format!("exhaustive optimum {optimum} exceeds engine makespan {engine}"));
    }
    Ok(EftCheck { engine, replayed, optimum })
}

/// Random run across schedulers, modes, link contention and submissions,
/// checked against the schedule invariants. Returns the exported timeline.
pub fn check_random_run(rng: &mut impl Rng) -> Result<String, String> {
    let dag = random_dag(rng, 10);
    let pool = random_pool(rng, 5);
    let sched = SchedulerKind::ALL[rng.gen_range(0..3)];
    let contention = if rng.gen_bool(0.5) { Contention::Serialized } else { Contention::None };
    let options = SimOptions {
        link: LinkModel { rate: 12.0, contention },
        comm_mode: if rng.gen_bool(0.5) { CommMode::Static } else { CommMode::Location },
        result_return: rng.gen_bool(0.5),
    };
    let jobs = rng.gen_range(1..=4u32);
    let delay = rng.gen_range(0..=8) as f64 * 0.5;
    let sub = JobSubmission::new(jobs, delay).unwrap();
    let tl = run_simulation_with(&dag, sub, &pool, sched, options).map_err(|e| e.to_string())?;
    let again = run_simulation_with(&dag, sub, &pool, sched, options).map_err(|e| e.to_string())?;
    if tl.export() != again.export() {
        return Err("two identical runs exported different timelines".into());
    }
    check_invariants(&dag, &pool, sub, options, &tl.records)?;
    Ok(tl.export())
}

fn check_invariants(
    dag: &WorkloadDag,
    pool: &ResourcePool,
    sub: JobSubmission,
    options: SimOptions,
    records: &[tiersim_core::engine::ScheduleRecord],
) -> Result<(), String> {
    let inst = Instance::new(dag, pool, options.link.rate, options.result_return);
    let n = inst.n;
    if records.len() != n * sub.instances as usize {
        return Err(format!("{} records for {} tasks x {} jobs", records.len(), n, sub.instances));
    }
    let pos = |id: TaskId| dag.tasks.iter().position(|t| t.id == id).unwrap();
    let mut by_key = BTreeMap::new();
    for r in records {
        if by_key.insert((r.job.0, pos(r.task)), r).is_some() {
            return Err(format!("task {:?} of job {} scheduled twice", r.task, r.job.0));
        }
    }
    let pe_index = |r: &tiersim_core::engine::ScheduleRecord| {
        pool.instances.iter().position(|pe| pe.id == PeId(r.pe)).unwrap()
    };
    let eps = 1e-9;

    // one task at a time per PE, including its inbound transfer
    let mut per_pe: Vec<Vec<(f64, f64)>> = vec![Vec::new(); pool.len()];
    for r in records {
        per_pe[pe_index(r)].push((r.transfer_start, r.finish));
    }
    for (pe, iv) in per_pe.iter_mut().enumerate() {
        iv.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        for w in iv.windows(2) {
            if w[1].0 < w[0].1 - eps {
                return Err(format!("PE {pe} overlaps: {:?} and {:?}", w[0], w[1]));
            }
        }
    }

    for (&(job, t), r) in &by_key {
        let pe = pe_index(r);
        let tier = inst.tiers[pe];
        let arrival = sub.arrival_time(job);
        if r.transfer_start < arrival - eps || r.exec_start < r.transfer_start - eps {
            return Err(format!("job {job} task {t} starts before arrival or transfer"));
        }
        if (r.finish - r.exec_start - inst.exec[t][pe]).abs() > eps {
            return Err(format!("job {job} task {t} ran {} instead of {}", r.finish - r.exec_start, inst.exec[t][pe]));
        }
        // inputs must exist before the transfer begins
        let mut expected_mb = 0.0;
        for &(p, v) in &inst.preds[t] {
            let pr = by_key[&(job, p)];
            let p_tier = inst.tiers[pe_index(pr)];
            let available = match options.comm_mode {
                CommMode::Static => pr.return_finish.unwrap_or(pr.finish),
                CommMode::Location => pr.finish,
            };
            if r.transfer_start < available - eps {
                return Err(format!("job {job} task {t} starts before input from task {p} is available"));
            }
            expected_mb += match options.comm_mode {
                CommMode::Static if tier == Tier::Backend => v,
                CommMode::Static => 0.0,
                CommMode::Location if p_tier != tier => v,
                CommMode::Location => 0.0,
            };
        }
        if inst.preds[t].is_empty() && tier == Tier::Backend {
            expected_mb += inst.raw;
        }
        if (r.transferred_volume - expected_mb).abs() > eps {
            return Err(format!("job {job} task {t} moved {} Mb, expected {expected_mb}", r.transferred_volume));
        }
        let transfer = r.exec_start - r.transfer_start;
        if options.link.contention == Contention::None && (transfer - expected_mb / options.link.rate).abs() > eps {
            return Err(format!("job {job} task {t} transfer took {transfer} s for {expected_mb} Mb"));
        }
        let pushes = tier == Tier::Backend
            && match options.comm_mode {
                CommMode::Static => true,
                CommMode::Location => options.result_return && inst.is_exit[t],
            };
        match (pushes, r.return_finish) {
            (true, Some(end)) => {
                if end < r.finish + inst.out[t] / options.link.rate - eps || r.returned_volume != inst.out[t] {
                    return Err(format!("job {job} task {t} output push is wrong"));
                }
            }
            (false, None) => {}
            _ => return Err(format!("job {job} task {t} output push present={}", r.return_finish.is_some())),
        }
    }

    if options.link.contention == Contention::Serialized {
        let mut link: Vec<(f64, f64)> = Vec::new();
        for r in records {
            if r.transferred_volume > 0.0 {
                link.push((r.exec_start - r.transferred_volume / options.link.rate, r.exec_start));
            }
            if let (Some(end), true) = (r.return_finish, r.returned_volume > 0.0) {
                link.push((end - r.returned_volume / options.link.rate, end));
            }
        }
        link.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in link.windows(2) {
            if w[1].0 < w[0].1 - eps {
                return Err(format!("link carries two transfers at once: {:?} and {:?}", w[0], w[1]));
            }
        }
    }

    let span = records.iter().map(|r| r.completion()).fold(0.0, f64::max);
    let bound = dag.critical_path_lower_bound() + sub.arrival_time(sub.instances - 1);
    if span < bound - eps {
        return Err(format!("makespan {span} below lower bound {bound}"));
    }
    Ok(())
}
