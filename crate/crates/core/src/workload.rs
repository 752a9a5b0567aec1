//! Pipeline DAGs: task/edge model, the JSON workload schema, validation and
//! precedence queries.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of a task inside one DAG.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(pub u32);

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One node of a pipeline: a named function with a per-kind execution profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: TaskId,
    pub name: String,
    /// PE-kind name to execution time in seconds.
    #[serde(rename = "exec_s")]
    pub exec_profile: BTreeMap<String, f64>,
    /// Megabits produced by this task.
    #[serde(rename = "out_mb")]
    pub output_volume: f64,
}

impl TaskSpec {
    pub fn exec_time(&self, kind: &str) -> Option<f64> {
        self.exec_profile.get(kind).copied()
    }

    pub fn min_exec_time(&self) -> f64 {
        self.exec_profile.values().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Precedence edge carrying `volume` megabits from `src` to `dst`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DagEdge {
    pub src: TaskId,
    pub dst: TaskId,
    #[serde(rename = "mb")]
    pub volume: f64,
}

/// A pipeline DAG as submitted to the runtime.
///
/// This is plain data: an instance may violate the DAG invariants until it
/// has passed [`validate_dag`]. [`parse_workload`] only returns valid DAGs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadDag {
    pub tasks: Vec<TaskSpec>,
    pub edges: Vec<DagEdge>,
    /// Megabits delivered from the sensors to every entry task.
    #[serde(rename = "raw_input_mb")]
    pub raw_input_volume: f64,
}

/// How many instances of a DAG are submitted and how far apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JobSubmission {
    pub instances: u32,
    /// Seconds between consecutive instances; 0 submits all at once.
    pub inter_arrival_delay: f64,
}

impl JobSubmission {
    pub fn new(instances: u32, inter_arrival_delay: f64) -> Result<Self, WorkloadError> {
        if instances == 0 {
            return Err(WorkloadError::BadSubmission("instances must be >= 1".into()));
        }
        if !(inter_arrival_delay >= 0.0) || !inter_arrival_delay.is_finite() {
            return Err(WorkloadError::BadSubmission(format!(
                "inter-arrival delay must be a finite value >= 0, got {inter_arrival_delay}"
            )));
        }
        Ok(Self { instances, inter_arrival_delay })
    }

    pub fn at_once(instances: u32) -> Self {
        Self { instances: instances.max(1), inter_arrival_delay: 0.0 }
    }

    pub fn arrival_time(&self, job: u32) -> f64 {
        job as f64 * self.inter_arrival_delay
    }
}

/// A single broken DAG invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoTasks,
    DuplicateTaskId(TaskId),
    EmptyProfile(TaskId),
    EmptyKindName(TaskId),
    NonPositiveExecTime { task: TaskId, kind: String, seconds: f64 },
    NegativeOutputVolume(TaskId),
    SelfLoop(TaskId),
    DanglingEdge { src: TaskId, dst: TaskId, missing: TaskId },
    NegativeEdgeVolume { src: TaskId, dst: TaskId },
    NegativeRawInput,
    /// Tasks that sit on at least one cycle.
    Cycle(Vec<TaskId>),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoTasks => write!(f, "workload has no tasks"),
            Violation::DuplicateTaskId(id) => write!(f, "duplicate task id {id}"),
            Violation::EmptyProfile(id) => write!(f, "task {id} has an empty execution profile"),
            Violation::EmptyKindName(id) => write!(f, "task {id} has an empty PE-kind name"),
            Violation::NonPositiveExecTime { task, kind, seconds } => {
                write!(f, "task {task} has non-positive execution time {seconds} on {kind}")
            }
            Violation::NegativeOutputVolume(id) => write!(f, "task {id} has negative output volume"),
            Violation::SelfLoop(id) => write!(f, "edge {id}->{id} is a self loop"),
            Violation::DanglingEdge { src, dst, missing } => {
                write!(f, "edge {src}->{dst} references unknown task {missing}")
            }
            Violation::NegativeEdgeVolume { src, dst } => write!(f, "edge {src}->{dst} has negative volume"),
            Violation::NegativeRawInput => write!(f, "raw input volume is negative"),
            Violation::Cycle(ids) => {
                let ids: Vec<String> = ids.iter().map(|i| i.to_string()).collect();
                write!(f, "cycle through tasks [{}]", ids.join(", "))
            }
        }
    }
}

/// Result of [`validate_dag`]; empty iff the DAG is valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("malformed workload document: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("invalid workload: {0}")]
    Invalid(ValidationReport),
    #[error("unknown task id {0}")]
    UnknownTask(TaskId),
    #[error("invalid submission: {0}")]
    BadSubmission(String),
}

/// Parses a JSON workload document and validates it.
pub fn parse_workload(text: &str) -> Result<WorkloadDag, WorkloadError> {
    let dag: WorkloadDag = serde_json::from_str(text)?;
    let report = validate_dag(&dag);
    if report.is_empty() {
        Ok(dag)
    } else {
        Err(WorkloadError::Invalid(report))
    }
}

/// Renders a DAG back to the workload schema.
pub fn serialize_workload(dag: &WorkloadDag) -> String {
    serde_json::to_string_pretty(dag).expect("workload serialization cannot fail")
}

/// Checks every DAG invariant and lists each violation.
pub fn validate_dag(dag: &WorkloadDag) -> ValidationReport {
    let mut violations = Vec::new();
    if dag.tasks.is_empty() {
        violations.push(Violation::NoTasks);
    }
    if dag.raw_input_volume < 0.0 || dag.raw_input_volume.is_nan() {
        violations.push(Violation::NegativeRawInput);
    }

    let mut seen = HashSet::new();
    for task in &dag.tasks {
        if !seen.insert(task.id) {
            violations.push(Violation::DuplicateTaskId(task.id));
        }
        if task.exec_profile.is_empty() {
            violations.push(Violation::EmptyProfile(task.id));
        }
        for (kind, &seconds) in &task.exec_profile {
            if kind.is_empty() {
                violations.push(Violation::EmptyKindName(task.id));
            }
            if !(seconds > 0.0) || !seconds.is_finite() {
                violations.push(Violation::NonPositiveExecTime { task: task.id, kind: kind.clone(), seconds });
            }
        }
        if task.output_volume < 0.0 || task.output_volume.is_nan() {
            violations.push(Violation::NegativeOutputVolume(task.id));
        }
    }

    for edge in &dag.edges {
        if edge.src == edge.dst {
            violations.push(Violation::SelfLoop(edge.src));
        }
        for end in [edge.src, edge.dst] {
            if !seen.contains(&end) {
                violations.push(Violation::DanglingEdge { src: edge.src, dst: edge.dst, missing: end });
            }
        }
        if edge.volume < 0.0 || edge.volume.is_nan() {
            violations.push(Violation::NegativeEdgeVolume { src: edge.src, dst: edge.dst });
        }
    }

    let cyclic = cyclic_tasks(dag, &seen);
    if !cyclic.is_empty() {
        violations.push(Violation::Cycle(cyclic));
    }
    ValidationReport { violations }
}

/// Tasks left over after Kahn's algorithm peels every zero in-degree node.
/// Self loops are reported separately and ignored here.
fn cyclic_tasks(dag: &WorkloadDag, known: &HashSet<TaskId>) -> Vec<TaskId> {
    let mut indegree: BTreeMap<TaskId, usize> = known.iter().map(|&id| (id, 0)).collect();
    let mut succ: HashMap<TaskId, Vec<TaskId>> = HashMap::new();
    for e in &dag.edges {
        if e.src == e.dst || !known.contains(&e.src) || !known.contains(&e.dst) {
            continue;
        }
        *indegree.get_mut(&e.dst).unwrap() += 1;
        succ.entry(e.src).or_default().push(e.dst);
    }
    let mut stack: Vec<TaskId> = indegree.iter().filter(|(_, &d)| d == 0).map(|(&id, _)| id).collect();
    while let Some(id) = stack.pop() {
        indegree.remove(&id);
        for s in succ.get(&id).into_iter().flatten() {
            if let Some(d) = indegree.get_mut(s) {
                *d -= 1;
                if *d == 0 {
                    stack.push(*s);
                }
            }
        }
    }
    indegree.into_keys().collect()
}

impl WorkloadDag {
    pub fn task(&self, id: TaskId) -> Option<&TaskSpec> {
        self.tasks.iter().find(|t| t.id == id)
    }

    pub fn predecessors(&self, id: TaskId) -> impl Iterator<Item = &DagEdge> {
        self.edges.iter().filter(move |e| e.dst == id)
    }

    pub fn successors(&self, id: TaskId) -> impl Iterator<Item = &DagEdge> {
        self.edges.iter().filter(move |e| e.src == id)
    }

    /// Tasks without predecessors, in id order.
    pub fn entry_tasks(&self) -> Vec<TaskId> {
        let with_pred: HashSet<TaskId> = self.edges.iter().map(|e| e.dst).collect();
        let mut ids: Vec<TaskId> = self.tasks.iter().map(|t| t.id).filter(|id| !with_pred.contains(id)).collect();
        ids.sort();
        ids
    }

    /// Tasks without successors, in id order.
    pub fn exit_tasks(&self) -> Vec<TaskId> {
        let with_succ: HashSet<TaskId> = self.edges.iter().map(|e| e.src).collect();
        let mut ids: Vec<TaskId> = self.tasks.iter().map(|t| t.id).filter(|id| !with_succ.contains(id)).collect();
        ids.sort();
        ids
    }

    /// Longest path using each task's fastest execution time and no transfers.
    pub fn critical_path_lower_bound(&self) -> f64 {
        let mut finish: HashMap<TaskId, f64> = HashMap::new();
        let mut completed = BTreeSet::new();
        while completed.len() < self.tasks.len() {
            let ready = ready_tasks(self, &completed).expect("completed ids come from the dag");
            if ready.is_empty() {
                break;
            }
            for id in ready {
                let start = self.predecessors(id).map(|e| finish[&e.src]).fold(0.0, f64::max);
                finish.insert(id, start + self.task(id).unwrap().min_exec_time());
                completed.insert(id);
            }
        }
        finish.values().copied().fold(0.0, f64::max)
    }
}

/// Tasks not in `completed` whose predecessors are all in `completed`.
pub fn ready_tasks(dag: &WorkloadDag, completed: &BTreeSet<TaskId>) -> Result<BTreeSet<TaskId>, WorkloadError> {
    let known: HashSet<TaskId> = dag.tasks.iter().map(|t| t.id).collect();
    if let Some(&bad) = completed.iter().find(|id| !known.contains(id)) {
        return Err(WorkloadError::UnknownTask(bad));
    }
    let mut blocked = HashSet::new();
    for e in &dag.edges {
        if !completed.contains(&e.src) {
            blocked.insert(e.dst);
        }
    }
    Ok(dag
        .tasks
        .iter()
        .map(|t| t.id)
        .filter(|id| !completed.contains(id) && !blocked.contains(id))
        .collect())
}

const CANONICAL_DS_WORKLOAD: &str = include_str!("../data/ds_workload.json");

/// The shipped 16-task data-science pipeline (reference topology and synthetic
/// profiles, see `data/ds_workload.json`).
pub fn canonical_ds_workload() -> WorkloadDag {
    parse_workload(CANONICAL_DS_WORKLOAD).expect("shipped workload is valid")
}
