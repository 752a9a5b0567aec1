//! Discrete-event simulation of data-science pipeline DAGs on a two-tier
//! (edge frontend / data-center backend) heterogeneous resource pool.
//!
//! * [`workload`]: DAG model, JSON schema, the shipped 16-task pipeline.
//! * [`platform`]: PE kinds and tiers, pools, the link, pool sweeps.
//! * [`engine`]: the event-driven simulator and its timeline.
//! * [`schedulers`]: EFT, ETF and RR placement policies.
//! * [`metrics`]: makespan and utilization summaries.
//! * [`harness`]: experiment drivers and CSV/SVG output.

pub mod engine;
pub mod harness;
pub mod metrics;
pub mod platform;
pub mod schedulers;
pub mod workload;

pub use engine::{makespan, run_simulation, run_simulation_with, CommMode, SimOptions, Timeline};
pub use platform::{build_pool, LinkModel, ResourcePool, Tier};
pub use schedulers::SchedulerKind;
pub use workload::{canonical_ds_workload, JobSubmission, WorkloadDag};
