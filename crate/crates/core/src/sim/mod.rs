//! Deterministic discrete-event simulation of tasks, monitor and plant.
//!
//! Tasks are scheduled fixed-priority preemptively on one processor. A job
//! with `N` actuations splits its execution into `N + 1` chunks and runs a
//! checker section of length `C°` after each of the first `N`; checker
//! sections are never preempted. The request is mediated when its section
//! starts, against the plant state at that instant, and whatever the monitor
//! lets through reaches the plant when the section ends. The final chunk is
//! preemptive.
//!
//! Jobs released before the horizon always run to completion, so every job
//! has a release and a completion event.

mod attack;
mod controller;
mod engine;
pub mod plant;
mod trace;

pub use attack::{AttackMode, AttackScript, SpoofPayload};
pub use controller::Controller;
pub use engine::run;
pub use plant::{Plant, PlantSpec};
pub use trace::{AppliedWrite, EventKind, JobOutcome, SchedEvent, SimTrace, Summary, TaskSummary};

use crate::codec::CodecError;
use crate::model::{RtTask, TaskId};
use crate::monitor::{MonitorConfig, MonitorError};
use crate::rta::{self, RtaError, Wcrt};
use crate::time::{hyperperiod, Micros};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Monitor(#[from] MonitorError),
    #[error("controller command cannot be encoded: {0}")]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Rta(#[from] RtaError),
    #[error("job {job} of `{task}` missed its deadline at {deadline} ms")]
    DeadlineMiss { task: String, job: u64, deadline: Micros },
    #[error("invalid scenario: {0}")]
    Config(String),
}

/// Simulation-only attributes of a task.
#[derive(Clone, Debug, PartialEq)]
pub struct SimTask {
    pub task: RtTask,
    /// First release time.
    pub phase: Micros,
    /// Execution progress at which each actuation is issued; evenly spaced
    /// when `None`.
    pub offsets: Option<Vec<Micros>>,
    pub controller: Option<Controller>,
}

impl SimTask {
    pub fn new(task: RtTask) -> Self {
        SimTask { task, phase: Micros::ZERO, offsets: None, controller: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub tasks: Vec<SimTask>,
    pub monitor: MonitorConfig,
    pub plant: PlantSpec,
    pub attacks: Vec<AttackScript>,
    pub horizon: Micros,
    /// Plant sampling interval.
    pub tick: Micros,
    /// Seeds attack start jitter and execution-time jitter.
    pub seed: u64,
    /// Draw each job's execution time from `[0.8·C, C]`.
    pub exec_jitter: bool,
    pub fail_on_miss: bool,
}

impl Scenario {
    /// A scenario with no plant, attacks or jitter.
    pub fn new(name: impl Into<String>, tasks: Vec<SimTask>, monitor: MonitorConfig, horizon: Micros) -> Self {
        Scenario {
            name: name.into(),
            tasks,
            monitor,
            plant: PlantSpec::None,
            attacks: Vec::new(),
            horizon,
            tick: Micros::from_ms(1),
            seed: 0,
            exec_jitter: false,
            fail_on_miss: false,
        }
    }

    pub fn rt_tasks(&self) -> Vec<RtTask> {
        self.tasks.iter().map(|t| t.task.clone()).collect()
    }

    pub fn with_monitor(mut self, enabled: bool) -> Self {
        self.monitor.enabled = enabled;
        self
    }

    pub fn hyperperiod(&self) -> Option<Micros> {
        hyperperiod(self.tasks.iter().map(|t| t.task.period))
    }
}

/// Runs an arm scenario; the plant must be the gripper servo.
pub fn run_arm_demo(scenario: &Scenario) -> Result<SimTrace, SimError> {
    if !matches!(scenario.plant, PlantSpec::Arm { .. }) {
        return Err(SimError::Config("arm demo needs an arm plant".into()));
    }
    run(scenario)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossRow {
    pub task: String,
    pub bound: Wcrt,
    pub deadline: Micros,
    /// Largest simulated release-to-completion time.
    pub observed: Option<Micros>,
    pub misses: usize,
}

impl CrossRow {
    /// The analysis bound was beaten by the simulation.
    pub fn violated(&self) -> bool {
        match (self.bound.response(), self.observed) {
            (Some(r), Some(o)) => o > r,
            _ => false,
        }
    }

    pub fn slack(&self) -> Option<Micros> {
        Some(self.bound.response()?.saturating_sub(self.observed?))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossValidation {
    pub rows: Vec<CrossRow>,
    pub schedulable: bool,
    pub horizon: Micros,
}

impl CrossValidation {
    pub fn misses(&self) -> usize {
        self.rows.iter().map(|r| r.misses).sum()
    }

    /// No bound violated, and no miss in a taskset judged schedulable.
    pub fn sound(&self) -> bool {
        !self.rows.iter().any(CrossRow::violated) && !(self.schedulable && self.misses() > 0)
    }
}

impl std::fmt::Display for CrossValidation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{:>10}  {:>10}  {:>10}  {:>10}  {:>6}  ok", "task", "bound", "observed", "slack", "misses")?;
        for r in &self.rows {
            let bound = match r.bound {
                Wcrt::Bounded { response, .. } => response.to_string(),
                Wcrt::Unschedulable { .. } => "unsched".to_string(),
            };
            let opt = |m: Option<Micros>| m.map_or_else(|| "-".to_string(), |m| m.to_string());
            writeln!(
                f,
                "{:>10}  {:>10}  {:>10}  {:>10}  {:>6}  {}",
                r.task,
                bound,
                opt(r.observed),
                opt(r.slack()),
                r.misses,
                if r.violated() { "VIOLATION" } else { "yes" }
            )?;
        }
        writeln!(
            f,
            "horizon {} ms, analysis says {}, {}",
            self.horizon,
            if self.schedulable { "schedulable" } else { "unschedulable" },
            if self.sound() { "bounds hold" } else { "BOUNDS VIOLATED" }
        )
    }
}

/// Compares the analysis bounds with a synchronous-release simulation over
/// one hyperperiod (plus the largest phase), with attacks and jitter off.
pub fn cross_validate(scenario: &Scenario) -> Result<CrossValidation, SimError> {
    let tasks = scenario.rt_tasks();
    let report = rta::analyze(&tasks, scenario.monitor.check_overhead)?;
    let max_phase = scenario.tasks.iter().map(|t| t.phase).max().unwrap_or(Micros::ZERO);
    let horizon = scenario.hyperperiod().unwrap_or(Micros::ZERO) + max_phase;
    let mut clean = scenario.clone();
    clean.attacks.clear();
    clean.exec_jitter = false;
    clean.fail_on_miss = false;
    clean.horizon = horizon;
    let trace = run(&clean)?;
    let rows = report
        .tasks
        .iter()
        .enumerate()
        .map(|(i, t)| CrossRow {
            task: t.name.clone(),
            bound: t.outcome,
            deadline: t.deadline,
            observed: trace.max_response(TaskId(i)),
            misses: trace.jobs.iter().filter(|j| j.task == TaskId(i) && j.missed()).count(),
        })
        .collect();
    Ok(CrossValidation { rows, schedulable: report.schedulable(), horizon })
}
