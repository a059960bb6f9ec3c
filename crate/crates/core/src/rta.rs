//! Design-time response-time analysis for fixed-priority tasks whose
//! actuation requests each cost a non-preemptive checker section.
//!
//! For task `i` with `N_i` requests and checker cost `C°`:
//!
//! ```text
//! C_i' = C_i + N_i·C°                       effective WCET
//! B_i  = max { N_j·C_j° : j lower priority } blocking
//! r ← C_i' + B_i + Σ_{h higher} ⌈r / T_h⌉·C_h'  from r = 0
//! ```
//!
//! The iteration stops at a fixed point (the response-time bound) or as soon
//! as an iterate exceeds `D_i`. All arithmetic is in integer microseconds.
//!
//! ```
//! use actguard::{rta, Micros, RtTask};
//! let tasks = vec![
//!     RtTask::new(0, "t1", Micros::from_ms(1), Micros::from_ms(4), 1),
//!     RtTask::new(1, "t2", Micros::from_ms(2), Micros::from_ms(6), 2),
//!     RtTask::new(2, "t3", Micros::from_ms(3), Micros::from_ms(12), 3),
//! ];
//! let report = rta::analyze(&tasks, Micros::ZERO).unwrap();
//! let r: Vec<_> = report.tasks.iter().map(|t| t.response().unwrap()).collect();
//! assert_eq!(r, [Micros::from_ms(1), Micros::from_ms(3), Micros::from_ms(10)]);
//! ```

use std::fmt::{self, Write as _};

use serde::Serialize;

use crate::model::{validate_taskset, ModelError, RtTask};
use crate::time::Micros;

/// Defensive bound on fixed-point iterations.
pub const ITERATION_CAP: u32 = 1_000_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RtaError {
    #[error("invalid taskset: {0}")]
    InvalidTaskset(#[from] ModelError),
    #[error("task `{task}` did not converge within {iterations} iterations")]
    NonConvergent { task: String, iterations: u32 },
}

/// Outcome of the fixed-point search for one task.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Wcrt {
    Bounded { response: Micros, iterations: u32 },
    /// An iterate passed the deadline.
    Unschedulable { exceeded_at: Micros, iterations: u32 },
}

impl Wcrt {
    pub fn iterations(self) -> u32 {
        match self {
            Wcrt::Bounded { iterations, .. } | Wcrt::Unschedulable { iterations, .. } => iterations,
        }
    }

    pub fn response(self) -> Option<Micros> {
        match self {
            Wcrt::Bounded { response, .. } => Some(response),
            Wcrt::Unschedulable { .. } => None,
        }
    }
}

/// `C + N·C°`, with the task's own overhead when it has one.
pub fn effective_wcet(task: &RtTask, overhead: Micros) -> Micros {
    task.wcet + task.overhead(overhead) * u64::from(task.actuation_bound)
}

/// Longest checker occupation by any strictly lower-priority task.
pub fn blocking(task: &RtTask, tasks: &[RtTask], overhead: Micros) -> Micros {
    tasks
        .iter()
        .filter(|j| task.outranks(j))
        .map(|j| j.overhead(overhead) * u64::from(j.actuation_bound))
        .max()
        .unwrap_or(Micros::ZERO)
}

/// The iterates `r^(1), r^(2), …` of the recurrence for `task`, without any
/// stopping rule. Useful for inspecting convergence.
pub fn iterate<'a>(task: &'a RtTask, tasks: &'a [RtTask], overhead: Micros) -> impl Iterator<Item = Micros> + 'a {
    let base = effective_wcet(task, overhead) + blocking(task, tasks, overhead);
    let hp: Vec<(Micros, Micros)> =
        tasks.iter().filter(|h| h.outranks(task)).map(|h| (h.period, effective_wcet(h, overhead))).collect();
    let mut r = Micros::ZERO;
    std::iter::from_fn(move || {
        r = base + hp.iter().map(|&(t, c)| c * r.div_ceil(t)).sum::<Micros>();
        Some(r)
    })
}

/// Fixed-point response-time bound of `task` within `tasks`.
pub fn wcrt(task: &RtTask, tasks: &[RtTask], overhead: Micros) -> Result<Wcrt, RtaError> {
    validate_taskset(tasks, None)?;
    let mut prev = Micros::ZERO;
    for (k, r) in iterate(task, tasks, overhead).take(ITERATION_CAP as usize).enumerate() {
        let iterations = k as u32 + 1;
        if r > task.deadline {
            return Ok(Wcrt::Unschedulable { exceeded_at: r, iterations });
        }
        if r == prev {
            return Ok(Wcrt::Bounded { response: r, iterations });
        }
        prev = r;
    }
    Err(RtaError::NonConvergent { task: task.name.clone(), iterations: ITERATION_CAP })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TaskReport {
    pub name: String,
    pub priority: u32,
    pub deadline: Micros,
    pub c_tee: Micros,
    pub b_tee: Micros,
    #[serde(skip)]
    pub outcome: Wcrt,
}

impl TaskReport {
    pub fn response(&self) -> Option<Micros> {
        self.outcome.response()
    }

    /// `R − C'`; blocking is included.
    pub fn interference(&self) -> Option<Micros> {
        self.response().map(|r| r.saturating_sub(self.c_tee))
    }

    pub fn schedulable(&self) -> bool {
        self.response().is_some_and(|r| r <= self.deadline)
    }

    pub fn iterations(&self) -> u32 {
        self.outcome.iterations()
    }

    pub fn slack(&self) -> Option<Micros> {
        self.response().map(|r| self.deadline.saturating_sub(r))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RtaReport {
    /// In the order the tasks were given.
    pub tasks: Vec<TaskReport>,
    pub utilization: f64,
}

impl RtaReport {
    pub fn schedulable(&self) -> bool {
        self.tasks.iter().all(TaskReport::schedulable)
    }

    pub fn task(&self, name: &str) -> Option<&TaskReport> {
        self.tasks.iter().find(|t| t.name == name)
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "task",
            "priority",
            "c_tee_ms",
            "b_tee_ms",
            "r_tee_ms",
            "interference_ms",
            "deadline_ms",
            "schedulable",
            "iterations",
        ])?;
        let opt = |m: Option<Micros>| m.map_or_else(String::new, |m| m.to_string());
        for t in &self.tasks {
            out.write_record([
                t.name.clone(),
                t.priority.to_string(),
                t.c_tee.to_string(),
                t.b_tee.to_string(),
                opt(t.response()),
                opt(t.interference()),
                t.deadline.to_string(),
                t.schedulable().to_string(),
                t.iterations().to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Aligned text table, one row per task plus a verdict line.
impl fmt::Display for RtaReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let header = ["task", "prio", "C'", "B", "R", "I", "D", "ok", "iter"];
        let rows: Vec<[String; 9]> = self
            .tasks
            .iter()
            .map(|t| {
                let r = match t.outcome {
                    Wcrt::Bounded { response, .. } => response.to_string(),
                    Wcrt::Unschedulable { exceeded_at, .. } => format!(">{exceeded_at}"),
                };
                [
                    t.name.clone(),
                    t.priority.to_string(),
                    t.c_tee.to_string(),
                    t.b_tee.to_string(),
                    r,
                    t.interference().map_or_else(|| "-".to_string(), |i| i.to_string()),
                    t.deadline.to_string(),
                    if t.schedulable() { "yes" } else { "NO" }.to_string(),
                    t.iterations().to_string(),
                ]
            })
            .collect();
        let mut widths = header.map(str::len);
        for row in &rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut line = String::new();
        for (k, h) in header.iter().enumerate() {
            let _ = write!(line, "{h:>w$}  ", w = widths[k]);
        }
        writeln!(f, "{}", line.trim_end())?;
        for row in &rows {
            line.clear();
            for (k, cell) in row.iter().enumerate() {
                let _ = write!(line, "{cell:>w$}  ", w = widths[k]);
            }
            writeln!(f, "{}", line.trim_end())?;
        }
        writeln!(
            f,
            "U = {:.3}  {}",
            self.utilization,
            if self.schedulable() { "schedulable" } else { "UNSCHEDULABLE" }
        )
    }
}

/// Runs [`wcrt`] for every task.
pub fn analyze(tasks: &[RtTask], overhead: Micros) -> Result<RtaReport, RtaError> {
    validate_taskset(tasks, None)?;
    let mut reports = Vec::with_capacity(tasks.len());
    let mut utilization = 0.0;
    for t in tasks {
        let c_tee = effective_wcet(t, overhead);
        utilization += c_tee.as_us() as f64 / t.period.as_us() as f64;
        reports.push(TaskReport {
            name: t.name.clone(),
            priority: t.priority,
            deadline: t.deadline,
            c_tee,
            b_tee: blocking(t, tasks, overhead),
            outcome: wcrt(t, tasks, overhead)?,
        });
    }
    Ok(RtaReport { tasks: reports, utilization })
}
