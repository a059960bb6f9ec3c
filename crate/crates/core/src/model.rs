//! Domain types shared by the monitor, the analysis and the simulator.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::codec::Codec;
use crate::time::Micros;

/// Index of a task in its taskset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TaskId(pub usize);

/// Index of an actuator in the system's actuator list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ActuatorId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("task `{0}` has a zero worst-case execution time")]
    ZeroWcet(String),
    #[error("task `{0}` needs 0 < deadline <= period")]
    BadDeadline(String),
    #[error("task `{0}` has a zero period")]
    ZeroPeriod(String),
    #[error("tasks `{0}` and `{1}` share priority {2}")]
    DuplicatePriority(String, String, u32),
    #[error("task `{task}` has an access row of length {got}, expected {expected}")]
    AccessRowLength { task: String, got: usize, expected: usize },
    #[error("index ({task}, {actuator}) is outside the {rows}x{cols} access matrix")]
    IndexOutOfRange { task: usize, actuator: usize, rows: usize, cols: usize },
    #[error("access matrix rows have unequal lengths")]
    RaggedMatrix,
}

/// A periodic real-time task.
///
/// Lower `priority` numbers run first. `actuation_bound` is the most
/// actuation requests a single job may issue; the analysis charges one
/// checker overhead per request.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RtTask {
    pub id: TaskId,
    pub name: String,
    pub wcet: Micros,
    pub period: Micros,
    pub deadline: Micros,
    pub priority: u32,
    pub actuation_bound: u32,
    pub access_row: Vec<bool>,
    /// Per-task checker overhead; `None` uses the system-wide value.
    pub check_overhead: Option<Micros>,
}

impl RtTask {
    /// A task with implicit deadline, no actuation and no actuator access.
    pub fn new(id: usize, name: impl Into<String>, wcet: Micros, period: Micros, priority: u32) -> Self {
        RtTask {
            id: TaskId(id),
            name: name.into(),
            wcet,
            period,
            deadline: period,
            priority,
            actuation_bound: 0,
            access_row: Vec::new(),
            check_overhead: None,
        }
    }

    pub fn with_deadline(mut self, deadline: Micros) -> Self {
        self.deadline = deadline;
        self
    }

    pub fn with_actuation(mut self, bound: u32) -> Self {
        self.actuation_bound = bound;
        self
    }

    pub fn with_access(mut self, row: Vec<bool>) -> Self {
        self.access_row = row;
        self
    }

    pub fn overhead(&self, global: Micros) -> Micros {
        self.check_overhead.unwrap_or(global)
    }

    /// Higher priority than `other` (smaller number).
    pub fn outranks(&self, other: &RtTask) -> bool {
        self.priority < other.priority
    }
}

/// Checks the constrained-deadline task model and priority uniqueness.
pub fn validate_taskset(tasks: &[RtTask], actuator_count: Option<usize>) -> Result<(), ModelError> {
    for t in tasks {
        if t.period.is_zero() {
            return Err(ModelError::ZeroPeriod(t.name.clone()));
        }
        if t.wcet.is_zero() {
            return Err(ModelError::ZeroWcet(t.name.clone()));
        }
        if t.deadline.is_zero() || t.deadline > t.period {
            return Err(ModelError::BadDeadline(t.name.clone()));
        }
        if let Some(m) = actuator_count {
            if !t.access_row.is_empty() && t.access_row.len() != m {
                return Err(ModelError::AccessRowLength {
                    task: t.name.clone(),
                    got: t.access_row.len(),
                    expected: m,
                });
            }
        }
    }
    let mut seen: BTreeMap<u32, &str> = BTreeMap::new();
    for t in tasks {
        if let Some(prev) = seen.insert(t.priority, &t.name) {
            return Err(ModelError::DuplicatePriority(prev.to_string(), t.name.clone(), t.priority));
        }
    }
    Ok(())
}

/// Rate-monotonic priorities (shorter period first, ties by declaration order),
/// returned as `1..=n` in declaration order.
pub fn rate_monotonic_priorities(periods: &[Micros]) -> Vec<u32> {
    let mut order: Vec<usize> = (0..periods.len()).collect();
    order.sort_by_key(|&i| (periods[i], i));
    let mut prio = vec![0; periods.len()];
    for (rank, i) in order.into_iter().enumerate() {
        prio[i] = rank as u32 + 1;
    }
    prio
}

/// The N x M task-to-actuator permission grid.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessMatrix {
    rows: Vec<Vec<bool>>,
    cols: usize,
}

impl AccessMatrix {
    pub fn new(rows: Vec<Vec<bool>>) -> Result<Self, ModelError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(ModelError::RaggedMatrix);
        }
        Ok(AccessMatrix { rows, cols })
    }

    /// Stacks the tasks' access rows; an empty row means no access at all.
    pub fn from_tasks(tasks: &[RtTask], actuator_count: usize) -> Result<Self, ModelError> {
        let mut rows = Vec::with_capacity(tasks.len());
        for t in tasks {
            if t.access_row.is_empty() {
                rows.push(vec![false; actuator_count]);
                continue;
            }
            if t.access_row.len() != actuator_count {
                return Err(ModelError::AccessRowLength {
                    task: t.name.clone(),
                    got: t.access_row.len(),
                    expected: actuator_count,
                });
            }
            rows.push(t.access_row.clone());
        }
        Ok(AccessMatrix { rows, cols: actuator_count })
    }

    pub fn tasks(&self) -> usize {
        self.rows.len()
    }

    pub fn actuators(&self) -> usize {
        self.cols
    }

    pub fn has_permission(&self, task: TaskId, actuator: ActuatorId) -> Result<bool, ModelError> {
        self.rows
            .get(task.0)
            .and_then(|r| r.get(actuator.0))
            .copied()
            .ok_or(ModelError::IndexOutOfRange {
                task: task.0,
                actuator: actuator.0,
                rows: self.rows.len(),
                cols: self.cols,
            })
    }

    /// All `(task, actuator)` pairs with a set flag, row-major.
    pub fn granted(&self) -> impl Iterator<Item = (TaskId, ActuatorId)> + '_ {
        self.rows.iter().enumerate().flat_map(|(i, r)| {
            r.iter()
                .enumerate()
                .filter(|(_, &b)| b)
                .map(move |(k, _)| (TaskId(i), ActuatorId(k)))
        })
    }
}

/// One symbolic actuator command, e.g. `fwd()` or `st_sp(120)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Command {
    pub name: String,
    pub arg: Option<i64>,
}

impl Command {
    pub fn new(name: impl Into<String>) -> Self {
        Command { name: name.into(), arg: None }
    }

    pub fn with_arg(name: impl Into<String>, arg: i64) -> Self {
        Command { name: name.into(), arg: Some(arg) }
    }
}

/// Bare upper-case names (`ON`, `OFF`) print as constants, everything else as a call.
impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.arg {
            Some(a) => write!(f, "{}({a})", self.name),
            None if is_constant_name(&self.name) => f.write_str(&self.name),
            None => write!(f, "{}()", self.name),
        }
    }
}

fn is_constant_name(name: &str) -> bool {
    name.chars().any(|c| c.is_ascii_uppercase())
        && !name.chars().any(|c| c.is_ascii_lowercase())
}

/// A compound command: atoms applied atomically, in order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CommandExpr(pub Vec<Command>);

impl CommandExpr {
    pub fn single(c: Command) -> Self {
        CommandExpr(vec![c])
    }

    pub fn atoms(&self) -> &[Command] {
        &self.0
    }
}

impl From<Command> for CommandExpr {
    fn from(c: Command) -> Self {
        CommandExpr::single(c)
    }
}

impl fmt::Display for CommandExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" and ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// A peripheral reached through a byte-frame codec.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Actuator {
    pub id: ActuatorId,
    pub name: String,
    pub codec: Codec,
    /// Last payload written to the device registers.
    pub register_state: Vec<u8>,
}

impl Actuator {
    pub fn new(id: usize, name: impl Into<String>, codec: Codec) -> Self {
        Actuator { id: ActuatorId(id), name: name.into(), codec, register_state: Vec::new() }
    }
}

/// One actuation attempt by a task.
///
/// `command` is what the issuing task claims to send and is `None` for raw
/// register writes; the monitor always judges the `payload`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActuationRequest {
    pub task: TaskId,
    pub actuator: ActuatorId,
    pub command: Option<CommandExpr>,
    pub payload: Vec<u8>,
    pub issue_time: Micros,
}

impl ActuationRequest {
    /// Encodes `command` with the actuator's codec.
    pub fn encoded(
        task: TaskId,
        actuator: &Actuator,
        command: CommandExpr,
        issue_time: Micros,
    ) -> Result<Self, crate::codec::CodecError> {
        let payload = actuator.codec.encode_expr(&command)?;
        Ok(ActuationRequest { task, actuator: actuator.id, command: Some(command), payload, issue_time })
    }

    pub fn raw(task: TaskId, actuator: ActuatorId, payload: Vec<u8>, issue_time: Micros) -> Self {
        ActuationRequest { task, actuator, command: None, payload, issue_time }
    }
}

/// Sensor signals observed at one instant.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub time: Micros,
    pub signals: BTreeMap<String, f64>,
}

impl SystemState {
    pub fn new(time: Micros) -> Self {
        SystemState { time, signals: BTreeMap::new() }
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.signals.insert(name.to_string(), value);
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.signals.get(name).copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Allow,
    Ignore,
    Override,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Allow => "Allow",
            Verdict::Ignore => "Ignore",
            Verdict::Override => "Override",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Reason {
    NoPermission,
    RateLimited,
    InvariantMismatch,
    InvariantSatisfied,
    NoRuleApplies,
    /// Checks skipped because the monitor is switched off.
    MonitorBypassed,
    /// A rule referenced a signal the plant does not provide.
    MissingSignal,
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reason::NoPermission => "NoPermission",
            Reason::RateLimited => "RateLimited",
            Reason::InvariantMismatch => "InvariantMismatch",
            Reason::InvariantSatisfied => "InvariantSatisfied",
            Reason::NoRuleApplies => "NoRuleApplies",
            Reason::MonitorBypassed => "MonitorBypassed",
            Reason::MissingSignal => "MissingSignal",
        })
    }
}

/// The monitor's answer to one request.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonitorDecision {
    pub verdict: Verdict,
    pub override_command: Option<CommandExpr>,
    pub reason: Reason,
}

impl MonitorDecision {
    pub fn allow(reason: Reason) -> Self {
        MonitorDecision { verdict: Verdict::Allow, override_command: None, reason }
    }

    pub fn ignore(reason: Reason) -> Self {
        MonitorDecision { verdict: Verdict::Ignore, override_command: None, reason }
    }

    pub fn override_with(command: CommandExpr) -> Self {
        MonitorDecision {
            verdict: Verdict::Override,
            override_command: Some(command),
            reason: Reason::InvariantMismatch,
        }
    }
}
