//! The reference monitor: every actuation request passes through
//! [`mediate`] before anything reaches an actuator.
//!
//! Checks run in a fixed order and stop at the first verdict:
//!
//! 1. access flag of the (task, actuator) pair is clear: `Ignore / NoPermission`;
//! 2. the request would reach the pair's rate threshold: `Ignore / RateLimited`;
//! 3. the payload is decoded; an undecodable payload is a mismatch;
//! 4. the payload equals the command the state rules demand: `Allow / InvariantSatisfied`;
//! 5. otherwise the pair's strategy decides: `IGNORE` drops the request,
//!    `FAIL-SAFE` sends the demanded command instead;
//! 6. no rule covers the state: `Allow / NoRuleApplies` (or `Ignore` when
//!    uncovered commands are denied).
//!
//! Every request that reaches step 2 counts toward its window, including
//! the ones step 2 rejects.

mod log;
mod window;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use log::{read_log_csv, write_rows as write_decision_rows, DecisionRecord, DecisionRow};
pub use window::{RateLimit, RateWindowState, WindowEvent};

use crate::codec::CodecError;
use crate::dsl::{expected_command, DslError, RuleSet};
use crate::model::{
    AccessMatrix, ActuationRequest, Actuator, ActuatorId, CommandExpr, ModelError, MonitorDecision, Reason,
    RtTask, SystemState, TaskId, Verdict,
};
use crate::time::Micros;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Drop the request; the actuator keeps its last command.
    Ignore,
    /// Drop the request and send the command the rules demand.
    FailSafe,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MonitorError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Rule(#[from] DslError),
    #[error("rule command cannot be encoded: {0}")]
    Codec(#[from] CodecError),
    #[error("event at {event}us precedes current time {now}us")]
    TimeRegression { now: Micros, event: Micros },
    #[error("no response strategy for task `{task}` on actuator `{actuator}`")]
    MissingStrategy { task: String, actuator: String },
    #[error("rate rule names unknown {what} `{name}`")]
    UnknownName { what: &'static str, name: String },
    #[error("negative check overhead")]
    NegativeOverhead,
}

/// What reaches the actuator after the response is applied.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Applied {
    /// Decoded form, `None` when the payload matches no command.
    pub command: Option<CommandExpr>,
    pub payload: Vec<u8>,
}

/// Full result of one mediation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mediation {
    pub decision: MonitorDecision,
    pub requested: Option<CommandExpr>,
    pub applied: Option<Applied>,
    pub window_count: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonitorConfig {
    pub access: AccessMatrix,
    rules: RuleSet,
    pub strategies: BTreeMap<(TaskId, ActuatorId), Strategy>,
    pub default_strategy: Option<Strategy>,
    /// Checker cost charged per mediated request.
    pub check_overhead: Micros,
    /// Deny commands no state rule covers instead of allowing them.
    pub deny_uncovered: bool,
    /// When false only the access check runs.
    pub enabled: bool,
    task_names: Vec<String>,
    actuators: Vec<Actuator>,
    rate_limits: BTreeMap<(TaskId, ActuatorId), RateLimit>,
}

impl MonitorConfig {
    /// Builds a configuration; the access matrix comes from the tasks' rows.
    pub fn new(tasks: &[RtTask], actuators: Vec<Actuator>, rules: RuleSet) -> Result<Self, MonitorError> {
        let access = AccessMatrix::from_tasks(tasks, actuators.len())?;
        let task_names: Vec<String> = tasks.iter().map(|t| t.name.clone()).collect();
        let mut rate_limits = BTreeMap::new();
        for r in rules.rate_rules() {
            let t = task_names
                .iter()
                .position(|n| *n == r.task)
                .ok_or_else(|| MonitorError::UnknownName { what: "task", name: r.task.clone() })?;
            let a = actuators
                .iter()
                .position(|x| x.name == r.actuator)
                .ok_or_else(|| MonitorError::UnknownName { what: "actuator", name: r.actuator.clone() })?;
            rate_limits.insert((TaskId(t), ActuatorId(a)), RateLimit { threshold: r.threshold, window: r.window });
        }
        Ok(MonitorConfig {
            access,
            rules,
            strategies: BTreeMap::new(),
            default_strategy: None,
            check_overhead: Micros::ZERO,
            deny_uncovered: false,
            enabled: true,
            task_names,
            actuators,
            rate_limits,
        })
    }

    pub fn with_default_strategy(mut self, s: Strategy) -> Self {
        self.default_strategy = Some(s);
        self
    }

    pub fn with_strategy(mut self, task: TaskId, actuator: ActuatorId, s: Strategy) -> Self {
        self.strategies.insert((task, actuator), s);
        self
    }

    pub fn with_overhead(mut self, c: Micros) -> Self {
        self.check_overhead = c;
        self
    }

    pub fn rules(&self) -> &RuleSet {
        &self.rules
    }

    pub fn actuators(&self) -> &[Actuator] {
        &self.actuators
    }

    pub fn task_name(&self, t: TaskId) -> &str {
        self.task_names.get(t.0).map_or("?", String::as_str)
    }

    pub fn actuator_name(&self, a: ActuatorId) -> &str {
        self.actuators.get(a.0).map_or("?", |x| x.name.as_str())
    }

    pub fn rate_limits(&self) -> &BTreeMap<(TaskId, ActuatorId), RateLimit> {
        &self.rate_limits
    }

    pub fn strategy(&self, task: TaskId, actuator: ActuatorId) -> Option<Strategy> {
        self.strategies.get(&(task, actuator)).copied().or(self.default_strategy)
    }

    /// Every permitted pair must have a strategy.
    pub fn check(&self) -> Result<(), MonitorError> {
        for (t, a) in self.access.granted() {
            if self.strategy(t, a).is_none() {
                return Err(MonitorError::MissingStrategy {
                    task: self.task_name(t).to_string(),
                    actuator: self.actuator_name(a).to_string(),
                });
            }
        }
        Ok(())
    }

    pub fn fresh_windows(&self) -> RateWindowState {
        RateWindowState::new(self.rate_limits.iter().map(|(k, v)| (*k, *v)))
    }
}

/// Runs the check pipeline for one request and returns the decision.
pub fn mediate(
    request: &ActuationRequest,
    state: &SystemState,
    windows: &mut RateWindowState,
    config: &MonitorConfig,
) -> Result<MonitorDecision, MonitorError> {
    mediate_detailed(request, state, windows, config).map(|m| m.decision)
}

/// [`mediate`] plus the decoded request, what gets applied and the window count.
pub fn mediate_detailed(
    request: &ActuationRequest,
    state: &SystemState,
    windows: &mut RateWindowState,
    config: &MonitorConfig,
) -> Result<Mediation, MonitorError> {
    let actuator = config.actuators.get(request.actuator.0).ok_or(ModelError::IndexOutOfRange {
        task: request.task.0,
        actuator: request.actuator.0,
        rows: config.access.tasks(),
        cols: config.access.actuators(),
    })?;
    let codec = &actuator.codec;
    let requested = codec.decode(&request.payload).ok();
    let pass = |requested: Option<CommandExpr>, decision, window_count| Mediation {
        applied: Some(Applied { command: requested.clone(), payload: request.payload.clone() }),
        decision,
        requested,
        window_count,
    };
    let drop = |requested, decision, window_count| Mediation { decision, requested, applied: None, window_count };

    // 1
    if !config.access.has_permission(request.task, request.actuator)? {
        return Ok(drop(requested, MonitorDecision::ignore(Reason::NoPermission), 0));
    }
    if !config.enabled {
        return Ok(pass(requested, MonitorDecision::allow(Reason::MonitorBypassed), 0));
    }
    // 2
    let (admitted, window_count) = windows.record(request.task, request.actuator, request.issue_time)?;
    if !admitted {
        return Ok(drop(requested, MonitorDecision::ignore(Reason::RateLimited), window_count));
    }
    // 3, 4
    let expected = match expected_command(&config.rules, &actuator.name, state)? {
        Some(e) => Some(codec.canonicalize(&e)?),
        None => None,
    };
    match (expected, requested) {
        (Some(exp), Some(got)) if exp == got => {
            Ok(pass(Some(got), MonitorDecision::allow(Reason::InvariantSatisfied), window_count))
        }
        // 5
        (Some(exp), got) => {
            let strategy = config.strategy(request.task, request.actuator).ok_or_else(|| {
                MonitorError::MissingStrategy {
                    task: config.task_name(request.task).to_string(),
                    actuator: actuator.name.clone(),
                }
            })?;
            match strategy {
                Strategy::Ignore => Ok(drop(got, MonitorDecision::ignore(Reason::InvariantMismatch), window_count)),
                Strategy::FailSafe => {
                    let payload = codec.encode_expr(&exp)?;
                    Ok(Mediation {
                        decision: MonitorDecision::override_with(exp.clone()),
                        requested: got,
                        applied: Some(Applied { command: Some(exp), payload }),
                        window_count,
                    })
                }
            }
        }
        // undecodable and nothing to substitute
        (None, None) => Ok(drop(None, MonitorDecision::ignore(Reason::InvariantMismatch), window_count)),
        // 6
        (None, Some(got)) if config.deny_uncovered => {
            Ok(drop(Some(got), MonitorDecision::ignore(Reason::NoRuleApplies), window_count))
        }
        (None, Some(got)) => Ok(pass(Some(got), MonitorDecision::allow(Reason::NoRuleApplies), window_count)),
    }
}

/// A monitor instance: configuration, live rate windows and the decision log.
///
/// Mediations are totally ordered; `submit` takes `&mut self`.
#[derive(Clone, Debug)]
pub struct ReferenceMonitor {
    config: MonitorConfig,
    windows: RateWindowState,
    log: Vec<DecisionRecord>,
}

impl ReferenceMonitor {
    pub fn new(config: MonitorConfig) -> Result<Self, MonitorError> {
        config.check()?;
        let windows = config.fresh_windows();
        Ok(ReferenceMonitor { config, windows, log: Vec::new() })
    }

    pub fn config(&self) -> &MonitorConfig {
        &self.config
    }

    pub fn windows(&self) -> &RateWindowState {
        &self.windows
    }

    pub fn job_released(&mut self, task: TaskId, at: Micros) -> Result<(), MonitorError> {
        self.windows.advance(WindowEvent::JobRelease { task, at })
    }

    pub fn advance_to(&mut self, at: Micros) -> Result<(), MonitorError> {
        self.windows.advance(WindowEvent::Advance(at))
    }

    /// Mediates and logs one request.
    ///
    /// A rule that reads a signal missing from `state` is a configuration
    /// error: the request is logged as `Ignore / MissingSignal` and the
    /// record is still returned.
    pub fn submit(&mut self, request: ActuationRequest, state: &SystemState) -> Result<&DecisionRecord, MonitorError> {
        if let Some(last) = self.log.last() {
            if request.issue_time < last.request.issue_time {
                return Err(MonitorError::TimeRegression { now: last.request.issue_time, event: request.issue_time });
            }
        }
        let m = match mediate_detailed(&request, state, &mut self.windows, &self.config) {
            Ok(m) => m,
            Err(MonitorError::Rule(DslError::MissingSignal(_))) => Mediation {
                decision: MonitorDecision::ignore(Reason::MissingSignal),
                requested: None,
                applied: None,
                window_count: self.windows.count(request.task, request.actuator),
            },
            Err(e) => return Err(e),
        };
        self.log.push(DecisionRecord {
            request,
            requested: m.requested,
            decision: m.decision,
            applied: m.applied,
            state: state.clone(),
            window_count: m.window_count,
        });
        Ok(self.log.last().expect("just pushed"))
    }

    /// All decisions so far, in issue order.
    pub fn decision_log(&self) -> &[DecisionRecord] {
        &self.log
    }

    pub fn log_rows(&self) -> Vec<DecisionRow> {
        self.log.iter().map(|r| r.row(&self.config)).collect()
    }

    pub fn write_log_csv<W: std::io::Write>(&self, w: W) -> Result<(), csv::Error> {
        log::write_rows(w, self.log.iter().map(|r| r.row(&self.config)))
    }

    /// Counts of each verdict: (allow, ignore, override).
    pub fn verdict_counts(&self) -> (usize, usize, usize) {
        self.log.iter().fold((0, 0, 0), |(a, i, o), r| match r.decision.verdict {
            Verdict::Allow => (a + 1, i, o),
            Verdict::Ignore => (a, i + 1, o),
            Verdict::Override => (a, i, o + 1),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::Codec;
    use crate::dsl::parse_rules;
    use crate::model::Command;

    const ROVER_RULES: &str = "INV_1 :: s_LF < -2500 -> motor = st_sp(80) and rht()\n\
                               INV_2 :: s_LF > 2500 -> motor = st_sp(80) and lft()\n\
                               INV_3 :: s_LF in [-2500, 2500] -> motor = st_sp(120) and fwd()\n\
                               RC :: rate(task ctrl, motor) < 2 per period -> check : ignore";

    fn rover_monitor(strategy: Strategy) -> ReferenceMonitor {
        let tasks = vec![RtTask::new(0, "ctrl", Micros::from_ms(20), Micros::from_ms(200), 1).with_access(vec![true])];
        let actuators = vec![Actuator::new(0, "motor", Codec::RoverMotor)];
        let cfg = MonitorConfig::new(&tasks, actuators, parse_rules(ROVER_RULES).unwrap())
            .unwrap()
            .with_default_strategy(strategy);
        ReferenceMonitor::new(cfg).unwrap()
    }

    fn request(cmd: &[Command], at: u64) -> ActuationRequest {
        let a = Actuator::new(0, "motor", Codec::RoverMotor);
        ActuationRequest::encoded(TaskId(0), &a, CommandExpr(cmd.to_vec()), Micros::from_ms(at)).unwrap()
    }

    fn s_lf(v: f64) -> SystemState {
        SystemState::new(Micros::ZERO).with("s_LF", v)
    }

    #[test]
    fn spoofed_turn_is_overridden() {
        let mut m = rover_monitor(Strategy::FailSafe);
        let rec = m.submit(request(&[Command::new("lft")], 0), &s_lf(-3000.0)).unwrap();
        assert_eq!(rec.decision.verdict, Verdict::Override);
        assert_eq!(rec.decision.reason, Reason::InvariantMismatch);
        assert_eq!(
            rec.decision.override_command,
            Some(CommandExpr(vec![Command::with_arg("st_sp", 80), Command::new("rht")]))
        );
        assert_eq!(rec.applied.as_ref().unwrap().payload, vec![4, 80, 0, 0, 0, 3, 0, 0, 0, 0]);
    }

    #[test]
    fn ignore_strategy_drops_mismatch() {
        let mut m = rover_monitor(Strategy::Ignore);
        let rec = m.submit(request(&[Command::new("lft")], 0), &s_lf(-3000.0)).unwrap();
        assert_eq!(rec.decision, MonitorDecision::ignore(Reason::InvariantMismatch));
        assert!(rec.applied.is_none());
    }

    #[test]
    fn zero_flag_is_ignored() {
        let tasks = vec![RtTask::new(0, "ctrl", Micros(10), Micros(100), 1).with_access(vec![false])];
        let cfg = MonitorConfig::new(&tasks, vec![Actuator::new(0, "motor", Codec::RoverMotor)], RuleSet::default())
            .unwrap();
        let mut m = ReferenceMonitor::new(cfg).unwrap();
        let rec = m.submit(request(&[Command::new("fwd")], 0), &s_lf(0.0)).unwrap();
        assert_eq!(rec.decision, MonitorDecision::ignore(Reason::NoPermission));
    }

    #[test]
    fn second_request_in_job_is_rate_limited() {
        let mut m = rover_monitor(Strategy::FailSafe);
        let good = [Command::with_arg("st_sp", 120), Command::new("fwd")];
        m.job_released(TaskId(0), Micros::ZERO).unwrap();
        let r1 = m.submit(request(&good, 1), &s_lf(0.0)).unwrap().clone();
        assert_eq!(r1.decision, MonitorDecision::allow(Reason::InvariantSatisfied));
        let r2 = m.submit(request(&good, 2), &s_lf(0.0)).unwrap().clone();
        assert_eq!(r2.decision, MonitorDecision::ignore(Reason::RateLimited));
        assert_eq!(r2.window_count, 2);
        m.job_released(TaskId(0), Micros::from_ms(200)).unwrap();
        let r3 = m.submit(request(&good, 201), &s_lf(0.0)).unwrap();
        assert_eq!(r3.decision.verdict, Verdict::Allow);
    }

    #[test]
    fn undecodable_payload_is_a_mismatch() {
        let mut m = rover_monitor(Strategy::FailSafe);
        let raw = ActuationRequest::raw(TaskId(0), ActuatorId(0), vec![0x05, 0x01, 0, 0, 0], Micros::ZERO);
        let rec = m.submit(raw, &s_lf(0.0)).unwrap();
        assert_eq!(rec.decision.verdict, Verdict::Override);
        assert!(rec.requested.is_none());
    }

    #[test]
    fn uncovered_commands() {
        let tasks = vec![RtTask::new(0, "ctrl", Micros(10), Micros(100), 1).with_access(vec![true])];
        let acts = vec![Actuator::new(0, "motor", Codec::RoverMotor)];
        let base = MonitorConfig::new(&tasks, acts, RuleSet::default()).unwrap().with_default_strategy(Strategy::FailSafe);

        let mut m = ReferenceMonitor::new(base.clone()).unwrap();
        let rec = m.submit(request(&[Command::new("fwd")], 0), &s_lf(0.0)).unwrap();
        assert_eq!(rec.decision, MonitorDecision::allow(Reason::NoRuleApplies));

        let raw = ActuationRequest::raw(TaskId(0), ActuatorId(0), vec![9; 5], Micros::ZERO);
        let rec = m.submit(raw, &s_lf(0.0)).unwrap();
        assert_eq!(rec.decision, MonitorDecision::ignore(Reason::InvariantMismatch));

        let mut deny = base;
        deny.deny_uncovered = true;
        let mut m = ReferenceMonitor::new(deny).unwrap();
        let rec = m.submit(request(&[Command::new("fwd")], 0), &s_lf(0.0)).unwrap();
        assert_eq!(rec.decision, MonitorDecision::ignore(Reason::NoRuleApplies));
    }

    #[test]
    fn bypassed_monitor_passes_everything_permitted() {
        let mut m = rover_monitor(Strategy::FailSafe);
        m.config.enabled = false;
        let rec = m.submit(request(&[Command::new("lft")], 0), &s_lf(-3000.0)).unwrap();
        assert_eq!(rec.decision, MonitorDecision::allow(Reason::MonitorBypassed));
    }

    #[test]
    fn missing_signal_is_logged_as_ignore() {
        let mut m = rover_monitor(Strategy::FailSafe);
        let rec = m.submit(request(&[Command::new("fwd")], 0), &SystemState::new(Micros::ZERO)).unwrap();
        assert_eq!(rec.decision, MonitorDecision::ignore(Reason::MissingSignal));
    }

    #[test]
    fn missing_strategy_rejected() {
        let tasks = vec![RtTask::new(0, "ctrl", Micros(10), Micros(100), 1).with_access(vec![true])];
        let cfg = MonitorConfig::new(&tasks, vec![Actuator::new(0, "m", Codec::Switch)], RuleSet::default()).unwrap();
        assert!(matches!(ReferenceMonitor::new(cfg), Err(MonitorError::MissingStrategy { .. })));
    }

    #[test]
    fn log_grows_by_one_per_request() {
        let mut m = rover_monitor(Strategy::FailSafe);
        assert!(m.decision_log().is_empty());
        for k in 0..5 {
            m.submit(request(&[Command::new("fwd")], k), &s_lf(0.0)).unwrap();
        }
        assert_eq!(m.decision_log().len(), 5);
        assert!(m.submit(request(&[Command::new("fwd")], 1), &s_lf(0.0)).is_err());
    }
}
