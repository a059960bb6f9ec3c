//! TOML scenario files.
//!
//! ```toml
//! name = "rover"
//!
//! [sim]
//! horizon_ms = 10000
//! monitor = true
//!
//! [monitor]
//! check_overhead_ms = 0.5
//! default_strategy = "fail-safe"
//!
//! [[actuators]]
//! name = "motor"
//! codec = { kind = "rover-motor" }
//!
//! [[tasks]]
//! name = "ctrl"
//! wcet_ms = 20
//! period_ms = 100
//! actuations = 1
//! access = ["motor"]
//! controller = { kind = "law", actuator = "motor", rules = "..." }
//!
//! [rules]
//! inline = "..."        # or: file = "rover.rules"
//!
//! [plant]
//! kind = "rover"
//!
//! [[attacks]]
//! victim = "ctrl"
//! start_ms = 3000
//! end_ms = 6000
//! mode = "spoof"
//! payloads = ["raw:0501000000"]
//! ```
//!
//! Every section but `[[tasks]]` is optional, so a taskset-only file is a
//! valid input for the analysis. Unknown keys are rejected everywhere.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::codec::{parse_hex, Codec};
use crate::dsl::{parse_command_expr, parse_rules, DslError, RuleContext, RuleSet};
use crate::model::{rate_monotonic_priorities, validate_taskset, Actuator, ActuatorId, ModelError, RtTask, TaskId};
use crate::monitor::{MonitorConfig, MonitorError, Strategy};
use crate::sim::{AttackMode, AttackScript, Controller, PlantSpec, Scenario, SimTask, SpoofPayload};
use crate::time::Micros;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Monitor(#[from] MonitorError),
    #[error("{context}: {errors}")]
    Rules { context: String, errors: RuleErrors },
    #[error("{0}")]
    Invalid(String),
}

/// One or more rule diagnostics, printed one per line.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleErrors(pub Vec<DslError>);

impl std::fmt::Display for RuleErrors {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (k, e) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(msg.into())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub monitor: MonitorSection,
    #[serde(default)]
    pub actuators: Vec<ActuatorEntry>,
    pub tasks: Vec<TaskEntry>,
    #[serde(default)]
    pub rules: Option<RulesSection>,
    #[serde(default)]
    pub plant: Option<PlantSpec>,
    #[serde(default)]
    pub attacks: Vec<AttackEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub horizon_ms: Option<Micros>,
    pub tick_ms: Micros,
    pub seed: u64,
    pub monitor: bool,
    pub exec_jitter: bool,
    pub fail_on_miss: bool,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            horizon_ms: None,
            tick_ms: Micros::from_ms(1),
            seed: 0,
            monitor: true,
            exec_jitter: false,
            fail_on_miss: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonitorSection {
    pub check_overhead_ms: Micros,
    pub default_strategy: Option<Strategy>,
    pub deny_uncovered: bool,
    pub strategies: Vec<StrategyEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyEntry {
    pub task: String,
    pub actuator: String,
    pub strategy: Strategy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActuatorEntry {
    pub name: String,
    pub codec: Codec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskEntry {
    pub name: String,
    pub wcet_ms: Micros,
    pub period_ms: Micros,
    #[serde(default)]
    pub deadline_ms: Option<Micros>,
    /// Smaller is more urgent; rate-monotonic when every task omits it.
    #[serde(default)]
    pub priority: Option<u32>,
    #[serde(default)]
    pub actuations: u32,
    #[serde(default)]
    pub check_overhead_ms: Option<Micros>,
    #[serde(default)]
    pub access: Vec<String>,
    #[serde(default)]
    pub phase_ms: Micros,
    #[serde(default)]
    pub request_offsets_ms: Option<Vec<Micros>>,
    #[serde(default)]
    pub controller: Option<ControllerEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ControllerEntry {
    Law { actuator: String, rules: String },
    Sequence { actuator: String, commands: Vec<String> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RulesSection {
    #[serde(default)]
    pub inline: Option<String>,
    /// Relative to the scenario file.
    #[serde(default)]
    pub file: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    Spoof,
    DosBurst,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackEntry {
    pub victim: String,
    /// Defaults to the victim controller's actuator.
    #[serde(default)]
    pub actuator: Option<String>,
    pub start_ms: Micros,
    pub end_ms: Micros,
    #[serde(default)]
    pub jitter_ms: Micros,
    pub mode: AttackKind,
    /// Spoof writes: a command, or `raw:` followed by hex bytes.
    #[serde(default)]
    pub payloads: Vec<String>,
    #[serde(default)]
    pub command: Option<String>,
    #[serde(default)]
    pub count: Option<u32>,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = read(path)?;
        Self::parse(&text)
    }

    pub fn check_overhead(&self) -> Micros {
        self.monitor.check_overhead_ms
    }

    fn actuator_index(&self, name: &str) -> Result<ActuatorId, ScenarioError> {
        self.actuators
            .iter()
            .position(|a| a.name == name)
            .map(ActuatorId)
            .ok_or_else(|| invalid(format!("unknown actuator `{name}`")))
    }

    fn task_index(&self, name: &str) -> Result<TaskId, ScenarioError> {
        self.tasks
            .iter()
            .position(|t| t.name == name)
            .map(TaskId)
            .ok_or_else(|| invalid(format!("unknown task `{name}`")))
    }

    /// The validated taskset, with rate-monotonic priorities filled in when
    /// no task states one.
    pub fn taskset(&self) -> Result<Vec<RtTask>, ScenarioError> {
        let given = self.tasks.iter().filter(|t| t.priority.is_some()).count();
        if given != 0 && given != self.tasks.len() {
            return Err(invalid("either every task states a priority or none does"));
        }
        let rm = rate_monotonic_priorities(&self.tasks.iter().map(|t| t.period_ms).collect::<Vec<_>>());
        let mut out = Vec::with_capacity(self.tasks.len());
        let mut names = BTreeMap::new();
        for (i, t) in self.tasks.iter().enumerate() {
            if names.insert(t.name.as_str(), i).is_some() {
                return Err(invalid(format!("task `{}` declared twice", t.name)));
            }
            let mut row = vec![false; self.actuators.len()];
            for a in &t.access {
                row[self.actuator_index(a)?.0] = true;
            }
            let mut task = RtTask::new(i, t.name.clone(), t.wcet_ms, t.period_ms, t.priority.unwrap_or(rm[i]))
                .with_deadline(t.deadline_ms.unwrap_or(t.period_ms))
                .with_actuation(t.actuations)
                .with_access(row);
            task.check_overhead = t.check_overhead_ms;
            out.push(task);
        }
        validate_taskset(&out, Some(self.actuators.len()))?;
        Ok(out)
    }

    fn rule_source(&self, base: &Path) -> Result<Option<String>, ScenarioError> {
        let Some(r) = &self.rules else { return Ok(None) };
        match (&r.inline, &r.file) {
            (Some(s), None) => Ok(Some(s.clone())),
            (None, Some(f)) => read(&base.join(f)).map(Some),
            (None, None) => Ok(None),
            (Some(_), Some(_)) => Err(invalid("[rules] takes `inline` or `file`, not both")),
        }
    }

    /// Names the rules may refer to.
    pub fn rule_context(&self) -> RuleContext {
        let signals = self.plant.as_ref().map(PlantSpec::signal_names).unwrap_or_default();
        RuleContext {
            signals: signals.into_iter().map(String::from).collect(),
            tasks: self.tasks.iter().map(|t| t.name.clone()).collect(),
            actuators: self.actuators.iter().map(|a| (a.name.clone(), a.codec.clone())).collect(),
        }
    }

    /// Resolves names, parses and checks rules and builds a runnable scenario.
    /// `base` is the directory rule files are resolved against.
    pub fn compile(&self, base: &Path) -> Result<Scenario, ScenarioError> {
        let tasks = self.taskset()?;
        let mut seen = BTreeMap::new();
        for a in &self.actuators {
            if seen.insert(a.name.as_str(), ()).is_some() {
                return Err(invalid(format!("actuator `{}` declared twice", a.name)));
            }
        }
        let actuators: Vec<Actuator> =
            self.actuators.iter().enumerate().map(|(i, a)| Actuator::new(i, a.name.clone(), a.codec.clone())).collect();
        let plant = self.plant.clone().unwrap_or(PlantSpec::None);
        if let Some(name) = plant.actuator() {
            self.actuator_index(name)?;
        }
        let ctx = self.rule_context();

        let rules = match self.rule_source(base)? {
            Some(src) => {
                let rs = parse_rules(&src)
                    .map_err(|e| ScenarioError::Rules { context: "rules".into(), errors: RuleErrors(vec![e]) })?;
                let errs = rs.validate(&ctx);
                if !errs.is_empty() {
                    return Err(ScenarioError::Rules { context: "rules".into(), errors: RuleErrors(errs) });
                }
                rs
            }
            None => RuleSet::default(),
        };

        let mut config = MonitorConfig::new(&tasks, actuators.clone(), rules)?.with_overhead(self.monitor.check_overhead_ms);
        config.default_strategy = self.monitor.default_strategy;
        config.deny_uncovered = self.monitor.deny_uncovered;
        config.enabled = self.sim.monitor;
        for s in &self.monitor.strategies {
            let t = self.task_index(&s.task)?;
            let a = self.actuator_index(&s.actuator)?;
            config.strategies.insert((t, a), s.strategy);
        }
        config.check()?;

        let mut sim_tasks = Vec::with_capacity(tasks.len());
        for (entry, task) in self.tasks.iter().zip(tasks) {
            let controller = match &entry.controller {
                None => None,
                Some(c) => Some(self.controller(&entry.name, c, &ctx)?),
            };
            if let Some(o) = &entry.request_offsets_ms {
                if o.len() != task.actuation_bound as usize {
                    return Err(invalid(format!(
                        "task `{}` lists {} request offsets for {} actuations",
                        entry.name,
                        o.len(),
                        task.actuation_bound
                    )));
                }
                if o.windows(2).any(|w| w[0] > w[1]) || o.iter().any(|&p| p > task.wcet) {
                    return Err(invalid(format!("task `{}` request offsets must be ordered and within its WCET", entry.name)));
                }
            }
            sim_tasks.push(SimTask { phase: entry.phase_ms, offsets: entry.request_offsets_ms.clone(), controller, task });
        }

        let horizon = match self.sim.horizon_ms {
            Some(h) => h,
            None => crate::time::hyperperiod(sim_tasks.iter().map(|t| t.task.period)).unwrap_or(Micros::ZERO),
        };
        if self.sim.tick_ms.is_zero() {
            return Err(invalid("tick_ms must be positive"));
        }

        let attacks = self
            .attacks
            .iter()
            .map(|a| self.attack(a, &sim_tasks, &actuators, horizon))
            .collect::<Result<Vec<_>, _>>()?;

        Ok(Scenario {
            name: self.name.clone().unwrap_or_else(|| "scenario".into()),
            tasks: sim_tasks,
            monitor: config,
            plant,
            attacks,
            horizon,
            tick: self.sim.tick_ms,
            seed: self.sim.seed,
            exec_jitter: self.sim.exec_jitter,
            fail_on_miss: self.sim.fail_on_miss,
        })
    }

    fn controller(&self, task: &str, c: &ControllerEntry, ctx: &RuleContext) -> Result<Controller, ScenarioError> {
        let context = format!("controller of `{task}`");
        let rule_err = |errors: Vec<DslError>| ScenarioError::Rules { context: context.clone(), errors: RuleErrors(errors) };
        match c {
            ControllerEntry::Law { actuator, rules } => {
                let id = self.actuator_index(actuator)?;
                let law = parse_rules(rules).map_err(|e| rule_err(vec![e]))?;
                let errs = law.validate(ctx);
                if !errs.is_empty() {
                    return Err(rule_err(errs));
                }
                Ok(Controller::Law { actuator: id, actuator_name: actuator.clone(), law })
            }
            ControllerEntry::Sequence { actuator, commands } => {
                let id = self.actuator_index(actuator)?;
                let codec = &self.actuators[id.0].codec;
                let commands = commands
                    .iter()
                    .map(|s| {
                        let cmd = parse_command_expr(s).map_err(|e| rule_err(vec![e]))?;
                        codec.encode_expr(&cmd).map_err(|e| invalid(format!("{context}: `{s}`: {e}")))?;
                        Ok(cmd)
                    })
                    .collect::<Result<Vec<_>, ScenarioError>>()?;
                Ok(Controller::Sequence { actuator: id, commands })
            }
        }
    }

    fn attack(
        &self,
        a: &AttackEntry,
        tasks: &[SimTask],
        actuators: &[Actuator],
        horizon: Micros,
    ) -> Result<AttackScript, ScenarioError> {
        let victim = self.task_index(&a.victim)?;
        let actuator = match &a.actuator {
            Some(name) => self.actuator_index(name)?,
            None => tasks[victim.0]
                .controller
                .as_ref()
                .map(Controller::actuator)
                .ok_or_else(|| invalid(format!("attack on `{}` needs an actuator", a.victim)))?,
        };
        if a.start_ms > a.end_ms || a.end_ms > horizon {
            return Err(invalid(format!("attack window [{}, {}] ms must lie within the horizon", a.start_ms, a.end_ms)));
        }
        let codec = &actuators[actuator.0].codec;
        let command = |s: &str| -> Result<_, ScenarioError> {
            let cmd = parse_command_expr(s)
                .map_err(|e| ScenarioError::Rules { context: "attack".into(), errors: RuleErrors(vec![e]) })?;
            codec.encode_expr(&cmd).map_err(|e| invalid(format!("attack command `{s}`: {e}")))?;
            Ok(cmd)
        };
        let mode = match a.mode {
            AttackKind::Spoof => {
                if a.payloads.is_empty() || a.command.is_some() || a.count.is_some() {
                    return Err(invalid("a spoof attack takes a non-empty `payloads` list only"));
                }
                let items = a
                    .payloads
                    .iter()
                    .map(|p| match p.strip_prefix("raw:") {
                        Some(h) => parse_hex(h)
                            .map(SpoofPayload::Raw)
                            .ok_or_else(|| invalid(format!("bad hex payload `{p}`"))),
                        None => command(p).map(SpoofPayload::Command),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                AttackMode::Spoof(items)
            }
            AttackKind::DosBurst => {
                let (Some(c), Some(count)) = (&a.command, a.count) else {
                    return Err(invalid("a dos-burst attack needs `command` and `count`"));
                };
                if count < 2 || !a.payloads.is_empty() {
                    return Err(invalid("a dos-burst attack sends at least 2 requests and takes no payloads"));
                }
                AttackMode::DosBurst { command: command(c)?, count }
            }
        };
        Ok(AttackScript { victim, actuator, start: a.start_ms, end: a.end_ms, jitter: a.jitter_ms, mode })
    }
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })
}

/// Loads and compiles a scenario file; rule files resolve next to it.
pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let base = path.parent().unwrap_or(Path::new("."));
    ScenarioFile::load(path)?.compile(base)
}
