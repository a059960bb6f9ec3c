use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::CommandExpr;
use crate::time::Micros;

/// Source position of a token, 1-based.
///
/// Positions are carried for diagnostics only; they never take part in
/// equality, so two rule sets parsed from differently formatted text compare
/// equal when their structure is equal.
#[derive(Clone, Copy, Debug, Default, Eq, Serialize, Deserialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl PartialEq for Span {
    fn eq(&self, _: &Span) -> bool {
        true
    }
}

impl std::hash::Hash for Span {
    fn hash<H: std::hash::Hasher>(&self, _: &mut H) {}
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

impl CmpOp {
    pub const ALL: [CmpOp; 5] = [CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge, CmpOp::Eq];

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "=",
        }
    }

    pub fn apply(self, lhs: f64, rhs: f64) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Eq => lhs == rhs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalRef {
    pub name: String,
    pub span: Span,
}

impl SignalRef {
    pub fn new(name: impl Into<String>) -> Self {
        SignalRef { name: name.into(), span: Span::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Condition {
    Compare { signal: SignalRef, op: CmpOp, value: f64 },
    /// `signal in [lo, hi]`, or `signal not in [lo, hi]` when `negated`.
    InRange { signal: SignalRef, lo: f64, hi: f64, negated: bool },
    Not(Box<Condition>),
    And(Box<Condition>, Box<Condition>),
    Or(Box<Condition>, Box<Condition>),
}

impl Condition {
    pub fn compare(signal: &str, op: CmpOp, value: f64) -> Self {
        Condition::Compare { signal: SignalRef::new(signal), op, value }
    }

    pub fn in_range(signal: &str, lo: f64, hi: f64) -> Self {
        Condition::InRange { signal: SignalRef::new(signal), lo, hi, negated: false }
    }

    pub fn not_in_range(signal: &str, lo: f64, hi: f64) -> Self {
        Condition::InRange { signal: SignalRef::new(signal), lo, hi, negated: true }
    }

    pub fn and(self, rhs: Condition) -> Self {
        Condition::And(Box::new(self), Box::new(rhs))
    }

    pub fn or(self, rhs: Condition) -> Self {
        Condition::Or(Box::new(self), Box::new(rhs))
    }

    pub fn negate(self) -> Self {
        Condition::Not(Box::new(self))
    }

    /// Visits every signal reference, left to right.
    pub fn signals<'a>(&'a self, out: &mut Vec<&'a SignalRef>) {
        match self {
            Condition::Compare { signal, .. } | Condition::InRange { signal, .. } => out.push(signal),
            Condition::Not(c) => c.signals(out),
            Condition::And(l, r) | Condition::Or(l, r) => {
                l.signals(out);
                r.signals(out);
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Condition::Compare { .. } | Condition::InRange { .. } => 1,
            Condition::Not(c) => 1 + c.depth(),
            Condition::And(l, r) | Condition::Or(l, r) => 1 + l.depth().max(r.depth()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateRule {
    pub name: String,
    pub span: Span,
    pub actuator: String,
    pub condition: Condition,
    pub then_cmd: CommandExpr,
    pub then_span: Span,
    pub else_cmd: Option<CommandExpr>,
    pub else_span: Span,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RateWindow {
    /// Counts reset at every job release of the task.
    Period,
    /// Counts requests in the trailing interval of this length.
    Sliding(Micros),
}

/// Admit a request only while the window count stays strictly below `threshold`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRule {
    pub name: String,
    pub span: Span,
    pub task: String,
    pub task_span: Span,
    pub actuator: String,
    pub actuator_span: Span,
    pub threshold: u32,
    pub window: RateWindow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Rule {
    State(StateRule),
    Rate(RateRule),
}

impl Rule {
    pub fn name(&self) -> &str {
        match self {
            Rule::State(r) => &r.name,
            Rule::Rate(r) => &r.name,
        }
    }
}

/// An ordered list of rules. Immutable once loaded.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RuleSet {
    pub rules: Vec<Rule>,
}

impl RuleSet {
    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// State rules targeting `actuator`, in declaration order.
    pub fn state_rules_for<'a>(&'a self, actuator: &'a str) -> impl Iterator<Item = &'a StateRule> + 'a {
        self.rules.iter().filter_map(move |r| match r {
            Rule::State(s) if s.actuator == actuator => Some(s),
            _ => None,
        })
    }

    pub fn state_rules(&self) -> impl Iterator<Item = &StateRule> {
        self.rules.iter().filter_map(|r| match r {
            Rule::State(s) => Some(s),
            _ => None,
        })
    }

    pub fn rate_rules(&self) -> impl Iterator<Item = &RateRule> {
        self.rules.iter().filter_map(|r| match r {
            Rule::Rate(s) => Some(s),
            _ => None,
        })
    }

    pub fn rate_rule_for(&self, task: &str, actuator: &str) -> Option<&RateRule> {
        self.rate_rules().find(|r| r.task == task && r.actuator == actuator)
    }
}
