use std::collections::{BTreeMap, BTreeSet};

use super::ast::{Condition, RuleSet, StateRule};
use super::DslError;
use crate::codec::Codec;
use crate::model::SystemState;
use crate::time::Micros;

/// Names a rule set may refer to.
#[derive(Clone, Debug, Default)]
pub struct RuleContext {
    pub signals: BTreeSet<String>,
    pub tasks: BTreeSet<String>,
    pub actuators: BTreeMap<String, Codec>,
}

/// Two rules for one actuator demanding different commands in the same state.
#[derive(Clone, Debug, PartialEq)]
pub struct Conflict {
    pub actuator: String,
    pub first: String,
    pub second: String,
    pub state: SystemState,
}

impl RuleSet {
    /// Resolves every name against `ctx`; returns all problems found.
    pub fn validate(&self, ctx: &RuleContext) -> Vec<DslError> {
        let mut errs = Vec::new();
        for rule in self.state_rules() {
            let mut sigs = Vec::new();
            rule.condition.signals(&mut sigs);
            for s in sigs {
                if !ctx.signals.contains(&s.name) {
                    errs.push(DslError::UnknownSignal { line: s.span.line, col: s.span.col, name: s.name.clone() });
                }
            }
            let Some(codec) = ctx.actuators.get(&rule.actuator) else {
                errs.push(DslError::UnknownActuator {
                    line: rule.then_span.line,
                    col: rule.then_span.col,
                    name: rule.actuator.clone(),
                });
                continue;
            };
            let branches = std::iter::once((&rule.then_cmd, rule.then_span))
                .chain(rule.else_cmd.as_ref().map(|e| (e, rule.else_span)));
            for (cmd, span) in branches {
                if let Err(e) = codec.encode_expr(cmd) {
                    errs.push(DslError::UnknownCommand { line: span.line, col: span.col, message: e.to_string() });
                }
            }
        }
        for rule in self.rate_rules() {
            if !ctx.tasks.contains(&rule.task) {
                errs.push(DslError::UnknownTask {
                    line: rule.task_span.line,
                    col: rule.task_span.col,
                    name: rule.task.clone(),
                });
            }
            if !ctx.actuators.contains_key(&rule.actuator) {
                errs.push(DslError::UnknownActuator {
                    line: rule.actuator_span.line,
                    col: rule.actuator_span.col,
                    name: rule.actuator.clone(),
                });
            }
        }
        errs
    }

    /// Samples states on the boundary grid of the rules' constants and reports
    /// pairs of rules that fire together with different commands.
    ///
    /// This is a sampling check, not a proof; at most `max_states` states are
    /// tried per actuator.
    pub fn conflicts(&self, max_states: usize) -> Vec<Conflict> {
        let mut by_actuator: BTreeMap<&str, Vec<&StateRule>> = BTreeMap::new();
        for r in self.state_rules() {
            by_actuator.entry(&r.actuator).or_default().push(r);
        }
        let mut out = Vec::new();
        for (actuator, rules) in by_actuator {
            let mut grid: BTreeMap<String, BTreeSet<OrdF64>> = BTreeMap::new();
            for r in &rules {
                sample_points(&r.condition, &mut grid);
            }
            let axes: Vec<(String, Vec<f64>)> =
                grid.into_iter().map(|(k, v)| (k, v.into_iter().map(|o| o.0).collect())).collect();
            let mut seen = BTreeSet::new();
            for state in GridIter::new(&axes).take(max_states) {
                let fired: Vec<&&StateRule> =
                    rules.iter().filter(|r| r.condition.eval(&state).unwrap_or(false)).collect();
                for (i, a) in fired.iter().enumerate() {
                    for b in &fired[i + 1..] {
                        if a.then_cmd != b.then_cmd && seen.insert((a.name.clone(), b.name.clone())) {
                            out.push(Conflict {
                                actuator: actuator.to_string(),
                                first: a.name.clone(),
                                second: b.name.clone(),
                                state: state.clone(),
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct OrdF64(f64);
impl Eq for OrdF64 {}
impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn sample_points(c: &Condition, grid: &mut BTreeMap<String, BTreeSet<OrdF64>>) {
    match c {
        Condition::Compare { signal, value, .. } => {
            let e = grid.entry(signal.name.clone()).or_default();
            for v in [value - 1.0, *value, value + 1.0] {
                e.insert(OrdF64(v));
            }
        }
        Condition::InRange { signal, lo, hi, .. } => {
            let e = grid.entry(signal.name.clone()).or_default();
            for v in [lo - 1.0, *lo, (lo + hi) / 2.0, *hi, hi + 1.0] {
                e.insert(OrdF64(v));
            }
        }
        Condition::Not(x) => sample_points(x, grid),
        Condition::And(l, r) | Condition::Or(l, r) => {
            sample_points(l, grid);
            sample_points(r, grid);
        }
    }
}

/// Cartesian product over the sample axes.
struct GridIter<'a> {
    axes: &'a [(String, Vec<f64>)],
    idx: Vec<usize>,
    done: bool,
}

impl<'a> GridIter<'a> {
    fn new(axes: &'a [(String, Vec<f64>)]) -> Self {
        let done = axes.iter().any(|(_, v)| v.is_empty());
        GridIter { axes, idx: vec![0; axes.len()], done }
    }
}

impl Iterator for GridIter<'_> {
    type Item = SystemState;
    fn next(&mut self) -> Option<SystemState> {
        if self.done {
            return None;
        }
        let mut s = SystemState::new(Micros::ZERO);
        for (k, (name, vals)) in self.axes.iter().enumerate() {
            s.signals.insert(name.clone(), vals[self.idx[k]]);
        }
        let mut k = 0;
        loop {
            if k == self.idx.len() {
                self.done = true;
                break;
            }
            self.idx[k] += 1;
            if self.idx[k] < self.axes[k].1.len() {
                break;
            }
            self.idx[k] = 0;
            k += 1;
        }
        Some(s)
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_rules;
    use super::*;

    fn ctx() -> RuleContext {
        RuleContext {
            signals: ["s_LF".to_string()].into(),
            tasks: ["ctrl".to_string()].into(),
            actuators: [("motor".to_string(), Codec::RoverMotor)].into(),
        }
    }

    #[test]
    fn clean_rules_validate() {
        let rs = parse_rules(
            "INV_1 :: s_LF < -2500 -> motor = st_sp(80) and rht()\n\
             RC :: rate(task ctrl, motor) < 2 per period -> check : ignore",
        )
        .unwrap();
        assert!(rs.validate(&ctx()).is_empty());
    }

    #[test]
    fn unknown_names_are_reported_with_position() {
        let rs = parse_rules(
            "A :: s_XX < 1 -> motor = fwd()\n\
             B :: s_LF < 1 -> motor = jump()\n\
             C :: s_LF < 1 -> arm = fwd()\n\
             D :: rate(task ghost, motor) < 2 per period -> check : ignore\n\
             E :: s_LF < 1 -> motor = st_sp(300)",
        )
        .unwrap();
        let errs = rs.validate(&ctx());
        assert_eq!(errs.len(), 5, "{errs:?}");
        assert!(matches!(&errs[0], DslError::UnknownSignal { line: 1, col: 6, name } if name == "s_XX"));
        assert!(matches!(&errs[1], DslError::UnknownCommand { line: 2, .. }));
        assert!(matches!(&errs[2], DslError::UnknownActuator { line: 3, .. }));
        assert!(matches!(&errs[3], DslError::UnknownCommand { line: 5, .. }));
        assert!(matches!(&errs[4], DslError::UnknownTask { line: 4, .. }));
    }

    #[test]
    fn rover_rules_have_no_conflicts() {
        let rs = parse_rules(
            "INV_1 :: s_LF < -2500 -> motor = st_sp(80) and rht()\n\
             INV_2 :: s_LF > 2500 -> motor = st_sp(80) and lft()\n\
             INV_3 :: s_LF in [-2500, 2500] -> motor = st_sp(120) and fwd()",
        )
        .unwrap();
        assert!(rs.conflicts(10_000).is_empty());
    }

    #[test]
    fn overlapping_rules_conflict() {
        let rs = parse_rules("A :: x > 0 -> m = fwd\nB :: x > 5 -> m = lft").unwrap();
        let c = rs.conflicts(10_000);
        assert_eq!(c.len(), 1);
        assert_eq!((c[0].first.as_str(), c[0].second.as_str()), ("A", "B"));
    }
}
