use super::ast::{Condition, RuleSet};
use super::DslError;
use crate::model::{CommandExpr, SystemState};

impl Condition {
    /// Evaluates the condition against `state`. `and`/`or` short-circuit.
    pub fn eval(&self, state: &SystemState) -> Result<bool, DslError> {
        Ok(match self {
            Condition::Compare { signal, op, value } => op.apply(lookup(state, &signal.name)?, *value),
            Condition::InRange { signal, lo, hi, negated } => {
                let v = lookup(state, &signal.name)?;
                (*lo <= v && v <= *hi) != *negated
            }
            Condition::Not(c) => !c.eval(state)?,
            Condition::And(l, r) => l.eval(state)? && r.eval(state)?,
            Condition::Or(l, r) => l.eval(state)? || r.eval(state)?,
        })
    }
}

fn lookup(state: &SystemState, name: &str) -> Result<f64, DslError> {
    state.get(name).ok_or_else(|| DslError::MissingSignal(name.to_string()))
}

pub fn evaluate_condition(cond: &Condition, state: &SystemState) -> Result<bool, DslError> {
    cond.eval(state)
}

/// The command the state rules for `actuator` demand in `state`.
///
/// The first rule (in declaration order) whose condition holds wins. When no
/// condition holds, the else-branch of the last rule that has one applies.
/// `Ok(None)` means no rule applies.
pub fn expected_command(
    rules: &RuleSet,
    actuator: &str,
    state: &SystemState,
) -> Result<Option<CommandExpr>, DslError> {
    let mut fallback = None;
    for rule in rules.state_rules_for(actuator) {
        if rule.condition.eval(state)? {
            return Ok(Some(rule.then_cmd.clone()));
        }
        if let Some(e) = &rule.else_cmd {
            fallback = Some(e);
        }
    }
    Ok(fallback.cloned())
}
