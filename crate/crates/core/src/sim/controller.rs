use crate::dsl::{expected_command, RuleSet};
use crate::model::{ActuatorId, CommandExpr, SystemState};

/// What a task computes at each of its actuation points.
#[derive(Clone, Debug, PartialEq)]
pub enum Controller {
    /// Evaluates a control law written as state rules for one actuator.
    Law { actuator: ActuatorId, actuator_name: String, law: RuleSet },
    /// Cycles through a fixed command list, one entry per actuation.
    Sequence { actuator: ActuatorId, commands: Vec<CommandExpr> },
}

impl Controller {
    pub fn actuator(&self) -> ActuatorId {
        match self {
            Controller::Law { actuator, .. } | Controller::Sequence { actuator, .. } => *actuator,
        }
    }

    /// The command for actuation number `k` (counted over the whole run).
    /// `None` means the task has nothing to send this time.
    pub fn command(&self, k: u64, state: &SystemState) -> Option<CommandExpr> {
        match self {
            Controller::Law { actuator_name, law, .. } => expected_command(law, actuator_name, state).ok().flatten(),
            Controller::Sequence { commands, .. } if commands.is_empty() => None,
            Controller::Sequence { commands, .. } => Some(commands[(k % commands.len() as u64) as usize].clone()),
        }
    }
}
