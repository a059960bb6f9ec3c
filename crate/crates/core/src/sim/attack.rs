use crate::model::{ActuatorId, CommandExpr, TaskId};
use crate::time::Micros;

/// One spoofed write: a command the codec knows, or raw register bytes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SpoofPayload {
    Command(CommandExpr),
    Raw(Vec<u8>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AttackMode {
    /// Replaces the victim's requests inside the window, cycling through the list.
    Spoof(Vec<SpoofPayload>),
    /// Each victim job released inside the window sends `count` extra requests.
    DosBurst { command: CommandExpr, count: u32 },
}

/// Malicious code planted in a task, active over `[start, end]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttackScript {
    pub victim: TaskId,
    pub actuator: ActuatorId,
    pub start: Micros,
    pub end: Micros,
    /// Upper bound of a seeded random delay added to `start`.
    pub jitter: Micros,
    pub mode: AttackMode,
}

impl AttackScript {
    pub fn active(&self, at: Micros) -> bool {
        self.start <= at && at <= self.end
    }
}
