//! Trusted actuation monitoring for periodic real-time control tasks.
//!
//! Tasks reach actuators only through a [`monitor::ReferenceMonitor`]. For
//! every request it checks the task's access flag, the per-window request
//! budget and the state invariants written in the [`dsl`] rule language, and
//! then lets the command pass, drops it, or substitutes the command the
//! invariants demand. [`rta`] bounds the response times of the taskset with
//! the checker's overhead and blocking included, and [`sim`] runs tasks,
//! monitor and plant models together in a deterministic discrete-event loop.

pub mod codec;
pub mod dsl;
pub mod model;
pub mod monitor;
pub mod rta;
pub mod scenario;
pub mod sim;
pub mod time;

pub use codec::{Codec, CodecError};
pub use model::{
    AccessMatrix, ActuationRequest, Actuator, ActuatorId, Command, CommandExpr, MonitorDecision, Reason, RtTask,
    SystemState, TaskId, Verdict,
};
pub use time::Micros;
