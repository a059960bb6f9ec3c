use serde::{Deserialize, Serialize};

use super::{Applied, MonitorConfig};
use crate::codec::hex;
use crate::model::{ActuationRequest, CommandExpr, MonitorDecision, SystemState};

/// One logged mediation.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionRecord {
    pub request: ActuationRequest,
    /// Decoded payload, `None` when undecodable or never decoded.
    pub requested: Option<CommandExpr>,
    pub decision: MonitorDecision,
    /// What reached the actuator, `None` when the request was dropped.
    pub applied: Option<Applied>,
    pub state: SystemState,
    pub window_count: u32,
}

/// Flat CSV form of a [`DecisionRecord`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionRow {
    pub time_us: u64,
    pub task: String,
    pub actuator: String,
    pub requested_cmd: String,
    pub payload_hex: String,
    pub verdict: String,
    pub reason: String,
    pub applied_cmd: String,
    pub window_count: u32,
}

pub(crate) const UNDECODABLE: &str = "<undecodable>";

impl DecisionRecord {
    pub fn row(&self, config: &MonitorConfig) -> DecisionRow {
        DecisionRow {
            time_us: self.request.issue_time.as_us(),
            task: config.task_name(self.request.task).to_string(),
            actuator: config.actuator_name(self.request.actuator).to_string(),
            requested_cmd: self.requested.as_ref().map_or_else(|| UNDECODABLE.to_string(), ToString::to_string),
            payload_hex: hex(&self.request.payload),
            verdict: self.decision.verdict.to_string(),
            reason: self.decision.reason.to_string(),
            applied_cmd: match &self.applied {
                None => String::new(),
                Some(Applied { command: Some(c), .. }) => c.to_string(),
                Some(Applied { command: None, payload }) => format!("raw:{}", hex(payload)),
            },
            window_count: self.window_count,
        }
    }
}

pub fn write_rows<W, I>(w: W, rows: I) -> Result<(), csv::Error>
where
    W: std::io::Write,
    I: IntoIterator<Item = DecisionRow>,
{
    let mut out = csv::Writer::from_writer(w);
    let mut any = false;
    for r in rows {
        out.serialize(r)?;
        any = true;
    }
    if !any {
        out.write_record([
            "time_us",
            "task",
            "actuator",
            "requested_cmd",
            "payload_hex",
            "verdict",
            "reason",
            "applied_cmd",
            "window_count",
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_log_csv<R: std::io::Read>(r: R) -> Result<Vec<DecisionRow>, csv::Error> {
    csv::Reader::from_reader(r).deserialize().collect()
}
