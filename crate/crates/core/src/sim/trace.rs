use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{ActuatorId, TaskId, Verdict};
use crate::monitor::{DecisionRecord, DecisionRow};
use crate::time::Micros;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    Release,
    Dispatch,
    Preempt,
    CheckStart,
    CheckEnd,
    Complete,
    DeadlineMiss,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchedEvent {
    pub time: Micros,
    pub task: TaskId,
    /// Job index within the task, from 0.
    pub job: u64,
    pub kind: EventKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct JobOutcome {
    pub task: TaskId,
    pub job: u64,
    pub release: Micros,
    pub deadline: Micros,
    pub completion: Micros,
}

impl JobOutcome {
    pub fn response(&self) -> Micros {
        self.completion - self.release
    }

    pub fn missed(&self) -> bool {
        self.completion > self.deadline
    }
}

/// A payload that reached an actuator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AppliedWrite {
    pub time: Micros,
    pub task: TaskId,
    pub actuator: ActuatorId,
    pub payload: Vec<u8>,
    /// Release time of the issuing job.
    pub job_release: Micros,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimTrace {
    pub task_names: Vec<String>,
    pub horizon: Micros,
    pub events: Vec<SchedEvent>,
    pub decisions: Vec<DecisionRecord>,
    pub decision_rows: Vec<DecisionRow>,
    pub applied: Vec<AppliedWrite>,
    pub jobs: Vec<JobOutcome>,
    pub signal_names: Vec<String>,
    pub readout_names: Vec<String>,
    /// One row per tick: time, signals, then readouts.
    pub samples: Vec<(Micros, Vec<f64>)>,
    pub plot_column: Option<usize>,
    pub monitor_enabled: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub task: String,
    pub jobs: usize,
    pub max_response_ms: f64,
    pub deadline_misses: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub monitor: bool,
    pub horizon_ms: f64,
    pub requests: usize,
    pub allow: usize,
    pub ignore: usize,
    pub override_count: usize,
    pub deadline_misses: usize,
    /// Longest stretch over which the plotted readout did not increase.
    pub longest_flat_ms: f64,
    pub tasks: Vec<TaskSummary>,
}

impl SimTrace {
    pub fn task_id(&self, name: &str) -> Option<TaskId> {
        self.task_names.iter().position(|n| n == name).map(TaskId)
    }

    pub fn deadline_misses(&self) -> usize {
        self.events.iter().filter(|e| e.kind == EventKind::DeadlineMiss).count()
    }

    pub fn max_response(&self, task: TaskId) -> Option<Micros> {
        self.jobs.iter().filter(|j| j.task == task).map(JobOutcome::response).max()
    }

    pub fn verdict_count(&self, v: Verdict) -> usize {
        self.decisions.iter().filter(|d| d.decision.verdict == v).count()
    }

    /// Column index of a signal or readout in each sample row.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.signal_names
            .iter()
            .chain(&self.readout_names)
            .position(|n| n == name)
    }

    /// `(time, value)` pairs of one sampled column.
    pub fn series(&self, name: &str) -> Vec<(Micros, f64)> {
        match self.column(name) {
            Some(c) => self.samples.iter().map(|(t, v)| (*t, v[c])).collect(),
            None => Vec::new(),
        }
    }

    /// Longest interval over which `column` never increased.
    pub fn longest_flat(&self, column: usize) -> Micros {
        let mut best = Micros::ZERO;
        let mut start = None;
        for w in self.samples.windows(2) {
            let (t0, a) = (&w[0].0, w[0].1[column]);
            let (t1, b) = (&w[1].0, w[1].1[column]);
            if b <= a {
                let s = *start.get_or_insert(*t0);
                best = best.max(*t1 - s);
            } else {
                start = None;
            }
        }
        best
    }

    pub fn summary(&self) -> Summary {
        let tasks = self
            .task_names
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let t = TaskId(i);
                TaskSummary {
                    task: name.clone(),
                    jobs: self.jobs.iter().filter(|j| j.task == t).count(),
                    max_response_ms: self.max_response(t).map_or(0.0, Micros::as_ms_f64),
                    deadline_misses: self
                        .events
                        .iter()
                        .filter(|e| e.task == t && e.kind == EventKind::DeadlineMiss)
                        .count(),
                }
            })
            .collect();
        Summary {
            monitor: self.monitor_enabled,
            horizon_ms: self.horizon.as_ms_f64(),
            requests: self.decisions.len(),
            allow: self.verdict_count(Verdict::Allow),
            ignore: self.verdict_count(Verdict::Ignore),
            override_count: self.verdict_count(Verdict::Override),
            deadline_misses: self.deadline_misses(),
            longest_flat_ms: self.plot_column.map_or(0.0, |c| self.longest_flat(c).as_ms_f64()),
            tasks,
        }
    }

    pub fn write_decisions_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        crate::monitor::write_decision_rows(w, self.decision_rows.iter().cloned())
    }

    pub fn write_plant_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        let header: Vec<&str> = std::iter::once("time_us")
            .chain(self.signal_names.iter().map(String::as_str))
            .chain(self.readout_names.iter().map(String::as_str))
            .collect();
        out.write_record(&header)?;
        for (t, vals) in &self.samples {
            let mut rec = vec![t.as_us().to_string()];
            rec.extend(vals.iter().map(|v| format_value(*v)));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_events_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["time_us", "task", "job", "event"])?;
        for e in &self.events {
            out.write_record([
                e.time.as_us().to_string(),
                self.task_names[e.task.0].clone(),
                e.job.to_string(),
                format!("{:?}", e.kind),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Two columns, time in ms and the plotted readout, for gnuplot.
    pub fn write_plot<W: Write>(&self, mut w: W) -> io::Result<()> {
        let Some(c) = self.plot_column else {
            return Ok(());
        };
        let name = self.signal_names.iter().chain(&self.readout_names).nth(c).map_or("", String::as_str);
        writeln!(w, "# time_ms {name}")?;
        for (t, vals) in &self.samples {
            writeln!(w, "{} {}", t, format_value(vals[c]))?;
        }
        Ok(())
    }

    /// Writes every trace file into `dir`, creating it if needed.
    pub fn write_all(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let file = |name: &str| std::fs::File::create(dir.join(name)).map(io::BufWriter::new);
        self.write_decisions_csv(file("decisions.csv")?).map_err(io::Error::other)?;
        self.write_plant_csv(file("plant.csv")?).map_err(io::Error::other)?;
        self.write_events_csv(file("events.csv")?).map_err(io::Error::other)?;
        self.write_plot(file("plot.dat")?)?;
        let summary = toml::to_string(&self.summary()).map_err(io::Error::other)?;
        std::fs::write(dir.join("summary.toml"), summary)
    }

    /// All trace files concatenated; equal traces give equal bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_decisions_csv(&mut buf).expect("in-memory write");
        self.write_plant_csv(&mut buf).expect("in-memory write");
        self.write_events_csv(&mut buf).expect("in-memory write");
        self.write_plot(&mut buf).expect("in-memory write");
        buf
    }
}

impl std::fmt::Display for Summary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "monitor: {}", if self.monitor { "on" } else { "off" })?;
        writeln!(f, "horizon: {} ms", self.horizon_ms)?;
        writeln!(
            f,
            "requests: {}  allow: {}  ignore: {}  override: {}",
            self.requests, self.allow, self.ignore, self.override_count
        )?;
        writeln!(f, "deadline misses: {}", self.deadline_misses)?;
        writeln!(f, "longest flat interval: {} ms", self.longest_flat_ms)?;
        let mut line = String::new();
        for t in &self.tasks {
            line.clear();
            let _ = write!(
                line,
                "  {}: {} jobs, max response {} ms, {} misses",
                t.task, t.jobs, t.max_response_ms, t.deadline_misses
            );
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

/// Fixed six-decimal rendering, so output does not depend on float printing.
fn format_value(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_print_compactly() {
        assert_eq!(format_value(1.5), "1.5");
        assert_eq!(format_value(120.0), "120");
        assert_eq!(format_value(-0.0000001), "0");
        assert_eq!(format_value(1.0 / 3.0), "0.333333");
    }

    #[test]
    fn flat_interval_detection() {
        let mut t = SimTrace {
            task_names: vec![],
            horizon: Micros::from_ms(5),
            events: vec![],
            decisions: vec![],
            decision_rows: vec![],
            applied: vec![],
            jobs: vec![],
            signal_names: vec![],
            readout_names: vec!["d".into()],
            samples: vec![],
            plot_column: Some(0),
            monitor_enabled: true,
        };
        for (ms, v) in [(0, 0.0), (1, 1.0), (2, 1.0), (3, 1.0), (4, 2.0), (5, 3.0)] {
            t.samples.push((Micros::from_ms(ms), vec![v]));
        }
        assert_eq!(t.longest_flat(0), Micros::from_ms(2));
        assert_eq!(t.summary().longest_flat_ms, 2.0);
    }
}
