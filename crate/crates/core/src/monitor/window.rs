use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::MonitorError;
use crate::dsl::RateWindow;
use crate::model::{ActuatorId, TaskId};
use crate::time::Micros;

/// Strict request budget: a request is admitted while the window count,
/// including this request, stays below `threshold`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateLimit {
    pub threshold: u32,
    pub window: RateWindow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WindowEvent {
    JobRelease { task: TaskId, at: Micros },
    Advance(Micros),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct Counter {
    limit: RateLimit,
    /// Requests in the current period window.
    count: u32,
    window_start: Micros,
    job_release: Micros,
    /// Request times inside a sliding window, oldest first.
    stamps: VecDeque<Micros>,
}

impl Counter {
    fn count(&self) -> u32 {
        match self.limit.window {
            RateWindow::Period => self.count,
            RateWindow::Sliding(_) => self.stamps.len() as u32,
        }
    }

    fn evict(&mut self, now: Micros) {
        if let RateWindow::Sliding(len) = self.limit.window {
            while self.stamps.front().is_some_and(|&t| t + len <= now) {
                self.stamps.pop_front();
            }
            self.window_start = now.saturating_sub(len);
        }
    }
}

/// Per (task, actuator) request counts for every pair with a rate rule.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateWindowState {
    counters: BTreeMap<(TaskId, ActuatorId), Counter>,
    now: Micros,
}

impl RateWindowState {
    pub fn new<I>(limits: I) -> Self
    where
        I: IntoIterator<Item = ((TaskId, ActuatorId), RateLimit)>,
    {
        let counters = limits
            .into_iter()
            .map(|(k, limit)| {
                (k, Counter { limit, count: 0, window_start: Micros::ZERO, job_release: Micros::ZERO, stamps: VecDeque::new() })
            })
            .collect();
        RateWindowState { counters, now: Micros::ZERO }
    }

    pub fn now(&self) -> Micros {
        self.now
    }

    pub fn limit(&self, task: TaskId, actuator: ActuatorId) -> Option<RateLimit> {
        self.counters.get(&(task, actuator)).map(|c| c.limit)
    }

    /// Current count, `0` for pairs without a rate rule.
    pub fn count(&self, task: TaskId, actuator: ActuatorId) -> u32 {
        self.counters.get(&(task, actuator)).map_or(0, Counter::count)
    }

    pub fn job_release(&self, task: TaskId, actuator: ActuatorId) -> Option<Micros> {
        self.counters.get(&(task, actuator)).map(|c| c.job_release)
    }

    /// Period windows restart at the task's job release; sliding windows
    /// drop requests older than their length.
    pub fn advance(&mut self, event: WindowEvent) -> Result<(), MonitorError> {
        let at = match event {
            WindowEvent::JobRelease { at, .. } | WindowEvent::Advance(at) => at,
        };
        if at < self.now {
            return Err(MonitorError::TimeRegression { now: self.now, event: at });
        }
        self.now = at;
        for ((task, _), c) in self.counters.iter_mut() {
            if let WindowEvent::JobRelease { task: released, .. } = event {
                if *task == released {
                    c.job_release = at;
                    if c.limit.window == RateWindow::Period {
                        c.count = 0;
                        c.window_start = at;
                    }
                }
            }
            c.evict(at);
        }
        Ok(())
    }

    /// Counts one attempt at `at` and says whether it is within budget.
    /// Rejected attempts are counted too. Pairs without a rule always pass.
    pub(crate) fn record(&mut self, task: TaskId, actuator: ActuatorId, at: Micros) -> Result<(bool, u32), MonitorError> {
        if !self.counters.contains_key(&(task, actuator)) {
            return Ok((true, 0));
        }
        self.advance(WindowEvent::Advance(at))?;
        let c = self.counters.get_mut(&(task, actuator)).expect("checked above");
        match c.limit.window {
            RateWindow::Period => c.count += 1,
            RateWindow::Sliding(_) => c.stamps.push_back(at),
        }
        let n = c.count();
        Ok((n < c.limit.threshold, n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const T: TaskId = TaskId(0);
    const A: ActuatorId = ActuatorId(0);

    fn state(window: RateWindow, threshold: u32) -> RateWindowState {
        RateWindowState::new([((T, A), RateLimit { threshold, window })])
    }

    #[test]
    fn job_release_resets_period_count() {
        let mut w = state(RateWindow::Period, 10);
        for t in 0..3 {
            w.record(T, A, Micros(t)).unwrap();
        }
        assert_eq!(w.count(T, A), 3);
        w.advance(WindowEvent::JobRelease { task: T, at: Micros(10) }).unwrap();
        assert_eq!(w.count(T, A), 0);
    }

    #[test]
    fn other_task_release_keeps_count() {
        let mut w = state(RateWindow::Period, 10);
        w.record(T, A, Micros(0)).unwrap();
        w.advance(WindowEvent::JobRelease { task: TaskId(1), at: Micros(5) }).unwrap();
        assert_eq!(w.count(T, A), 1);
    }

    #[test]
    fn sliding_window_evicts_old_requests() {
        let mut w = state(RateWindow::Sliding(Micros::from_ms(200)), 10);
        for ms in [0, 50, 100] {
            w.record(T, A, Micros::from_ms(ms)).unwrap();
        }
        w.advance(WindowEvent::Advance(Micros::from_ms(260))).unwrap();
        // only stamps after 260 - 200 = 60 ms survive
        assert_eq!(w.count(T, A), 1);
    }

    #[test]
    fn no_events_no_change() {
        let mut w = state(RateWindow::Period, 3);
        w.record(T, A, Micros(7)).unwrap();
        let before = w.clone();
        assert_eq!(w, before);
        w.advance(WindowEvent::Advance(Micros(7))).unwrap();
        assert_eq!(w.count(T, A), before.count(T, A));
    }

    #[test]
    fn strict_threshold() {
        let mut w = state(RateWindow::Period, 2);
        assert_eq!(w.record(T, A, Micros(0)).unwrap(), (true, 1));
        assert_eq!(w.record(T, A, Micros(1)).unwrap(), (false, 2));
        assert_eq!(w.record(T, A, Micros(2)).unwrap(), (false, 3));
    }

    #[test]
    fn time_regression() {
        let mut w = state(RateWindow::Period, 2);
        w.advance(WindowEvent::Advance(Micros(10))).unwrap();
        assert!(matches!(w.advance(WindowEvent::Advance(Micros(9))), Err(MonitorError::TimeRegression { .. })));
    }

    #[test]
    fn unruled_pair_always_passes() {
        let mut w = state(RateWindow::Period, 2);
        for t in 0..5 {
            assert_eq!(w.record(TaskId(3), A, Micros(t)).unwrap(), (true, 0));
        }
    }
}
