use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::attack::{AttackMode, SpoofPayload};
use super::plant::Plant;
use super::trace::{AppliedWrite, EventKind, JobOutcome, SchedEvent, SimTrace};
use super::{Scenario, SimError};
use crate::model::{ActuationRequest, ActuatorId, CommandExpr, TaskId};
use crate::monitor::ReferenceMonitor;
use crate::time::Micros;

/// Separates the attack-jitter stream from the execution-time stream.
const ATTACK_STREAM: u64 = 0x5eed_a77a;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum CheckKind {
    Nominal,
    Burst(usize),
}

#[derive(Clone, Debug)]
enum Segment {
    Work(Micros),
    Check { kind: CheckKind, left: Micros, started: bool, apply: Option<(ActuatorId, Vec<u8>)> },
}

#[derive(Clone, Debug)]
struct Job {
    task: usize,
    index: u64,
    release: Micros,
    deadline: Micros,
    segments: VecDeque<Segment>,
    missed: bool,
}

impl Job {
    fn in_check(&self) -> bool {
        matches!(self.segments.front(), Some(Segment::Check { started: true, .. }))
    }
}

struct World<'a> {
    sc: &'a Scenario,
    plant: Box<dyn Plant>,
    plant_time: Micros,
    next_tick: Micros,
    monitor: ReferenceMonitor,
    trace: SimTrace,
    /// Actuations issued so far per task; drives sequence controllers.
    actuations: Vec<u64>,
    spoofs: Vec<usize>,
    attack_start: Vec<Micros>,
}

impl World<'_> {
    fn event(&mut self, time: Micros, job: &Job, kind: EventKind) {
        self.trace.events.push(SchedEvent { time, task: TaskId(job.task), job: job.index, kind });
    }

    /// Steps the plant to `t`, sampling every tick on the way.
    fn sync_plant(&mut self, t: Micros) {
        while self.next_tick <= t && self.next_tick <= self.sc.horizon {
            let tick = self.next_tick;
            self.plant.step(tick - self.plant_time);
            self.plant_time = tick;
            let state = self.plant.signals(tick);
            let mut row: Vec<f64> =
                self.trace.signal_names.iter().map(|n| state.get(n).unwrap_or(f64::NAN)).collect();
            row.extend(self.plant.readouts());
            self.trace.samples.push((tick, row));
            self.next_tick = tick + self.sc.tick;
        }
        if t > self.plant_time {
            self.plant.step(t - self.plant_time);
            self.plant_time = t;
        }
    }

    fn attack_active(&self, k: usize, at: Micros) -> bool {
        let a = &self.sc.attacks[k];
        self.attack_start[k] <= at && at <= a.end
    }

    /// Issues the request of a check section starting now and returns what
    /// will reach the plant when the section ends.
    fn start_check(&mut self, job: &Job, kind: CheckKind, now: Micros) -> Result<Option<(ActuatorId, Vec<u8>)>, SimError> {
        let sim_task = &self.sc.tasks[job.task];
        let task = TaskId(job.task);
        let state = self.plant.signals(now);
        let actuators = self.sc.monitor.actuators();
        let encode = |actuator: ActuatorId, cmd: CommandExpr| -> Result<ActuationRequest, SimError> {
            let a = &actuators[actuator.0];
            Ok(ActuationRequest::encoded(task, a, cmd, now)?)
        };
        let request = match kind {
            CheckKind::Burst(k) => match &self.sc.attacks[k].mode {
                AttackMode::DosBurst { command, .. } => Some(encode(self.sc.attacks[k].actuator, command.clone())?),
                AttackMode::Spoof(_) => None,
            },
            CheckKind::Nominal => {
                let n = self.actuations[job.task];
                self.actuations[job.task] += 1;
                let spoof = (0..self.sc.attacks.len()).find(|&k| {
                    self.sc.attacks[k].victim == task
                        && matches!(self.sc.attacks[k].mode, AttackMode::Spoof(_))
                        && self.attack_active(k, now)
                });
                match spoof {
                    Some(k) => {
                        let a = &self.sc.attacks[k];
                        let AttackMode::Spoof(items) = &a.mode else { unreachable!() };
                        let item = &items[self.spoofs[k] % items.len()];
                        self.spoofs[k] += 1;
                        Some(match item {
                            SpoofPayload::Command(c) => encode(a.actuator, c.clone())?,
                            SpoofPayload::Raw(bytes) => ActuationRequest::raw(task, a.actuator, bytes.clone(), now),
                        })
                    }
                    None => match &sim_task.controller {
                        Some(c) => match c.command(n, &state) {
                            Some(cmd) => Some(encode(c.actuator(), cmd)?),
                            None => None,
                        },
                        None => None,
                    },
                }
            }
        };
        let Some(request) = request else { return Ok(None) };
        let actuator = request.actuator;
        let record = self.monitor.submit(request, &state)?;
        Ok(record.applied.as_ref().map(|a| (actuator, a.payload.clone())))
    }

    fn finish_check(&mut self, job: &Job, apply: Option<(ActuatorId, Vec<u8>)>, now: Micros) {
        if let Some((actuator, payload)) = apply {
            self.plant.apply(actuator, &payload);
            self.trace.applied.push(AppliedWrite {
                time: now,
                task: TaskId(job.task),
                actuator,
                payload,
                job_release: job.release,
            });
        }
        self.event(now, job, EventKind::CheckEnd);
    }
}

fn build_segments(sc: &Scenario, task: usize, exec: Micros, bursts: &[(usize, u32)]) -> VecDeque<Segment> {
    let st = &sc.tasks[task];
    let n = st.task.actuation_bound as u64;
    let overhead = st.task.overhead(sc.monitor.check_overhead);
    let points: Vec<Micros> = match &st.offsets {
        Some(o) => o.iter().map(|&p| p.min(exec)).collect(),
        None => (1..=n).map(|k| Micros(k * exec.as_us() / (n + 1))).collect(),
    };
    let check = |kind| Segment::Check { kind, left: overhead, started: false, apply: None };
    let mut segs = VecDeque::new();
    let mut at = Micros::ZERO;
    let work = |segs: &mut VecDeque<Segment>, to: Micros, at: &mut Micros| {
        if to > *at {
            segs.push_back(Segment::Work(to - *at));
            *at = to;
        }
    };
    for (k, &p) in points.iter().enumerate() {
        work(&mut segs, p, &mut at);
        segs.push_back(check(CheckKind::Nominal));
        if k + 1 == points.len() {
            for &(a, count) in bursts {
                segs.extend((0..count).map(|_| check(CheckKind::Burst(a))));
            }
        }
    }
    if points.is_empty() && !bursts.is_empty() {
        work(&mut segs, Micros(exec.as_us() / 2), &mut at);
        for &(a, count) in bursts {
            segs.extend((0..count).map(|_| check(CheckKind::Burst(a))));
        }
    }
    work(&mut segs, exec, &mut at);
    segs
}

/// Runs the scenario to its horizon and then until every released job completes.
pub fn run(sc: &Scenario) -> Result<SimTrace, SimError> {
    if sc.tick.is_zero() {
        return Err(SimError::Config("tick must be positive".into()));
    }
    let plant_actuator = match sc.plant.actuator() {
        Some(name) => sc
            .monitor
            .actuators()
            .iter()
            .position(|a| a.name == name)
            .map(ActuatorId)
            .ok_or_else(|| SimError::Config(format!("plant actuator `{name}` is not declared")))?,
        None => ActuatorId(usize::MAX),
    };
    let plant = sc.plant.build(plant_actuator);
    let mut exec_rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let mut attack_rng = ChaCha8Rng::seed_from_u64(sc.seed ^ ATTACK_STREAM);
    let attack_start = sc
        .attacks
        .iter()
        .map(|a| {
            let d = if a.jitter.is_zero() { 0 } else { attack_rng.random_range(0..=a.jitter.as_us()) };
            a.start + Micros(d)
        })
        .collect();
    let trace = SimTrace {
        task_names: sc.tasks.iter().map(|t| t.task.name.clone()).collect(),
        horizon: sc.horizon,
        events: Vec::new(),
        decisions: Vec::new(),
        decision_rows: Vec::new(),
        applied: Vec::new(),
        jobs: Vec::new(),
        signal_names: plant.signal_names().into_iter().map(String::from).collect(),
        readout_names: plant.readout_names().into_iter().map(String::from).collect(),
        samples: Vec::new(),
        plot_column: (!plant.readout_names().is_empty()).then(|| plant.signal_names().len() + plant.plot_readout()),
        monitor_enabled: sc.monitor.enabled,
    };
    let mut w = World {
        sc,
        plant,
        plant_time: Micros::ZERO,
        next_tick: Micros::ZERO,
        monitor: ReferenceMonitor::new(sc.monitor.clone())?,
        trace,
        actuations: vec![0; sc.tasks.len()],
        spoofs: vec![0; sc.attacks.len()],
        attack_start,
    };

    let mut next_release: Vec<Micros> = sc.tasks.iter().map(|t| t.phase).collect();
    let mut job_count = vec![0u64; sc.tasks.len()];
    let mut active: Vec<Job> = Vec::new();
    let mut running: Option<usize> = None;
    let mut now = Micros::ZERO;

    loop {
        w.sync_plant(now);

        // Finish whatever the running job completed at `now`.
        while let Some(r) = running {
            match active[r].segments.front_mut() {
                None => {
                    let job = active.remove(r);
                    w.event(now, &job, EventKind::Complete);
                    w.trace.jobs.push(JobOutcome {
                        task: TaskId(job.task),
                        job: job.index,
                        release: job.release,
                        deadline: job.deadline,
                        completion: now,
                    });
                    running = None;
                }
                Some(Segment::Work(left)) if left.is_zero() => {
                    active[r].segments.pop_front();
                }
                Some(Segment::Check { started: true, left, apply, .. }) if left.is_zero() => {
                    let apply = apply.take();
                    active[r].segments.pop_front();
                    let job = active[r].clone();
                    w.finish_check(&job, apply, now);
                }
                Some(_) => break,
            }
        }

        for job in active.iter_mut() {
            if !job.missed && job.deadline <= now {
                job.missed = true;
                w.event(now, job, EventKind::DeadlineMiss);
                if sc.fail_on_miss {
                    return Err(SimError::DeadlineMiss {
                        task: sc.tasks[job.task].task.name.clone(),
                        job: job.index,
                        deadline: job.deadline,
                    });
                }
            }
        }

        for i in 0..sc.tasks.len() {
            while next_release[i] == now && now < sc.horizon {
                let t = &sc.tasks[i].task;
                let exec = if sc.exec_jitter {
                    let lo = t.wcet.as_us() * 4 / 5;
                    Micros(exec_rng.random_range(lo..=t.wcet.as_us()).max(1))
                } else {
                    t.wcet
                };
                let bursts: Vec<(usize, u32)> = sc
                    .attacks
                    .iter()
                    .enumerate()
                    .filter(|(k, a)| a.victim == TaskId(i) && w.attack_active(*k, now))
                    .filter_map(|(k, a)| match a.mode {
                        AttackMode::DosBurst { count, .. } => Some((k, count)),
                        AttackMode::Spoof(_) => None,
                    })
                    .collect();
                let job = Job {
                    task: i,
                    index: job_count[i],
                    release: now,
                    deadline: now + t.deadline,
                    segments: build_segments(sc, i, exec, &bursts),
                    missed: false,
                };
                job_count[i] += 1;
                next_release[i] = now + t.period;
                w.event(now, &job, EventKind::Release);
                w.monitor.job_released(TaskId(i), now)?;
                active.push(job);
            }
        }

        if now >= sc.horizon && active.is_empty() {
            break;
        }

        // Pick the job to run unless a checker section is in progress.
        if !running.is_some_and(|r| active[r].in_check()) {
            let best = (0..active.len())
                .min_by_key(|&k| (sc.tasks[active[k].task].task.priority, active[k].release, active[k].task));
            if best != running {
                if let Some(r) = running {
                    let job = active[r].clone();
                    w.event(now, &job, EventKind::Preempt);
                }
                if let Some(b) = best {
                    let job = active[b].clone();
                    w.event(now, &job, EventKind::Dispatch);
                }
                running = best;
            }
        }

        if let Some(r) = running {
            if let Some(Segment::Check { kind, started: false, .. }) = active[r].segments.front() {
                let kind = *kind;
                let job = active[r].clone();
                w.event(now, &job, EventKind::CheckStart);
                let pending = w.start_check(&job, kind, now)?;
                if let Some(Segment::Check { started, apply, left, .. }) = active[r].segments.front_mut() {
                    *started = true;
                    *apply = pending;
                    if left.is_zero() {
                        continue;
                    }
                }
            }
        }

        let mut next = None::<Micros>;
        let mut consider = |t: Micros| {
            if t > now {
                next = Some(next.map_or(t, |n: Micros| n.min(t)));
            }
        };
        for &t in &next_release {
            if t < sc.horizon {
                consider(t);
            }
        }
        for j in &active {
            if !j.missed {
                consider(j.deadline);
            }
        }
        if now < sc.horizon {
            consider(sc.horizon);
        }
        let left = running.and_then(|r| match active[r].segments.front() {
            Some(Segment::Work(l)) | Some(Segment::Check { left: l, .. }) => Some(*l),
            None => None,
        });
        if let Some(l) = left {
            consider(now + l);
        }
        let Some(next) = next else { break };
        let dt = next - now;
        if let Some(r) = running {
            match active[r].segments.front_mut() {
                Some(Segment::Work(l)) | Some(Segment::Check { left: l, .. }) => *l = l.saturating_sub(dt),
                None => {}
            }
        }
        now = next;
    }

    w.sync_plant(sc.horizon);
    w.trace.decision_rows = w.monitor.log_rows();
    w.trace.decisions = w.monitor.decision_log().to_vec();
    Ok(w.trace)
}
