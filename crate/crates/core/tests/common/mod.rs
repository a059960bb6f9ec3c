//! Test-only oracles, written without reusing the library's scheduler.
#![allow(dead_code)]

use actguard::dsl::RuleSet;
use actguard::monitor::{MonitorConfig, Strategy};
use actguard::sim::{Scenario, SimTask};
use actguard::{Actuator, Codec, Micros, RtTask};
use rand::seq::IndexedRandom;
use rand::Rng;

pub const PERIODS_MS: [u64; 7] = [4, 5, 6, 8, 10, 12, 20];
pub const OVERHEADS_US: [u64; 3] = [0, 500, 2000];

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

/// Per-task result of the quantum-stepped schedule.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OracleTask {
    pub max_response_us: u64,
    pub misses: usize,
    pub jobs: usize,
}

#[derive(Clone, Debug)]
struct OJob {
    task: usize,
    release: u64,
    /// Remaining phases, alternating work and checker sections.
    phases: Vec<(bool, u64)>,
    in_check: bool,
}

/// Fixed-priority schedule stepped one time quantum at a time.
///
/// The quantum is the gcd of every period, phase, chunk boundary and checker
/// length, so no event falls between steps. Checker sections, once entered,
/// run to the end. Jobs released before `horizon_us` run to completion.
pub fn oracle_schedule(tasks: &[RtTask], phases_us: &[u64], overhead_us: u64, horizon_us: u64) -> Vec<OracleTask> {
    let n = tasks.len();
    let plan: Vec<Vec<(bool, u64)>> = tasks
        .iter()
        .map(|t| {
            let c = t.wcet.as_us();
            let k = u64::from(t.actuation_bound);
            let o = t.check_overhead.map_or(overhead_us, |m| m.as_us());
            let mut cuts: Vec<u64> = (1..=k).map(|j| j * c / (k + 1)).collect();
            cuts.push(c);
            let mut v = Vec::new();
            let mut prev = 0;
            for (j, cut) in cuts.iter().enumerate() {
                v.push((false, cut - prev));
                prev = *cut;
                if (j as u64) < k {
                    v.push((true, o));
                }
            }
            v.retain(|&(_, len)| len > 0);
            v
        })
        .collect();

    let mut q = 0;
    for (t, &ph) in tasks.iter().zip(phases_us) {
        q = gcd(q, t.period.as_us());
        q = gcd(q, t.deadline.as_us());
        q = gcd(q, ph);
    }
    for p in &plan {
        for &(_, len) in p {
            q = gcd(q, len);
        }
    }
    let q = q.max(1);

    let mut out = vec![OracleTask::default(); n];
    let mut ready: Vec<OJob> = Vec::new();
    let mut t = 0u64;
    loop {
        for i in 0..n {
            let p = tasks[i].period.as_us();
            if t < horizon_us && t >= phases_us[i] && (t - phases_us[i]).is_multiple_of(p) {
                ready.push(OJob { task: i, release: t, phases: plan[i].clone(), in_check: false });
                out[i].jobs += 1;
            }
        }
        if t >= horizon_us && ready.is_empty() {
            break;
        }
        let pick = match ready.iter().position(|j| j.in_check) {
            Some(k) => Some(k),
            None => (0..ready.len()).min_by_key(|&k| (tasks[ready[k].task].priority, ready[k].release)),
        };
        t += q;
        if let Some(k) = pick {
            let job = &mut ready[k];
            job.in_check = job.phases[0].0;
            job.phases[0].1 -= q;
            if job.phases[0].1 == 0 {
                job.phases.remove(0);
                job.in_check = false;
            }
            if job.phases.is_empty() {
                let j = ready.remove(k);
                let resp = t - j.release;
                let o = &mut out[j.task];
                o.max_response_us = o.max_response_us.max(resp);
                if resp > tasks[j.task].deadline.as_us() {
                    o.misses += 1;
                }
            }
        }
    }
    out
}

pub fn hyperperiod_us(tasks: &[RtTask]) -> u64 {
    tasks.iter().fold(1, |acc, t| lcm(acc, t.period.as_us()))
}

/// A random taskset with implicit deadlines and rate-monotonic priorities.
/// Utilization including checker overhead stays at or below `max_u`.
pub fn random_taskset<R: Rng>(rng: &mut R, max_tasks: usize, max_u: f64) -> (Vec<RtTask>, Micros) {
    loop {
        let n = rng.random_range(1..=max_tasks);
        let overhead = *OVERHEADS_US.choose(rng).unwrap();
        let target: f64 = rng.random_range(0.1..max_u);
        // Random split of the target utilization.
        let mut w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let sum: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x *= target / sum);
        let mut periods: Vec<u64> = (0..n).map(|_| *PERIODS_MS.choose(rng).unwrap() * 1000).collect();
        periods.sort_unstable();
        let mut tasks = Vec::with_capacity(n);
        let mut u = 0.0;
        for (i, (&p, &share)) in periods.iter().zip(&w).enumerate() {
            let actuations = rng.random_range(0..=3u32);
            let budget = (share * p as f64) as u64;
            let check = u64::from(actuations) * overhead;
            // Grains of 100 us per chunk keep every chunk boundary on a 100 us grid.
            let grain = 100 * (u64::from(actuations) + 1);
            let c = (budget.saturating_sub(check) / grain).max(1) * grain;
            u += (c + check) as f64 / p as f64;
            tasks.push(
                RtTask::new(i, format!("t{i}"), Micros(c), Micros(p), i as u32 + 1)
                    .with_actuation(actuations)
                    .with_access(vec![true]),
            );
        }
        if u <= max_u {
            return (tasks, Micros(overhead));
        }
    }
}

/// Wraps a taskset in a scenario with one switch actuator and no plant.
pub fn bare_scenario(tasks: &[RtTask], overhead: Micros, horizon: Micros) -> Scenario {
    let cfg = MonitorConfig::new(tasks, vec![Actuator::new(0, "led", Codec::Switch)], RuleSet::default())
        .unwrap()
        .with_default_strategy(Strategy::Ignore)
        .with_overhead(overhead);
    Scenario::new("oracle", tasks.iter().cloned().map(SimTask::new).collect(), cfg, horizon)
}

/// Truth table of a predicate over a list of sample states, one bit per state.
pub fn truth_mask<F: Fn(usize) -> bool>(states: usize, f: F) -> u64 {
    (0..states).filter(|&k| f(k)).fold(0, |m, k| m | (1 << k))
}

use actguard::dsl::{CmpOp, Condition, RateRule, RateWindow, Rule, Span, StateRule};
use actguard::{Command, CommandExpr};

const SIGNALS: [&str; 4] = ["s_LF", "s_WL", "s_WT", "x1"];
const ACTUATORS: [&str; 3] = ["motor", "buzzer", "arm"];
const TASKS: [&str; 3] = ["ctrl", "alarm", "grip"];
const COMMANDS: [&str; 6] = ["fwd", "lft", "rht", "ON", "OFF", "grip_open"];

/// A finite number that survives printing and reparsing.
fn literal<R: Rng>(rng: &mut R) -> f64 {
    match rng.random_range(0..4) {
        0 => f64::from(rng.random_range(-5000..5000)),
        1 => f64::from(rng.random_range(-50_000..50_000)) / 100.0,
        2 => rng.random_range(-1e6..1e6),
        _ => 0.0,
    }
}

pub fn random_condition<R: Rng>(rng: &mut R, depth: usize) -> Condition {
    let leaf = depth == 0 || rng.random_bool(0.3);
    if leaf {
        let s = *SIGNALS.choose(rng).unwrap();
        return match rng.random_range(0..3) {
            0 => Condition::compare(s, *CmpOp::ALL.choose(rng).unwrap(), literal(rng)),
            k => {
                let (a, b) = (literal(rng), literal(rng));
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                if k == 1 {
                    Condition::in_range(s, lo, hi)
                } else {
                    Condition::not_in_range(s, lo, hi)
                }
            }
        };
    }
    match rng.random_range(0..3) {
        0 => random_condition(rng, depth - 1).negate(),
        1 => random_condition(rng, depth - 1).and(random_condition(rng, depth - 1)),
        _ => random_condition(rng, depth - 1).or(random_condition(rng, depth - 1)),
    }
}

fn random_command<R: Rng>(rng: &mut R) -> CommandExpr {
    let n = rng.random_range(1..=3);
    CommandExpr(
        (0..n)
            .map(|_| {
                if rng.random_bool(0.3) {
                    Command::with_arg("st_sp", rng.random_range(0..=255))
                } else {
                    Command::new(*COMMANDS.choose(rng).unwrap())
                }
            })
            .collect(),
    )
}

/// A syntactically valid rule set; names need not resolve to anything.
pub fn random_ruleset<R: Rng>(rng: &mut R) -> RuleSet {
    let mut rules = Vec::new();
    let mut rate_pairs = std::collections::BTreeSet::new();
    for k in 0..rng.random_range(0..6) {
        let name = format!("R_{k}");
        if rng.random_bool(0.25) {
            let task = *TASKS.choose(rng).unwrap();
            let actuator = *ACTUATORS.choose(rng).unwrap();
            if !rate_pairs.insert((task, actuator)) {
                continue;
            }
            let window = if rng.random_bool(0.5) {
                RateWindow::Period
            } else {
                RateWindow::Sliding(Micros(rng.random_range(1..5_000_000)))
            };
            rules.push(Rule::Rate(RateRule {
                name,
                span: Span::default(),
                task: task.into(),
                task_span: Span::default(),
                actuator: actuator.into(),
                actuator_span: Span::default(),
                threshold: rng.random_range(1..20),
                window,
            }));
        } else {
            rules.push(Rule::State(StateRule {
                name,
                span: Span::default(),
                actuator: (*ACTUATORS.choose(rng).unwrap()).into(),
                condition: random_condition(rng, 4),
                then_cmd: random_command(rng),
                then_span: Span::default(),
                else_cmd: rng.random_bool(0.5).then(|| random_command(rng)),
                else_span: Span::default(),
            }));
        }
    }
    RuleSet { rules }
}
