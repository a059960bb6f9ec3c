mod common;

use actguard::rta::{self, Wcrt};
use actguard::sim;
use actguard::{Micros, RtTask, TaskId};
use common::{bare_scenario, hyperperiod_us, oracle_schedule, random_taskset};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ms(v: u64) -> Micros {
    Micros::from_ms(v)
}

#[test]
fn classic_taskset_response_times() {
    let tasks = vec![
        RtTask::new(0, "a", ms(1), ms(4), 1),
        RtTask::new(1, "b", ms(2), ms(6), 2),
        RtTask::new(2, "c", ms(3), ms(12), 3),
    ];
    let report = rta::analyze(&tasks, Micros::ZERO).unwrap();
    let r: Vec<_> = report.tasks.iter().map(|t| t.response().unwrap()).collect();
    assert_eq!(r, [ms(1), ms(3), ms(10)]);
    assert_eq!(report.task("c").unwrap().interference(), Some(ms(7)));
}

#[test]
fn checker_blocking_enters_higher_priority_bounds() {
    let tasks = vec![
        RtTask::new(0, "a", ms(1), ms(4), 1).with_actuation(1),
        RtTask::new(1, "b", ms(2), ms(6), 2).with_actuation(1),
    ];
    let report = rta::analyze(&tasks, Micros(500)).unwrap();
    assert_eq!(report.tasks[0].b_tee, Micros(500));
    assert_eq!(report.tasks[0].response(), Some(ms(2)));
    assert_eq!(report.tasks[1].response(), Some(ms(4)));
}

#[test]
fn lone_task_converges_in_two_evaluations() {
    let t = RtTask::new(0, "solo", ms(3), ms(10), 1);
    assert_eq!(rta::wcrt(&t, std::slice::from_ref(&t), Micros::ZERO).unwrap(), Wcrt::Bounded { response: ms(3), iterations: 2 });
}

#[test]
fn overload_is_reported_not_looped() {
    let tasks = vec![RtTask::new(0, "a", ms(3), ms(4), 1), RtTask::new(1, "b", ms(3), ms(6), 2)];
    let report = rta::analyze(&tasks, Micros::ZERO).unwrap();
    assert!(!report.schedulable());
    assert!(matches!(report.tasks[1].outcome, Wcrt::Unschedulable { exceeded_at, .. } if exceeded_at > ms(6)));
}

fn taskset(seed: u64) -> (Vec<RtTask>, Micros) {
    random_taskset(&mut ChaCha8Rng::seed_from_u64(seed), 6, 0.95)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn iterates_never_decrease(seed in any::<u64>()) {
        let (tasks, overhead) = taskset(seed);
        for t in &tasks {
            let it: Vec<Micros> = rta::iterate(t, &tasks, overhead).take(64).collect();
            prop_assert!(it.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn more_work_never_shrinks_a_bound(seed in any::<u64>(), victim in 0usize..6, extra in 1u64..2000) {
        let (tasks, overhead) = taskset(seed);
        let victim = victim % tasks.len();
        let mut heavier = tasks.clone();
        heavier[victim].wcet += Micros(extra);
        let before = rta::analyze(&tasks, overhead).unwrap();
        let after = rta::analyze(&heavier, overhead).unwrap();
        for (b, a) in before.tasks.iter().zip(&after.tasks) {
            match (b.response(), a.response()) {
                (Some(rb), Some(ra)) => prop_assert!(ra >= rb),
                (None, Some(_)) => prop_assert!(false, "heavier set became schedulable"),
                _ => {}
            }
        }
    }

    #[test]
    fn bound_covers_cost_and_blocking(seed in any::<u64>()) {
        let (tasks, overhead) = taskset(seed);
        for t in rta::analyze(&tasks, overhead).unwrap().tasks {
            if let Some(r) = t.response() {
                prop_assert!(r >= t.c_tee + t.b_tee);
                prop_assert_eq!(t.interference(), Some(r - t.c_tee));
            }
        }
    }

    /// Offsets never produce a worse case than the bound assumes.
    #[test]
    fn bounds_hold_under_random_phases(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (tasks, overhead) = random_taskset(&mut rng, 5, 0.9);
        let phases: Vec<u64> = tasks.iter().map(|t| rng.random_range(0..t.period.as_us() / 1000) * 1000).collect();
        let horizon = 2 * hyperperiod_us(&tasks) + phases.iter().max().unwrap();
        let mut sc = bare_scenario(&tasks, overhead, Micros(horizon));
        for (t, &p) in sc.tasks.iter_mut().zip(&phases) {
            t.phase = Micros(p);
        }
        let trace = sim::run(&sc).unwrap();
        let oracle = oracle_schedule(&tasks, &phases, overhead.as_us(), horizon);
        let report = rta::analyze(&tasks, overhead).unwrap();
        for (i, t) in report.tasks.iter().enumerate() {
            let observed = trace.max_response(TaskId(i)).map_or(0, Micros::as_us);
            prop_assert_eq!(observed, oracle[i].max_response_us);
            if let Some(r) = t.response() {
                prop_assert!(r.as_us() >= observed, "task {} bound {} < {} us", i, r, observed);
            }
        }
        if report.schedulable() {
            prop_assert_eq!(trace.deadline_misses(), 0);
        }
    }
}
