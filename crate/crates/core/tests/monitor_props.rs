use actguard::dsl::{expected_command, parse_rules};
use actguard::monitor::{read_log_csv, MonitorConfig, ReferenceMonitor, Strategy as Response};
use actguard::{
    ActuationRequest, Actuator, ActuatorId, Codec, Command, CommandExpr, Micros, Reason, RtTask, SystemState, TaskId,
    Verdict,
};
use proptest::prelude::*;

const RULES: &str = "\
INV_1 :: s_LF < -2500 -> motor = st_sp(80) and rht()
INV_2 :: s_LF > 2500 -> motor = st_sp(80) and lft()
INV_3 :: s_LF in [-2500, 2500] -> motor = st_sp(120) and fwd()
RC_1 :: rate(task ctrl, motor) < 3 per period -> check : ignore
";

fn config(strategy: Response) -> MonitorConfig {
    let tasks = vec![
        RtTask::new(0, "ctrl", Micros::from_ms(20), Micros::from_ms(100), 1).with_actuation(1).with_access(vec![true]),
        RtTask::new(1, "log", Micros::from_ms(5), Micros::from_ms(50), 2),
    ];
    MonitorConfig::new(&tasks, vec![Actuator::new(0, "motor", Codec::RoverMotor)], parse_rules(RULES).unwrap())
        .unwrap()
        .with_default_strategy(strategy)
}

/// One step of a request stream: task, command choice, raw bytes, s_LF, delay, new job.
type Step = (usize, Option<u8>, Vec<u8>, i32, u64, bool);

fn step() -> impl Strategy<Value = Step> {
    (0usize..2, prop::option::of(0u8..=255), prop::collection::vec(any::<u8>(), 0..11), -4000i32..4000, 0u64..40_000, any::<bool>())
}

fn command(choice: u8) -> CommandExpr {
    match choice % 4 {
        0 => CommandExpr(vec![Command::with_arg("st_sp", 120), Command::new("fwd")]),
        1 => CommandExpr(vec![Command::with_arg("st_sp", 80), Command::new("rht")]),
        2 => CommandExpr(vec![Command::with_arg("st_sp", i64::from(choice)), Command::new("lft")]),
        _ => Command::new("fwd").into(),
    }
}

fn drive(mon: &mut ReferenceMonitor, steps: &[Step]) {
    let motor = mon.config().actuators()[0].clone();
    let mut now = Micros::ZERO;
    for (task, choice, raw, s_lf, delay, release) in steps {
        now += Micros(*delay);
        if *release {
            mon.job_released(TaskId(0), now).unwrap();
        }
        let req = match choice {
            Some(c) => ActuationRequest::encoded(TaskId(*task), &motor, command(*c), now).unwrap(),
            None => ActuationRequest::raw(TaskId(*task), ActuatorId(0), raw.clone(), now),
        };
        let state = SystemState::new(now).with("s_LF", f64::from(*s_lf));
        mon.submit(req, &state).unwrap();
    }
}

proptest! {
    /// Whatever reaches the motor under FAIL-SAFE is what the invariants
    /// demanded at the mediation instant.
    #[test]
    fn applied_commands_satisfy_the_invariants(steps in prop::collection::vec(step(), 1..60)) {
        let mut mon = ReferenceMonitor::new(config(Response::FailSafe)).unwrap();
        drive(&mut mon, &steps);
        let codec = &mon.config().actuators()[0].codec;
        for rec in mon.decision_log() {
            if let Some(applied) = &rec.applied {
                let want = expected_command(mon.config().rules(), "motor", &rec.state).unwrap().unwrap();
                prop_assert_eq!(&applied.payload, &codec.encode_expr(&want).unwrap());
            }
        }
    }

    #[test]
    fn no_access_means_nothing_applied(steps in prop::collection::vec(step(), 1..60)) {
        let mut mon = ReferenceMonitor::new(config(Response::FailSafe)).unwrap();
        drive(&mut mon, &steps);
        for rec in mon.decision_log().iter().filter(|r| r.request.task == TaskId(1)) {
            prop_assert!(rec.applied.is_none());
            prop_assert_eq!(rec.decision.reason, Reason::NoPermission);
        }
    }

    /// At most θ − 1 requests pass in any one job window.
    #[test]
    fn rate_bound_per_job(steps in prop::collection::vec(step(), 1..80)) {
        let mut mon = ReferenceMonitor::new(config(Response::Ignore)).unwrap();
        drive(&mut mon, &steps);
        let mut passed = 0;
        for (rec, s) in mon.decision_log().iter().zip(&steps) {
            if s.5 {
                passed = 0;
            }
            if rec.request.task == TaskId(0) && rec.decision.reason != Reason::RateLimited {
                passed += 1;
            }
            prop_assert!(passed <= 2);
        }
    }

    #[test]
    fn reruns_are_identical_and_logs_reload(steps in prop::collection::vec(step(), 0..40)) {
        let run = || {
            let mut mon = ReferenceMonitor::new(config(Response::FailSafe)).unwrap();
            drive(&mut mon, &steps);
            let mut csv = Vec::new();
            mon.write_log_csv(&mut csv).unwrap();
            (csv, mon.log_rows())
        };
        let (a, rows) = run();
        let (b, _) = run();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(read_log_csv(a.as_slice()).unwrap(), rows);
        prop_assert_eq!(mon_len(&steps), steps.len());
    }
}

fn mon_len(steps: &[Step]) -> usize {
    let mut mon = ReferenceMonitor::new(config(Response::Ignore)).unwrap();
    drive(&mut mon, steps);
    mon.decision_log().len()
}

#[test]
fn bypassed_monitor_still_checks_access() {
    let mut cfg = config(Response::FailSafe);
    cfg.enabled = false;
    let mut mon = ReferenceMonitor::new(cfg).unwrap();
    let state = SystemState::new(Micros::ZERO).with("s_LF", 0.0);
    let rogue = ActuationRequest::raw(TaskId(0), ActuatorId(0), vec![5, 1, 0, 0, 0], Micros::ZERO);
    assert_eq!(mon.submit(rogue, &state).unwrap().decision.reason, Reason::MonitorBypassed);
    let other = ActuationRequest::raw(TaskId(1), ActuatorId(0), vec![1, 0, 0, 0, 0], Micros::ZERO);
    let rec = mon.submit(other, &state).unwrap();
    assert_eq!((rec.decision.verdict, rec.decision.reason), (Verdict::Ignore, Reason::NoPermission));
}

#[test]
fn spoofed_stop_is_overridden() {
    let mut mon = ReferenceMonitor::new(config(Response::FailSafe)).unwrap();
    let state = SystemState::new(Micros::ZERO).with("s_LF", 100.0);
    let rec = mon.submit(ActuationRequest::raw(TaskId(0), ActuatorId(0), vec![5, 1, 0, 0, 0], Micros::ZERO), &state).unwrap();
    assert_eq!(rec.decision.verdict, Verdict::Override);
    assert_eq!(mon.log_rows()[0].applied_cmd, "st_sp(120) and fwd()");
}

#[test]
fn time_must_not_run_backwards() {
    let mut mon = ReferenceMonitor::new(config(Response::Ignore)).unwrap();
    let state = SystemState::new(Micros::ZERO).with("s_LF", 0.0);
    mon.submit(ActuationRequest::raw(TaskId(0), ActuatorId(0), vec![], Micros(10)), &state).unwrap();
    assert!(mon.submit(ActuationRequest::raw(TaskId(0), ActuatorId(0), vec![], Micros(5)), &state).is_err());
}
