mod common;

use common::*;
use ragarm_core::executor::*;
use ragarm_core::planner::{ActionStep, FailureKind};
use ragarm_core::{RpyDeg, Vec3};

fn down() -> Option<RpyDeg> {
    Some(RpyDeg::new(180.0, 0.0, 0.0))
}

fn ex_with(f: impl FnOnce(&mut ExecutorConfig)) -> Executor {
    let mut cfg = ExecutorConfig::default();
    f(&mut cfg);
    Executor::new(cfg).unwrap()
}

#[test]
fn validate_target_examples() {
    let b = WorkspaceBounds::default();
    assert!(validate_target(Vec3::new(400.0, 0.0, 200.0), &b).is_ok());
    assert!(matches!(
        validate_target(Vec3::new(700.0, 0.0, 200.0), &b),
        Err(ExecError::OutOfWorkspace { axis: Axis::X, .. })
    ));
    assert!(matches!(
        validate_target(Vec3::new(400.0, 0.0, 40.0), &b),
        Err(ExecError::OutOfWorkspace { axis: Axis::Z, .. })
    ));
    // Inclusive on both ends.
    assert!(validate_target(Vec3::new(150.0, -300.0, 500.0), &b).is_ok());
    assert!(matches!(
        validate_target(Vec3::new(f64::NAN, 0.0, 100.0), &b),
        Err(ExecError::NonFiniteTarget)
    ));
}

#[test]
fn long_move_is_rejected_without_motion() {
    let ex = Executor::with_defaults();
    let mut w = world_at(scene(vec![]), Vec3::new(200.0, 0.0, 200.0));
    let err = ex
        .move_to_pose(&mut w, Vec3::new(650.0, 0.0, 200.0), None, None, &Deadline::never())
        .unwrap_err();
    assert!(matches!(err, ExecError::MoveTooLong { distance, .. } if (distance - 450.0).abs() < 1e-9));
    assert_eq!(w.now(), 0.0);
    assert!(w.trace.is_empty());
}

#[test]
fn speed_above_cap_is_rejected() {
    let ex = Executor::with_defaults();
    let mut w = world(scene(vec![]));
    let err = ex
        .move_to_pose(&mut w, Vec3::new(400.0, 0.0, 300.0), None, Some(200.0), &Deadline::never())
        .unwrap_err();
    assert!(matches!(err, ExecError::SpeedCapExceeded { requested, max } if requested == 200.0 && max == 150.0));
}

#[test]
fn move_duration_matches_trapezoid() {
    let ex = Executor::with_defaults();
    let mut w = world_at(scene(vec![]), Vec3::new(250.0, 0.0, 200.0));
    ex.move_to_pose(&mut w, Vec3::new(550.0, 0.0, 200.0), None, Some(150.0), &Deadline::never())
        .unwrap();
    let want = trapezoid_duration(300.0, 150.0, 1000.0);
    assert!((w.now() - want).abs() < 1e-6, "{} vs {want}", w.now());
    assert!((want - 2.15).abs() < 1e-12);
    assert_eq!(w.arm.position(), Vec3::new(550.0, 0.0, 200.0));
}

#[test]
fn monitor_ticks_every_interval() {
    let ex = Executor::with_defaults();
    let mut w = world_at(scene(vec![]), Vec3::new(250.0, 0.0, 200.0));
    ex.move_to_pose(&mut w, Vec3::new(550.0, 0.0, 200.0), None, Some(150.0), &Deadline::never())
        .unwrap();
    let ticks: Vec<f64> = w
        .trace
        .iter()
        .filter(|e| matches!(e, TraceEvent::Tick { .. }))
        .map(|e| e.time())
        .collect();
    assert_eq!(ticks.len(), 22);
    for pair in ticks.windows(2) {
        assert!(pair[1] - pair[0] <= 0.1 + 1e-9);
    }
}

#[test]
fn approach_lands_on_hover_pose() {
    let ex = Executor::with_defaults();
    let mut w = world(scene(vec![object(1, "bottle", Vec3::new(400.0, 100.0, 80.0))]));
    ex.capture(&mut w).unwrap();
    let target = ex.approach_object(&mut w, "bottle", 40.0, None, &Deadline::never()).unwrap();
    let want = Vec3::new(400.0, 100.0, 120.0);
    assert!(target.distance(want) < 1e-6);
    assert!(w.arm.position().distance(want) < 1e-6);
}

#[test]
fn approach_to_unobserved_label_fails() {
    let ex = Executor::with_defaults();
    let mut w = world(scene(vec![object(1, "bottle", Vec3::new(400.0, 100.0, 80.0))]));
    ex.capture(&mut w).unwrap();
    let err = ex.approach_object(&mut w, "wrench", 40.0, None, &Deadline::never()).unwrap_err();
    assert!(matches!(err, ExecError::ObjectNotObserved(l) if l == "wrench"));
}

#[test]
fn approach_times_out_at_the_deadline() {
    let ex = Executor::with_defaults();
    let mut w = world(scene(vec![object(1, "bottle", Vec3::new(400.0, 100.0, 80.0))]));
    ex.capture(&mut w).unwrap();
    let t0 = w.now();
    let err = ex
        .approach_object(&mut w, "bottle", 40.0, Some(2.0), &Deadline::step(t0, 8.0))
        .unwrap_err();
    match err {
        ExecError::TimeoutAbort { timeout, at } => {
            assert_eq!(timeout, 8.0);
            assert!((at - (t0 + 8.0)).abs() < 1e-9);
        }
        other => panic!("{other:?}"),
    }
    assert!(w.trace.iter().any(|e| matches!(e, TraceEvent::Abort { .. })));
}

#[test]
fn long_approach_is_segmented() {
    let ex = Executor::with_defaults();
    let mut w = world_at(
        scene(vec![object(1, "cup", Vec3::new(600.0, 250.0, 60.0))]),
        Vec3::new(200.0, -250.0, 400.0),
    );
    w.perception
        .store()
        .update_batch(vec![ragarm_core::perception::Observation {
            tag_id: 1,
            label: "cup".into(),
            bbox: ragarm_core::perception::BBox {
                u_min: 0.0,
                v_min: 0.0,
                u_max: 1.0,
                v_max: 1.0,
            },
            position_xyz: Vec3::new(600.0, 250.0, 60.0),
            confidence: 1.0,
            timestamp: 0.0,
        }])
        .unwrap();
    ex.approach_object(&mut w, "cup", 40.0, None, &Deadline::never()).unwrap();
    let moves: Vec<(Vec3, Vec3)> = w
        .trace
        .iter()
        .filter_map(|e| match e {
            TraceEvent::Move { from, to, .. } => Some((*from, *to)),
            _ => None,
        })
        .collect();
    assert!(moves.len() >= 2);
    assert!(moves.iter().all(|(a, b)| a.distance(*b) <= 400.0));
}

fn grasped_world(ex: &Executor) -> World {
    let mut w = world(scene(vec![object(1, "bottle", Vec3::new(400.0, 100.0, 80.0))]));
    ex.capture(&mut w).unwrap();
    ex.approach_object(&mut w, "bottle", 40.0, None, &Deadline::never()).unwrap();
    ex.close_gripper(&mut w, None, None, &Deadline::never()).unwrap();
    w
}

#[test]
fn close_on_centered_object_holds_it() {
    let ex = Executor::with_defaults();
    let w = grasped_world(&ex);
    assert_eq!(w.arm.gripper.holding, Some(1));
    assert!(w.arm.gripper.load >= ex.gripper_config().grasp_load);
    assert!(w.arm.gripper.load < ex.gripper_config().emergency_load);
    assert!(w.scene.object(1).unwrap().held);
    // A held object is no longer tracked by perception.
    assert!(w.perception.store().get(1).is_none());
}

#[test]
fn close_on_nothing_is_a_grasp_failure() {
    let ex = Executor::with_defaults();
    let mut w = world(scene(vec![]));
    let err = ex.close_gripper(&mut w, None, None, &Deadline::never()).unwrap_err();
    assert!(matches!(err, ExecError::GraspFailure));
    assert_eq!(w.arm.gripper.aperture, 0.0);
    assert_eq!(w.arm.gripper.holding, None);
}

#[test]
fn rigid_object_triggers_emergency_open_within_one_tick() {
    let ex = Executor::with_defaults();
    let mut stiff = object(1, "block", Vec3::new(400.0, 0.0, 300.0));
    stiff.stiffness = 200.0;
    stiff.width_mm = 60.0;
    let mut w = world_at(scene(vec![stiff]), Vec3::new(400.0, 0.0, 320.0));
    let err = ex.close_gripper(&mut w, None, Some(100.0), &Deadline::never()).unwrap_err();
    assert!(matches!(err, ExecError::EmergencyOpen { load, .. } if load >= 90.0));
    let (t, crossed) = w
        .trace
        .iter()
        .find_map(|e| match e {
            TraceEvent::EmergencyOpen { t, crossed_at, .. } => Some((*t, crossed_at.unwrap())),
            _ => None,
        })
        .unwrap();
    assert!(t >= crossed && t - crossed <= ex.limits().safety_check_interval + 1e-9);
    assert_eq!(w.arm.gripper.aperture, 1.0);
    assert_eq!(w.arm.gripper.holding, None);
}

#[test]
fn weak_force_hits_the_gate_time() {
    let ex = Executor::with_defaults();
    let mut w = world_at(
        scene(vec![object(1, "bottle", Vec3::new(400.0, 0.0, 300.0))]),
        Vec3::new(400.0, 0.0, 320.0),
    );
    let err = ex.close_gripper(&mut w, Some(50.0), Some(20.0), &Deadline::never()).unwrap_err();
    assert!(matches!(err, ExecError::EmergencyOpen { .. }), "{err:?}");
    assert!(w.now() >= ex.gripper_config().gate_time_sec);
}

#[test]
fn gripper_commands_above_limits_are_rejected() {
    let ex = Executor::with_defaults();
    let mut w = world(scene(vec![]));
    assert!(matches!(
        ex.close_gripper(&mut w, Some(301.0), None, &Deadline::never()),
        Err(ExecError::GripperLimit { what: "speed", .. })
    ));
    assert!(matches!(
        ex.close_gripper(&mut w, None, Some(101.0), &Deadline::never()),
        Err(ExecError::GripperLimit { what: "force", .. })
    ));
}

#[test]
fn release_places_object_under_tool() {
    let ex = Executor::with_defaults();
    let mut w = grasped_world(&ex);
    ex.retreat_z(&mut w, 100.0, None, &Deadline::never()).unwrap();
    ex.move_to_pose(&mut w, Vec3::new(300.0, -150.0, 150.0), down(), None, &Deadline::never())
        .unwrap();
    ex.open_gripper(&mut w, None, &Deadline::never()).unwrap();
    let o = w.scene.object(1).unwrap();
    assert!(!o.held);
    assert_eq!(o.position, Vec3::new(300.0, -150.0, 80.0));
    assert_eq!(w.arm.gripper.holding, None);
    assert_eq!(w.arm.gripper.aperture, 1.0);
}

#[test]
fn open_when_open_is_a_no_op() {
    let ex = Executor::with_defaults();
    let mut w = world(scene(vec![]));
    ex.open_gripper(&mut w, None, &Deadline::never()).unwrap();
    assert_eq!(w.now(), 0.0);
}

#[test]
fn release_before_any_move_is_a_safety_abort() {
    let ex = Executor::with_defaults();
    let mut w = grasped_world(&ex);
    let err = ex.open_gripper(&mut w, None, &Deadline::never()).unwrap_err();
    assert!(matches!(err, ExecError::SafetyAbort(_)));
    assert_eq!(w.arm.gripper.holding, Some(1));
}

#[test]
fn retreat_examples() {
    let ex = Executor::with_defaults();
    let mut w = world_at(scene(vec![]), Vec3::new(400.0, 0.0, 120.0));
    ex.retreat_z(&mut w, 100.0, None, &Deadline::never()).unwrap();
    assert!((w.arm.position().z - 220.0).abs() < 1e-9);

    let mut w = world_at(scene(vec![]), Vec3::new(400.0, 0.0, 450.0));
    ex.retreat_z(&mut w, 100.0, None, &Deadline::never()).unwrap();
    assert!((w.arm.position().z - 500.0).abs() < 1e-9);

    let mut w = world_at(scene(vec![]), Vec3::new(400.0, 0.0, 450.0));
    ex.retreat_z(&mut w, 0.0, None, &Deadline::never()).unwrap();
    assert_eq!(w.now(), 0.0);
    assert!(w.trace.is_empty());
}

const PICK_BOTTLE: &str = r#"{"goal": "pick up bottle", "steps": [
    {"action": "SCAN_AREA", "params": {"label": "bottle"}},
    {"action": "APPROACH_OBJECT", "params": {"label": "bottle", "hover_mm": 40}},
    {"action": "CLOSE_GRIPPER", "params": {}},
    {"action": "RETREAT_Z", "params": {"retreat_mm": 100}}
]}"#;

#[test]
fn plan_on_clear_scene_succeeds() {
    let ex = Executor::with_defaults();
    let mut w = world(scene(vec![object(1, "bottle", Vec3::new(450.0, -100.0, 60.0))]));
    let plan = validated(&ex, PICK_BOTTLE);
    let report = ex.execute_plan(&mut w, &plan, &mut AutoApprove);
    assert_eq!(report.status, PlanStatus::Success, "{report:?}");
    assert_eq!(report.steps.len(), 4);
    assert!(report.steps.iter().all(|s| s.status == StepStatus::Success));
    assert!(report.failure.is_none());
    assert_eq!(w.arm.gripper.holding, Some(1));
    let total: f64 = report.steps.iter().map(|s| s.duration).sum();
    assert!((total - report.duration).abs() < 1e-9);
}

#[test]
fn never_visible_object_exhausts_retries_and_retreats() {
    let ex = Executor::with_defaults();
    let mut w = world(scene(vec![object(1, "bottle", Vec3::new(450.0, -100.0, 60.0))]));
    let plan = validated(
        &ex,
        r#"{"goal": "approach the cup", "steps": [{"action": "APPROACH_OBJECT", "params": {"label": "cup", "hover_mm": 40}}]}"#,
    );
    let report = ex.execute_plan(&mut w, &plan, &mut AutoApprove);
    assert_eq!(report.status, PlanStatus::Failed);
    let step = &report.steps[0];
    assert_eq!(step.status, StepStatus::Failed);
    assert_eq!(step.retries, 2);
    assert!(report.emergency_events.iter().any(|e| matches!(e, TraceEvent::EmergencyRetreat { .. })));
    let f = report.failure.as_ref().unwrap();
    assert_eq!(f.kind, FailureKind::ObjectNotObserved);
    assert_eq!(f.step_index, Some(0));
    assert_eq!(f.label.as_deref(), Some("cup"));
    assert!(f.last_observations.iter().any(|o| o.label == "bottle"));
}

struct Deny(Vec<usize>);

impl ExecutionObserver for Deny {
    fn confirm(&mut self, index: usize, step: &ActionStep, _reason: &str) -> bool {
        self.0.push(index);
        step.action != ragarm_core::planner::Action::CloseGripper
    }
}

#[test]
fn denied_confirmation_halts_before_the_step() {
    let ex = Executor::with_defaults();
    let mut w = world(scene(vec![object(1, "bottle", Vec3::new(450.0, -100.0, 60.0))]));
    let plan = validated(&ex, PICK_BOTTLE);
    let mut obs = Deny(vec![]);
    let report = ex.execute_plan(&mut w, &plan, &mut obs);
    assert_eq!(report.status, PlanStatus::OperatorAbort);
    assert_eq!(obs.0, vec![2]);
    assert_eq!(report.steps.len(), 2);
    assert_eq!(w.arm.gripper.aperture, 1.0);
    assert!(!w.trace.iter().any(|e| matches!(e, TraceEvent::Grasp { .. })));
    assert_eq!(report.failure.unwrap().kind, FailureKind::OperatorAbort);
}

#[test]
fn low_approach_asks_for_confirmation() {
    let ex = Executor::with_defaults();
    let mut w = world(scene(vec![object(1, "screwdriver", Vec3::new(450.0, -100.0, 30.0))]));
    let plan = validated(
        &ex,
        r#"{"goal": "g", "steps": [{"action": "APPROACH_OBJECT", "params": {"label": "screwdriver", "hover_mm": 30}}]}"#,
    );
    let mut obs = Deny(vec![]);
    let report = ex.execute_plan(&mut w, &plan, &mut obs);
    assert_eq!(obs.0, vec![0]);
    assert_eq!(report.status, PlanStatus::Success);
}

#[test]
fn plan_timeout_bounds_total_duration() {
    let ex = ex_with(|c| c.limits.plan_timeout = 5.0);
    let mut w = world(scene(vec![object(1, "bottle", Vec3::new(450.0, -100.0, 60.0))]));
    let plan = validated(&ex, PICK_BOTTLE);
    let report = ex.execute_plan(&mut w, &plan, &mut AutoApprove);
    assert_eq!(report.status, PlanStatus::PlanTimeout);
    assert_eq!(report.steps.last().unwrap().status, StepStatus::AbortedTimeout);
    // One controlled stop plus the emergency retreat may follow the deadline.
    let stop_grace = ex.limits().max_cart_speed / ex.limits().max_cart_accel + 0.1;
    let retreat = trapezoid_duration(150.0, 75.0, 1000.0) + 0.1;
    assert!(report.duration <= 5.0 + stop_grace + retreat, "{}", report.duration);
}

#[test]
fn execution_is_deterministic() {
    let run = || {
        let ex = Executor::with_defaults();
        let mut s = scene(vec![object(1, "bottle", Vec3::new(450.0, -100.0, 60.0))]);
        s.depth_noise_sigma = 3.0;
        let mut w = world(s);
        let report = ex.execute_plan(&mut w, &validated(&ex, PICK_BOTTLE), &mut AutoApprove);
        (serde_json::to_string(&report).unwrap(), w.trace_jsonl())
    };
    assert_eq!(run(), run());
}

#[test]
fn configs_cannot_relax_ceilings() {
    let mut cfg = ExecutorConfig::default();
    cfg.limits.max_cart_speed = 151.0;
    assert!(matches!(Executor::new(cfg), Err(ExecError::Config(_))));
    let mut cfg = ExecutorConfig::default();
    cfg.workspace.z.min = 40.0;
    assert!(matches!(Executor::new(cfg), Err(ExecError::Config(_))));
    let mut cfg = ExecutorConfig::default();
    cfg.gripper.emergency_load = 120.0;
    assert!(matches!(Executor::new(cfg), Err(ExecError::Config(_))));
    // Tightening is fine.
    let mut cfg = ExecutorConfig::default();
    cfg.limits.max_cart_speed = 100.0;
    cfg.motion.default_speed_mm_s = 80.0;
    assert!(Executor::new(cfg).is_ok());
}

#[test]
fn shipped_limits_file_matches_defaults() {
    let cfg = LimitsConfig::load(&data("config/limits.json")).unwrap();
    assert_eq!(cfg.limits, SafetyLimits::default());
    assert_eq!(cfg.workspace, WorkspaceBounds::default());
    assert!(LimitsConfig::from_json(r#"{"limits": {"max_cart_sped": 1}}"#).is_err());
}
