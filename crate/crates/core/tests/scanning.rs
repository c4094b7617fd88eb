mod common;

use common::*;
use ragarm_core::executor::*;
use ragarm_core::perception::SimScene;
use ragarm_core::planner::{FailureKind, ScanAttempt, ScanStrategy};
use ragarm_core::scanning::{ScanParams, ARC_POSE_NAMES};
use ragarm_core::Vec3;

fn occlusion_scene() -> SimScene {
    SimScene::load(&data("scenes/occlusion.json")).unwrap()
}

fn waypoint_events(w: &World) -> Vec<(ScanStrategy, usize, bool)> {
    w.trace
        .iter()
        .filter_map(|e| match e {
            TraceEvent::ScanWaypoint { strategy, index, found, .. } => Some((*strategy, *index, *found)),
            _ => None,
        })
        .collect()
}

fn assert_trace_in_bounds(w: &World, ex: &Executor) {
    for e in &w.trace {
        if let TraceEvent::Tick {
            xyz,
            joint_rate,
            angular_rate,
            ..
        } = e
        {
            assert!(ex.bounds().contains(*xyz), "{xyz}");
            assert!(joint_rate.unwrap_or(0.0) <= ex.limits().max_joint_speed * (1.0 + 1e-9));
            assert!(*angular_rate <= ex.limits().max_joint_speed * (1.0 + 1e-9));
        }
    }
}

#[test]
fn default_params_are_valid() {
    let p = ScanParams::default();
    p.validate(&WorkspaceBounds::default()).unwrap();
    assert_eq!(p.waypoints.len(), 9);
    let names: Vec<&str> = p.arc_poses.iter().map(|a| a.name.as_str()).collect();
    assert_eq!(names, ARC_POSE_NAMES);
    for a in &p.arc_poses {
        assert!((a.tcp_xyz_mm.z - 300.0).abs() < 1e-6);
    }
}

#[test]
fn sweep_stops_at_first_sighting() {
    let ex = Executor::with_defaults();
    let mut w = world(scene(vec![object(1, "bottle", Vec3::new(250.0, -200.0, 60.0))]));
    let out = ex.horizontal_scan(&mut w, Some("bottle"));
    assert!(out.target_found);
    assert_eq!(out.strategy, ScanStrategy::Horizontal);
    assert_eq!(out.visited.len(), 1);
    assert_eq!(out.found_at, Some(0));
    assert_eq!(waypoint_events(&w), vec![(ScanStrategy::Horizontal, 0, true)]);
}

#[test]
fn empty_scene_visits_every_waypoint() {
    let ex = Executor::with_defaults();
    let mut w = world(scene(vec![]));
    let out = ex.horizontal_scan(&mut w, Some("bottle"));
    assert!(!out.target_found);
    assert_eq!(out.visited.len(), 9);
    for (v, want) in out.visited.iter().zip(&ex.scan_params().waypoints) {
        assert!(v.distance(*want) < 1e-9);
    }
    assert_trace_in_bounds(&w, &ex);
}

#[test]
fn box_over_object_defeats_the_sweep() {
    let ex = Executor::with_defaults();
    let mut w = world(occlusion_scene());
    let out = ex.horizontal_scan(&mut w, Some("screwdriver"));
    assert!(!out.target_found);
    assert_eq!(out.visited.len(), 9);
    assert!(out.tags_seen().contains(&2), "the tray stays visible");
}

#[test]
fn left_view_sees_under_the_box() {
    let ex = Executor::with_defaults();
    let mut w = world(occlusion_scene());
    let out = ex.arc_scan(&mut w, Some("screwdriver"));
    assert!(out.target_found);
    assert_eq!(out.found_at, Some(0));
    assert_eq!(out.visited.len(), 1);
    assert_trace_in_bounds(&w, &ex);
}

#[test]
fn only_the_left_view_sees_the_screwdriver() {
    // Oracle: render each arc pose independently.
    let ex = Executor::with_defaults();
    let seen: Vec<bool> = ex
        .scan_params()
        .arc_poses
        .iter()
        .map(|p| {
            let mut w = world_at(occlusion_scene(), p.tcp_xyz_mm);
            w.arm.tcp = p.tcp();
            ex.capture(&mut w).unwrap().iter().any(|o| o.label == "screwdriver")
        })
        .collect();
    assert_eq!(seen, vec![true, false, false]);
}

#[test]
fn empty_arc_visits_all_three() {
    let ex = Executor::with_defaults();
    let mut w = world(scene(vec![]));
    let out = ex.arc_scan(&mut w, Some("bottle"));
    assert!(!out.target_found);
    assert_eq!(out.visited.len(), 3);
    let ends: Vec<Vec3> = ex.scan_params().arc_poses.iter().map(|p| p.tcp_xyz_mm).collect();
    for (v, want) in out.visited.iter().zip(&ends) {
        assert!(v.distance(*want) < 1e-9);
    }
    assert_trace_in_bounds(&w, &ex);
}

#[test]
fn arc_moves_are_joint_space() {
    let ex = Executor::with_defaults();
    let mut w = world(scene(vec![]));
    ex.arc_scan(&mut w, None);
    assert!(w
        .trace
        .iter()
        .any(|e| matches!(e, TraceEvent::Tick { joint_rate: Some(r), .. } if *r > 0.0)));
    assert_eq!(w.arm.joints.as_ref(), Some(&ex.scan_params().arc_poses[2].joints));
}

#[test]
fn arc_pose_outside_joint_limits_is_a_config_error() {
    let mut cfg = ExecutorConfig::default();
    let mut json = serde_json::to_value(&cfg.scan.arc_poses[0]).unwrap();
    json["joints"][1] = serde_json::json!(170.0);
    cfg.scan.arc_poses[0] = serde_json::from_value(json).unwrap();
    assert!(matches!(Executor::new(cfg), Err(ExecError::Config(m)) if m.contains("LEFT")));

    let mut cfg = ExecutorConfig::default();
    cfg.scan.arc_poses.swap(0, 2);
    assert!(Executor::new(cfg).is_err());
}

#[test]
fn waypoint_outside_workspace_is_a_config_error() {
    let mut cfg = ExecutorConfig::default();
    cfg.scan.waypoints[0] = Vec3::new(700.0, 0.0, 350.0);
    assert!(Executor::new(cfg).is_err());
}

#[test]
fn until_found_prefers_the_sweep() {
    let ex = Executor::with_defaults();
    let mut w = world(scene(vec![object(1, "bottle", Vec3::new(400.0, 0.0, 60.0))]));
    let out = ex.scan_until_found(&mut w, "bottle").unwrap();
    assert_eq!(out.strategy, ScanStrategy::Horizontal);
    assert!(!waypoint_events(&w).iter().any(|e| e.0 == ScanStrategy::Arc));
}

#[test]
fn until_found_falls_back_to_the_arc() {
    let ex = Executor::with_defaults();
    let mut w = world(occlusion_scene());
    let out = ex.scan_until_found(&mut w, "screwdriver").unwrap();
    assert_eq!(out.strategy, ScanStrategy::Arc);
    assert_eq!(out.attempted, vec![ScanAttempt::horizontal(350.0)]);
    let events = waypoint_events(&w);
    let first_arc = events.iter().position(|e| e.0 == ScanStrategy::Arc).unwrap();
    assert_eq!(first_arc, 9);
    assert!(events[..first_arc].iter().all(|e| e.0 == ScanStrategy::Horizontal && !e.2));
    assert_eq!(events.len(), 10, "no waypoint after the find");
}

#[test]
fn until_found_reports_both_strategies_on_a_miss() {
    let ex = Executor::with_defaults();
    let mut w = world(scene(vec![object(1, "bottle", Vec3::new(400.0, 0.0, 60.0))]));
    let fc = ex.scan_until_found(&mut w, "screwdriver").unwrap_err();
    assert_eq!(fc.kind, FailureKind::ObjectNotFound);
    assert_eq!(fc.attempted_strategies(), vec![ScanStrategy::Horizontal, ScanStrategy::Arc]);
    assert_eq!(fc.label.as_deref(), Some("screwdriver"));
}

#[test]
fn scans_are_deterministic() {
    let run = || {
        let ex = Executor::with_defaults();
        let mut s = occlusion_scene();
        s.depth_noise_sigma = 4.0;
        let mut w = world(s);
        let out = ex.scan_until_found(&mut w, "screwdriver").unwrap();
        (serde_json::to_string(&out).unwrap(), w.trace_jsonl())
    };
    assert_eq!(run(), run());
}

#[test]
fn sweep_height_override_moves_every_waypoint() {
    let ex = Executor::with_defaults();
    let mut w = world(scene(vec![]));
    let err = ex
        .scan_area(
            &mut w,
            Some("cup"),
            Some(ragarm_core::planner::ScanMode::Horizontal),
            Some(250.0),
            &Deadline::never(),
        )
        .unwrap_err();
    assert!(matches!(&err, ExecError::ObjectNotFound { attempted, .. } if attempted == &vec![ScanAttempt::horizontal(250.0)]));
    let zs: Vec<f64> = w
        .trace
        .iter()
        .filter_map(|e| match e {
            TraceEvent::ScanWaypoint { xyz, .. } => Some(xyz.z),
            _ => None,
        })
        .collect();
    assert_eq!(zs, vec![250.0; 9]);
}

#[test]
fn scan_respects_its_deadline() {
    let ex = Executor::with_defaults();
    let mut w = world(scene(vec![]));
    let err = ex.scan_area(&mut w, Some("cup"), None, None, &Deadline::step(0.0, 5.0)).unwrap_err();
    assert!(matches!(err, ExecError::TimeoutAbort { .. }));
}
