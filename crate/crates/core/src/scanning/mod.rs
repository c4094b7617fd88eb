//! Two-phase object search: a top-down sweep at fixed height, then three
//! fixed oblique views when the sweep comes up empty.

use serde::{Deserialize, Serialize};

use crate::executor::{validate_target, Deadline, ExecError, Executor, TraceEvent, WorkspaceBounds, World};
use crate::geometry::{look_at, JointLimits};
use crate::perception::{MountPose, Observation, PerceptionConfig};
use crate::planner::{FailureContext, FailureKind, ScanAttempt, ScanMode, ScanStrategy};
use crate::{HomTransform, JointConfig, RpyDeg, Vec3};

/// Names of the oblique views, in visiting order.
pub const ARC_POSE_NAMES: [&str; 3] = ["LEFT", "CENTER", "RIGHT"];

/// A configured joint-space scan pose and the TCP pose it produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcPose {
    pub name: String,
    pub joints: JointConfig,
    pub tcp_xyz_mm: Vec3,
    pub tcp_rpy_deg: RpyDeg,
}

impl ArcPose {
    pub fn tcp(&self) -> HomTransform {
        HomTransform::from_pose(self.tcp_xyz_mm, self.tcp_rpy_deg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanParams {
    pub sweep_height: f64,
    /// Serpentine order; every waypoint sits at `sweep_height`.
    pub waypoints: Vec<Vec3>,
    pub arc_poses: Vec<ArcPose>,
    /// Settling time before each frame, s.
    pub dwell_time: f64,
    pub speed_mm_s: f64,
    pub joint_limits: JointLimits,
}

impl Default for ScanParams {
    fn default() -> Self {
        let sweep_height = 350.0;
        let mut waypoints = Vec::new();
        for (row, y) in [-200.0, 0.0, 200.0].into_iter().enumerate() {
            let xs = [250.0, 400.0, 550.0];
            let ordered: Vec<f64> = if row % 2 == 0 { xs.to_vec() } else { xs.into_iter().rev().collect() };
            waypoints.extend(ordered.into_iter().map(|x| Vec3::new(x, y, sweep_height)));
        }
        Self {
            sweep_height,
            waypoints,
            arc_poses: default_arc_poses(&PerceptionConfig::default().cam_to_tcp),
            dwell_time: 0.3,
            speed_mm_s: 100.0,
            joint_limits: JointLimits::default(),
        }
    }
}

/// Oblique views of the workspace centre from the left, front and right.
/// The camera orbits the point (400, 0) at yaw −45°, 0°, +45° and looks at
/// (400, 0, 40); the stored TCP pose follows from the wrist mount, and the
/// camera height is chosen so the TCP sits at z = 300.
pub fn default_arc_poses(mount: &MountPose) -> Vec<ArcPose> {
    const CENTRE: (f64, f64) = (400.0, 0.0);
    const RADIUS: f64 = 250.0;
    const TCP_Z: f64 = 300.0;
    let look = Vec3::new(CENTRE.0, CENTRE.1, 40.0);
    let tcp_from_cam = mount.transform().inverse();
    let joints = [
        [30.0, -25.0, -70.0, 0.0, 60.0, -45.0],
        [0.0, -30.0, -65.0, 0.0, 60.0, 0.0],
        [-30.0, -25.0, -70.0, 0.0, 60.0, 45.0],
    ];
    // Positive yaw puts the camera on the +y side, which is the arm's left.
    [45.0_f64, 0.0, -45.0]
        .into_iter()
        .zip(ARC_POSE_NAMES)
        .zip(joints)
        .map(|((yaw, name), j)| {
            let (s, c) = yaw.to_radians().sin_cos();
            let xy = (CENTRE.0 - RADIUS * c, CENTRE.1 + RADIUS * s);
            // The TCP height depends on the camera height through the view
            // direction; a few fixed-point steps settle it.
            let mut eye_z = TCP_Z + 80.0;
            let mut tcp = HomTransform::identity();
            for _ in 0..50 {
                let cam = look_at(Vec3::new(xy.0, xy.1, eye_z), look, Vec3::unit_z()).expect("eye is off the look axis");
                tcp = cam.compose(&tcp_from_cam);
                eye_z += TCP_Z - tcp.translation_part().z;
            }
            let (xyz, rpy) = tcp.to_pose();
            ArcPose {
                name: name.to_string(),
                joints: JointConfig::new(j.to_vec(), &JointLimits::default()).expect("default arc joints are within limits"),
                tcp_xyz_mm: xyz,
                tcp_rpy_deg: rpy,
            }
        })
        .collect()
}

impl ScanParams {
    pub fn validate(&self, bounds: &WorkspaceBounds) -> Result<(), ExecError> {
        let cfg = |m: String| ExecError::Config(format!("scan: {m}"));
        if self.waypoints.is_empty() {
            return Err(cfg("no sweep waypoints".into()));
        }
        validate_target(Vec3::new(bounds.x.min, bounds.y.min, self.sweep_height), bounds).map_err(|e| cfg(format!("sweep height: {e}")))?;
        for (i, w) in self.waypoints.iter().enumerate() {
            validate_target(*w, bounds).map_err(|e| cfg(format!("waypoint {i}: {e}")))?;
            if (w.z - self.sweep_height).abs() > 1e-9 {
                return Err(cfg(format!("waypoint {i} is not at the sweep height")));
            }
        }
        let names: Vec<&str> = self.arc_poses.iter().map(|p| p.name.as_str()).collect();
        if names != ARC_POSE_NAMES {
            return Err(cfg(format!("arc poses must be exactly {ARC_POSE_NAMES:?}, got {names:?}")));
        }
        for p in &self.arc_poses {
            p.joints.validate(&self.joint_limits).map_err(|e| cfg(format!("{} pose: {e}", p.name)))?;
            validate_target(p.tcp_xyz_mm, bounds).map_err(|e| cfg(format!("{} pose: {e}", p.name)))?;
        }
        if !(self.dwell_time >= 0.0 && self.speed_mm_s > 0.0) {
            return Err(cfg("dwell_time must be non-negative and speed positive".into()));
        }
        Ok(())
    }

    /// Sweep waypoints moved to `height`.
    pub fn waypoints_at(&self, height: f64) -> Vec<Vec3> {
        self.waypoints.iter().map(|w| Vec3::new(w.x, w.y, height)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanOutcome {
    /// Strategy of the last phase that ran.
    pub strategy: ScanStrategy,
    pub target: Option<String>,
    pub target_found: bool,
    /// Every observation from every frame, in capture order.
    pub detections: Vec<Observation>,
    /// TCP positions at which frames were taken.
    pub visited: Vec<Vec3>,
    /// Index into `visited` of the frame that found the target.
    pub found_at: Option<usize>,
    pub attempted: Vec<ScanAttempt>,
    /// Set when a motion error cut the scan short.
    pub aborted: Option<String>,
}

impl ScanOutcome {
    fn new(strategy: ScanStrategy, target: Option<&str>) -> Self {
        Self {
            strategy,
            target: target.map(str::to_string),
            target_found: false,
            detections: Vec::new(),
            visited: Vec::new(),
            found_at: None,
            attempted: Vec::new(),
            aborted: None,
        }
    }

    /// Distinct tag ids seen, ascending.
    pub fn tags_seen(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.detections.iter().map(|o| o.tag_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

enum Waypoint<'a> {
    Sweep(Vec3),
    Arc(&'a ArcPose),
}

impl Executor {
    fn goto_arc_pose(&self, world: &mut World, pose: &ArcPose, deadline: &Deadline) -> Result<(), ExecError> {
        let goal = pose.tcp();
        validate_target(pose.tcp_xyz_mm, &self.bounds)?;
        if self.scan.speed_mm_s > self.limits.max_cart_speed {
            return Err(ExecError::SpeedCapExceeded {
                requested: self.scan.speed_mm_s,
                max: self.limits.max_cart_speed,
            });
        }
        let d = world.arm.position().distance(pose.tcp_xyz_mm);
        let n = (d / self.limits.max_single_move).ceil().max(1.0);
        if n > 1.0 {
            // Cartesian legs to within one move of the pose, then the joint move.
            let (p, r) = world.arm.tcp.interpolate(&goal, (n - 1.0) / n).to_pose();
            self.travel(world, p, Some(r), Some(self.scan.speed_mm_s), deadline)?;
        }
        self.run_motion(world, goal, Some(&pose.joints), self.scan.speed_mm_s, deadline)
    }

    fn run_strategy(
        &self,
        world: &mut World,
        strategy: ScanStrategy,
        waypoints: &[Waypoint<'_>],
        target: Option<&str>,
        deadline: &Deadline,
        out: &mut ScanOutcome,
    ) -> Result<bool, ExecError> {
        out.strategy = strategy;
        for (index, wp) in waypoints.iter().enumerate() {
            match wp {
                Waypoint::Sweep(p) => self.travel(world, *p, Some(RpyDeg::new(180.0, 0.0, 0.0)), Some(self.scan.speed_mm_s), deadline)?,
                Waypoint::Arc(pose) => self.goto_arc_pose(world, pose, deadline)?,
            }
            self.idle(world, self.scan.dwell_time, deadline)?;
            let frame = self.capture(world)?;
            let found = target.is_some_and(|l| frame.iter().any(|o| o.label == l));
            let xyz = world.arm.position();
            world.log(TraceEvent::ScanWaypoint {
                t: world.arm.time,
                strategy,
                index,
                xyz,
                found,
            });
            out.visited.push(xyz);
            out.detections.extend(frame);
            if found {
                out.target_found = true;
                out.found_at = Some(out.visited.len() - 1);
                break;
            }
        }
        world.log(TraceEvent::ScanDone {
            t: world.arm.time,
            strategy,
            found: out.target_found,
        });
        Ok(out.target_found)
    }

    fn run_phases(
        &self,
        world: &mut World,
        target: Option<&str>,
        mode: ScanMode,
        height: Option<f64>,
        deadline: &Deadline,
    ) -> (ScanOutcome, Result<(), ExecError>) {
        let height = height.unwrap_or(self.scan.sweep_height);
        let phases: &[ScanStrategy] = match (mode, target) {
            (ScanMode::Horizontal, _) | (ScanMode::Auto, None) => &[ScanStrategy::Horizontal],
            (ScanMode::Arc, _) => &[ScanStrategy::Arc],
            (ScanMode::Auto, Some(_)) => &[ScanStrategy::Horizontal, ScanStrategy::Arc],
        };
        let mut out = ScanOutcome::new(phases[0], target);
        for &strategy in phases {
            let waypoints: Vec<Waypoint> = match strategy {
                ScanStrategy::Horizontal => self.scan.waypoints_at(height).into_iter().map(Waypoint::Sweep).collect(),
                ScanStrategy::Arc => self.scan.arc_poses.iter().map(Waypoint::Arc).collect(),
            };
            match self.run_strategy(world, strategy, &waypoints, target, deadline, &mut out) {
                Ok(true) => return (out, Ok(())),
                Ok(false) => out.attempted.push(match strategy {
                    ScanStrategy::Horizontal => ScanAttempt::horizontal(height),
                    ScanStrategy::Arc => ScanAttempt::arc(),
                }),
                Err(e) => {
                    out.aborted = Some(e.to_string());
                    return (out, Err(e));
                }
            }
        }
        (out, Ok(()))
    }

    /// Top-down sweep over the configured waypoints, stopping at the first
    /// frame that contains `target`.
    pub fn horizontal_scan(&self, world: &mut World, target: Option<&str>) -> ScanOutcome {
        self.run_phases(world, target, ScanMode::Horizontal, None, &Deadline::never()).0
    }

    /// Visits LEFT, CENTER and RIGHT in joint space, stopping early on
    /// `target`.
    pub fn arc_scan(&self, world: &mut World, target: Option<&str>) -> ScanOutcome {
        self.run_phases(world, target, ScanMode::Arc, None, &Deadline::never()).0
    }

    /// Sweep, then arc. A miss comes back as a failure naming both.
    pub fn scan_until_found(&self, world: &mut World, target: &str) -> Result<ScanOutcome, FailureContext> {
        self.scan_area(world, Some(target), Some(ScanMode::Auto), None, &Deadline::never())
            .map_err(|e| {
                let kind = match e {
                    ExecError::ObjectNotFound { .. } => FailureKind::ObjectNotFound,
                    ExecError::TimeoutAbort { .. } => FailureKind::TimeoutAbort,
                    _ => FailureKind::SafetyAbort,
                };
                let mut fc = FailureContext::new(kind, e.to_string());
                fc.action = Some(crate::planner::Action::ScanArea);
                fc.label = Some(target.to_string());
                if let ExecError::ObjectNotFound { attempted, .. } = e {
                    fc.attempted = attempted;
                }
                fc.last_observations = world.perception.store().snapshot();
                fc
            })
    }

    /// SCAN_AREA step body. With a label, not finding it is an error.
    pub fn scan_area(
        &self,
        world: &mut World,
        label: Option<&str>,
        mode: Option<ScanMode>,
        height: Option<f64>,
        deadline: &Deadline,
    ) -> Result<ScanOutcome, ExecError> {
        let (out, res) = self.run_phases(world, label, mode.unwrap_or(ScanMode::Auto), height, deadline);
        res?;
        match label {
            Some(l) if !out.target_found => Err(ExecError::ObjectNotFound {
                label: l.to_string(),
                attempted: out.attempted,
            }),
            _ => Ok(out),
        }
    }
}
