use std::io::Write;

use serde::Serialize;

use crate::perception::{Perception, PerceptionConfig, SimScene};
use crate::planner::{Action, ScanStrategy};
use crate::{HomTransform, JointConfig, RpyDeg, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GripperState {
    /// 0 closed, 1 fully open.
    pub aperture: f64,
    /// Device units.
    pub load: f64,
    pub holding: Option<u32>,
}

impl Default for GripperState {
    fn default() -> Self {
        Self {
            aperture: 1.0,
            load: 0.0,
            holding: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmState {
    pub tcp: HomTransform,
    /// Known only at configured joint-space poses; the arm is otherwise
    /// pose-integrated.
    pub joints: Option<JointConfig>,
    pub gripper: GripperState,
    /// Virtual seconds.
    pub time: f64,
    /// A transport move has happened since the current grasp.
    pub(crate) moved_since_grasp: bool,
    /// Resting height of the held object when it was picked.
    pub(crate) held_rest_z: f64,
}

impl ArmState {
    /// Tool pointing straight down at `xyz`.
    pub fn at(xyz: Vec3) -> Self {
        Self {
            tcp: HomTransform::from_pose(xyz, RpyDeg::new(180.0, 0.0, 0.0)),
            joints: None,
            gripper: GripperState::default(),
            time: 0.0,
            moved_since_grasp: false,
            held_rest_z: 0.0,
        }
    }

    pub fn position(&self) -> Vec3 {
        self.tcp.translation_part()
    }

    pub fn pose(&self) -> (Vec3, RpyDeg) {
        self.tcp.to_pose()
    }

    pub fn summary(&self) -> ArmSummary {
        let (xyz, rpy) = self.pose();
        ArmSummary {
            xyz_mm: xyz,
            rpy_deg: rpy,
            gripper: self.gripper.clone(),
            time: self.time,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmSummary {
    pub xyz_mm: Vec3,
    pub rpy_deg: RpyDeg,
    pub gripper: GripperState,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    /// Safety-monitor sample.
    Tick {
        t: f64,
        xyz: Vec3,
        speed: f64,
        accel: f64,
        /// TCP angular rate, deg/s.
        angular_rate: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        joint_rate: Option<f64>,
        aperture: f64,
        load: f64,
    },
    StepStart {
        t: f64,
        index: usize,
        action: Action,
    },
    StepEnd {
        t: f64,
        index: usize,
        status: String,
    },
    Retry {
        t: f64,
        index: usize,
        attempt: u32,
        reason: String,
    },
    Confirm {
        t: f64,
        index: usize,
        approved: bool,
    },
    Move {
        t: f64,
        from: Vec3,
        to: Vec3,
        duration: f64,
    },
    Capture {
        t: f64,
        tags: Vec<u32>,
    },
    ScanWaypoint {
        t: f64,
        strategy: ScanStrategy,
        index: usize,
        xyz: Vec3,
        found: bool,
    },
    ScanDone {
        t: f64,
        strategy: ScanStrategy,
        found: bool,
    },
    Grasp {
        t: f64,
        tag_id: u32,
        load: f64,
    },
    Release {
        t: f64,
        tag_id: u32,
        xyz: Vec3,
    },
    /// `crossed_at` is when the load first passed the threshold.
    EmergencyOpen {
        t: f64,
        load: f64,
        crossed_at: Option<f64>,
        reason: String,
    },
    EmergencyRetreat {
        t: f64,
        from_z: f64,
        to_z: f64,
    },
    Abort {
        t: f64,
        reason: String,
    },
}

impl TraceEvent {
    pub fn time(&self) -> f64 {
        match self {
            TraceEvent::Tick { t, .. }
            | TraceEvent::StepStart { t, .. }
            | TraceEvent::StepEnd { t, .. }
            | TraceEvent::Retry { t, .. }
            | TraceEvent::Confirm { t, .. }
            | TraceEvent::Move { t, .. }
            | TraceEvent::Capture { t, .. }
            | TraceEvent::ScanWaypoint { t, .. }
            | TraceEvent::ScanDone { t, .. }
            | TraceEvent::Grasp { t, .. }
            | TraceEvent::Release { t, .. }
            | TraceEvent::EmergencyOpen { t, .. }
            | TraceEvent::EmergencyRetreat { t, .. }
            | TraceEvent::Abort { t, .. } => *t,
        }
    }
}

/// Everything one simulated trial owns: the scene, the camera, the arm, and
/// the event log.
#[derive(Debug)]
pub struct World {
    pub scene: SimScene,
    pub perception: Perception,
    pub arm: ArmState,
    pub trace: Vec<TraceEvent>,
}

impl World {
    pub fn new(scene: SimScene, perception: PerceptionConfig, home: Vec3) -> Self {
        let seed = scene.rng_seed;
        Self {
            scene,
            perception: Perception::new(perception, seed),
            arm: ArmState::at(home),
            trace: Vec::new(),
        }
    }

    pub fn now(&self) -> f64 {
        self.arm.time
    }

    pub(crate) fn log(&mut self, e: TraceEvent) {
        self.trace.push(e);
    }

    /// Writes the trace as JSON lines.
    pub fn write_trace<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for e in &self.trace {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn trace_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_trace(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }
}
