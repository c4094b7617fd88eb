//! Safety-gated execution on a simulated, pose-integrated arm.
//!
//! All time is virtual. Every motion is sampled by a monitor at
//! `safety_check_interval`, and each sample is appended to the world trace.

mod actions;
mod gripper;
mod limits;
mod motion;
mod run;
mod state;

pub use gripper::GripperConfig;
pub use limits::{ceiling, validate_target, Axis, AxisRange, LimitsConfig, SafetyLimits, WorkspaceBounds, RATE_SLACK};
pub use motion::{trapezoid_duration, Profile, TickSample};
pub use run::{AutoApprove, ExecutionObserver, ExecutionReport, PlanStatus, StepResult, StepStatus};
pub use state::{ArmState, ArmSummary, GripperState, TraceEvent, World};

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::GeometryError;
use crate::perception::PerceptionError;
use crate::planner::ScanAttempt;
use crate::scanning::ScanParams;

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("config: {0}")]
    Config(String),
    #[error("target is not finite")]
    NonFiniteTarget,
    #[error("target {axis} = {value} outside the workspace")]
    OutOfWorkspace { axis: Axis, value: f64 },
    #[error("move of {distance:.1} mm exceeds the {max} mm single-move limit")]
    MoveTooLong { distance: f64, max: f64 },
    #[error("requested speed {requested} mm/s exceeds the {max} mm/s cap")]
    SpeedCapExceeded { requested: f64, max: f64 },
    #[error("gripper {what} {requested} exceeds the limit {max}")]
    GripperLimit { what: &'static str, requested: f64, max: f64 },
    #[error("safety abort: {0}")]
    SafetyAbort(String),
    #[error("step timed out after {timeout} s (t = {at:.2})")]
    TimeoutAbort { timeout: f64, at: f64 },
    #[error("plan timed out after {timeout} s (t = {at:.2})")]
    PlanTimeout { timeout: f64, at: f64 },
    #[error("no observation of '{0}'")]
    ObjectNotObserved(String),
    #[error("'{label}' not found after {} scan strategies", attempted.len())]
    ObjectNotFound { label: String, attempted: Vec<ScanAttempt> },
    #[error("gripper closed without a secure grasp")]
    GraspFailure,
    #[error("emergency open at load {load:.1}: {reason}")]
    EmergencyOpen { load: f64, reason: String },
    #[error("operator declined step {0}")]
    OperatorAbort(usize),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Absolute virtual time by which the current step must finish.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deadline {
    pub at: f64,
    pub timeout: f64,
    /// Set when the plan-level timer is the binding one.
    pub is_plan: bool,
}

impl Deadline {
    pub fn never() -> Self {
        Self {
            at: f64::INFINITY,
            timeout: f64::INFINITY,
            is_plan: false,
        }
    }

    pub fn step(now: f64, timeout: f64) -> Self {
        Self {
            at: now + timeout,
            timeout,
            is_plan: false,
        }
    }

    /// The earlier of a step timer and the plan timer.
    pub fn min_with_plan(self, plan_at: f64, plan_timeout: f64) -> Self {
        if plan_at < self.at {
            Self {
                at: plan_at,
                timeout: plan_timeout,
                is_plan: true,
            }
        } else {
            self
        }
    }

    pub fn error(&self, t: f64) -> ExecError {
        if self.is_plan {
            ExecError::PlanTimeout {
                timeout: self.timeout,
                at: t,
            }
        } else {
            ExecError::TimeoutAbort {
                timeout: self.timeout,
                at: t,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotionConfig {
    /// Used when a step gives no speed.
    pub default_speed_mm_s: f64,
    pub emergency_retreat_mm: f64,
    pub emergency_speed_mm_s: f64,
    /// Scans visit many waypoints, so they get a longer default timer.
    pub scan_timeout_default: f64,
    /// Profile acceleration for rotational spans, deg/s².
    pub angular_accel_deg_s2: f64,
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self {
            default_speed_mm_s: 100.0,
            emergency_retreat_mm: 150.0,
            emergency_speed_mm_s: 75.0,
            scan_timeout_default: 60.0,
            angular_accel_deg_s2: 120.0,
        }
    }
}

/// Full executor configuration as stored on disk.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ExecutorConfig {
    pub limits: SafetyLimits,
    pub workspace: WorkspaceBounds,
    pub gripper: GripperConfig,
    pub motion: MotionConfig,
    pub scan: ScanParams,
}

impl ExecutorConfig {
    pub fn from_json(text: &str) -> Result<Self, ExecError> {
        serde_json::from_str(text).map_err(|e| ExecError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ExecError> {
        let text = std::fs::read_to_string(path).map_err(|e| ExecError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

impl From<LimitsConfig> for ExecutorConfig {
    fn from(c: LimitsConfig) -> Self {
        Self {
            limits: c.limits,
            workspace: c.workspace,
            ..Self::default()
        }
    }
}

/// Stateless action runner. All mutable state lives in [`World`].
#[derive(Debug, Clone, PartialEq)]
pub struct Executor {
    pub(crate) limits: SafetyLimits,
    pub(crate) bounds: WorkspaceBounds,
    pub(crate) gripper: GripperConfig,
    pub(crate) motion: MotionConfig,
    pub(crate) scan: ScanParams,
}

impl Executor {
    pub fn new(config: ExecutorConfig) -> Result<Self, ExecError> {
        let ExecutorConfig {
            limits,
            workspace,
            gripper,
            motion,
            scan,
        } = config;
        limits.validate()?;
        workspace.validate()?;
        gripper.validate(limits.gripper_max_force)?;
        let m = &motion;
        if !(m.default_speed_mm_s > 0.0 && m.default_speed_mm_s <= limits.max_cart_speed) {
            return Err(ExecError::Config(format!(
                "default_speed_mm_s must lie in (0, {}]",
                limits.max_cart_speed
            )));
        }
        if !(m.emergency_speed_mm_s > 0.0 && m.emergency_speed_mm_s <= limits.max_cart_speed) {
            return Err(ExecError::Config(format!(
                "emergency_speed_mm_s must lie in (0, {}]",
                limits.max_cart_speed
            )));
        }
        if !(m.emergency_retreat_mm >= 0.0 && m.scan_timeout_default > 0.0 && m.angular_accel_deg_s2 > 0.0) {
            return Err(ExecError::Config("motion parameters must be positive".into()));
        }
        scan.validate(&workspace)?;
        Ok(Self {
            limits,
            bounds: workspace,
            gripper,
            motion,
            scan,
        })
    }

    pub fn with_defaults() -> Self {
        Self::new(ExecutorConfig::default()).expect("default configuration is valid")
    }

    pub fn limits(&self) -> &SafetyLimits {
        &self.limits
    }

    pub fn bounds(&self) -> &WorkspaceBounds {
        &self.bounds
    }

    pub fn gripper_config(&self) -> &GripperConfig {
        &self.gripper
    }

    pub fn motion_config(&self) -> &MotionConfig {
        &self.motion
    }

    pub fn scan_params(&self) -> &ScanParams {
        &self.scan
    }
}
