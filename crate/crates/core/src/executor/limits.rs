use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExecError;
use crate::Vec3;

/// Hard ceilings. A configuration may tighten these but never relax them.
pub mod ceiling {
    pub const MAX_CART_SPEED: f64 = 150.0;
    pub const MAX_JOINT_SPEED: f64 = 30.0;
    pub const MAX_CART_ACCEL: f64 = 1000.0;
    pub const GRIPPER_MAX_SPEED: f64 = 300.0;
    pub const GRIPPER_MAX_FORCE: f64 = 100.0;
    pub const SAFETY_CHECK_INTERVAL: f64 = 0.1;
    pub const MAX_SINGLE_MOVE: f64 = 400.0;
    pub const X: (f64, f64) = (150.0, 650.0);
    pub const Y: (f64, f64) = (-300.0, 300.0);
    pub const Z: (f64, f64) = (50.0, 500.0);
}

/// Relative slack on speed and acceleration checks, absorbing float noise in
/// the profile evaluation.
pub const RATE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SafetyLimits {
    /// mm/s
    pub max_cart_speed: f64,
    /// deg/s
    pub max_joint_speed: f64,
    /// mm/s²
    pub max_cart_accel: f64,
    /// Device units.
    pub gripper_max_speed: f64,
    /// Device units.
    pub gripper_max_force: f64,
    /// s
    pub safety_check_interval: f64,
    /// mm
    pub max_single_move: f64,
    /// s
    pub step_timeout_default: f64,
    /// s
    pub plan_timeout: f64,
    pub max_retries_per_step: u32,
}

impl Default for SafetyLimits {
    fn default() -> Self {
        Self {
            max_cart_speed: ceiling::MAX_CART_SPEED,
            max_joint_speed: ceiling::MAX_JOINT_SPEED,
            max_cart_accel: ceiling::MAX_CART_ACCEL,
            gripper_max_speed: ceiling::GRIPPER_MAX_SPEED,
            gripper_max_force: ceiling::GRIPPER_MAX_FORCE,
            safety_check_interval: ceiling::SAFETY_CHECK_INTERVAL,
            max_single_move: ceiling::MAX_SINGLE_MOVE,
            step_timeout_default: 10.0,
            plan_timeout: 120.0,
            max_retries_per_step: 2,
        }
    }
}

impl SafetyLimits {
    pub fn validate(&self) -> Result<(), ExecError> {
        let capped = [
            ("max_cart_speed", self.max_cart_speed, ceiling::MAX_CART_SPEED),
            ("max_joint_speed", self.max_joint_speed, ceiling::MAX_JOINT_SPEED),
            ("max_cart_accel", self.max_cart_accel, ceiling::MAX_CART_ACCEL),
            ("gripper_max_speed", self.gripper_max_speed, ceiling::GRIPPER_MAX_SPEED),
            ("gripper_max_force", self.gripper_max_force, ceiling::GRIPPER_MAX_FORCE),
            ("safety_check_interval", self.safety_check_interval, ceiling::SAFETY_CHECK_INTERVAL),
            ("max_single_move", self.max_single_move, ceiling::MAX_SINGLE_MOVE),
        ];
        for (name, value, max) in capped {
            if !(value > 0.0 && value <= max) {
                return Err(ExecError::Config(format!("{name} = {value} must lie in (0, {max}]")));
            }
        }
        for (name, value) in [("step_timeout_default", self.step_timeout_default), ("plan_timeout", self.plan_timeout)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ExecError::Config(format!("{name} = {value} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisRange {
    pub min: f64,
    pub max: f64,
}

impl AxisRange {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.min, self.max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

/// Axis-aligned reachable box, mm, inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkspaceBounds {
    pub x: AxisRange,
    pub y: AxisRange,
    pub z: AxisRange,
}

impl Default for WorkspaceBounds {
    fn default() -> Self {
        Self {
            x: AxisRange::new(ceiling::X.0, ceiling::X.1),
            y: AxisRange::new(ceiling::Y.0, ceiling::Y.1),
            z: AxisRange::new(ceiling::Z.0, ceiling::Z.1),
        }
    }
}

impl WorkspaceBounds {
    pub fn axes(&self) -> [(Axis, AxisRange); 3] {
        [(Axis::X, self.x), (Axis::Y, self.y), (Axis::Z, self.z)]
    }

    pub fn validate(&self) -> Result<(), ExecError> {
        let hard = WorkspaceBounds::default();
        for ((axis, r), (_, h)) in self.axes().into_iter().zip(hard.axes()) {
            if !(r.min < r.max && r.min >= h.min && r.max <= h.max) {
                return Err(ExecError::Config(format!(
                    "workspace {axis} range [{}, {}] must be non-empty and inside [{}, {}]",
                    r.min, r.max, h.min, h.max
                )));
            }
        }
        Ok(())
    }

    /// First violated axis, if any.
    pub fn violation(&self, p: Vec3) -> Option<(Axis, f64)> {
        self.axes()
            .into_iter()
            .zip(p.to_array())
            .find(|((_, r), v)| !r.contains(*v))
            .map(|((a, _), v)| (a, v))
    }

    pub fn contains(&self, p: Vec3) -> bool {
        self.violation(p).is_none()
    }
}

/// `ok` iff `p` lies inside every axis range, bounds inclusive.
pub fn validate_target(p: Vec3, bounds: &WorkspaceBounds) -> Result<(), ExecError> {
    if !p.is_finite() {
        return Err(ExecError::NonFiniteTarget);
    }
    match bounds.violation(p) {
        None => Ok(()),
        Some((axis, value)) => Err(ExecError::OutOfWorkspace { axis, value }),
    }
}

/// Limits and bounds as stored in a config file.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct LimitsConfig {
    pub limits: SafetyLimits,
    pub workspace: WorkspaceBounds,
}

impl LimitsConfig {
    pub fn from_json(text: &str) -> Result<Self, ExecError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ExecError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ExecError> {
        let text = std::fs::read_to_string(path).map_err(|e| ExecError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ExecError> {
        self.limits.validate()?;
        self.workspace.validate()
    }
}
