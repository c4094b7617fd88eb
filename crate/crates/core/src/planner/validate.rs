use serde::{Deserialize, Serialize};

use super::{Action, Issue, IssueKind, Param, Plan, PlanError};
use crate::executor::{SafetyLimits, WorkspaceBounds};

/// Steps below this TCP height count as high risk.
pub const HIGH_RISK_Z_MM: f64 = 80.0;
pub const DEFAULT_MAX_PLAN_LENGTH: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }
}

/// Per-parameter bounds. Speeds, gripper commands and scan heights are
/// bounded by the safety limits and workspace instead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParamBounds {
    pub hover_mm: Range,
    pub timeout_sec: Range,
    pub scan_timeout_sec: Range,
    pub retreat_mm: Range,
    pub max_plan_length: usize,
}

impl Default for ParamBounds {
    fn default() -> Self {
        Self {
            hover_mm: Range::new(10.0, 200.0),
            timeout_sec: Range::new(1.0, 30.0),
            scan_timeout_sec: Range::new(1.0, 120.0),
            retreat_mm: Range::new(10.0, 300.0),
            max_plan_length: DEFAULT_MAX_PLAN_LENGTH,
        }
    }
}

impl ParamBounds {
    /// Inclusive range for a numeric parameter of `action`. Speed ranges are
    /// open at zero, which the caller handles.
    pub fn range(&self, action: Action, p: Param, limits: &SafetyLimits, bounds: &WorkspaceBounds) -> Option<Range> {
        Some(match p {
            Param::HoverMm => self.hover_mm,
            Param::TimeoutSec if action == Action::ScanArea => self.scan_timeout_sec,
            Param::TimeoutSec => self.timeout_sec,
            Param::RetreatMm => self.retreat_mm,
            Param::SpeedMmS => Range::new(0.0, limits.max_cart_speed),
            Param::SpeedUnits => Range::new(0.0, limits.gripper_max_speed),
            Param::ForceUnits => Range::new(0.0, limits.gripper_max_force),
            Param::HeightMm => Range::new(bounds.z.min, bounds.z.max),
            _ => return None,
        })
    }
}

fn open_at_zero(p: Param) -> bool {
    matches!(p, Param::SpeedMmS | Param::SpeedUnits | Param::ForceUnits)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct StepTags {
    /// Re-read perception at step start.
    pub perception_sync: bool,
    /// Ask the operator before running.
    pub high_risk: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedPlan {
    pub plan: Plan,
    pub tags: Vec<StepTags>,
}

impl ValidatedPlan {
    /// The plan contains a gripper close and so needs operator confirmation
    /// when a human is in the loop.
    pub fn high_risk(&self) -> bool {
        self.tags.iter().any(|t| t.high_risk)
    }
}

/// Checks every numeric parameter against its bound, every MOVE_TO_POSE
/// target against the workspace, plan length, and gripper sequencing. All
/// problems are reported together.
pub fn validate_plan(plan: &Plan, limits: &SafetyLimits, bounds: &WorkspaceBounds, table: &ParamBounds) -> Result<ValidatedPlan, PlanError> {
    let mut issues = Vec::new();
    if plan.goal.trim().is_empty() {
        issues.push(Issue::plan(IssueKind::Schema("goal is empty".into())));
    }
    if plan.steps.is_empty() {
        issues.push(Issue::plan(IssueKind::Schema("steps is empty".into())));
    }
    if plan.steps.len() > table.max_plan_length {
        issues.push(Issue::plan(IssueKind::PlanTooLong {
            len: plan.steps.len(),
            max: table.max_plan_length,
        }));
    }

    let mut tags = Vec::with_capacity(plan.steps.len());
    // Static gripper model: closed on an object, and whether a transport
    // move has happened since.
    let mut grasped = false;
    let mut moved_since_grasp = false;
    for (i, step) in plan.steps.iter().enumerate() {
        let (required, optional) = step.action.params();
        for p in required {
            if !step.params.is_set(*p) {
                issues.push(Issue::at(i, IssueKind::MissingParam(*p)));
            }
        }
        for p in Param::ALL {
            if step.params.is_set(p) && !required.contains(&p) && !optional.contains(&p) {
                issues.push(Issue::at(i, IssueKind::UnexpectedParam(p)));
            }
            let (Some(v), Some(r)) = (step.params.number(p), table.range(step.action, p, limits, bounds)) else {
                continue;
            };
            let low_ok = if open_at_zero(p) { v > r.min } else { v >= r.min };
            if !(low_ok && v <= r.max) {
                issues.push(Issue::at(
                    i,
                    IssueKind::OutOfBounds {
                        param: p,
                        value: v,
                        min: r.min,
                        max: r.max,
                    },
                ));
            }
        }
        if let Some(label) = &step.params.label {
            if label.trim().is_empty() {
                issues.push(Issue::at(
                    i,
                    IssueKind::TypeError {
                        param: Param::Label,
                        expected: "non-empty string",
                    },
                ));
            }
        }
        let mut high_risk = step.action == Action::CloseGripper;
        if let Some(xyz) = step.params.xyz_mm {
            if let Some((axis, value)) = bounds.violation(xyz) {
                issues.push(Issue::at(i, IssueKind::OutOfWorkspace { axis, value }));
            }
            high_risk |= xyz.z < HIGH_RISK_Z_MM;
        }
        match step.action {
            Action::CloseGripper => {
                grasped = true;
                moved_since_grasp = false;
            }
            Action::MoveToPose => moved_since_grasp = true,
            Action::OpenGripper => {
                if grasped && !moved_since_grasp {
                    issues.push(Issue::at(
                        i,
                        IssueKind::Sequencing("OPEN_GRIPPER releases a held object before any MOVE_TO_POSE to a drop pose".into()),
                    ));
                }
                grasped = false;
            }
            _ => {}
        }
        tags.push(StepTags {
            perception_sync: step.action.needs_perception_sync(),
            high_risk,
        });
    }

    if issues.is_empty() {
        Ok(ValidatedPlan { plan: plan.clone(), tags })
    } else {
        Err(PlanError { issues })
    }
}
