//! Step-by-step plan execution with retries, timers and operator gates.

use serde::Serialize;

use super::{ArmSummary, Deadline, ExecError, Executor, TraceEvent, World};
use crate::planner::{Action, ActionStep, FailureContext, FailureKind, ValidatedPlan, HIGH_RISK_Z_MM};
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Success,
    RetriedSuccess,
    AbortedTimeout,
    AbortedSafety,
    Failed,
}

impl StepStatus {
    pub fn name(self) -> &'static str {
        match self {
            StepStatus::Success => "success",
            StepStatus::RetriedSuccess => "retried_success",
            StepStatus::AbortedTimeout => "aborted_timeout",
            StepStatus::AbortedSafety => "aborted_safety",
            StepStatus::Failed => "failed",
        }
    }

    pub fn is_success(self) -> bool {
        matches!(self, StepStatus::Success | StepStatus::RetriedSuccess)
    }

    fn from_error(e: &ExecError) -> Self {
        match e {
            ExecError::TimeoutAbort { .. } | ExecError::PlanTimeout { .. } => StepStatus::AbortedTimeout,
            ExecError::SafetyAbort(_)
            | ExecError::MoveTooLong { .. }
            | ExecError::SpeedCapExceeded { .. }
            | ExecError::OutOfWorkspace { .. }
            | ExecError::NonFiniteTarget
            | ExecError::GripperLimit { .. }
            | ExecError::EmergencyOpen { .. } => StepStatus::AbortedSafety,
            _ => StepStatus::Failed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepResult {
    pub index: usize,
    pub action: Action,
    pub status: StepStatus,
    pub retries: u32,
    /// Virtual seconds, including retries.
    pub duration: f64,
    /// TCP position when the step ended.
    pub end_xyz: Vec3,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanStatus {
    Success,
    Failed,
    OperatorAbort,
    PlanTimeout,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExecutionReport {
    pub steps: Vec<StepResult>,
    pub status: PlanStatus,
    pub duration: f64,
    pub final_state: ArmSummary,
    pub emergency_events: Vec<TraceEvent>,
    /// Present whenever the plan did not succeed.
    pub failure: Option<FailureContext>,
}

impl ExecutionReport {
    pub fn succeeded(&self) -> bool {
        self.status == PlanStatus::Success
    }

    pub fn step(&self, action: Action) -> Option<&StepResult> {
        self.steps.iter().find(|s| s.action == action)
    }
}

/// Hooks for a human in the loop.
pub trait ExecutionObserver {
    /// Called before a high-risk step; `false` halts the plan.
    fn confirm(&mut self, index: usize, step: &ActionStep, reason: &str) -> bool;
    /// Receives every trace event, in order, after each step.
    fn on_event(&mut self, _event: &TraceEvent) {}
}

/// Approves everything and ignores events.
#[derive(Debug, Clone, Copy, Default)]
pub struct AutoApprove;

impl ExecutionObserver for AutoApprove {
    fn confirm(&mut self, _: usize, _: &ActionStep, _: &str) -> bool {
        true
    }
}

fn retriable(e: &ExecError) -> bool {
    matches!(
        e,
        ExecError::TimeoutAbort { .. } | ExecError::ObjectNotObserved(_) | ExecError::GraspFailure
    )
}

fn failure_kind(e: &ExecError) -> FailureKind {
    match e {
        ExecError::ObjectNotFound { .. } => FailureKind::ObjectNotFound,
        ExecError::ObjectNotObserved(_) => FailureKind::ObjectNotObserved,
        ExecError::TimeoutAbort { .. } => FailureKind::TimeoutAbort,
        ExecError::PlanTimeout { .. } => FailureKind::PlanTimeout,
        ExecError::GraspFailure => FailureKind::GraspFailure,
        ExecError::EmergencyOpen { .. } => FailureKind::EmergencyOpen,
        ExecError::OperatorAbort(_) => FailureKind::OperatorAbort,
        ExecError::MoveTooLong { .. }
        | ExecError::SpeedCapExceeded { .. }
        | ExecError::OutOfWorkspace { .. }
        | ExecError::NonFiniteTarget
        | ExecError::GripperLimit { .. } => FailureKind::MotionRejected,
        _ => FailureKind::SafetyAbort,
    }
}

struct Run<'a> {
    world: &'a mut World,
    observer: &'a mut dyn ExecutionObserver,
    cursor: usize,
}

impl Run<'_> {
    fn flush(&mut self) {
        for e in &self.world.trace[self.cursor..] {
            self.observer.on_event(e);
        }
        self.cursor = self.world.trace.len();
    }
}

impl Executor {
    fn step_timeout(&self, step: &ActionStep) -> f64 {
        step.params.timeout_sec.unwrap_or(match step.action {
            Action::ScanArea => self.motion.scan_timeout_default,
            _ => self.limits.step_timeout_default,
        })
    }

    /// Reason to ask the operator before `step`, if any. Approach targets
    /// are resolved against the current snapshot.
    fn risk_reason(&self, world: &World, step: &ActionStep, tagged: bool) -> Option<String> {
        if tagged {
            return Some(match step.action {
                Action::CloseGripper => "gripper close".to_string(),
                _ => format!("target below {HIGH_RISK_Z_MM} mm"),
            });
        }
        if step.action == Action::ApproachObject {
            let (label, hover) = (step.params.label.as_deref()?, step.params.hover_mm?);
            let target = self.approach_target(world, label, hover).ok()?;
            if target.z < HIGH_RISK_Z_MM {
                return Some(format!("approach target z = {:.1} mm below {HIGH_RISK_Z_MM} mm", target.z));
            }
        }
        None
    }

    /// Runs one step body once.
    pub fn run_step(&self, world: &mut World, step: &ActionStep, deadline: &Deadline) -> Result<(), ExecError> {
        let p = &step.params;
        match step.action {
            Action::ScanArea => self.scan_area(world, p.label.as_deref(), p.strategy, p.height_mm, deadline).map(|_| ()),
            Action::ApproachObject => {
                let label = p
                    .label
                    .as_deref()
                    .ok_or_else(|| ExecError::SafetyAbort("APPROACH_OBJECT without label".into()))?;
                let hover = p
                    .hover_mm
                    .ok_or_else(|| ExecError::SafetyAbort("APPROACH_OBJECT without hover_mm".into()))?;
                self.approach_object(world, label, hover, p.speed_mm_s, deadline).map(|_| ())
            }
            Action::MoveToPose => {
                let xyz = p.xyz_mm.ok_or_else(|| ExecError::SafetyAbort("MOVE_TO_POSE without xyz_mm".into()))?;
                self.move_to_pose(world, xyz, p.rpy_deg, p.speed_mm_s, deadline)
            }
            Action::OpenGripper => self.open_gripper(world, p.speed_units, deadline),
            Action::CloseGripper => self.close_gripper(world, p.speed_units, p.force_units, deadline),
            Action::RetreatZ => {
                let mm = p
                    .retreat_mm
                    .ok_or_else(|| ExecError::SafetyAbort("RETREAT_Z without retreat_mm".into()))?;
                self.retreat_z(world, mm, p.speed_mm_s, deadline)
            }
        }
    }

    /// Executes a validated plan. Failures never escape as errors; they are
    /// recorded in the report along with a [`FailureContext`].
    pub fn execute_plan(&self, world: &mut World, plan: &ValidatedPlan, observer: &mut dyn ExecutionObserver) -> ExecutionReport {
        let start = world.now();
        let plan_at = start + self.limits.plan_timeout;
        let cursor = world.trace.len();
        let mut run = Run { world, observer, cursor };
        let mut steps = Vec::new();
        let mut status = PlanStatus::Success;
        let mut failure = None;

        for (index, step) in plan.plan.steps.iter().enumerate() {
            let tags = plan.tags.get(index).copied().unwrap_or_default();
            let step_start = run.world.now();
            if step_start >= plan_at {
                let e = ExecError::PlanTimeout {
                    timeout: self.limits.plan_timeout,
                    at: step_start,
                };
                failure = Some(self.failure_context(run.world, index, step, &e));
                status = PlanStatus::PlanTimeout;
                break;
            }
            run.world.log(TraceEvent::StepStart {
                t: step_start,
                index,
                action: step.action,
            });

            let mut retries = 0u32;
            let mut notes = Vec::new();
            let mut confirmed = false;
            let outcome = loop {
                let deadline = Deadline::step(run.world.now(), self.step_timeout(step)).min_with_plan(plan_at, self.limits.plan_timeout);
                if tags.perception_sync {
                    if let Err(e) = self.capture(run.world) {
                        break Err(e);
                    }
                }
                if !confirmed {
                    if let Some(reason) = self.risk_reason(run.world, step, tags.high_risk) {
                        run.flush();
                        let approved = run.observer.confirm(index, step, &reason);
                        let t = run.world.now();
                        run.world.log(TraceEvent::Confirm { t, index, approved });
                        if !approved {
                            break Err(ExecError::OperatorAbort(index));
                        }
                    }
                    confirmed = true;
                }
                match self.run_step(run.world, step, &deadline) {
                    Ok(()) => break Ok(()),
                    Err(e) if retriable(&e) && retries < self.limits.max_retries_per_step && run.world.now() < plan_at => {
                        retries += 1;
                        notes.push(format!("retry {retries}: {e}"));
                        let t = run.world.now();
                        run.world.log(TraceEvent::Retry {
                            t,
                            index,
                            attempt: retries,
                            reason: e.to_string(),
                        });
                        if matches!(e, ExecError::GraspFailure) {
                            let reopen =
                                Deadline::step(run.world.now(), self.limits.step_timeout_default).min_with_plan(plan_at, self.limits.plan_timeout);
                            if let Err(e) = self.open_gripper(run.world, None, &reopen) {
                                break Err(e);
                            }
                        }
                    }
                    Err(e) => break Err(e),
                }
            };

            if let Err(ExecError::OperatorAbort(_)) = outcome {
                let e = ExecError::OperatorAbort(index);
                let t = run.world.now();
                run.world.log(TraceEvent::Abort { t, reason: e.to_string() });
                failure = Some(self.failure_context(run.world, index, step, &e));
                status = PlanStatus::OperatorAbort;
                run.flush();
                break;
            }

            let step_status = match &outcome {
                Ok(()) if retries > 0 => StepStatus::RetriedSuccess,
                Ok(()) => StepStatus::Success,
                Err(e) => StepStatus::from_error(e),
            };
            if let Err(e) = &outcome {
                notes.push(e.to_string());
                if step.action.is_motion() {
                    if let Err(re) = self.emergency_retreat(run.world) {
                        notes.push(format!("emergency retreat failed: {re}"));
                    }
                }
                failure = Some(self.failure_context(run.world, index, step, e));
                status = match e {
                    ExecError::PlanTimeout { .. } => PlanStatus::PlanTimeout,
                    _ => PlanStatus::Failed,
                };
            }
            let t = run.world.now();
            run.world.log(TraceEvent::StepEnd {
                t,
                index,
                status: step_status.name().to_string(),
            });
            steps.push(StepResult {
                index,
                action: step.action,
                status: step_status,
                retries,
                duration: t - step_start,
                end_xyz: run.world.arm.position(),
                notes,
            });
            run.flush();
            if outcome.is_err() {
                break;
            }
        }
        run.flush();

        let world = run.world;
        let emergency_events = world.trace[cursor..]
            .iter()
            .filter(|e| matches!(e, TraceEvent::EmergencyOpen { .. } | TraceEvent::EmergencyRetreat { .. }))
            .cloned()
            .collect();
        ExecutionReport {
            steps,
            status,
            duration: world.now() - start,
            final_state: world.arm.summary(),
            emergency_events,
            failure,
        }
    }

    fn failure_context(&self, world: &World, index: usize, step: &ActionStep, e: &ExecError) -> FailureContext {
        let mut fc = FailureContext::new(failure_kind(e), e.to_string());
        fc.step_index = Some(index);
        fc.action = Some(step.action);
        fc.label = step.params.label.clone();
        if let ExecError::ObjectNotFound { label, attempted } = e {
            fc.label = Some(label.clone());
            fc.attempted = attempted.clone();
        }
        fc.last_observations = world.perception.store().snapshot();
        fc
    }
}
