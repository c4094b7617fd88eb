//! Context assembly, plan generation, parsing and validation.

mod context;
mod generator;
mod plan;
mod validate;

pub use context::{
    assemble_context, context_docs, summarize_env, ConstraintBlock, ContextDoc, EnvEntry, EnvSummary, FailureContext, FailureKind, PlanningContext,
    ScanAttempt, ScanStrategy, EXEMPLARS, SCHEMA_DESCRIPTION,
};
pub use generator::{
    build_context, generate_plan, parse_instruction, reprompt_with_failure, HttpGenerator, Instruction, Intent, PlanGenerator, Reprompter,
    ScanLadder, ScanRung, TemplateDefaults, TemplateGenerator, ENV_PLANNER_TOKEN, ENV_PLANNER_URL,
};
pub use plan::{parse_plan, Action, ActionStep, Param, Params, Plan, ScanMode};
pub use validate::{validate_plan, ParamBounds, Range, StepTags, ValidatedPlan, DEFAULT_MAX_PLAN_LENGTH, HIGH_RISK_Z_MM};

use std::fmt;

use thiserror::Error;

use crate::executor::Axis;
use crate::knowledge::KnowledgeError;

#[derive(Debug, Clone, PartialEq)]
pub enum IssueKind {
    MalformedJson(String),
    Schema(String),
    UnknownAction(String),
    MissingParam(Param),
    UnexpectedParam(Param),
    TypeError { param: Param, expected: &'static str },
    OutOfBounds { param: Param, value: f64, min: f64, max: f64 },
    OutOfWorkspace { axis: Axis, value: f64 },
    PlanTooLong { len: usize, max: usize },
    Sequencing(String),
}

impl fmt::Display for IssueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IssueKind::MalformedJson(m) => write!(f, "malformed JSON: {m}"),
            IssueKind::Schema(m) => write!(f, "schema: {m}"),
            IssueKind::UnknownAction(a) => write!(f, "unknown action {a:?}"),
            IssueKind::MissingParam(p) => write!(f, "missing parameter {p}"),
            IssueKind::UnexpectedParam(p) => write!(f, "parameter {p} not accepted by this action"),
            IssueKind::TypeError { param, expected } => write!(f, "parameter {param} must be {expected}"),
            IssueKind::OutOfBounds { param, value, min, max } => write!(f, "{param} = {value} outside [{min}, {max}]"),
            IssueKind::OutOfWorkspace { axis, value } => write!(f, "target {axis} = {value} outside the workspace"),
            IssueKind::PlanTooLong { len, max } => write!(f, "plan has {len} steps, at most {max} allowed"),
            IssueKind::Sequencing(m) => write!(f, "sequencing: {m}"),
        }
    }
}

/// One problem with a plan, located at a step when it belongs to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Issue {
    pub step: Option<usize>,
    pub kind: IssueKind,
}

impl Issue {
    pub fn at(step: usize, kind: IssueKind) -> Self {
        Self { step: Some(step), kind }
    }

    pub fn plan(kind: IssueKind) -> Self {
        Self { step: None, kind }
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.step {
            Some(i) => write!(f, "step {i}: {}", self.kind),
            None => write!(f, "plan: {}", self.kind),
        }
    }
}

/// Every issue found while parsing or validating a plan.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct PlanError {
    pub issues: Vec<Issue>,
}

impl PlanError {
    pub fn single(issue: Issue) -> Self {
        Self { issues: vec![issue] }
    }
}

impl fmt::Display for PlanError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.issues.iter().map(Issue::to_string).collect();
        f.write_str(&parts.join("; "))
    }
}

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("invalid plan: {0}")]
    Plan(#[from] PlanError),
    #[error("generation failed: {0}")]
    GenerationFailure(String),
    #[error("all scan strategies attempted ({} so far)", attempted.len())]
    StrategiesExhausted { attempted: Vec<ScanAttempt> },
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
}
