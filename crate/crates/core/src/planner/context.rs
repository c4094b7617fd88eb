use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Action, ParamBounds};
use crate::executor::{SafetyLimits, WorkspaceBounds};
use crate::knowledge::{Category, KnowledgeBase, KnowledgeDoc, RetrievalResult};
use crate::perception::Observation;
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvEntry {
    pub label: String,
    pub tag_id: u32,
    pub position_xyz: Vec3,
    pub confidence: f64,
    pub age_seconds: f64,
}

/// Symbolic world state handed to the generator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvSummary {
    pub entries: Vec<EnvEntry>,
    pub workspace: WorkspaceBounds,
    pub timestamp: f64,
}

impl EnvSummary {
    /// Highest-confidence entry for `label`, ties to the lower tag id.
    pub fn best(&self, label: &str) -> Option<&EnvEntry> {
        self.entries
            .iter()
            .filter(|e| e.label == label)
            .fold(None, |best: Option<&EnvEntry>, e| match best {
                Some(b) if b.confidence >= e.confidence => Some(b),
                _ => Some(e),
            })
    }

    pub fn labels(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.entries.iter().map(|e| e.label.as_str()).collect();
        v.dedup();
        v
    }
}

/// One entry per tag, sorted by label then tag id.
pub fn summarize_env(snapshot: &[Observation], now: f64, workspace: WorkspaceBounds) -> EnvSummary {
    let mut entries: Vec<EnvEntry> = snapshot
        .iter()
        .map(|o| EnvEntry {
            label: o.label.clone(),
            tag_id: o.tag_id,
            position_xyz: o.position_xyz,
            confidence: o.confidence,
            age_seconds: now - o.timestamp,
        })
        .collect();
    entries.sort_by(|a, b| a.label.cmp(&b.label).then(a.tag_id.cmp(&b.tag_id)));
    entries.dedup_by_key(|e| e.tag_id);
    EnvSummary {
        entries,
        workspace,
        timestamp: now,
    }
}

/// A retrieved document as it appears in the context.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContextDoc {
    pub id: String,
    pub category: Category,
    pub score: f64,
    pub text: String,
}

/// Retrieved docs in rank order, with their text.
pub fn context_docs(kb: &KnowledgeBase, r: &RetrievalResult) -> Vec<ContextDoc> {
    r.hits
        .iter()
        .filter_map(|h| {
            let d: &KnowledgeDoc = kb.doc(&h.id)?;
            Some(ContextDoc {
                id: d.id.clone(),
                category: d.category,
                score: h.score,
                text: d.text.clone(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ConstraintBlock {
    pub limits: SafetyLimits,
    pub workspace: WorkspaceBounds,
    pub params: ParamBounds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanStrategy {
    Horizontal,
    Arc,
}

impl std::fmt::Display for ScanStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScanStrategy::Horizontal => "horizontal",
            ScanStrategy::Arc => "arc",
        })
    }
}

/// A scan strategy that was run to completion without finding the target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanAttempt {
    pub strategy: ScanStrategy,
    /// Sweep height for horizontal scans; arc poses are fixed.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub height_mm: Option<f64>,
}

impl ScanAttempt {
    pub fn horizontal(height_mm: f64) -> Self {
        Self {
            strategy: ScanStrategy::Horizontal,
            height_mm: Some(height_mm),
        }
    }

    pub fn arc() -> Self {
        Self {
            strategy: ScanStrategy::Arc,
            height_mm: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    ObjectNotFound,
    ObjectNotObserved,
    TimeoutAbort,
    GraspFailure,
    EmergencyOpen,
    SafetyAbort,
    MotionRejected,
    OperatorAbort,
    PlanTimeout,
    InvalidPlan,
    GenerationFailure,
}

impl FailureKind {
    pub fn name(self) -> &'static str {
        match self {
            FailureKind::ObjectNotFound => "object_not_found",
            FailureKind::ObjectNotObserved => "object_not_observed",
            FailureKind::TimeoutAbort => "timeout_abort",
            FailureKind::GraspFailure => "grasp_failure",
            FailureKind::EmergencyOpen => "emergency_open",
            FailureKind::SafetyAbort => "safety_abort",
            FailureKind::MotionRejected => "motion_rejected",
            FailureKind::OperatorAbort => "operator_abort",
            FailureKind::PlanTimeout => "plan_timeout",
            FailureKind::InvalidPlan => "invalid_plan",
            FailureKind::GenerationFailure => "generation_failure",
        }
    }

    /// Words appended to the retrieval query on a reprompt.
    pub fn keywords(self) -> &'static str {
        match self {
            FailureKind::ObjectNotFound | FailureKind::ObjectNotObserved => "object not found scan recovery oblique view",
            FailureKind::TimeoutAbort | FailureKind::PlanTimeout => "timeout retries recovery",
            FailureKind::GraspFailure => "grasp failed recovery reopen retreat approach again",
            FailureKind::EmergencyOpen => "load emergency release force slow closing",
            FailureKind::SafetyAbort | FailureKind::MotionRejected => "safety limit speed workspace",
            FailureKind::OperatorAbort => "operator confirmation",
            FailureKind::InvalidPlan | FailureKind::GenerationFailure => "plan template bounded parameters",
        }
    }
}

impl std::fmt::Display for FailureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureContext {
    pub step_index: Option<usize>,
    pub action: Option<Action>,
    pub kind: FailureKind,
    /// Object the failed step was about, if any.
    pub label: Option<String>,
    pub attempted: Vec<ScanAttempt>,
    pub last_observations: Vec<Observation>,
    pub message: String,
}

impl FailureContext {
    pub fn new(kind: FailureKind, message: impl Into<String>) -> Self {
        Self {
            step_index: None,
            action: None,
            kind,
            label: None,
            attempted: Vec::new(),
            last_observations: Vec::new(),
            message: message.into(),
        }
    }

    pub fn attempted_strategies(&self) -> Vec<ScanStrategy> {
        self.attempted.iter().map(|a| a.strategy).collect()
    }
}

/// Exemplar plans shipped with the crate.
pub const EXEMPLARS: [&str; 2] = [
    include_str!("../../data/plans/exemplar_pick.json"),
    include_str!("../../data/plans/exemplar_pick_place.json"),
];

pub const SCHEMA_DESCRIPTION: &str = "\
Reply with one JSON object: {\"goal\": string, \"reasoning\": optional string, \"steps\": [{\"action\": ACTION, \"params\": {...}}]}.
Actions and parameters (required first, optional in brackets):
  SCAN_AREA        [label, strategy: auto|horizontal|arc, height_mm, timeout_sec]
  APPROACH_OBJECT  label, hover_mm [timeout_sec, speed_mm_s]
  MOVE_TO_POSE     xyz_mm: [x,y,z] [rpy_deg: [roll,pitch,yaw], speed_mm_s, timeout_sec]
  OPEN_GRIPPER     [speed_units, timeout_sec]
  CLOSE_GRIPPER    [speed_units, force_units, timeout_sec]
  RETREAT_Z        retreat_mm [speed_mm_s, timeout_sec]";

/// Full planning context. Sections render in a fixed order: knowledge,
/// environment, constraints, schema, then failure when present.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanningContext {
    pub knowledge: Vec<ContextDoc>,
    pub env: EnvSummary,
    pub constraints: ConstraintBlock,
    pub failure: Option<FailureContext>,
}

pub fn assemble_context(
    knowledge: Vec<ContextDoc>,
    env: EnvSummary,
    constraints: ConstraintBlock,
    failure: Option<FailureContext>,
) -> PlanningContext {
    PlanningContext {
        knowledge,
        env,
        constraints,
        failure,
    }
}

impl PlanningContext {
    /// `(title, body)` per section, in order.
    pub fn sections(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![
            ("KNOWLEDGE", self.render_knowledge()),
            ("ENVIRONMENT", self.render_env()),
            ("CONSTRAINTS", self.render_constraints()),
            ("SCHEMA", render_schema()),
        ];
        if let Some(f) = &self.failure {
            out.push(("FAILURE", render_failure(f)));
        }
        out
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (title, body) in self.sections() {
            let _ = writeln!(s, "## {title}");
            s.push_str(&body);
            s.push('\n');
        }
        s
    }

    fn render_knowledge(&self) -> String {
        let mut s = String::new();
        for (rank, d) in self.knowledge.iter().enumerate() {
            let _ = writeln!(s, "[{}] {} ({}, score {:.4})", rank + 1, d.id, d.category, d.score);
            let _ = writeln!(s, "{}", d.text);
        }
        s
    }

    fn render_env(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "t = {:.2} s", self.env.timestamp);
        if self.env.entries.is_empty() {
            s.push_str("no objects observed\n");
        }
        for e in &self.env.entries {
            let p = e.position_xyz;
            let _ = writeln!(
                s,
                "{} (tag {}) at [{:.1}, {:.1}, {:.1}] mm, confidence {:.2}, age {:.2} s",
                e.label, e.tag_id, p.x, p.y, p.z, e.confidence, e.age_seconds
            );
        }
        s
    }

    fn render_constraints(&self) -> String {
        let c = &self.constraints;
        let (l, w, p) = (&c.limits, &c.workspace, &c.params);
        let mut s = String::new();
        let _ = writeln!(
            s,
            "workspace x [{}, {}] y [{}, {}] z [{}, {}] mm",
            w.x.min, w.x.max, w.y.min, w.y.max, w.z.min, w.z.max
        );
        let _ = writeln!(
            s,
            "max cartesian speed {} mm/s, max joint speed {} deg/s, max acceleration {} mm/s^2",
            l.max_cart_speed, l.max_joint_speed, l.max_cart_accel
        );
        let _ = writeln!(
            s,
            "max single move {} mm, gripper speed <= {}, gripper force <= {}",
            l.max_single_move, l.gripper_max_speed, l.gripper_max_force
        );
        let _ = writeln!(
            s,
            "hover_mm [{}, {}], retreat_mm [{}, {}], timeout_sec [{}, {}] (scan [{}, {}]), at most {} steps",
            p.hover_mm.min,
            p.hover_mm.max,
            p.retreat_mm.min,
            p.retreat_mm.max,
            p.timeout_sec.min,
            p.timeout_sec.max,
            p.scan_timeout_sec.min,
            p.scan_timeout_sec.max,
            p.max_plan_length
        );
        s
    }
}

fn render_schema() -> String {
    let mut s = String::from(SCHEMA_DESCRIPTION);
    s.push('\n');
    for (i, ex) in EXEMPLARS.iter().enumerate() {
        let _ = writeln!(s, "example {}:", i + 1);
        s.push_str(ex.trim_end());
        s.push('\n');
    }
    s
}

fn render_failure(f: &FailureContext) -> String {
    let mut s = String::new();
    let step = match (f.step_index, f.action) {
        (Some(i), Some(a)) => format!("step {i} ({a})"),
        (Some(i), None) => format!("step {i}"),
        _ => "plan".to_owned(),
    };
    let _ = writeln!(s, "{step} failed: {} - {}", f.kind, f.message);
    if let Some(l) = &f.label {
        let _ = writeln!(s, "target: {l}");
    }
    let attempted: Vec<String> = f
        .attempted
        .iter()
        .map(|a| match (a.strategy, a.height_mm) {
            (ScanStrategy::Horizontal, Some(h)) => format!("horizontal@{h}"),
            (ScanStrategy::Horizontal, None) => "horizontal".to_owned(),
            (ScanStrategy::Arc, _) => "arc".to_owned(),
        })
        .collect();
    let _ = writeln!(s, "scan strategies attempted: [{}]", attempted.join(", "));
    for o in &f.last_observations {
        let p = o.position_xyz;
        let _ = writeln!(s, "last seen {} (tag {}) at [{:.1}, {:.1}, {:.1}]", o.label, o.tag_id, p.x, p.y, p.z);
    }
    s
}
