//! Plan documents: `{"goal", "reasoning"?, "steps": [{"action", "params"}]}`.

use std::fmt;

use serde_json::{Map, Value};

use super::{Issue, IssueKind, PlanError};
use crate::{RpyDeg, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    ScanArea,
    ApproachObject,
    MoveToPose,
    OpenGripper,
    CloseGripper,
    RetreatZ,
}

impl Action {
    pub const ALL: [Action; 6] = [
        Action::ScanArea,
        Action::ApproachObject,
        Action::MoveToPose,
        Action::OpenGripper,
        Action::CloseGripper,
        Action::RetreatZ,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Action::ScanArea => "SCAN_AREA",
            Action::ApproachObject => "APPROACH_OBJECT",
            Action::MoveToPose => "MOVE_TO_POSE",
            Action::OpenGripper => "OPEN_GRIPPER",
            Action::CloseGripper => "CLOSE_GRIPPER",
            Action::RetreatZ => "RETREAT_Z",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s)
    }

    /// Required and optional parameters.
    pub fn params(self) -> (&'static [Param], &'static [Param]) {
        use Param::*;
        match self {
            Action::ScanArea => (&[], &[Label, Strategy, HeightMm, TimeoutSec]),
            Action::ApproachObject => (&[Label, HoverMm], &[TimeoutSec, SpeedMmS]),
            Action::MoveToPose => (&[XyzMm], &[RpyDeg, SpeedMmS, TimeoutSec]),
            Action::OpenGripper => (&[], &[SpeedUnits, TimeoutSec]),
            Action::CloseGripper => (&[], &[SpeedUnits, ForceUnits, TimeoutSec]),
            Action::RetreatZ => (&[RetreatMm], &[SpeedMmS, TimeoutSec]),
        }
    }

    /// Steps that read object positions and so need a fresh perception frame.
    pub fn needs_perception_sync(self) -> bool {
        matches!(self, Action::ApproachObject | Action::CloseGripper)
    }

    /// Steps that command arm motion.
    pub fn is_motion(self) -> bool {
        matches!(self, Action::ApproachObject | Action::MoveToPose | Action::RetreatZ)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl serde::Serialize for Action {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> serde::Deserialize<'de> for Action {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Action::from_name(&s).ok_or_else(|| serde::de::Error::custom(format!("unknown action {s}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Param {
    Label,
    HoverMm,
    TimeoutSec,
    XyzMm,
    RpyDeg,
    RetreatMm,
    SpeedMmS,
    Strategy,
    HeightMm,
    SpeedUnits,
    ForceUnits,
}

impl Param {
    pub const ALL: [Param; 11] = [
        Param::Label,
        Param::HoverMm,
        Param::TimeoutSec,
        Param::XyzMm,
        Param::RpyDeg,
        Param::RetreatMm,
        Param::SpeedMmS,
        Param::Strategy,
        Param::HeightMm,
        Param::SpeedUnits,
        Param::ForceUnits,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Param::Label => "label",
            Param::HoverMm => "hover_mm",
            Param::TimeoutSec => "timeout_sec",
            Param::XyzMm => "xyz_mm",
            Param::RpyDeg => "rpy_deg",
            Param::RetreatMm => "retreat_mm",
            Param::SpeedMmS => "speed_mm_s",
            Param::Strategy => "strategy",
            Param::HeightMm => "height_mm",
            Param::SpeedUnits => "speed_units",
            Param::ForceUnits => "force_units",
        }
    }

    pub fn from_key(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.key() == s)
    }

    fn expected(self) -> &'static str {
        match self {
            Param::Label => "non-empty string",
            Param::Strategy => "one of \"auto\", \"horizontal\", \"arc\"",
            Param::XyzMm | Param::RpyDeg => "array of 3 numbers",
            _ => "number",
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// Scan strategy requested by a SCAN_AREA step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanMode {
    /// Horizontal sweep, then the arc fallback on a miss.
    #[default]
    Auto,
    Horizontal,
    Arc,
}

impl ScanMode {
    pub fn name(self) -> &'static str {
        match self {
            ScanMode::Auto => "auto",
            ScanMode::Horizontal => "horizontal",
            ScanMode::Arc => "arc",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        [ScanMode::Auto, ScanMode::Horizontal, ScanMode::Arc].into_iter().find(|m| m.name() == s)
    }
}

/// Typed parameter set. Which fields may be present depends on the action.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Params {
    pub label: Option<String>,
    pub hover_mm: Option<f64>,
    pub timeout_sec: Option<f64>,
    pub xyz_mm: Option<Vec3>,
    pub rpy_deg: Option<RpyDeg>,
    pub retreat_mm: Option<f64>,
    pub speed_mm_s: Option<f64>,
    pub strategy: Option<ScanMode>,
    pub height_mm: Option<f64>,
    pub speed_units: Option<f64>,
    pub force_units: Option<f64>,
}

impl Params {
    pub fn number(&self, p: Param) -> Option<f64> {
        match p {
            Param::HoverMm => self.hover_mm,
            Param::TimeoutSec => self.timeout_sec,
            Param::RetreatMm => self.retreat_mm,
            Param::SpeedMmS => self.speed_mm_s,
            Param::HeightMm => self.height_mm,
            Param::SpeedUnits => self.speed_units,
            Param::ForceUnits => self.force_units,
            _ => None,
        }
    }

    pub fn is_set(&self, p: Param) -> bool {
        match p {
            Param::Label => self.label.is_some(),
            Param::XyzMm => self.xyz_mm.is_some(),
            Param::RpyDeg => self.rpy_deg.is_some(),
            Param::Strategy => self.strategy.is_some(),
            _ => self.number(p).is_some(),
        }
    }

    fn to_json(&self) -> Map<String, Value> {
        let mut m = Map::new();
        if let Some(l) = &self.label {
            m.insert("label".into(), Value::from(l.as_str()));
        }
        if let Some(v) = self.xyz_mm {
            m.insert("xyz_mm".into(), Value::from(v.to_array().to_vec()));
        }
        if let Some(r) = self.rpy_deg {
            m.insert("rpy_deg".into(), Value::from(r.to_array().to_vec()));
        }
        if let Some(s) = self.strategy {
            m.insert("strategy".into(), Value::from(s.name()));
        }
        for p in Param::ALL {
            if let Some(x) = self.number(p) {
                m.insert(p.key().into(), Value::from(x));
            }
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionStep {
    pub action: Action,
    pub params: Params,
}

impl ActionStep {
    pub fn new(action: Action, params: Params) -> Self {
        Self { action, params }
    }

    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("action".into(), Value::from(self.action.name()));
        m.insert("params".into(), Value::Object(self.params.to_json()));
        Value::Object(m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub goal: String,
    /// Free-form metadata from the generator. Stored, never interpreted.
    pub reasoning: Option<String>,
    pub steps: Vec<ActionStep>,
}

impl Plan {
    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("goal".into(), Value::from(self.goal.as_str()));
        if let Some(r) = &self.reasoning {
            m.insert("reasoning".into(), Value::from(r.as_str()));
        }
        m.insert("steps".into(), Value::Array(self.steps.iter().map(ActionStep::to_json).collect()));
        Value::Object(m)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("plan values serialize")
    }

    pub fn has_action(&self, a: Action) -> bool {
        self.steps.iter().any(|s| s.action == a)
    }
}

fn triple(v: &Value) -> Option<[f64; 3]> {
    let a = v.as_array()?;
    if a.len() != 3 {
        return None;
    }
    let x: Vec<f64> = a.iter().map(Value::as_f64).collect::<Option<_>>()?;
    let t = [x[0], x[1], x[2]];
    t.iter().all(|c| c.is_finite()).then_some(t)
}

fn set_param(params: &mut Params, p: Param, v: &Value) -> bool {
    match p {
        Param::Label => match v.as_str() {
            Some(s) if !s.trim().is_empty() => params.label = Some(s.trim().to_owned()),
            _ => return false,
        },
        Param::Strategy => match v.as_str().and_then(ScanMode::from_name) {
            Some(m) => params.strategy = Some(m),
            None => return false,
        },
        Param::XyzMm => match triple(v) {
            Some(t) => params.xyz_mm = Some(Vec3::from_array(t)),
            None => return false,
        },
        Param::RpyDeg => match triple(v) {
            Some([r, p, y]) => params.rpy_deg = Some(RpyDeg::new(r, p, y)),
            None => return false,
        },
        _ => {
            let Some(x) = v.as_f64().filter(|x| x.is_finite()) else { return false };
            let slot = match p {
                Param::HoverMm => &mut params.hover_mm,
                Param::TimeoutSec => &mut params.timeout_sec,
                Param::RetreatMm => &mut params.retreat_mm,
                Param::SpeedMmS => &mut params.speed_mm_s,
                Param::HeightMm => &mut params.height_mm,
                Param::SpeedUnits => &mut params.speed_units,
                Param::ForceUnits => &mut params.force_units,
                _ => unreachable!("non-numeric params handled above"),
            };
            *slot = Some(x);
        }
    }
    true
}

fn parse_step(index: usize, v: &Value, issues: &mut Vec<Issue>) -> Option<ActionStep> {
    let at = |kind| Issue::at(index, kind);
    let Some(obj) = v.as_object() else {
        issues.push(at(IssueKind::Schema("step must be an object".into())));
        return None;
    };
    let action = match obj.get("action") {
        Some(Value::String(name)) => match Action::from_name(name) {
            Some(a) => a,
            None => {
                issues.push(at(IssueKind::UnknownAction(name.clone())));
                return None;
            }
        },
        Some(_) => {
            issues.push(at(IssueKind::Schema("action must be a string".into())));
            return None;
        }
        None => {
            issues.push(at(IssueKind::Schema("step has no action".into())));
            return None;
        }
    };
    let empty = Map::new();
    let raw = match obj.get("params") {
        None => &empty,
        Some(Value::Object(m)) => m,
        Some(_) => {
            issues.push(at(IssueKind::Schema("params must be an object".into())));
            return None;
        }
    };
    let (required, optional) = action.params();
    let mut params = Params::default();
    let before = issues.len();
    for (key, value) in raw {
        match Param::from_key(key) {
            Some(p) if required.contains(&p) || optional.contains(&p) => {
                if !set_param(&mut params, p, value) {
                    issues.push(at(IssueKind::TypeError {
                        param: p,
                        expected: p.expected(),
                    }));
                }
            }
            _ => log::warn!("step {index}: ignoring parameter {key:?} not used by {action}"),
        }
    }
    for p in required {
        if !raw.contains_key(p.key()) {
            issues.push(at(IssueKind::MissingParam(*p)));
        }
    }
    (issues.len() == before).then_some(ActionStep { action, params })
}

/// Parses a plan document, collecting every schema problem found.
pub fn parse_plan(raw: &str) -> Result<Plan, PlanError> {
    let doc: Value = serde_json::from_str(raw).map_err(|e| PlanError::single(Issue::plan(IssueKind::MalformedJson(e.to_string()))))?;
    let Some(obj) = doc.as_object() else {
        return Err(PlanError::single(Issue::plan(IssueKind::Schema("plan must be a JSON object".into()))));
    };
    let mut issues = Vec::new();
    for key in obj.keys() {
        if !matches!(key.as_str(), "goal" | "reasoning" | "steps") {
            log::warn!("ignoring unknown plan key {key:?}");
        }
    }
    let goal = match obj.get("goal") {
        Some(Value::String(g)) if !g.trim().is_empty() => g.clone(),
        Some(Value::String(_)) => {
            issues.push(Issue::plan(IssueKind::Schema("goal is empty".into())));
            String::new()
        }
        Some(_) => {
            issues.push(Issue::plan(IssueKind::Schema("goal must be a string".into())));
            String::new()
        }
        None => {
            issues.push(Issue::plan(IssueKind::Schema("missing goal".into())));
            String::new()
        }
    };
    let reasoning = match obj.get("reasoning") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(other) => Some(other.to_string()),
    };
    let mut steps = Vec::new();
    match obj.get("steps") {
        Some(Value::Array(a)) if a.is_empty() => issues.push(Issue::plan(IssueKind::Schema("steps is empty".into()))),
        Some(Value::Array(a)) => {
            for (i, s) in a.iter().enumerate() {
                if let Some(step) = parse_step(i, s, &mut issues) {
                    steps.push(step);
                }
            }
        }
        Some(_) => issues.push(Issue::plan(IssueKind::Schema("steps must be an array".into()))),
        None => issues.push(Issue::plan(IssueKind::Schema("missing steps".into()))),
    }
    if issues.is_empty() {
        Ok(Plan { goal, reasoning, steps })
    } else {
        Err(PlanError { issues })
    }
}
