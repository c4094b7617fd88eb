use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{
    assemble_context, context_docs, parse_plan, Action, ActionStep, ConstraintBlock, EnvSummary, FailureContext, FailureKind, Params, Plan,
    PlannerError, PlanningContext, ScanAttempt, ScanMode, ScanStrategy, HIGH_RISK_Z_MM, SCHEMA_DESCRIPTION,
};
use crate::knowledge::{normalize_tokens, param_hints, KnowledgeBase};
use crate::{RpyDeg, Vec3};

/// Produces raw plan text from a context and an instruction.
pub trait PlanGenerator {
    fn generate(&self, ctx: &PlanningContext, instruction: &str) -> Result<String, PlannerError>;
}

pub fn generate_plan(ctx: &PlanningContext, instruction: &str, generator: &dyn PlanGenerator) -> Result<String, PlannerError> {
    generator.generate(ctx, instruction)
}

/// One rung of the scan escalation ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRung {
    pub mode: ScanMode,
    pub height_mm: f64,
}

impl ScanRung {
    /// The attempts this rung performs when it misses.
    pub fn covers(&self) -> Vec<ScanAttempt> {
        match self.mode {
            ScanMode::Auto => vec![ScanAttempt::horizontal(self.height_mm), ScanAttempt::arc()],
            ScanMode::Horizontal => vec![ScanAttempt::horizontal(self.height_mm)],
            ScanMode::Arc => vec![ScanAttempt::arc()],
        }
    }
}

/// Ordered scan strategies; a rung is skipped once everything it covers has
/// been attempted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScanLadder(pub Vec<ScanRung>);

impl Default for ScanLadder {
    fn default() -> Self {
        Self(vec![
            ScanRung {
                mode: ScanMode::Auto,
                height_mm: 350.0,
            },
            ScanRung {
                mode: ScanMode::Horizontal,
                height_mm: 250.0,
            },
        ])
    }
}

impl ScanLadder {
    pub fn next(&self, attempted: &[ScanAttempt]) -> Option<ScanRung> {
        self.0.iter().copied().find(|r| r.covers().iter().any(|c| !attempted.contains(c)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TemplateDefaults {
    pub hover_mm: f64,
    pub inspect_hover_mm: f64,
    /// Largest hover that still leaves the object inside the grasp volume.
    pub max_grasp_hover_mm: f64,
    pub timeout_sec: f64,
    pub retreat_mm: f64,
    pub speed_mm_s: f64,
    pub drop_clearance_mm: f64,
    pub scan_timeout_sec: f64,
    pub home_xyz_mm: Vec3,
}

impl Default for TemplateDefaults {
    fn default() -> Self {
        Self {
            hover_mm: 40.0,
            inspect_hover_mm: 120.0,
            max_grasp_hover_mm: 55.0,
            timeout_sec: 8.0,
            retreat_mm: 100.0,
            speed_mm_s: 100.0,
            drop_clearance_mm: 80.0,
            scan_timeout_sec: 60.0,
            home_xyz_mm: Vec3::new(400.0, 0.0, 350.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Intent {
    PickPlace,
    Pick,
    Inspect,
    Reset,
}

const PLACE_VERBS: &[&str] = &["place", "put", "move", "drop", "bring", "transfer", "set", "carry"];
const PICK_VERBS: &[&str] = &["pick", "grab", "take", "grasp", "lift", "get", "fetch", "hold"];
const INSPECT_VERBS: &[&str] = &["find", "locate", "look", "search", "scan", "inspect", "show", "where"];
const RESET_WORDS: &[&str] = &["home", "reset", "park"];
const PREPOSITIONS: &[&str] = &["on", "onto", "in", "into", "to", "inside", "atop"];
const STOPWORDS: &[&str] = &[
    "the", "a", "an", "up", "it", "and", "please", "then", "of", "from", "with", "object", "for", "me", "at", "top", "over", "there", "is", "robot",
    "arm", "go", "back", "return",
];

/// Parsed instruction.
#[derive(Debug, Clone, PartialEq)]
pub struct Instruction {
    pub intent: Intent,
    pub object: Option<String>,
    pub destination: Option<String>,
}

fn is_filler(t: &str) -> bool {
    STOPWORDS.contains(&t)
        || PREPOSITIONS.contains(&t)
        || PLACE_VERBS.contains(&t)
        || PICK_VERBS.contains(&t)
        || INSPECT_VERBS.contains(&t)
        || RESET_WORDS.contains(&t)
}

/// Keyword rule table: place (verb + preposition + destination) before
/// pick, inspect, and reset.
pub fn parse_instruction(text: &str, known_labels: &[String]) -> Option<Instruction> {
    let tokens = normalize_tokens(text);
    let has = |set: &[&str]| tokens.iter().any(|t| set.contains(&t.as_str()));
    let destination = tokens
        .iter()
        .rposition(|t| PREPOSITIONS.contains(&t.as_str()))
        .and_then(|i| tokens[i + 1..].iter().find(|t| !is_filler(t)).cloned());
    let dest_idx = tokens.iter().rposition(|t| PREPOSITIONS.contains(&t.as_str()));
    let object_zone = &tokens[..dest_idx.unwrap_or(tokens.len())];
    let object = object_zone
        .iter()
        .find(|t| known_labels.iter().any(|l| l == *t))
        .or_else(|| object_zone.iter().find(|t| !is_filler(t)))
        .cloned();

    let intent = if has(PLACE_VERBS) && destination.is_some() && object.is_some() {
        Intent::PickPlace
    } else if has(PICK_VERBS) && object.is_some() {
        Intent::Pick
    } else if has(INSPECT_VERBS) && object.is_some() {
        Intent::Inspect
    } else if has(RESET_WORDS) {
        Intent::Reset
    } else {
        return None;
    };
    let destination = if intent == Intent::PickPlace { destination } else { None };
    Some(Instruction {
        intent,
        object: if intent == Intent::Reset { None } else { object },
        destination,
    })
}

/// Deterministic rule-table generator; the test-suite backbone.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TemplateGenerator {
    /// Object classes the world may contain, beyond those already observed.
    pub vocabulary: Vec<String>,
    pub ladder: ScanLadder,
    pub defaults: TemplateDefaults,
}

struct Hints(BTreeMap<String, f64>);

impl Hints {
    /// First value per key, preferring documents that mention `label`.
    fn collect(ctx: &PlanningContext, label: Option<&str>) -> Self {
        let mentions = |text: &str| label.is_some_and(|l| normalize_tokens(text).iter().any(|t| t == l));
        let ordered = ctx
            .knowledge
            .iter()
            .filter(|d| mentions(&d.text))
            .chain(ctx.knowledge.iter().filter(|d| !mentions(&d.text)));
        let mut m = BTreeMap::new();
        for d in ordered {
            for (k, v) in param_hints(&d.text) {
                m.entry(k).or_insert(v);
            }
        }
        Self(m)
    }

    fn get(&self, key: &str, default: f64, lo: f64, hi: f64) -> f64 {
        self.0.get(key).copied().unwrap_or(default).clamp(lo, hi)
    }
}

impl TemplateGenerator {
    pub fn new(vocabulary: Vec<String>) -> Self {
        Self {
            vocabulary,
            ..Self::default()
        }
    }

    fn known_labels(&self, env: &EnvSummary) -> Vec<String> {
        let mut v: Vec<String> = self.vocabulary.clone();
        v.extend(env.entries.iter().map(|e| e.label.clone()));
        v.sort();
        v.dedup();
        v
    }

    /// Builds the plan value; [`PlanGenerator::generate`] serializes it.
    pub fn plan(&self, ctx: &PlanningContext, instruction: &str) -> Result<Plan, PlannerError> {
        let env = &ctx.env;
        let known = self.known_labels(env);
        let parsed =
            parse_instruction(instruction, &known).ok_or_else(|| PlannerError::GenerationFailure(format!("no template matches {instruction:?}")))?;
        let c = &ctx.constraints;
        let (pb, lim, ws) = (&c.params, &c.limits, &c.workspace);
        let d = &self.defaults;
        let hints = Hints::collect(ctx, parsed.object.as_deref());
        let speed = hints.get("speed_mm_s", d.speed_mm_s, 1.0, lim.max_cart_speed);
        let timeout = hints.get("timeout_sec", d.timeout_sec, pb.timeout_sec.min, pb.timeout_sec.max);
        let retreat = hints.get("retreat_mm", d.retreat_mm, pb.retreat_mm.min, pb.retreat_mm.max);
        let scan_timeout = hints.get("scan_timeout_sec", d.scan_timeout_sec, pb.scan_timeout_sec.min, pb.scan_timeout_sec.max);
        let down = RpyDeg::new(180.0, 0.0, 0.0);
        let clamp_ws = |p: Vec3| Vec3::new(ws.x.clamp(p.x), ws.y.clamp(p.y), ws.z.clamp(p.z));

        let mut steps = Vec::new();
        let mut reasoning = vec![format!("template {:?}", parsed.intent)];

        if parsed.intent == Intent::Reset {
            steps.push(step(
                Action::RetreatZ,
                Params {
                    retreat_mm: Some(retreat),
                    ..Params::default()
                },
            ));
            steps.push(step(
                Action::MoveToPose,
                Params {
                    xyz_mm: Some(clamp_ws(d.home_xyz_mm)),
                    rpy_deg: Some(down),
                    speed_mm_s: Some(speed),
                    ..Params::default()
                },
            ));
            return Ok(Plan {
                goal: "return to home".into(),
                reasoning: Some(reasoning.join("; ")),
                steps,
            });
        }

        let label = parsed.object.clone().expect("non-reset intents carry an object");
        let scan_failure = ctx
            .failure
            .as_ref()
            .is_some_and(|f| matches!(f.kind, FailureKind::ObjectNotFound | FailureKind::ObjectNotObserved));
        let observed = env.best(&label);
        if observed.is_none() || scan_failure {
            let attempted = ctx.failure.as_ref().map(|f| f.attempted.as_slice()).unwrap_or(&[]);
            let rung = self.ladder.next(attempted).ok_or_else(|| PlannerError::StrategiesExhausted {
                attempted: attempted.to_vec(),
            })?;
            reasoning.push(format!("{label} needs a scan ({:?} at {} mm)", rung.mode, rung.height_mm));
            steps.push(step(
                Action::ScanArea,
                Params {
                    label: Some(label.clone()),
                    strategy: Some(rung.mode),
                    height_mm: Some(ws.z.clamp(rung.height_mm)),
                    timeout_sec: Some(scan_timeout),
                    ..Params::default()
                },
            ));
        }

        let hover = match parsed.intent {
            Intent::Inspect => hints.0.get("inspect_hover_mm").copied().unwrap_or(d.inspect_hover_mm),
            _ => {
                let h = hints.get("hover_mm", d.hover_mm, pb.hover_mm.min, d.max_grasp_hover_mm);
                // Stay out of the low-clearance band when the grasp reach allows
                // it, with a margin for the re-read at step start.
                match observed.filter(|_| !scan_failure) {
                    Some(o) => h.max(((HIGH_RISK_Z_MM + 5.0 - o.position_xyz.z) * 2.0).ceil().min(2.0 * d.max_grasp_hover_mm) / 2.0),
                    None => h,
                }
            }
        }
        .clamp(pb.hover_mm.min, pb.hover_mm.max);
        steps.push(step(
            Action::ApproachObject,
            Params {
                label: Some(label.clone()),
                hover_mm: Some(hover),
                timeout_sec: Some(timeout),
                speed_mm_s: Some(speed),
                ..Params::default()
            },
        ));

        let goal = match parsed.intent {
            Intent::Inspect => {
                return Ok(Plan {
                    goal: format!("inspect {label}"),
                    reasoning: Some(reasoning.join("; ")),
                    steps,
                })
            }
            Intent::Pick => format!("pick up {label}"),
            _ => format!("place {label} on {}", parsed.destination.as_deref().unwrap_or("?")),
        };
        steps.push(step(Action::CloseGripper, Params::default()));
        steps.push(step(
            Action::RetreatZ,
            Params {
                retreat_mm: Some(retreat),
                speed_mm_s: Some(speed),
                ..Params::default()
            },
        ));

        if parsed.intent == Intent::PickPlace {
            let dest_label = parsed.destination.clone().expect("place intent has a destination");
            let dest = env
                .best(&dest_label)
                .ok_or_else(|| PlannerError::GenerationFailure(format!("destination {dest_label:?} has not been observed")))?;
            let clearance = hints.get("drop_clearance_mm", d.drop_clearance_mm, 0.0, ws.z.max);
            let drop = clamp_ws(dest.position_xyz + Vec3::new(0.0, 0.0, clearance));
            // Split the transport when the expected start is known and far.
            if let Some(o) = observed {
                let start = clamp_ws(o.position_xyz + Vec3::new(0.0, 0.0, hover + retreat));
                let n = (start.distance(drop) / (lim.max_single_move * 0.95)).ceil().max(1.0) as usize;
                for i in 1..n {
                    steps.push(step(
                        Action::MoveToPose,
                        Params {
                            xyz_mm: Some(start.lerp(drop, i as f64 / n as f64)),
                            rpy_deg: Some(down),
                            speed_mm_s: Some(speed),
                            ..Params::default()
                        },
                    ));
                }
            }
            reasoning.push(format!("drop on {dest_label} (tag {})", dest.tag_id));
            steps.push(step(
                Action::MoveToPose,
                Params {
                    xyz_mm: Some(drop),
                    rpy_deg: Some(down),
                    speed_mm_s: Some(speed),
                    ..Params::default()
                },
            ));
            steps.push(step(Action::OpenGripper, Params::default()));
            steps.push(step(
                Action::RetreatZ,
                Params {
                    retreat_mm: Some(retreat),
                    ..Params::default()
                },
            ));
        }
        Ok(Plan {
            goal,
            reasoning: Some(reasoning.join("; ")),
            steps,
        })
    }
}

fn step(action: Action, params: Params) -> ActionStep {
    ActionStep::new(action, params)
}

impl PlanGenerator for TemplateGenerator {
    fn generate(&self, ctx: &PlanningContext, instruction: &str) -> Result<String, PlannerError> {
        Ok(self.plan(ctx, instruction)?.to_json_string())
    }
}

pub const ENV_PLANNER_URL: &str = "RAGARM_PLANNER_URL";
pub const ENV_PLANNER_TOKEN: &str = "RAGARM_PLANNER_TOKEN";

/// Completion service speaking JSON over HTTP. The request body is
/// `{context, instruction, schema, feedback?}`; the response body must be a
/// single plan document.
#[derive(Debug, Clone)]
pub struct HttpGenerator {
    pub endpoint: String,
    pub token: Option<String>,
    pub timeout: Duration,
    /// Extra requests allowed after a malformed reply.
    pub max_reasks: u32,
}

impl HttpGenerator {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            token: None,
            timeout: Duration::from_secs(30),
            max_reasks: 2,
        }
    }

    pub fn from_env() -> Result<Self, PlannerError> {
        let url = std::env::var(ENV_PLANNER_URL).map_err(|_| PlannerError::GenerationFailure(format!("{ENV_PLANNER_URL} is not set")))?;
        let mut g = Self::new(url);
        g.token = std::env::var(ENV_PLANNER_TOKEN).ok().filter(|t| !t.is_empty());
        Ok(g)
    }

    fn request(&self, agent: &ureq::Agent, body: &serde_json::Value) -> Result<String, PlannerError> {
        let mut req = agent.post(&self.endpoint).header("Content-Type", "application/json");
        if let Some(t) = &self.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let mut resp = req
            .send_json(body)
            .map_err(|e| PlannerError::GenerationFailure(format!("request to {} failed: {e}", self.endpoint)))?;
        resp.body_mut()
            .read_to_string()
            .map_err(|e| PlannerError::GenerationFailure(format!("reading response: {e}")))
    }
}

impl PlanGenerator for HttpGenerator {
    fn generate(&self, ctx: &PlanningContext, instruction: &str) -> Result<String, PlannerError> {
        let agent: ureq::Agent = ureq::Agent::config_builder().timeout_global(Some(self.timeout)).build().into();
        let mut feedback: Option<String> = None;
        for attempt in 0..=self.max_reasks {
            let mut body = serde_json::json!({
                "context": ctx.render(),
                "instruction": instruction,
                "schema": SCHEMA_DESCRIPTION,
            });
            if let Some(f) = &feedback {
                body["feedback"] = serde_json::Value::from(f.as_str());
            }
            let text = self.request(&agent, &body)?;
            match parse_plan(&text) {
                Ok(_) => return Ok(text),
                Err(e) => {
                    log::warn!("planner reply {attempt} malformed: {e}");
                    feedback = Some(format!("previous reply was rejected: {e}"));
                }
            }
        }
        Err(PlannerError::GenerationFailure(format!(
            "no well-formed plan after {} re-asks: {}",
            self.max_reasks,
            feedback.unwrap_or_default()
        )))
    }
}

/// Retrieval plus assembly for a first attempt.
pub fn build_context(
    kb: &KnowledgeBase,
    k: usize,
    instruction: &str,
    env: EnvSummary,
    constraints: ConstraintBlock,
) -> Result<PlanningContext, PlannerError> {
    let r = kb.retrieve(instruction, k)?;
    Ok(assemble_context(context_docs(kb, &r), env, constraints, None))
}

/// Re-runs retrieval with the failure keywords appended and attaches the
/// failure section. `failure.attempted` must already hold every scan
/// attempted so far.
pub fn reprompt_with_failure(
    kb: &KnowledgeBase,
    k: usize,
    instruction: &str,
    env: EnvSummary,
    constraints: ConstraintBlock,
    ladder: &ScanLadder,
    failure: FailureContext,
) -> Result<PlanningContext, PlannerError> {
    let scan_miss = matches!(failure.kind, FailureKind::ObjectNotFound);
    if scan_miss && !failure.attempted.is_empty() && ladder.next(&failure.attempted).is_none() {
        return Err(PlannerError::StrategiesExhausted {
            attempted: failure.attempted,
        });
    }
    let query = format!("{instruction} {}", failure.kind.keywords());
    let r = kb.retrieve(&query, k)?;
    Ok(assemble_context(context_docs(kb, &r), env, constraints, Some(failure)))
}

/// Accumulates scan attempts across reprompts. Attempts are appended as
/// reported, without deduplication.
#[derive(Debug, Clone, Default)]
pub struct Reprompter {
    pub attempted: Vec<ScanAttempt>,
    pub count: usize,
}

impl Reprompter {
    #[allow(clippy::too_many_arguments)]
    pub fn reprompt(
        &mut self,
        kb: &KnowledgeBase,
        k: usize,
        instruction: &str,
        env: EnvSummary,
        constraints: ConstraintBlock,
        ladder: &ScanLadder,
        mut failure: FailureContext,
    ) -> Result<PlanningContext, PlannerError> {
        self.count += 1;
        self.attempted.extend(failure.attempted.iter().copied());
        failure.attempted = self.attempted.clone();
        reprompt_with_failure(kb, k, instruction, env, constraints, ladder, failure)
    }

    pub fn strategies(&self) -> Vec<ScanStrategy> {
        self.attempted.iter().map(|a| a.strategy).collect()
    }
}
