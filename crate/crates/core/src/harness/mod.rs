//! Scenario-driven trials, metrics tables and an interactive session.

mod pace;
mod pipeline;
mod repl;
mod table;

pub use pace::Pacer;
pub use pipeline::{Attempt, HarnessConfig, Pipeline, PipelineHooks, PipelineRun};
pub use repl::{run_repl, ReplSession};
pub use table::{emit_table, MetricsTable, Summary, TableFormat, TrialRecord};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::executor::{ExecError, ExecutionReport, TraceEvent, World};
use crate::knowledge::KnowledgeError;
use crate::perception::SimScene;
use crate::planner::{Action, HttpGenerator, PlanGenerator, PlannerError, TemplateGenerator};
use crate::Vec3;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("scenario {path}: {message}")]
    ScenarioLoad { path: PathBuf, message: String },
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Exec(#[from] ExecError),
}

/// `100 · max(0, 1 − ‖p_achieved − (p_gt + hover·ẑ)‖ / d_ref)`.
pub fn approach_accuracy(p_achieved: Vec3, p_gt: Vec3, hover_mm: f64, d_ref: f64) -> f64 {
    assert!(d_ref > 0.0, "d_ref must be positive");
    let err = p_achieved.distance(p_gt + Vec3::new(0.0, 0.0, hover_mm));
    100.0 * (1.0 - err / d_ref).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlannerKind {
    #[default]
    Template,
    External,
}

impl PlannerKind {
    /// The template planner, or the HTTP one configured from the
    /// environment.
    pub fn build(self, vocabulary: Vec<String>) -> Result<Box<dyn PlanGenerator>, PlannerError> {
        Ok(match self {
            PlannerKind::Template => Box::new(TemplateGenerator::new(vocabulary)),
            PlannerKind::External => Box::new(HttpGenerator::from_env()?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub tag_id: u32,
    pub position: Vec3,
}

fn default_d_ref() -> f64 {
    100.0
}

/// A trial protocol: one layout, one instruction, repeated under seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    /// Relative to the scenario file.
    pub scene: PathBuf,
    pub instruction: String,
    pub target: GroundTruth,
    pub trials: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub planner: PlannerKind,
    #[serde(default = "default_d_ref")]
    pub d_ref_mm: f64,
}

/// A scenario with its scene resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub scene: SimScene,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<LoadedScenario, HarnessError> {
        let err = |message: String| HarnessError::ScenarioLoad {
            path: path.to_path_buf(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let scenario: Scenario = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        let scene_path = path.parent().unwrap_or(Path::new(".")).join(&scenario.scene);
        let scene = SimScene::load(&scene_path).map_err(|e| err(format!("scene: {e}")))?;
        let loaded = LoadedScenario { scenario, scene };
        loaded.validate().map_err(err)?;
        Ok(loaded)
    }
}

impl LoadedScenario {
    pub fn validate(&self) -> Result<(), String> {
        let s = &self.scenario;
        if s.trials == 0 {
            return Err("trials must be at least 1".into());
        }
        if s.seeds.len() < s.trials {
            return Err(format!("{} seeds for {} trials", s.seeds.len(), s.trials));
        }
        if !(s.d_ref_mm > 0.0) {
            return Err("d_ref_mm must be positive".into());
        }
        if s.instruction.trim().is_empty() {
            return Err("instruction is empty".into());
        }
        Ok(())
    }

    /// Replaces every seed; trial `i` uses `base + i`.
    pub fn with_seed_base(mut self, base: u64) -> Self {
        self.scenario.seeds = (0..self.scenario.trials as u64).map(|i| base.wrapping_add(i)).collect();
        self
    }
}

/// Everything one trial produced.
#[derive(Debug)]
pub struct TrialOutcome {
    pub record: TrialRecord,
    pub run: PipelineRun,
    pub world: World,
}

impl TrialOutcome {
    pub fn reports(&self) -> impl Iterator<Item = &ExecutionReport> {
        self.run.attempts.iter().filter_map(|a| a.report.as_ref())
    }

    pub fn trace_jsonl(&self) -> String {
        self.world.trace_jsonl()
    }
}

fn target_seen(trace: &[TraceEvent], tag_id: u32) -> bool {
    trace
        .iter()
        .any(|e| matches!(e, TraceEvent::Capture { tags, .. } if tags.contains(&tag_id)))
}

/// Scores one pipeline run against the scenario's ground truth.
pub fn score_trial(index: usize, scenario: &Scenario, run: &PipelineRun, world: &World) -> TrialRecord {
    let gt = &scenario.target;
    let plan_validity = !run.attempts.is_empty() && run.attempts.iter().all(|a| a.validated.is_some());
    let scan = target_seen(&world.trace, gt.tag_id);

    // Accuracy of the last completed approach to the target.
    let approach_accuracy = run
        .attempts
        .iter()
        .rev()
        .filter_map(|a| Some((a.validated.as_ref()?, a.report.as_ref()?)))
        .find_map(|(plan, report)| {
            report.steps.iter().rev().find_map(|r| {
                let step = &plan.plan.steps[r.index];
                (r.action == Action::ApproachObject && r.status.is_success()).then(|| {
                    let hover = step.params.hover_mm.unwrap_or(0.0);
                    approach_accuracy(r.end_xyz, gt.position, hover, scenario.d_ref_mm)
                })
            })
        })
        .unwrap_or(0.0);

    let pick_place = plan_validity && scan && released_at_drop(run, world, gt.tag_id);
    let (steps, secs) = run
        .attempts
        .iter()
        .filter_map(|a| a.report.as_ref())
        .flat_map(|r| &r.steps)
        .fold((0usize, 0.0), |(n, t), s| (n + 1, t + s.duration));
    TrialRecord {
        index: index + 1,
        plan_validity,
        scan,
        approach_accuracy,
        pick_place,
        time_frame: if steps == 0 { 0.0 } else { secs / steps as f64 },
    }
}

/// The final attempt succeeded, released the target, and the target rests
/// within 30 mm (in xy) of the commanded drop pose.
fn released_at_drop(run: &PipelineRun, world: &World, tag_id: u32) -> bool {
    const TOLERANCE_MM: f64 = 30.0;
    let Some(last) = run.attempts.last() else { return false };
    let (Some(plan), Some(report)) = (&last.validated, &last.report) else {
        return false;
    };
    if !report.succeeded() {
        return false;
    }
    let steps = &plan.plan.steps;
    let Some(open) = steps.iter().position(|s| s.action == Action::OpenGripper) else {
        return false;
    };
    let Some(drop) = steps[..open]
        .iter()
        .rev()
        .find(|s| s.action == Action::MoveToPose)
        .and_then(|s| s.params.xyz_mm)
    else {
        return false;
    };
    let released = world
        .trace
        .iter()
        .any(|e| matches!(e, TraceEvent::Release { tag_id: t, .. } if *t == tag_id));
    let rest = world.scene.object(tag_id).map(|o| o.position);
    released && rest.is_some_and(|p| !world.arm.gripper.holding.is_some_and(|h| h == tag_id) && p.distance_xy(drop) <= TOLERANCE_MM)
}

/// A batch of trials and the resulting table.
#[derive(Debug)]
pub struct TrialBatch {
    pub table: MetricsTable,
    pub trials: Vec<TrialOutcome>,
}

/// Runs every trial of `scenario` with a fresh world each, in seed order.
pub fn run_trials(scenario: &LoadedScenario, config: &HarnessConfig, generator: &dyn PlanGenerator) -> Result<TrialBatch, HarnessError> {
    let pipeline = Pipeline::new(config.clone())?;
    Ok(run_trials_with(scenario, &pipeline, generator, &mut crate::executor::AutoApprove))
}

/// [`run_trials`] on a prepared pipeline, with hooks shared by every trial.
pub fn run_trials_with(scenario: &LoadedScenario, pipeline: &Pipeline, generator: &dyn PlanGenerator, hooks: &mut dyn PipelineHooks) -> TrialBatch {
    let s = &scenario.scenario;
    let mut trials = Vec::with_capacity(s.trials);
    for (i, &seed) in s.seeds.iter().take(s.trials).enumerate() {
        let mut scene = scenario.scene.clone();
        scene.rng_seed = seed;
        let mut world = pipeline.new_world(scene);
        let run = pipeline.run(&mut world, &s.instruction, generator, hooks);
        let record = score_trial(i, s, &run, &world);
        log::info!("trial {}: {:?}", i + 1, record);
        trials.push(TrialOutcome { record, run, world });
    }
    let table = MetricsTable::new(trials.iter().map(|t| t.record.clone()).collect());
    TrialBatch { table, trials }
}
