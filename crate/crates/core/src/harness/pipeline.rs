use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::executor::{AutoApprove, ExecutionObserver, ExecutionReport, Executor, ExecutorConfig, PlanStatus, World};
use crate::knowledge::{KnowledgeBase, DEFAULT_TOP_K};
use crate::perception::{PerceptionConfig, SimScene};
use crate::planner::{
    build_context, parse_plan, summarize_env, validate_plan, ConstraintBlock, FailureContext, FailureKind, ParamBounds, PlanError, PlanGenerator,
    PlannerError, PlanningContext, Reprompter, ScanAttempt, ScanLadder, ValidatedPlan,
};
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarnessConfig {
    pub executor: ExecutorConfig,
    pub perception: PerceptionConfig,
    pub params: ParamBounds,
    pub top_k: usize,
    pub max_reprompts: usize,
    pub home_xyz_mm: Vec3,
    pub ladder: ScanLadder,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            executor: ExecutorConfig::default(),
            perception: PerceptionConfig::default(),
            params: ParamBounds::default(),
            top_k: DEFAULT_TOP_K,
            max_reprompts: 2,
            home_xyz_mm: Vec3::new(400.0, 0.0, 350.0),
            ladder: ScanLadder::default(),
        }
    }
}

/// Callbacks around each planning attempt, on top of execution events.
pub trait PipelineHooks: ExecutionObserver {
    fn on_context(&mut self, _ctx: &PlanningContext) {}
    fn on_plan(&mut self, _raw: &str, _verdict: &Result<ValidatedPlan, PlanError>) {}
    fn on_report(&mut self, _report: &ExecutionReport) {}
}

impl PipelineHooks for AutoApprove {}

/// One pass of retrieve → assemble → generate → validate → execute.
#[derive(Debug, Clone)]
pub struct Attempt {
    pub context: PlanningContext,
    pub raw_plan: Option<String>,
    pub validated: Option<ValidatedPlan>,
    /// Generation or validation error, when the attempt stopped early.
    pub error: Option<String>,
    pub report: Option<ExecutionReport>,
}

#[derive(Debug, Clone, Default)]
pub struct PipelineRun {
    pub attempts: Vec<Attempt>,
    /// Reprompts requested, including one refused for exhausted strategies.
    pub reprompts: usize,
    /// Every scan strategy that ran to completion without a find.
    pub attempted_scans: Vec<ScanAttempt>,
    /// Why the loop stopped, when it did not end in a successful report.
    pub final_error: Option<String>,
}

impl PipelineRun {
    pub fn succeeded(&self) -> bool {
        self.attempts.last().and_then(|a| a.report.as_ref()).is_some_and(|r| r.succeeded())
    }

    pub fn last_report(&self) -> Option<&ExecutionReport> {
        self.attempts.iter().rev().find_map(|a| a.report.as_ref())
    }
}

/// Knowledge base, executor and configuration shared by every run.
#[derive(Debug)]
pub struct Pipeline {
    pub config: HarnessConfig,
    pub executor: Executor,
    pub knowledge: KnowledgeBase,
}

impl Pipeline {
    pub fn new(config: HarnessConfig) -> Result<Self, HarnessError> {
        Self::with_knowledge(config, KnowledgeBase::seed()?)
    }

    pub fn with_knowledge(config: HarnessConfig, knowledge: KnowledgeBase) -> Result<Self, HarnessError> {
        let executor = Executor::new(config.executor.clone())?;
        Ok(Self { config, executor, knowledge })
    }

    pub fn new_world(&self, scene: SimScene) -> World {
        World::new(scene, self.config.perception.clone(), self.config.home_xyz_mm)
    }

    pub fn constraints(&self) -> ConstraintBlock {
        ConstraintBlock {
            limits: *self.executor.limits(),
            workspace: *self.executor.bounds(),
            params: self.config.params,
        }
    }

    fn context(
        &self,
        world: &World,
        instruction: &str,
        failure: Option<FailureContext>,
        reprompter: &mut Reprompter,
    ) -> Result<PlanningContext, PlannerError> {
        let env = summarize_env(&world.perception.store().snapshot(), world.now(), *self.executor.bounds());
        let k = self.config.top_k;
        match failure {
            None => build_context(&self.knowledge, k, instruction, env, self.constraints()),
            Some(f) => reprompter.reprompt(&self.knowledge, k, instruction, env, self.constraints(), &self.config.ladder, f),
        }
    }

    /// Plans and executes `instruction`, reprompting with the failure
    /// context after a failed or invalid plan, at most `max_reprompts` times.
    pub fn run(&self, world: &mut World, instruction: &str, generator: &dyn PlanGenerator, hooks: &mut dyn PipelineHooks) -> PipelineRun {
        let mut run = PipelineRun::default();
        if let Err(e) = self.executor.capture(world) {
            log::warn!("initial capture failed: {e}");
        }
        let mut reprompter = Reprompter::default();
        let mut failure: Option<FailureContext> = None;
        loop {
            if failure.is_some() && reprompter.count >= self.config.max_reprompts {
                run.final_error = failure.map(|f| format!("reprompt limit reached after {}: {}", f.kind, f.message));
                break;
            }
            let ctx = match self.context(world, instruction, failure.take(), &mut reprompter) {
                Ok(c) => c,
                Err(e) => {
                    run.final_error = Some(e.to_string());
                    break;
                }
            };
            hooks.on_context(&ctx);
            let raw = match generator.generate(&ctx, instruction) {
                Ok(r) => r,
                Err(e) => {
                    run.final_error = Some(e.to_string());
                    run.attempts.push(Attempt {
                        context: ctx,
                        raw_plan: None,
                        validated: None,
                        error: Some(e.to_string()),
                        report: None,
                    });
                    break;
                }
            };
            let verdict = parse_plan(&raw).and_then(|p| {
                let c = self.constraints();
                validate_plan(&p, &c.limits, &c.workspace, &c.params)
            });
            hooks.on_plan(&raw, &verdict);
            let plan = match verdict {
                Ok(p) => p,
                Err(e) => {
                    failure = Some(FailureContext::new(FailureKind::InvalidPlan, e.to_string()));
                    run.attempts.push(Attempt {
                        context: ctx,
                        raw_plan: Some(raw),
                        validated: None,
                        error: Some(e.to_string()),
                        report: None,
                    });
                    continue;
                }
            };
            let report = self.executor.execute_plan(world, &plan, hooks);
            hooks.on_report(&report);
            let done = report.succeeded();
            let declined = report.status == PlanStatus::OperatorAbort;
            failure = report.failure.clone();
            run.attempts.push(Attempt {
                context: ctx,
                raw_plan: Some(raw),
                validated: Some(plan),
                error: None,
                report: Some(report),
            });
            if done {
                break;
            }
            if declined {
                run.final_error = Some("operator declined a step".into());
                break;
            }
            if failure.is_none() {
                run.final_error = Some("plan failed without a failure context".into());
                break;
            }
        }
        run.reprompts = reprompter.count;
        run.attempted_scans = reprompter.attempted;
        run
    }
}
