//! Line-oriented session: each line is an instruction or a `:command`.

use std::io::{self, BufRead, Write};

use super::{Pacer, Pipeline, PipelineHooks};
use crate::executor::{ExecutionObserver, ExecutionReport, TraceEvent, World};
use crate::planner::{ActionStep, PlanError, PlanGenerator, PlanningContext, ValidatedPlan};

const USAGE: &str = "\
commands:
  <instruction>   plan and execute, e.g. \"pick up the screwdriver\"
  :report         print the last execution report
  :state          print the arm state and current observations
  :help           show this message
  :quit           leave the session";

pub struct ReplSession {
    pub pipeline: Pipeline,
    pub world: World,
    pub generator: Box<dyn PlanGenerator>,
    pub last_report: Option<ExecutionReport>,
    pub pacer: Pacer,
}

impl ReplSession {
    /// Takes one frame up front so `:state` has something to show.
    pub fn new(pipeline: Pipeline, mut world: World, generator: Box<dyn PlanGenerator>) -> Self {
        if let Err(e) = pipeline.executor.capture(&mut world) {
            log::warn!("initial capture failed: {e}");
        }
        Self {
            pipeline,
            world,
            generator,
            last_report: None,
            pacer: Pacer::default(),
        }
    }
}

struct ReplHooks<'a, R, W> {
    input: &'a mut R,
    out: &'a mut W,
    pacer: &'a mut Pacer,
}

impl<R: BufRead, W: Write> ExecutionObserver for ReplHooks<'_, R, W> {
    fn confirm(&mut self, index: usize, step: &ActionStep, reason: &str) -> bool {
        let _ = write!(self.out, "confirm step {index} {} ({reason})? [y/n] ", step.action);
        let _ = self.out.flush();
        let mut line = String::new();
        let answer = match self.input.read_line(&mut line) {
            Ok(0) | Err(_) => false,
            Ok(_) => matches!(line.trim().to_ascii_lowercase().as_str(), "y" | "yes"),
        };
        let _ = writeln!(self.out, "{}", if answer { "approved" } else { "denied" });
        answer
    }

    fn on_event(&mut self, event: &TraceEvent) {
        self.pacer.pace(event);
        if matches!(event, TraceEvent::Tick { .. }) {
            return;
        }
        if let Ok(json) = serde_json::to_string(event) {
            let _ = writeln!(self.out, "  {json}");
        }
    }
}

impl<R: BufRead, W: Write> PipelineHooks for ReplHooks<'_, R, W> {
    fn on_context(&mut self, ctx: &PlanningContext) {
        let _ = writeln!(self.out, "retrieved:");
        for d in &ctx.knowledge {
            let _ = writeln!(self.out, "  {} ({}, {:.3})", d.id, d.category, d.score);
        }
        if let Some(f) = &ctx.failure {
            let _ = writeln!(self.out, "replanning after {}: {}", f.kind, f.message);
        }
    }

    fn on_plan(&mut self, raw: &str, verdict: &Result<ValidatedPlan, PlanError>) {
        let _ = writeln!(self.out, "plan:\n{}", raw.trim_end());
        let _ = match verdict {
            Ok(p) => writeln!(self.out, "validation: ok ({} steps)", p.plan.steps.len()),
            Err(e) => writeln!(self.out, "validation: rejected: {e}"),
        };
    }

    fn on_report(&mut self, report: &ExecutionReport) {
        let _ = writeln!(self.out, "status: {:?} after {:.2} s", report.status, report.duration);
    }
}

/// Runs until `:quit` or end of input.
pub fn run_repl<R: BufRead, W: Write>(session: &mut ReplSession, mut input: R, mut out: W) -> io::Result<()> {
    writeln!(out, "ragarm interactive session; :help lists commands")?;
    loop {
        write!(out, "> ")?;
        out.flush()?;
        let mut line = String::new();
        if input.read_line(&mut line)? == 0 {
            writeln!(out)?;
            return Ok(());
        }
        let line = line.trim();
        match line {
            "" => {}
            ":quit" | ":q" | ":exit" => return Ok(()),
            ":help" => writeln!(out, "{USAGE}")?,
            ":report" => match &session.last_report {
                Some(r) => writeln!(out, "{}", serde_json::to_string_pretty(r).map_err(io::Error::other)?)?,
                None => writeln!(out, "no report yet")?,
            },
            ":state" => {
                writeln!(out, "{}", serde_json::to_string(&session.world.arm.summary()).map_err(io::Error::other)?)?;
                for o in session.world.perception.store().snapshot() {
                    writeln!(out, "  {} (tag {}) at {} conf {:.2}", o.label, o.tag_id, o.position_xyz, o.confidence)?;
                }
            }
            cmd if cmd.starts_with(':') => writeln!(out, "unknown command {cmd}\n{USAGE}")?,
            instruction => {
                let mut hooks = ReplHooks {
                    input: &mut input,
                    out: &mut out,
                    pacer: &mut session.pacer,
                };
                let run = session
                    .pipeline
                    .run(&mut session.world, instruction, session.generator.as_ref(), &mut hooks);
                if let Some(e) = &run.final_error {
                    writeln!(out, "stopped: {e}")?;
                }
                if let Some(r) = run.last_report() {
                    session.last_report = Some(r.clone());
                }
            }
        }
    }
}
