mod common;

use std::cell::Cell;
use std::io::Cursor;

use common::*;
use ragarm_core::executor::{PlanStatus, TraceEvent};
use ragarm_core::harness::*;
use ragarm_core::planner::{FailureKind, PlanGenerator, PlannerError, PlanningContext, TemplateGenerator};
use ragarm_core::Vec3;

fn load(rel: &str) -> LoadedScenario {
    Scenario::load(&data(&format!("scenarios/{rel}"))).unwrap()
}

fn batch(s: &LoadedScenario) -> TrialBatch {
    run_trials(s, &HarnessConfig::default(), &TemplateGenerator::new(s.scene.vocabulary())).unwrap()
}

#[test]
fn accuracy_examples() {
    let gt = Vec3::new(450.0, -100.0, 60.0);
    assert_eq!(approach_accuracy(Vec3::new(450.0, -100.0, 100.0), gt, 40.0, 100.0), 100.0);
    assert_eq!(approach_accuracy(Vec3::new(550.0, -100.0, 100.0), gt, 40.0, 100.0), 0.0);
    assert_eq!(approach_accuracy(Vec3::new(900.0, -100.0, 100.0), gt, 40.0, 100.0), 0.0);
    let a = approach_accuracy(Vec3::new(450.0, -87.1, 100.0), gt, 40.0, 100.0);
    assert!((a - 87.1).abs() < 1e-9, "{a}");
}

#[test]
fn scenario_errors_name_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    let mut s = load("clear_pick_place.json").scenario;
    s.scene = "missing.json".into();
    std::fs::write(&path, serde_json::to_string(&s).unwrap()).unwrap();
    let err = Scenario::load(&path).unwrap_err();
    assert!(matches!(&err, HarnessError::ScenarioLoad { path: p, .. } if p == &path), "{err}");

    let mut s = load("clear_pick_place.json").scenario;
    s.scene = data("scenes/clear.json");
    s.seeds.truncate(3);
    std::fs::write(&path, serde_json::to_string(&s).unwrap()).unwrap();
    assert!(Scenario::load(&path).unwrap_err().to_string().contains("3 seeds for 10 trials"));

    std::fs::write(&path, "{").unwrap();
    assert!(matches!(Scenario::load(&path), Err(HarnessError::ScenarioLoad { .. })));
}

#[test]
fn seed_base_rewrites_seeds() {
    let s = load("clear_pick_place.json").with_seed_base(100);
    assert_eq!(s.scenario.seeds, (100..110).collect::<Vec<u64>>());
}

#[test]
fn pick_place_implies_validity_and_scan() {
    for name in ["clear_pick_place.json", "occlusion.json", "target_removed.json"] {
        for t in batch(&load(name)).trials {
            let r = &t.record;
            assert!(!r.pick_place || (r.plan_validity && r.scan), "{name} trial {}: {r:?}", r.index);
            assert!((0.0..=100.0).contains(&r.approach_accuracy));
        }
    }
}

#[test]
fn summary_is_recomputed_from_rows() {
    let b = batch(&load("clear_pick_place.json"));
    let rows = &b.table.rows;
    assert_eq!(rows.len(), 10);
    assert_eq!(b.table.summary, Summary::of(rows));
    assert_eq!(b.table.summary.plan_validity_pct, 100.0);
    assert_eq!(b.table.summary.pick_place_pct, 100.0);
    assert!(b.table.summary.mean_accuracy > 95.0);
    assert_eq!(rows.iter().map(|r| r.index).collect::<Vec<_>>(), (1..=10).collect::<Vec<_>>());
}

#[test]
fn different_seeds_change_noisy_results() {
    let mut s = load("clear_noisy_accuracy.json");
    s.scenario.trials = 5;
    let a = batch(&s);
    let b = batch(&s.clone().with_seed_base(1000));
    assert_ne!(a.table, b.table);
}

#[test]
fn tables_render_in_every_format() {
    let b = batch(&load("occlusion.json"));
    let md = emit_table(&b.table, TableFormat::Markdown);
    assert!(md.starts_with("| # | Plan Validity | Scan | Approach Accuracy (%) | P&P | Time Frame |"));
    assert!(md.lines().last().unwrap().starts_with("| Summary | 100% | 100% |"));
    let plain = emit_table(&b.table, TableFormat::Plain);
    assert_eq!(plain.lines().count(), 2 + 10 + 1);
    assert_eq!("md".parse::<TableFormat>().unwrap(), TableFormat::Markdown);
    assert!("xml".parse::<TableFormat>().is_err());
}

/// Returns an invalid plan the first time, then defers to the template.
struct FlakyGenerator {
    inner: TemplateGenerator,
    calls: Cell<usize>,
}

impl PlanGenerator for FlakyGenerator {
    fn generate(&self, ctx: &PlanningContext, instruction: &str) -> Result<String, PlannerError> {
        self.calls.set(self.calls.get() + 1);
        if self.calls.get() == 1 {
            return Ok(r#"{"goal":"g","steps":[{"action":"TELEPORT"}]}"#.into());
        }
        self.inner.generate(ctx, instruction)
    }
}

struct BrokenGenerator;

impl PlanGenerator for BrokenGenerator {
    fn generate(&self, _: &PlanningContext, _: &str) -> Result<String, PlannerError> {
        Err(PlannerError::GenerationFailure("service unavailable".into()))
    }
}

#[test]
fn invalid_plan_is_reprompted() {
    let s = load("clear_pick_place.json");
    let pipeline = Pipeline::new(HarnessConfig::default()).unwrap();
    let mut w = pipeline.new_world(s.scene.clone());
    let gen = FlakyGenerator {
        inner: TemplateGenerator::new(s.scene.vocabulary()),
        calls: Cell::new(0),
    };
    let run = pipeline.run(&mut w, &s.scenario.instruction, &gen, &mut ragarm_core::executor::AutoApprove);
    assert!(run.succeeded());
    assert_eq!(run.attempts.len(), 2);
    assert_eq!(run.reprompts, 1);
    assert!(run.attempts[0].error.as_deref().unwrap().contains("TELEPORT"));
    assert_eq!(run.attempts[1].context.failure.as_ref().unwrap().kind, FailureKind::InvalidPlan);
    let record = score_trial(0, &s.scenario, &run, &w);
    assert!(!record.plan_validity, "an invalid attempt counts against validity");
}

#[test]
fn generation_failure_stops_the_loop() {
    let s = load("clear_pick_place.json");
    let pipeline = Pipeline::new(HarnessConfig::default()).unwrap();
    let mut w = pipeline.new_world(s.scene.clone());
    let run = pipeline.run(&mut w, "anything", &BrokenGenerator, &mut ragarm_core::executor::AutoApprove);
    assert_eq!(run.attempts.len(), 1);
    assert_eq!(run.reprompts, 0);
    assert!(run.final_error.unwrap().contains("service unavailable"));
}

#[test]
fn reprompt_limit_bounds_attempts() {
    let s = load("target_removed.json");
    for max in [0, 1, 2] {
        let config = HarnessConfig {
            max_reprompts: max,
            ..HarnessConfig::default()
        };
        let pipeline = Pipeline::new(config).unwrap();
        let mut w = pipeline.new_world(s.scene.clone());
        let gen = TemplateGenerator::new(s.scene.vocabulary());
        let run = pipeline.run(&mut w, &s.scenario.instruction, &gen, &mut ragarm_core::executor::AutoApprove);
        assert!(!run.succeeded());
        assert!(run.reprompts <= max);
        assert!(run.attempts.len() <= max + 1);
    }
}

fn repl_session(scene: &str) -> ReplSession {
    let scene = ragarm_core::perception::SimScene::load(&data(scene)).unwrap();
    let pipeline = Pipeline::new(HarnessConfig::default()).unwrap();
    let world = pipeline.new_world(scene.clone());
    ReplSession::new(pipeline, world, Box::new(TemplateGenerator::new(scene.vocabulary())))
}

fn repl(session: &mut ReplSession, script: &str) -> String {
    let mut out = Vec::new();
    run_repl(session, Cursor::new(script.to_string()), &mut out).unwrap();
    String::from_utf8(out).unwrap()
}

#[test]
fn repl_asks_before_closing_and_honours_denial() {
    let mut s = repl_session("scenes/clear.json");
    let out = repl(&mut s, "pick up the screwdriver\nn\n:quit\n");
    assert!(out.contains("retrieved:"), "{out}");
    assert!(out.contains("validation: ok"));
    let ask = out.find("confirm step").expect("confirmation prompt");
    assert!(
        out[ask..].starts_with("confirm step 2 CLOSE_GRIPPER") || out[ask..].contains("CLOSE_GRIPPER"),
        "{out}"
    );
    assert!(out.contains("denied"));
    assert!(out.contains("stopped: operator declined a step"));
    assert!(!s.world.trace.iter().any(|e| matches!(e, TraceEvent::Grasp { .. })));
    assert_eq!(s.last_report.as_ref().unwrap().status, PlanStatus::OperatorAbort);
}

#[test]
fn repl_approval_runs_the_grasp() {
    let mut s = repl_session("scenes/clear.json");
    let out = repl(&mut s, "pick up the screwdriver\ny\n:report\n");
    assert!(out.contains("approved"), "{out}");
    assert!(out.contains("status: Success"));
    assert!(s.world.trace.iter().any(|e| matches!(e, TraceEvent::Grasp { .. })));
    assert!(out.contains("\"status\": \"success\""));
}

#[test]
fn repl_commands() {
    let mut s = repl_session("scenes/clear.json");
    let out = repl(&mut s, ":report\n:frobnicate\n:state\n:help\n");
    assert!(out.contains("no report yet"));
    assert!(out.contains("unknown command :frobnicate\ncommands:"));
    assert!(out.contains("bottle (tag 1)"));
    assert!(out.matches(":quit           leave the session").count() == 2);
}
