use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ragarm_core::executor::LimitsConfig;
use ragarm_core::harness::{emit_table, run_repl, run_trials_with, HarnessConfig, Pacer, Pipeline, PlannerKind, ReplSession, Scenario, TableFormat};
use ragarm_core::knowledge::KnowledgeBase;
use ragarm_core::perception::SimScene;
use ragarm_core::planner::{parse_plan, validate_plan, ParamBounds};

const DEFAULT_SCENE: &str = include_str!("../../core/data/scenes/clear.json");

#[derive(Debug, Parser)]
#[command(
    name = "ragarm",
    version,
    about = "Retrieval-grounded planning and safety-gated execution on a simulated arm"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Safety limits and workspace bounds (JSON).
    #[arg(long, global = true, value_name = "FILE")]
    limits: Option<PathBuf>,
    /// Saved knowledge index to use instead of the built-in corpus.
    #[arg(long, global = true, value_name = "FILE")]
    knowledge: Option<PathBuf>,
    /// Plan generator; `external` reads RAGARM_PLANNER_URL and RAGARM_PLANNER_TOKEN.
    #[arg(long, global = true, value_parser = parse_planner)]
    planner: Option<PlannerKind>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario's trials and print the metrics table.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value = "plain")]
        format: TableFormat,
        /// Use seeds base, base+1, ... instead of the scenario's list.
        #[arg(long, value_name = "BASE")]
        seed: Option<u64>,
        /// Write one JSON-lines execution trace per trial into this directory.
        #[arg(long, value_name = "DIR")]
        trace: Option<PathBuf>,
        /// Replay execution at this multiple of real time.
        #[arg(long, value_name = "SPEED")]
        pace: Option<f64>,
    },
    /// Interactive session with confirmation before high-risk steps.
    Repl {
        /// Scene to load; defaults to the built-in clear table.
        #[arg(long, value_name = "FILE")]
        scene: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_name = "SPEED")]
        pace: Option<f64>,
        /// Write the session's execution trace here on exit.
        #[arg(long, value_name = "FILE")]
        trace: Option<PathBuf>,
    },
    /// Check a plan file against the schema and every limit.
    Validate { plan: PathBuf },
    /// Show which knowledge documents a query retrieves.
    Query {
        text: String,
        #[arg(short, long)]
        k: Option<usize>,
        /// Print the retrieved document text as well.
        #[arg(long)]
        full: bool,
    },
}

fn parse_planner(s: &str) -> Result<PlannerKind, String> {
    match s.to_ascii_lowercase().as_str() {
        "template" => Ok(PlannerKind::Template),
        "external" | "http" => Ok(PlannerKind::External),
        other => Err(format!("unknown planner {other:?} (template, external)")),
    }
}

impl Common {
    fn config(&self) -> Result<HarnessConfig> {
        let mut config = HarnessConfig::default();
        if let Some(path) = &self.limits {
            let limits = LimitsConfig::load(path)?;
            config.executor.limits = limits.limits;
            config.executor.workspace = limits.workspace;
        }
        Ok(config)
    }

    fn knowledge(&self) -> Result<KnowledgeBase> {
        Ok(match &self.knowledge {
            Some(path) => KnowledgeBase::load(path)?,
            None => KnowledgeBase::seed()?,
        })
    }

    fn pipeline(&self) -> Result<Pipeline> {
        Ok(Pipeline::with_knowledge(self.config()?, self.knowledge()?)?)
    }
}

fn run(common: &Common, scenario: &Path, format: TableFormat, seed: Option<u64>, trace: Option<&Path>, pace: Option<f64>) -> Result<()> {
    let mut loaded = Scenario::load(scenario)?;
    if let Some(base) = seed {
        loaded = loaded.with_seed_base(base);
    }
    let pipeline = common.pipeline()?;
    let kind = common.planner.unwrap_or(loaded.scenario.planner);
    let generator = kind.build(loaded.scene.vocabulary())?;
    let mut pacer = Pacer::new(pace.unwrap_or(0.0));
    let batch = run_trials_with(&loaded, &pipeline, generator.as_ref(), &mut pacer);

    if let Some(dir) = trace {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (i, t) in batch.trials.iter().enumerate() {
            let path = dir.join(format!("trial_{:02}.jsonl", i + 1));
            fs::write(&path, t.trace_jsonl()).with_context(|| format!("writing {}", path.display()))?;
        }
        log::info!("wrote {} traces to {}", batch.trials.len(), dir.display());
    }
    print!("{}", emit_table(&batch.table, format));
    Ok(())
}

fn repl(common: &Common, scene: Option<&Path>, seed: Option<u64>, pace: Option<f64>, trace: Option<&Path>) -> Result<()> {
    let mut scene = match scene {
        Some(path) => SimScene::load(path)?,
        None => SimScene::from_json(DEFAULT_SCENE)?,
    };
    if let Some(seed) = seed {
        scene.rng_seed = seed;
    }
    let pipeline = common.pipeline()?;
    let generator = common.planner.unwrap_or_default().build(scene.vocabulary())?;
    let world = pipeline.new_world(scene);
    let mut session = ReplSession::new(pipeline, world, generator);
    session.pacer = Pacer::new(pace.unwrap_or(0.0));

    let stdin = io::stdin();
    run_repl(&mut session, stdin.lock(), io::stdout().lock())?;
    if let Some(path) = trace {
        fs::write(path, session.world.trace_jsonl()).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

/// Returns whether the plan passed.
fn validate(common: &Common, path: &Path) -> Result<bool> {
    let raw = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let config = common.config()?;
    let ex = &config.executor;
    let bounds: ParamBounds = config.params;
    let verdict = parse_plan(&raw).and_then(|p| validate_plan(&p, &ex.limits, &ex.workspace, &bounds));
    let mut out = io::stdout().lock();
    match verdict {
        Ok(plan) => {
            writeln!(out, "{}: ok ({} steps)", path.display(), plan.plan.steps.len())?;
            for (i, (step, tags)) in plan.plan.steps.iter().zip(&plan.tags).enumerate() {
                let mut notes = Vec::new();
                if tags.high_risk {
                    notes.push("confirm");
                }
                if tags.perception_sync {
                    notes.push("sync");
                }
                writeln!(out, "  {i:>2} {:<16} {}", step.action.to_string(), notes.join(" "))?;
            }
            Ok(true)
        }
        Err(e) => {
            writeln!(out, "{}: rejected", path.display())?;
            for issue in &e.issues {
                writeln!(out, "  {issue}")?;
            }
            Ok(false)
        }
    }
}

fn query(common: &Common, text: &str, k: Option<usize>, full: bool) -> Result<()> {
    let kb = common.knowledge()?;
    let k = k.unwrap_or(common.config()?.top_k);
    if k == 0 {
        bail!("k must be at least 1");
    }
    let result = kb.retrieve(text, k)?;
    let mut out = io::stdout().lock();
    for (rank, (hit, doc)) in result.hits.iter().zip(kb.resolve(&result)).enumerate() {
        writeln!(out, "{:>2}  {:.4}  {:<28} {}", rank + 1, hit.score, hit.id, doc.category)?;
        if full {
            writeln!(out, "    {}", doc.text)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let c = &cli.common;
    let outcome = match &cli.command {
        Command::Run {
            scenario,
            format,
            seed,
            trace,
            pace,
        } => run(c, scenario, *format, *seed, trace.as_deref(), *pace).map(|()| true),
        Command::Repl { scene, seed, pace, trace } => repl(c, scene.as_deref(), *seed, *pace, trace.as_deref()).map(|()| true),
        Command::Validate { plan } => validate(c, plan),
        Command::Query { text, k, full } => query(c, text, *k, *full).map(|()| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
