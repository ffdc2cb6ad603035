mod gantt;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::{json, Value};

use contsched::fixtures::{random_scenario, RandomSpec};
use contsched::model::ParseError;
use contsched::optimizer::DynamicPhase;
use contsched::timeline::TimelineError;
use contsched::{
    available_workers, baselines, evaluate, group_layers, objective_value, optimize_anytime, parse_scenario,
    run_dynamic, Incumbent, Objective, RawLayer, Scenario, Schedule, SearchConfig, Timeline,
};

#[derive(Parser)]
#[command(name = "contsched", version, about = "Contention-aware concurrent DNN scheduling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fuse a raw layer list into schedulable groups.
    Group {
        #[arg(long, value_name = "PATH")]
        layers: PathBuf,
    },
    /// Evaluate a schedule and print its timeline.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, value_name = "PATH")]
        schedule: PathBuf,
        /// Write an SVG Gantt chart.
        #[arg(long, value_name = "PATH")]
        gantt: Option<PathBuf>,
    },
    /// Search for an optimal schedule.
    Optimize {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, value_name = "N")]
        budget_ms: Option<u64>,
        #[arg(long, value_name = "N")]
        workers: Option<usize>,
        /// Stream incumbents to stderr as JSON lines.
        #[arg(long)]
        anytime: bool,
        /// Write the incumbent trace as JSON.
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        gantt: Option<PathBuf>,
    },
    /// List baseline schedules with their objectives.
    Baselines {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// Re-optimize over a sequence of scenarios.
    Dynamic {
        #[arg(long, value_name = "PATH")]
        sequence: PathBuf,
        #[arg(long, value_name = "N")]
        workers: Option<usize>,
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
    },
    /// Print a seeded random scenario.
    Genfixture {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 12)]
        max_total_groups: usize,
        #[arg(long, default_value_t = 2)]
        accelerators: usize,
        #[arg(long)]
        identity_contention: bool,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    #[arg(long, value_name = "PATH")]
    scenario: PathBuf,
    #[arg(long, value_name = "max_throughput|minmax_latency")]
    objective: Option<Objective>,
    #[arg(long, value_name = "X")]
    epsilon_ms: Option<f64>,
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Domain(anyhow::Error),
    Usage(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

type CliResult = Result<Value, Failure>;

fn domain(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Domain(e.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(out) => {
            emit(&out);
            ExitCode::SUCCESS
        }
        Err(Failure::Domain(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Writes one JSON document to stdout; a closed pipe is not an error.
fn emit(out: &Value) {
    let text = serde_json::to_string_pretty(out).expect("serializable output");
    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(stdout, "{text}").and_then(|_| stdout.flush());
}

fn run(command: Command) -> CliResult {
    match command {
        Command::Group { layers } => {
            let text = read(&layers)?;
            let layers: Vec<RawLayer> =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", layers.display()))?;
            let groups = group_layers(&layers).map_err(domain)?;
            Ok(json!(groups))
        }
        Command::Simulate {
            scenario,
            schedule,
            gantt,
        } => {
            let s = load_scenario(&scenario)?;
            let text = read(&schedule)?;
            let sched = Schedule::from_json(&text)
                .map_err(|e| anyhow!(e).context(format!("parsing {}", schedule.display())))?;
            let t = evaluate(&s, &sched).map_err(domain)?;
            if let Some(path) = gantt {
                write(&path, &gantt::render(&s, &t))?;
            }
            let out = timeline_json(&s, &t);
            if !t.feasible {
                emit(&out);
                return Err(domain(anyhow!(
                    "schedule is infeasible: {} same-accelerator overlap(s) exceed epsilon",
                    t.violations.len()
                )));
            }
            Ok(out)
        }
        Command::Optimize {
            scenario,
            budget_ms,
            workers,
            anytime,
            trace,
            gantt,
        } => {
            let s = load_scenario(&scenario)?;
            let config = SearchConfig::default()
                .with_workers(workers.unwrap_or_else(available_workers))
                .with_budget_ms(budget_ms);
            let mut incumbents: Vec<Incumbent> = Vec::new();
            let result = optimize_anytime(&s, &config, |inc| {
                if anytime {
                    let line = serde_json::to_string(inc).expect("serializable incumbent");
                    let mut err = std::io::stderr().lock();
                    let _ = writeln!(err, "{line}");
                }
                incumbents.push(inc.clone());
            })
            .map_err(domain)?;
            if let Some(path) = trace {
                write(&path, &serde_json::to_string_pretty(&incumbents).expect("serializable trace"))?;
            }
            if let Some(path) = gantt {
                write(&path, &gantt::render(&s, &result.timeline))?;
            }
            eprintln!(
                "searched {} nodes in {:.1} ms",
                result.nodes_explored, result.wall_time_ms
            );
            Ok(json!({
                "objective_kind": s.objective().as_str(),
                "objective": result.objective,
                "proven_optimal": result.proven_optimal,
                "nodes": result.nodes_explored,
                "schedule": result.schedule.to_json_value(),
                "latencies_ms": result.timeline.latencies(),
                "makespan_ms": result.timeline.makespan_ms,
            }))
        }
        Command::Baselines { scenario } => {
            let s = load_scenario(&scenario)?;
            let list: Vec<Value> = baselines(&s)
                .into_iter()
                .map(|(label, sched)| {
                    let t = evaluate(&s, &sched).expect("baselines are structurally valid");
                    json!({
                        "label": label,
                        "schedule": sched.to_json_value(),
                        "feasible": t.feasible,
                        "objective": objective_value(&t, s.objective()).ok(),
                        "latencies_ms": t.latencies(),
                    })
                })
                .collect();
            Ok(json!({ "objective_kind": s.objective().as_str(), "baselines": list }))
        }
        Command::Dynamic {
            sequence,
            workers,
            trace,
        } => {
            let (phases, budget) = load_sequence(&sequence)?;
            let reports = run_dynamic(&phases, budget, workers.unwrap_or_else(available_workers)).map_err(domain)?;
            if let Some(path) = trace {
                write(&path, &serde_json::to_string_pretty(&reports).expect("serializable reports"))?;
            }
            let summary: Vec<Value> = reports
                .iter()
                .map(|r| {
                    json!({
                        "total_groups": r.total_groups,
                        "steady_state_objective": r.steady_state_objective,
                        "proven_optimal": r.proven_optimal,
                        "incumbents": r.trace.len(),
                        "time_to_optimal_ms": r.time_to_optimal_ms,
                        "schedule": r.trace.last().map(|i| i.schedule.to_json_value()),
                    })
                })
                .collect();
            Ok(json!({ "phases": summary }))
        }
        Command::Genfixture {
            seed,
            max_total_groups,
            accelerators,
            identity_contention,
        } => {
            if accelerators == 0 || max_total_groups < 2 {
                return Err(Failure::Usage(anyhow!(
                    "need at least one accelerator and two groups"
                )));
            }
            let spec = RandomSpec {
                accelerators,
                max_total_groups,
                identity_contention,
                ..RandomSpec::default()
            };
            let text = random_scenario(seed, &spec).to_json();
            Ok(serde_json::from_str(&text).expect("scenario JSON"))
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(Failure::Usage)
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(Failure::Usage)
}

fn scenario_from_text(text: &str, path: &Path) -> Result<Scenario, Failure> {
    parse_scenario(text).map_err(|e| {
        let ctx = format!("{}", path.display());
        match e {
            ParseError::Syntax { .. } => Failure::Usage(anyhow!(e).context(ctx)),
            ParseError::Invalid(_) => Failure::Domain(anyhow!(e).context(ctx)),
        }
    })
}

fn load_scenario(args: &ScenarioArgs) -> Result<Scenario, Failure> {
    let text = read(&args.scenario)?;
    let s = scenario_from_text(&text, &args.scenario)?;
    apply_overrides(s, args.objective, args.epsilon_ms)
}

fn apply_overrides(mut s: Scenario, objective: Option<Objective>, epsilon: Option<f64>) -> Result<Scenario, Failure> {
    if let Some(o) = objective {
        s = s.with_objective(o);
    }
    if let Some(e) = epsilon {
        s = s.with_epsilon(e).map_err(|e| Failure::Usage(anyhow!(e)))?;
    }
    Ok(s)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SequenceFile {
    budget_per_scenario_ms: u64,
    phases: Vec<PhaseFile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PhaseFile {
    /// Resolved relative to the sequence file.
    scenario: PathBuf,
    dwell_ms: u64,
}

fn load_sequence(path: &Path) -> Result<(Vec<DynamicPhase>, u64), Failure> {
    let text = read(path)?;
    let file: SequenceFile =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut phases = Vec::with_capacity(file.phases.len());
    for p in file.phases {
        let scenario_path = base.join(&p.scenario);
        let text = read(&scenario_path)?;
        phases.push(DynamicPhase {
            scenario: scenario_from_text(&text, &scenario_path)?,
            dwell_ms: p.dwell_ms,
        });
    }
    Ok((phases, file.budget_per_scenario_ms))
}

fn timeline_json(s: &Scenario, t: &Timeline) -> Value {
    let objective = |o| match objective_value(t, o) {
        Ok(v) => json!(v),
        Err(TimelineError::InfeasibleTimeline) => Value::Null,
        Err(e) => json!(e.to_string()),
    };
    json!({
        "feasible": t.feasible,
        "latencies_ms": t.latencies(),
        "makespan_ms": t.makespan_ms,
        "objectives": {
            "max_throughput": objective(Objective::MaxThroughput),
            "minmax_latency": objective(Objective::MinMaxLatency),
        },
        "objective_kind": s.objective().as_str(),
        "events_ms": t.events,
        "dnns": t.dnns,
        "groups": t.groups,
        "violations": t.violations,
    })
}
