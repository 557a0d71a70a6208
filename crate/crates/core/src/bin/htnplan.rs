//! Command-line front end: ground, solve, validate, benchmark and estimate.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use htnplan::bench::{render, run_bench};
use htnplan::ground::{ground, GroundOptions};
use htnplan::ground::actions::estimate_grounding_size;
use htnplan::parser::{parse_domain, parse_problem};
use htnplan::planner::{solve_ishop, solve_shop_lifted, Limits, LiftedOutcome, Outcome};
use htnplan::serialize::{parse_trace, serialize_ground, serialize_trace};
use htnplan::state::{applicable, apply, GroundProblem, Plan};
use htnplan::validate::{validate_plan, validate_trace};
use htnplan::{Domain, Problem};

const EXIT_SOLVED: u8 = 0;
const EXIT_UNSOLVABLE: u8 = 1;
const EXIT_TIMEOUT: u8 = 2;
const EXIT_INPUT_ERROR: u8 = 3;

#[derive(Parser)]
#[command(name = "htnplan", version, about = "Grounding-first HTN planning toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Instantiate and simplify a problem; print the grounding report.
    Ground {
        #[command(flatten)]
        input: Input,
        /// Write the serialized ground problem here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print per-schema instantiation counts without enumerating.
        #[arg(long)]
        estimate_only: bool,
        #[arg(long)]
        no_method_fixpoint: bool,
        /// Skip inertia-based simplification entirely.
        #[arg(long)]
        no_simplify: bool,
    },
    /// Ground (for ishop) and search; print the plan one action per line.
    Solve {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_enum, default_value_t = Planner::Ishop)]
        planner: Planner,
        /// Timeout in seconds.
        #[arg(long, default_value_t = 600)]
        timeout: u64,
        /// Decomposition depth cap.
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        no_method_fixpoint: bool,
        /// Write a JSON stats record here.
        #[arg(long)]
        stats: Option<PathBuf>,
        /// Write the plan here as well as to stdout.
        #[arg(long)]
        plan_out: Option<PathBuf>,
        /// Write the decomposition trace here (ishop only).
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Check a plan file (and optionally a trace file) against the problem.
    Validate {
        #[command(flatten)]
        input: Input,
        plan: PathBuf,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run the benchmark manifest and print score tables.
    Bench {
        manifest: PathBuf,
        /// Number of problems to run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Print the instantiation-count formula per operator and method schema.
    Estimate {
        #[command(flatten)]
        input: Input,
    },
}

#[derive(Args)]
struct Input {
    domain: PathBuf,
    problem: PathBuf,
}

#[derive(Copy, Clone, ValueEnum)]
enum Planner {
    /// Search over the instantiated problem.
    Ishop,
    /// Lifted baseline with runtime unification.
    Shop,
}

#[derive(Serialize)]
struct Stats {
    parse_ms: u128,
    ground_ms: u128,
    search_ms: u128,
    total_ms: u128,
    actions_before: u128,
    actions_after: usize,
    methods_before: u128,
    methods_after: usize,
    nodes_expanded: u64,
    plan_length: Option<usize>,
    exit_status: u8,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(EXIT_INPUT_ERROR)
        }
    }
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn write(path: &Path, content: &str) -> Result<(), String> {
    std::fs::write(path, content).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn load(input: &Input) -> Result<(Domain, Problem), String> {
    let domain = parse_domain(&read(&input.domain)?)
        .map_err(|e| format!("{}: {e}", input.domain.display()))?;
    let problem = parse_problem(&read(&input.problem)?, &domain)
        .map_err(|e| format!("{}: {e}", input.problem.display()))?;
    Ok((domain, problem))
}

fn estimate(problem: &Problem) -> String {
    // the problem's domain copy carries the hierarchy with objects merged in
    let domain = &problem.domain;
    let mut out = String::new();
    let mut total: u128 = 0;
    for op in &domain.operators {
        let n = estimate_grounding_size(&op.params, &domain.hierarchy);
        out.push_str(&format!("operator {}: {n}\n", op.name));
        total += n;
    }
    for m in &domain.methods {
        let n = estimate_grounding_size(&m.params, &domain.hierarchy);
        out.push_str(&format!("method {}: {n}\n", m.name));
        total += n;
    }
    out.push_str(&format!("total: {total}\n"));
    out
}

fn run(cli: Cli) -> Result<u8, String> {
    match cli.command {
        Command::Estimate { input } => {
            let (_, problem) = load(&input)?;
            print!("{}", estimate(&problem));
            Ok(0)
        }
        Command::Ground { input, out, estimate_only, no_method_fixpoint, no_simplify } => {
            let (_, problem) = load(&input)?;
            if estimate_only {
                print!("{}", estimate(&problem));
                return Ok(0);
            }
            let opts = GroundOptions {
                simplify: !no_simplify,
                method_fixpoint: !no_method_fixpoint,
                ..GroundOptions::default()
            };
            let (gp, report) = ground(&problem, &opts).map_err(|e| e.to_string())?;
            print!("{}", report.render());
            let serialized = serialize_ground(&gp);
            match out {
                Some(path) => write(&path, &serialized)?,
                None => print!("{serialized}"),
            }
            Ok(0)
        }
        Command::Solve {
            input,
            planner,
            timeout,
            depth,
            no_method_fixpoint,
            stats,
            plan_out,
            trace_out,
        } => solve(input, planner, timeout, depth, no_method_fixpoint, stats, plan_out, trace_out),
        Command::Validate { input, plan, trace } => {
            let (_, problem) = load(&input)?;
            let (gp, _) =
                ground(&problem, &GroundOptions::default()).map_err(|e| e.to_string())?;
            let plan = resolve_plan(&gp, &read(&plan)?)?;
            let trace_text = trace.as_deref().map(read).transpose()?;
            let result = validate_plan(&gp, &plan).and_then(|()| match &trace_text {
                Some(trace_text) => {
                    let trace = parse_trace(&gp, trace_text)
                        .map_err(|e| htnplan::validate::Violation { step: 0, reason: e })?;
                    validate_trace(&gp, &trace, &plan)
                }
                None => Ok(()),
            });
            match result {
                Ok(()) => {
                    println!("valid");
                    Ok(0)
                }
                Err(v) => {
                    println!("invalid: {v}");
                    Ok(1)
                }
            }
        }
        Command::Bench { manifest, jobs } => {
            let reports = run_bench(&manifest, jobs).map_err(|e| e.to_string())?;
            print!("{}", render(&reports));
            Ok(0)
        }
    }
}

/// Maps plan-file lines `(name arg …)` back to ground action indices by
/// simulating the trajectory; clause-split duplicates share effects, so any
/// applicable candidate is equivalent.
fn resolve_plan(gp: &GroundProblem, text: &str) -> Result<Plan, String> {
    let mut state = gp.state0.clone();
    let mut steps = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let sexpr = htnplan::sexpr::parse_one(line).map_err(|e| e.to_string())?;
        let items = sexpr.as_list().ok_or_else(|| format!("not an action: {line}"))?;
        let name = items
            .first()
            .and_then(|s| s.as_symbol())
            .ok_or_else(|| format!("not an action: {line}"))?;
        let args: Vec<&str> = items[1..].iter().filter_map(|s| s.as_symbol()).collect();
        let candidates: Vec<usize> = gp
            .actions
            .iter()
            .enumerate()
            .filter(|(_, a)| a.name == name && a.args.iter().map(String::as_str).eq(args.iter().copied()))
            .map(|(i, _)| i)
            .collect();
        if candidates.is_empty() {
            return Err(format!("no ground action matches {line}"));
        }
        let chosen = candidates
            .iter()
            .copied()
            .find(|&i| applicable(&gp.actions[i], &state))
            .unwrap_or(candidates[0]);
        state = apply(&gp.actions[chosen], &state);
        steps.push(chosen);
    }
    Ok(Plan { steps })
}

#[allow(clippy::too_many_arguments)]
fn solve(
    input: Input,
    planner: Planner,
    timeout: u64,
    depth: Option<usize>,
    no_method_fixpoint: bool,
    stats_path: Option<PathBuf>,
    plan_out: Option<PathBuf>,
    trace_out: Option<PathBuf>,
) -> Result<u8, String> {
    let total_start = Instant::now();
    let parse_start = Instant::now();
    let (_, problem) = load(&input)?;
    let parse_ms = parse_start.elapsed().as_millis();

    let mut limits = Limits {
        timeout: Some(Duration::from_secs(timeout)),
        ..Limits::default()
    };
    if let Some(d) = depth {
        limits.depth_cap = d;
    }

    let mut stats = Stats {
        parse_ms,
        ground_ms: 0,
        search_ms: 0,
        total_ms: 0,
        actions_before: 0,
        actions_after: 0,
        methods_before: 0,
        methods_after: 0,
        nodes_expanded: 0,
        plan_length: None,
        exit_status: EXIT_UNSOLVABLE,
    };

    let mut plan_text = String::new();
    let exit = match planner {
        Planner::Ishop => {
            let opts = GroundOptions {
                method_fixpoint: !no_method_fixpoint,
                ..GroundOptions::default()
            };
            let ground_start = Instant::now();
            let (gp, report) = ground(&problem, &opts).map_err(|e| e.to_string())?;
            stats.ground_ms = ground_start.elapsed().as_millis();
            stats.actions_before = report.operators.iter().map(|c| c.candidates).sum();
            stats.actions_after = gp.actions.len();
            stats.methods_before = report.methods.iter().map(|c| c.candidates).sum();
            stats.methods_after = gp.methods.len();

            let search_start = Instant::now();
            let result = solve_ishop(&gp, &limits);
            stats.search_ms = search_start.elapsed().as_millis();
            stats.nodes_expanded = result.stats.nodes_expanded;
            match result.outcome {
                Outcome::Solved { plan, trace } => {
                    stats.plan_length = Some(plan.len());
                    for &idx in &plan.steps {
                        plan_text.push_str(&format!("{}\n", gp.actions[idx]));
                    }
                    if let Some(path) = &trace_out {
                        write(path, &serialize_trace(&gp, &trace))?;
                    }
                    EXIT_SOLVED
                }
                Outcome::Unsolvable | Outcome::DepthExceeded => EXIT_UNSOLVABLE,
                Outcome::Timeout => EXIT_TIMEOUT,
            }
        }
        Planner::Shop => {
            let search_start = Instant::now();
            let result = solve_shop_lifted(&problem, &limits).map_err(|e| e.to_string())?;
            stats.search_ms = search_start.elapsed().as_millis();
            stats.nodes_expanded = result.stats.nodes_expanded;
            match result.outcome {
                LiftedOutcome::Solved { plan } => {
                    stats.plan_length = Some(plan.len());
                    for task in &plan {
                        plan_text.push_str(&format!("{task}\n"));
                    }
                    EXIT_SOLVED
                }
                LiftedOutcome::Unsolvable | LiftedOutcome::DepthExceeded => EXIT_UNSOLVABLE,
                LiftedOutcome::Timeout => EXIT_TIMEOUT,
            }
        }
    };
    stats.exit_status = exit;
    stats.total_ms = total_start.elapsed().as_millis();

    print!("{plan_text}");
    if exit == EXIT_TIMEOUT {
        eprintln!("timeout after {timeout}s");
    } else if exit == EXIT_UNSOLVABLE {
        eprintln!("no plan");
    }
    if let Some(path) = &plan_out {
        write(path, &plan_text)?;
    }
    if let Some(path) = &stats_path {
        let json = serde_json::to_string_pretty(&stats).map_err(|e| e.to_string())?;
        write(path, &json)?;
    }
    Ok(exit)
}
