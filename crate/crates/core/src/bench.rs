//! Benchmark harness: runs both planners over problem families described by
//! a TOML manifest and reports time series, plan-length series and agile
//! score totals per family.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::Deserialize;
use thiserror::Error;

use crate::gen;
use crate::ground::{ground, GroundOptions};
use crate::parser::{parse_domain, parse_problem};
use crate::planner::{solve_ishop, solve_shop_lifted, Limits, LiftedOutcome, Outcome};
use crate::score::{agile_score, RunTime};

#[derive(Debug, Deserialize)]
pub struct Manifest {
    /// Per-problem timeout in seconds.
    #[serde(default = "default_timeout")]
    pub timeout: u64,
    #[serde(rename = "family")]
    pub families: Vec<FamilySpec>,
}

fn default_timeout() -> u64 {
    600
}

/// One problem family: a domain file plus either explicit problem files or a
/// named built-in generator with a list of sizes.
#[derive(Debug, Deserialize)]
pub struct FamilySpec {
    pub name: String,
    pub domain: String,
    #[serde(default)]
    pub problems: Vec<String>,
    pub generator: Option<String>,
    #[serde(default)]
    pub sizes: Vec<usize>,
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("manifest references missing files: {}", .0.join(", "))]
    MissingFiles(Vec<String>),
    #[error("unknown generator `{0}` (known: rover, childsnack, satellite)")]
    UnknownGenerator(String),
    #[error("{context}: {message}")]
    Run { context: String, message: String },
}

enum Source {
    File(PathBuf),
    Generated { generator: String, size: usize },
}

struct Unit {
    family: usize,
    row: usize,
    label: String,
    domain: PathBuf,
    source: Source,
}

/// Result of one planner on one problem.
#[derive(Debug, Clone, Default)]
pub struct PlannerRun {
    /// Total wall time in seconds (parse + ground + search) when solved.
    pub time: Option<f64>,
    pub plan_length: Option<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct Row {
    pub label: String,
    pub ishop: PlannerRun,
    pub shop: PlannerRun,
}

#[derive(Debug)]
pub struct FamilyReport {
    pub name: String,
    pub rows: Vec<Row>,
}

fn generate(generator: &str, size: usize) -> Result<String, BenchError> {
    match generator {
        "rover" => Ok(gen::rover_problem(size)),
        "childsnack" => Ok(gen::childsnack_problem(size)),
        "satellite" => Ok(gen::satellite_problem(size)),
        other => Err(BenchError::UnknownGenerator(other.to_string())),
    }
}

fn read(path: &Path) -> Result<String, BenchError> {
    std::fs::read_to_string(path).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn run_unit(unit: &Unit, timeout: Duration) -> Result<Row, BenchError> {
    let err = |message: String| BenchError::Run {
        context: unit.label.clone(),
        message,
    };
    let domain_text = read(&unit.domain)?;
    let problem_text = match &unit.source {
        Source::File(p) => read(p)?,
        Source::Generated { generator, size } => generate(generator, *size)?,
    };
    let domain = parse_domain(&domain_text).map_err(|e| err(e.to_string()))?;
    let problem = parse_problem(&problem_text, &domain).map_err(|e| err(e.to_string()))?;

    let limits = Limits {
        timeout: Some(timeout),
        ..Limits::default()
    };

    let started = Instant::now();
    let ishop = match ground(&problem, &GroundOptions::default()) {
        Ok((gp, _)) => match solve_ishop(&gp, &limits).outcome {
            Outcome::Solved { plan, .. } => PlannerRun {
                time: Some(started.elapsed().as_secs_f64()),
                plan_length: Some(plan.len()),
            },
            _ => PlannerRun::default(),
        },
        Err(e) => return Err(err(e.to_string())),
    };

    let started = Instant::now();
    let shop = match solve_shop_lifted(&problem, &limits) {
        Ok(result) => match result.outcome {
            LiftedOutcome::Solved { plan } => PlannerRun {
                time: Some(started.elapsed().as_secs_f64()),
                plan_length: Some(plan.len()),
            },
            _ => PlannerRun::default(),
        },
        Err(e) => return Err(err(e.to_string())),
    };

    Ok(Row {
        label: unit.label.clone(),
        ishop,
        shop,
    })
}

/// Loads the manifest, checks every referenced file up front, then runs each
/// problem with both planners. `jobs` > 1 runs problems concurrently; timing
/// stays per problem either way.
pub fn run_bench(manifest_path: &Path, jobs: usize) -> Result<Vec<FamilyReport>, BenchError> {
    let manifest: Manifest =
        toml::from_str(&read(manifest_path)?).map_err(|e| BenchError::Manifest(e.to_string()))?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));

    let mut units = Vec::new();
    let mut reports = Vec::new();
    let mut missing = Vec::new();
    for (fi, fam) in manifest.families.iter().enumerate() {
        let domain = base.join(&fam.domain);
        if !domain.is_file() {
            missing.push(fam.domain.clone());
        }
        let mut rows = Vec::new();
        for p in &fam.problems {
            let path = base.join(p);
            if !path.is_file() {
                missing.push(p.clone());
            }
            units.push(Unit {
                family: fi,
                row: rows.len(),
                label: p.clone(),
                domain: domain.clone(),
                source: Source::File(path),
            });
            rows.push(Row::default());
        }
        if let Some(generator) = &fam.generator {
            generate(generator, 1)?;
            for &size in &fam.sizes {
                units.push(Unit {
                    family: fi,
                    row: rows.len(),
                    label: format!("{generator}-s{size:02}"),
                    domain: domain.clone(),
                    source: Source::Generated {
                        generator: generator.clone(),
                        size,
                    },
                });
                rows.push(Row::default());
            }
        }
        reports.push(FamilyReport {
            name: fam.name.clone(),
            rows,
        });
    }
    if !missing.is_empty() {
        return Err(BenchError::MissingFiles(missing));
    }

    let timeout = Duration::from_secs(manifest.timeout);
    let queue = Mutex::new(units.into_iter());
    let results: Mutex<Vec<Result<(usize, usize, Row), BenchError>>> = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..jobs.max(1) {
            scope.spawn(|| loop {
                let Some(unit) = queue.lock().unwrap().next() else {
                    return;
                };
                let outcome = run_unit(&unit, timeout).map(|row| (unit.family, unit.row, row));
                results.lock().unwrap().push(outcome);
            });
        }
    });
    for outcome in results.into_inner().unwrap() {
        let (family, row, result) = outcome?;
        reports[family].rows[row] = result;
    }
    Ok(reports)
}

/// One table per family: time and plan-length series per planner, per-problem
/// agile scores and score totals.
pub fn render(reports: &[FamilyReport]) -> String {
    let mut out = String::new();
    for report in reports {
        let _ = writeln!(out, "family {}", report.name);
        let _ = writeln!(
            out,
            "{:<24} {:>10} {:>6} {:>10} {:>6} {:>7} {:>7}",
            "problem", "ishop_s", "len", "shop_s", "len", "ishop", "shop"
        );
        let mut totals = (0.0f64, 0.0f64);
        for row in &report.rows {
            let to_rt = |r: &PlannerRun| match r.time {
                Some(t) => RunTime::Solved(t),
                None => RunTime::Unsolved,
            };
            let scores = agile_score(&[to_rt(&row.ishop), to_rt(&row.shop)]);
            totals.0 += scores[0];
            totals.1 += scores[1];
            let time = |r: &PlannerRun| match r.time {
                Some(t) => format!("{t:.3}"),
                None => "-".to_string(),
            };
            let len = |r: &PlannerRun| match r.plan_length {
                Some(l) => l.to_string(),
                None => "-".to_string(),
            };
            let _ = writeln!(
                out,
                "{:<24} {:>10} {:>6} {:>10} {:>6} {:>7.3} {:>7.3}",
                row.label,
                time(&row.ishop),
                len(&row.ishop),
                time(&row.shop),
                len(&row.shop),
                scores[0],
                scores[1]
            );
        }
        let _ = writeln!(
            out,
            "{:<24} {:>10} {:>6} {:>10} {:>6} {:>7.3} {:>7.3}",
            "total score", "", "", "", "", totals.0, totals.1
        );
        out.push('\n');
    }
    out
}
