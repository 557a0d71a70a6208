//! Acceptance suite: ten end-to-end criteria, one pass/fail line each.
//! Runs without the default test harness so every criterion always reports.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use htnplan::ground::{ground, GroundOptions, InertiaClass};
use htnplan::model::{Atom, Expression, TypeHierarchy};
use htnplan::normalize::{normalize, to_dnf};
use htnplan::parser::{parse_domain, parse_problem};
use htnplan::planner::{solve_ishop, solve_shop_lifted, Limits, LiftedOutcome, Outcome};
use htnplan::score::{agile_score, RunTime};
use htnplan::state::{applicable, apply, GroundProblem, Relevance, State, TaskId};
use htnplan::validate::validate_plan;

const ROVER_DOMAIN: &str = include_str!("../../../domains/rover/domain.htn");
const ROVER_P01: &str = include_str!("../../../domains/rover/p01.htn");

fn repo_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_htnplan"))
}

fn main() {
    let criteria: &[(&str, fn())] = &[
        ("desk rover end-to-end via the CLI", criterion_1),
        ("grounding-size estimate prints 14000000", criterion_2),
        ("inertia classification on the rover domain", criterion_3),
        ("simplification preserves solution sets (50 micro-domains)", criterion_4),
        ("normalization model-check (200 random expressions)", criterion_5),
        ("statically false before-constraint deletes the method", criterion_6),
        ("method fixpoint stabilizes in exactly 2 iterations", criterion_7),
        ("planner agreement and speed trend (rover sizes 1-10)", criterion_8),
        ("agile scoring values", criterion_9),
        ("byte-identical repeated grounding", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match catch_unwind(AssertUnwindSafe(run)) {
            Ok(()) => println!("criterion {:2}: pass - {name}", i + 1),
            Err(e) => {
                failed += 1;
                let message = e
                    .downcast_ref::<String>()
                    .map(String::as_str)
                    .or_else(|| e.downcast_ref::<&str>().copied())
                    .unwrap_or("panic");
                println!("criterion {:2}: FAIL - {name}: {message}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

// --- 1 --------------------------------------------------------------------

fn criterion_1() {
    let started = Instant::now();
    let output = cli()
        .args(["solve", "--planner", "ishop"])
        .arg(repo_path("domains/rover/domain.htn"))
        .arg(repo_path("domains/rover/p01.htn"))
        .output()
        .expect("running the CLI");
    let elapsed = started.elapsed();
    assert!(output.status.success(), "exit status {:?}", output.status);
    let stdout = String::from_utf8(output.stdout).unwrap();
    let core: Vec<&str> = stdout
        .lines()
        .filter(|l| !l.starts_with("(visit") && !l.starts_with("(unvisit"))
        .collect();
    assert_eq!(
        core,
        [
            "(navigate rover1 waypoint3 waypoint1)",
            "(sample_rock rover1 store1 waypoint1)",
            "(communicate_rock_data rover1 lander1 waypoint1 waypoint0)",
        ],
        "unexpected plan:\n{stdout}"
    );
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
}

// --- 2 --------------------------------------------------------------------

fn criterion_2() {
    let dir = tempfile::tempdir().unwrap();
    let domain = dir.path().join("domain.htn");
    let problem = dir.path().join("problem.htn");
    std::fs::write(
        &domain,
        "(define (domain synth)
           (:types ta tb tc)
           (:predicates (marker ?a - ta))
           (:action big
             :parameters (?a - ta ?b - tb ?c1 - tc ?c2 - tc ?c3 - tc)
             :effect (and (marker ?a))))",
    )
    .unwrap();
    let mut text = String::from("(define (problem synth-p) (:domain synth)\n  (:objects");
    for i in 0..14 {
        text.push_str(&format!(" a{i}"));
    }
    text.push_str(" - ta b0 - tb");
    for i in 0..100 {
        text.push_str(&format!(" c{i}"));
    }
    text.push_str(" - tc)\n  (:init)\n  (:goal-tasks ()))");
    std::fs::write(&problem, text).unwrap();

    for extra in [vec!["estimate"], vec!["ground", "--estimate-only"]] {
        let output = cli().args(&extra).arg(&domain).arg(&problem).output().unwrap();
        assert!(output.status.success());
        let stdout = String::from_utf8(output.stdout).unwrap();
        assert!(
            stdout.contains("operator big: 14000000"),
            "missing count in:\n{stdout}"
        );
    }
}

// --- 3 --------------------------------------------------------------------

fn criterion_3() {
    let d = parse_domain(ROVER_DOMAIN).unwrap();
    let p = parse_problem(ROVER_P01, &d).unwrap();
    let (_, report) = ground(&p, &GroundOptions::default()).unwrap();
    assert_eq!(report.inertia.class_of("can_traverse"), InertiaClass::Both);
    assert_eq!(report.inertia.class_of("at"), InertiaClass::Fluent);
    let rendered = report.render();
    assert!(rendered.contains("predicate can_traverse: both-inertia, 0 surviving atoms"));
    assert!(rendered.contains("predicate at: fluent"));
}

// --- 4 --------------------------------------------------------------------

/// Exhaustive depth-bounded decomposition search enumerating every solution
/// plan. Independent of the planner: plain recursion, no loop checking, no
/// ordering heuristics.
fn all_solutions(gp: &GroundProblem, depth: usize) -> BTreeSet<Vec<String>> {
    fn rec(
        gp: &GroundProblem,
        state: &State,
        pending: &[TaskId],
        depth: usize,
        plan: &mut Vec<String>,
        out: &mut BTreeSet<Vec<String>>,
    ) {
        let Some((&task, rest)) = pending.split_last() else {
            out.insert(plan.clone());
            return;
        };
        match gp.relevance_of(task) {
            Some(Relevance::Primitive(actions)) => {
                for &idx in actions {
                    let action = &gp.actions[idx];
                    if applicable(action, state) {
                        plan.push(action.task().to_string());
                        rec(gp, &apply(action, state), rest, depth, plan, out);
                        plan.pop();
                    }
                }
            }
            Some(Relevance::Compound(methods)) => {
                if depth == 0 {
                    return;
                }
                for &idx in methods {
                    let method = &gp.methods[idx];
                    if method.precondition_holds(state) {
                        let mut next = rest.to_vec();
                        for (_, sub) in method.subtasks.iter().rev() {
                            next.push(*sub);
                        }
                        rec(gp, state, &next, depth - 1, plan, out);
                    }
                }
            }
            None => {}
        }
    }
    if gp.goal_unsatisfiable {
        return BTreeSet::new();
    }
    let pending: Vec<TaskId> = gp.goal_tasks.iter().rev().map(|(_, t)| *t).collect();
    let mut out = BTreeSet::new();
    rec(gp, &gp.state0, &pending, depth, &mut Vec::new(), &mut out);
    out
}

fn micro_domain(rng: &mut ChaCha8Rng) -> (String, String) {
    let num_ops = rng.gen_range(1..=3);
    let num_objects = rng.gen_range(1..=3);
    let num_methods = rng.gen_range(1..=2);
    let qs = ["q1", "q2", "q3"];

    let mut domain = String::from("(define (domain micro)\n  (:types obj)\n  (:predicates\n");
    for q in qs {
        domain.push_str(&format!("    ({q} ?x - obj)\n"));
    }
    for i in 1..=num_ops {
        domain.push_str(&format!("    (mark{i} ?x - obj)\n"));
    }
    domain.push_str("  )\n");

    let literal = |rng: &mut ChaCha8Rng, var: &str| {
        let q = qs[rng.gen_range(0..qs.len())];
        if rng.gen_bool(0.5) {
            format!("({q} {var})")
        } else {
            format!("(not ({q} {var}))")
        }
    };

    for i in 1..=num_ops {
        domain.push_str(&format!("  (:action op{i}\n    :parameters (?x - obj)\n"));
        let pre_count = rng.gen_range(0..=2);
        if pre_count > 0 {
            let pres: Vec<String> = (0..pre_count).map(|_| literal(rng, "?x")).collect();
            domain.push_str(&format!("    :precondition (and {})\n", pres.join(" ")));
        }
        // every operator keeps a marker effect, so it never collapses to a
        // no-op; each q appears at most once, so no contradictions arise
        let mut effects = vec![format!("(mark{i} ?x)")];
        for q in qs {
            if rng.gen_bool(0.3) {
                if rng.gen_bool(0.5) {
                    effects.push(format!("({q} ?x)"));
                } else {
                    effects.push(format!("(not ({q} ?x))"));
                }
            }
        }
        domain.push_str(&format!("    :effect (and {})\n  )\n", effects.join(" ")));
    }

    for _ in 0..num_methods {
        let sub_count = rng.gen_range(1..=2);
        let mut tags = Vec::new();
        let mut subs = Vec::new();
        for t in 1..=sub_count {
            let recursive = t == sub_count && sub_count == 2 && rng.gen_bool(0.2);
            let task = if recursive {
                "ctask".to_string()
            } else {
                format!("op{}", rng.gen_range(1..=num_ops))
            };
            let arg = if t == 2 && rng.gen_bool(0.3) { "?y" } else { "?x" };
            subs.push(format!("(tag t{t} ({task} {arg}))"));
            tags.push(format!("t{t}"));
        }
        let mut constraints = vec![format!("(series {})", tags.join(" "))];
        if rng.gen_bool(0.5) {
            constraints.push(format!("(before {} t1)", literal(rng, "?x")));
        }
        domain.push_str(&format!(
            "  (:method ctask\n    :parameters (?x - obj)\n    :expansion ({})\n    :constraints (and {})\n  )\n",
            subs.join(" "),
            constraints.join(" ")
        ));
    }
    domain.push_str(")\n");

    let mut problem = String::from("(define (problem micro-p) (:domain micro)\n  (:objects");
    for o in 1..=num_objects {
        problem.push_str(&format!(" o{o}"));
    }
    problem.push_str(" - obj)\n  (:init");
    for q in qs {
        for o in 1..=num_objects {
            if rng.gen_bool(0.4) {
                problem.push_str(&format!(" ({q} o{o})"));
            }
        }
    }
    problem.push_str(")\n  (:goal-tasks ((tag g1 (ctask o1)))))\n");
    (domain, problem)
}

fn criterion_4() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20240917);
    for case in 0..50 {
        let (domain_text, problem_text) = micro_domain(&mut rng);
        let d = parse_domain(&domain_text).unwrap_or_else(|e| panic!("case {case}: {e}\n{domain_text}"));
        let p = parse_problem(&problem_text, &d)
            .unwrap_or_else(|e| panic!("case {case}: {e}\n{problem_text}"));
        let raw = GroundOptions { simplify: false, method_fixpoint: false, ..GroundOptions::default() };
        let (gp_raw, _) = ground(&p, &raw).unwrap();
        let (gp_simplified, _) = ground(&p, &GroundOptions::default()).unwrap();
        let lhs = all_solutions(&gp_raw, 8);
        let rhs = all_solutions(&gp_simplified, 8);
        assert_eq!(
            lhs, rhs,
            "case {case}: solution sets diverge\n{domain_text}\n{problem_text}"
        );
    }
    assert!(started.elapsed() < Duration::from_secs(60));
}

// --- 5 --------------------------------------------------------------------

fn random_expression(rng: &mut ChaCha8Rng, depth: usize) -> Expression {
    let atom = |rng: &mut ChaCha8Rng| {
        Expression::Atom(Atom { predicate: format!("p{}", rng.gen_range(0..10)), args: vec![] })
    };
    if depth == 0 || rng.gen_bool(0.3) {
        return match rng.gen_range(0..5) {
            0 => Expression::True,
            1 => Expression::False,
            _ => atom(rng),
        };
    }
    match rng.gen_range(0..4) {
        0 => Expression::Not(Box::new(random_expression(rng, depth - 1))),
        1 => Expression::And(
            (0..rng.gen_range(0..4)).map(|_| random_expression(rng, depth - 1)).collect(),
        ),
        2 => Expression::Or(
            (0..rng.gen_range(0..4)).map(|_| random_expression(rng, depth - 1)).collect(),
        ),
        _ => Expression::Imply(
            Box::new(random_expression(rng, depth - 1)),
            Box::new(random_expression(rng, depth - 1)),
        ),
    }
}

fn eval_plain(e: &Expression, model: &[bool]) -> bool {
    match e {
        Expression::True => true,
        Expression::False => false,
        Expression::Atom(a) => model[a.predicate[1..].parse::<usize>().unwrap()],
        Expression::Not(inner) => !eval_plain(inner, model),
        Expression::And(es) => es.iter().all(|e| eval_plain(e, model)),
        Expression::Or(es) => es.iter().any(|e| eval_plain(e, model)),
        Expression::Imply(a, b) => !eval_plain(a, model) || eval_plain(b, model),
        _ => unreachable!("quantifier-free inputs"),
    }
}

fn criterion_5() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let hierarchy = TypeHierarchy::new();
    for case in 0..200 {
        let e = random_expression(&mut rng, 4);
        let n = normalize(&e, &hierarchy, &Default::default()).unwrap();
        let clauses = to_dnf(&n, 1 << 22).unwrap();
        for assignment in 0u32..(1 << 10) {
            let model: Vec<bool> = (0..10).map(|b| assignment >> b & 1 == 1).collect();
            let expected = eval_plain(&e, &model);
            assert_eq!(expected, eval_plain(&n, &model), "case {case}: normalize disagrees");
            let dnf_value = clauses.iter().any(|clause| {
                clause.iter().all(|lit| {
                    model[lit.atom.predicate[1..].parse::<usize>().unwrap()] != lit.negated
                })
            });
            assert_eq!(expected, dnf_value, "case {case}: DNF disagrees");
        }
    }
}

// --- 6 --------------------------------------------------------------------

fn criterion_6() {
    let d = parse_domain(ROVER_DOMAIN).unwrap();
    let p = parse_problem(ROVER_P01, &d).unwrap();
    assert!(p.s0.iter().any(|a| a.to_string() == "(can_traverse rover1 waypoint3 waypoint0)"));
    let (gp, report) = ground(&p, &GroundOptions::default()).unwrap();
    // the recursive variant has 4 subtasks; its before-constraint contains
    // (not (can_traverse ?x ?from ?to)), statically false for this pair
    let recursive_for_pair = gp.methods.iter().filter(|m| {
        m.name == "do_navigate"
            && m.args == ["rover1", "waypoint3", "waypoint0"]
            && m.subtasks.len() == 4
    });
    assert_eq!(recursive_for_pair.count(), 0);
    let counts = report
        .methods
        .iter()
        .filter(|c| c.name == "do_navigate")
        .map(|c| c.deleted_constraint)
        .sum::<usize>();
    assert!(counts > 0, "no do_navigate instance was deleted by constraint");
}

// --- 7 --------------------------------------------------------------------

fn criterion_7() {
    let domain_text = "(define (domain chain)
      (:types obj)
      (:predicates (p ?x - obj) (q ?x - obj))
      (:action dead_op
        :parameters (?x - obj)
        :precondition (p ?x)
        :effect (and (q ?x)))
      (:method inner_task
        :parameters (?x - obj)
        :expansion ((tag t1 (dead_op ?x)))
        :constraints (and (series t1)))
      (:method outer_task
        :parameters (?x - obj)
        :expansion ((tag t1 (inner_task ?x)))
        :constraints (and (series t1))))";
    let problem_text = "(define (problem chain-p) (:domain chain)
      (:objects o1 - obj)
      (:init)
      (:goal-tasks ((tag g1 (outer_task o1)))))";
    let d = parse_domain(domain_text).unwrap();
    let p = parse_problem(problem_text, &d).unwrap();
    let (gp, report) = ground(&p, &GroundOptions::default()).unwrap();
    assert_eq!(report.fixpoint_iterations, 2, "expected exactly 2 iterations");
    assert!(gp.methods.is_empty(), "both methods should be deleted");
    for name in ["inner_task", "outer_task"] {
        let c = report.methods.iter().find(|c| c.name == name).unwrap();
        assert_eq!(c.kept, 0, "{name} survived");
    }
}

// --- 8 --------------------------------------------------------------------

fn criterion_8() {
    let d = parse_domain(ROVER_DOMAIN).unwrap();
    let limits = Limits { timeout: Some(Duration::from_secs(120)), ..Limits::default() };
    let mut search_times = Vec::new();
    for size in 1..=10 {
        let text = htnplan::gen::rover_problem(size);
        let p = parse_problem(&text, &d).unwrap();
        let (gp, _) = ground(&p, &GroundOptions::default()).unwrap();

        let started = Instant::now();
        let result = solve_ishop(&gp, &limits);
        let ishop_search = started.elapsed();
        let Outcome::Solved { plan, .. } = result.outcome else {
            panic!("ishop failed on size {size}");
        };
        validate_plan(&gp, &plan).unwrap();

        let started = Instant::now();
        let lifted = solve_shop_lifted(&p, &limits).unwrap();
        let shop_search = started.elapsed();
        let LiftedOutcome::Solved { plan: lifted_plan } = lifted.outcome else {
            panic!("lifted shop failed on size {size}");
        };
        assert_eq!(plan.len(), lifted_plan.len(), "length mismatch at size {size}");
        search_times.push((size, ishop_search, shop_search));
    }
    for &(size, ishop, shop) in &search_times[7..] {
        assert!(
            ishop <= shop,
            "size {size}: ishop search {ishop:?} exceeded lifted {shop:?}"
        );
    }
}

// --- 9 --------------------------------------------------------------------

fn criterion_9() {
    let scores = agile_score(&[RunTime::Solved(5.0), RunTime::Unsolved, RunTime::Solved(50.0)]);
    assert!((scores[0] - 1.0).abs() < 1e-9, "fastest: {}", scores[0]);
    assert!((scores[1] - 0.0).abs() < 1e-9, "unsolved: {}", scores[1]);
    assert!((scores[2] - 0.5).abs() < 1e-9, "10x ratio: {}", scores[2]);
}

// --- 10 -------------------------------------------------------------------

fn criterion_10() {
    let dir = tempfile::tempdir().unwrap();
    let out1 = dir.path().join("g1.txt");
    let out2 = dir.path().join("g2.txt");
    for out in [&out1, &out2] {
        let status = cli()
            .arg("ground")
            .arg(repo_path("domains/rover/domain.htn"))
            .arg(repo_path("domains/rover/p01.htn"))
            .arg("--out")
            .arg(out)
            .output()
            .unwrap();
        assert!(status.status.success());
    }
    let b1 = std::fs::read(&out1).unwrap();
    let b2 = std::fs::read(&out2).unwrap();
    assert!(!b1.is_empty());
    assert_eq!(b1, b2, "serialized ground problems differ between runs");
}
