//! Ordered decomposition search: depth-first with chronological backtracking
//! over a ground problem (iSHOP), plus a lifted baseline that instantiates
//! schemas on the fly for comparison runs.

use std::collections::{BTreeSet, HashSet};
use std::time::{Duration, Instant};

use crate::ground::{self, GroundError};
use crate::model::{
    check_binding_types, substitute, substitute_task, Constraint, Expression, GroundAtom,
    MethodSchema, OperatorSchema, Problem, TaskRef, Term,
};
use crate::normalize;
use crate::state::{
    applicable, apply, DecompositionTrace, GroundConstraint, GroundProblem, GroundTask, Plan,
    Relevance, State, TaskId, TraceNode,
};

#[derive(Debug, Clone)]
pub struct Limits {
    pub timeout: Option<Duration>,
    pub depth_cap: usize,
    pub loop_check: bool,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { timeout: Some(Duration::from_secs(600)), depth_cap: 1_000_000, loop_check: true }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    /// Successful action and method applications.
    pub nodes_expanded: u64,
    pub backtracks: u64,
    pub max_depth: usize,
}

#[derive(Debug, Clone)]
pub enum Outcome {
    Solved { plan: Plan, trace: DecompositionTrace },
    Unsolvable,
    Timeout,
    DepthExceeded,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub outcome: Outcome,
    pub stats: SearchStats,
}

#[derive(Debug, Clone, Copy)]
enum Choice {
    Action(usize),
    Method(usize),
}

enum Halt {
    Timeout,
}

struct Searcher<'a> {
    gp: &'a GroundProblem,
    limits: &'a Limits,
    deadline: Option<Instant>,
    stats: SearchStats,
    visited: HashSet<(State, Vec<TaskId>)>,
    choices: Vec<Choice>,
    plan: Vec<usize>,
    depth_hit: bool,
}

impl<'a> Searcher<'a> {
    /// Returns Ok(true) when a plan was found below this node.
    fn search(&mut self, state: &State, pending: &[TaskId], depth: usize) -> Result<bool, Halt> {
        if let Some(d) = self.deadline {
            if Instant::now() >= d {
                return Err(Halt::Timeout);
            }
        }
        if depth > self.limits.depth_cap {
            self.depth_hit = true;
            return Ok(false);
        }
        self.stats.max_depth = self.stats.max_depth.max(depth);
        // pending is a stack: the network's first task sits at the end
        let Some(&task) = pending.last() else {
            return Ok(self.goal_holds(state));
        };
        if self.limits.loop_check {
            let key = (state.clone(), pending.to_vec());
            if !self.visited.insert(key) {
                return Ok(false);
            }
        }
        let Some(relevance) = self.gp.relevance_of(task) else {
            return Ok(false);
        };
        match relevance.clone() {
            Relevance::Primitive(action_ids) => {
                for idx in action_ids {
                    let action = &self.gp.actions[idx];
                    if !applicable(action, state) {
                        continue;
                    }
                    let next_state = apply(action, state);
                    self.stats.nodes_expanded += 1;
                    self.choices.push(Choice::Action(idx));
                    self.plan.push(idx);
                    let rest = &pending[..pending.len() - 1];
                    if self.search(&next_state, rest, depth + 1)? {
                        return Ok(true);
                    }
                    self.stats.backtracks += 1;
                    self.choices.pop();
                    self.plan.pop();
                }
            }
            Relevance::Compound(method_ids) => {
                for idx in method_ids {
                    let method = &self.gp.methods[idx];
                    if !method.precondition_holds(state) {
                        continue;
                    }
                    self.stats.nodes_expanded += 1;
                    self.choices.push(Choice::Method(idx));
                    // splice the subtasks at the front of the pending list
                    let mut next: Vec<TaskId> = pending[..pending.len() - 1].to_vec();
                    for &(_, sub) in method.subtasks.iter().rev() {
                        next.push(sub);
                    }
                    if self.search(state, &next, depth + 1)? {
                        return Ok(true);
                    }
                    self.stats.backtracks += 1;
                    self.choices.pop();
                }
            }
        }
        Ok(false)
    }

    fn goal_holds(&self, state: &State) -> bool {
        if self.gp.goal_state_pos.iter().any(|&p| !state.contains(p)) {
            return false;
        }
        if self.gp.goal_state_neg.iter().any(|&p| state.contains(p)) {
            return false;
        }
        // disjunctive goal `after` formulas stayed residual; check them here
        self.gp.root_constraints.iter().all(|c| match c {
            GroundConstraint::After(f, _) => f.eval(state),
            _ => true,
        })
    }
}

pub fn solve_ishop(gp: &GroundProblem, limits: &Limits) -> SearchResult {
    // deep recursion needs a roomy stack; keep the caller's stack untouched
    std::thread::scope(|scope| {
        std::thread::Builder::new()
            .stack_size(256 * 1024 * 1024)
            .spawn_scoped(scope, || solve_ishop_inner(gp, limits))
            .expect("spawning the search thread")
            .join()
            .expect("search thread panicked")
    })
}

fn solve_ishop_inner(gp: &GroundProblem, limits: &Limits) -> SearchResult {
    let start = Instant::now();
    let deadline = limits.timeout.map(|t| start + t);
    let mut searcher = Searcher {
        gp,
        limits,
        deadline,
        stats: SearchStats::default(),
        visited: HashSet::new(),
        choices: Vec::new(),
        plan: Vec::new(),
        depth_hit: false,
    };
    if limits.timeout == Some(Duration::ZERO) {
        return SearchResult { outcome: Outcome::Timeout, stats: searcher.stats };
    }
    if gp.goal_unsatisfiable {
        return SearchResult { outcome: Outcome::Unsolvable, stats: searcher.stats };
    }
    let mut pending: Vec<TaskId> = gp.goal_tasks.iter().map(|&(_, t)| t).collect();
    pending.reverse();
    match searcher.search(&gp.state0, &pending, 0) {
        Err(Halt::Timeout) => SearchResult { outcome: Outcome::Timeout, stats: searcher.stats },
        Ok(true) => {
            let plan = Plan { steps: searcher.plan.clone() };
            let trace = build_trace(gp, &searcher.choices);
            SearchResult { outcome: Outcome::Solved { plan, trace }, stats: searcher.stats }
        }
        Ok(false) => {
            let outcome =
                if searcher.depth_hit { Outcome::DepthExceeded } else { Outcome::Unsolvable };
            SearchResult { outcome, stats: searcher.stats }
        }
    }
}

/// Replays the recorded choice sequence (preorder, leftmost-first) into the
/// decomposition tree; leaf order reproduces the plan.
fn build_trace(gp: &GroundProblem, choices: &[Choice]) -> DecompositionTrace {
    fn build(
        gp: &GroundProblem,
        choices: &mut std::slice::Iter<'_, Choice>,
        plan_pos: &mut usize,
    ) -> TraceNode {
        match *choices.next().expect("choice sequence matches the decomposition") {
            Choice::Action(action) => {
                let node = TraceNode::Action { action, plan_index: *plan_pos };
                *plan_pos += 1;
                node
            }
            Choice::Method(method) => {
                let m = &gp.methods[method];
                let mut children = Vec::with_capacity(m.subtasks.len());
                let mut spans = Vec::with_capacity(m.subtasks.len());
                for (tag, _) in &m.subtasks {
                    let child = build(gp, choices, plan_pos);
                    let (lo, hi) = child.span();
                    spans.push((tag.clone(), lo, hi));
                    children.push(child);
                }
                TraceNode::Method { method, spans, children }
            }
        }
    }
    let mut iter = choices.iter();
    let mut plan_pos = 0;
    let mut roots = Vec::new();
    let mut root_spans = Vec::new();
    for (tag, _) in &gp.goal_tasks {
        let node = build(gp, &mut iter, &mut plan_pos);
        let (lo, hi) = node.span();
        root_spans.push((tag.clone(), lo, hi));
        roots.push(node);
    }
    debug_assert!(iter.next().is_none());
    DecompositionTrace { roots, root_spans }
}

// ---------------------------------------------------------------------------
// Lifted baseline
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub enum LiftedOutcome {
    Solved { plan: Vec<GroundTask> },
    Unsolvable,
    Timeout,
    DepthExceeded,
}

#[derive(Debug, Clone)]
pub struct LiftedResult {
    pub outcome: LiftedOutcome,
    pub stats: SearchStats,
}

struct LiftedOperator<'a> {
    schema: &'a OperatorSchema,
    pre: Expression,
    eff: Expression,
}

struct LiftedMethod<'a> {
    schema: &'a MethodSchema,
    free_typed: Vec<(String, String)>,
    /// Conjunction of `before` formulas anchored at the first subtask,
    /// normalized with method variables symbolic.
    pre: Expression,
}

fn eval_ground(e: &Expression, state: &BTreeSet<GroundAtom>) -> bool {
    match e {
        Expression::True => true,
        Expression::False => false,
        Expression::Atom(a) => state.contains(&a.to_ground()),
        Expression::Not(inner) => !eval_ground(inner, state),
        Expression::And(es) => es.iter().all(|e| eval_ground(e, state)),
        Expression::Or(es) => es.iter().any(|e| eval_ground(e, state)),
        _ => unreachable!("evaluation expects a normalized expression"),
    }
}

struct LiftedSearcher<'a> {
    problem: &'a Problem,
    operators: Vec<LiftedOperator<'a>>,
    methods: Vec<LiftedMethod<'a>>,
    goal_after: Vec<Expression>,
    limits: &'a Limits,
    deadline: Option<Instant>,
    stats: SearchStats,
    visited: HashSet<(Vec<GroundAtom>, Vec<GroundTask>)>,
    plan: Vec<GroundTask>,
    depth_hit: bool,
}

impl<'a> LiftedSearcher<'a> {
    fn search(
        &mut self,
        state: &BTreeSet<GroundAtom>,
        pending: &[GroundTask],
        depth: usize,
    ) -> Result<bool, Halt> {
        if let Some(d) = self.deadline {
            if Instant::now() >= d {
                return Err(Halt::Timeout);
            }
        }
        if depth > self.limits.depth_cap {
            self.depth_hit = true;
            return Ok(false);
        }
        self.stats.max_depth = self.stats.max_depth.max(depth);
        let Some(task) = pending.last().cloned() else {
            return Ok(self.goal_after.iter().all(|f| eval_ground(f, state)));
        };
        if self.limits.loop_check {
            let key = (state.iter().cloned().collect::<Vec<_>>(), pending.to_vec());
            if !self.visited.insert(key) {
                return Ok(false);
            }
        }

        if let Some(op_pos) = self.operators.iter().position(|o| o.schema.name == task.name) {
            let op = &self.operators[op_pos];
            let schema = op.schema;
            if schema.params.len() != task.args.len() {
                return Ok(false);
            }
            let sigma: crate::model::Substitution = schema
                .params
                .iter()
                .zip(&task.args)
                .map(|((v, _), c)| (v.clone(), c.clone()))
                .collect();
            if check_binding_types(&schema.params, &sigma, &self.problem.domain.hierarchy)
                .is_err()
            {
                return Ok(false);
            }
            let pre = substitute(&op.pre, &sigma);
            if !eval_ground(&pre, state) {
                return Ok(false);
            }
            let eff = substitute(&op.eff, &sigma);
            let mut next_state = state.clone();
            apply_effect(&eff, &mut next_state);
            self.stats.nodes_expanded += 1;
            self.plan.push(task.clone());
            let rest = &pending[..pending.len() - 1];
            if self.search(&next_state, rest, depth + 1)? {
                return Ok(true);
            }
            self.stats.backtracks += 1;
            self.plan.pop();
            return Ok(false);
        }

        // compound: try each relevant schema, then each free-variable binding,
        // in the same canonical order the grounder uses
        let indices: Vec<usize> = self
            .methods
            .iter()
            .enumerate()
            .filter(|(_, m)| m.schema.name == task.name)
            .map(|(i, _)| i)
            .collect();
        for i in indices {
            let (schema, free_typed, pre) = {
                let m = &self.methods[i];
                (m.schema, m.free_typed.clone(), m.pre.clone())
            };
            if schema.params.len() != task.args.len() {
                continue;
            }
            let head_sigma: crate::model::Substitution = schema
                .params
                .iter()
                .zip(&task.args)
                .map(|((v, _), c)| (v.clone(), c.clone()))
                .collect();
            if check_binding_types(&schema.params, &head_sigma, &self.problem.domain.hierarchy)
                .is_err()
            {
                continue;
            }
            for values in
                ground::actions::BindingIter::new(&free_typed, &self.problem.domain.hierarchy)
            {
                let mut sigma = head_sigma.clone();
                for ((v, _), c) in free_typed.iter().zip(&values) {
                    sigma.insert(v.clone(), c.to_string());
                }
                let pre = substitute(&pre, &sigma);
                if !eval_ground(&pre, state) {
                    continue;
                }
                self.stats.nodes_expanded += 1;
                let mut next: Vec<GroundTask> = pending[..pending.len() - 1].to_vec();
                for (_, sub) in schema.subtasks.iter().rev() {
                    next.push(to_ground_task(&substitute_task(sub, &sigma)));
                }
                if self.search(state, &next, depth + 1)? {
                    return Ok(true);
                }
                self.stats.backtracks += 1;
            }
        }
        Ok(false)
    }
}

fn to_ground_task(t: &TaskRef) -> GroundTask {
    GroundTask {
        name: t.name.clone(),
        args: t
            .args
            .iter()
            .map(|a| match a {
                Term::Constant(c) => c.clone(),
                Term::Variable(v) => v.clone(),
            })
            .collect(),
    }
}

fn apply_effect(e: &Expression, state: &mut BTreeSet<GroundAtom>) {
    // deletions first, then additions: (s \ eff−) ∪ eff+
    fn collect(e: &Expression, pos: &mut Vec<GroundAtom>, neg: &mut Vec<GroundAtom>) {
        match e {
            Expression::Atom(a) => pos.push(a.to_ground()),
            Expression::Not(inner) => {
                if let Expression::Atom(a) = &**inner {
                    neg.push(a.to_ground());
                }
            }
            Expression::And(es) => {
                for e in es {
                    collect(e, pos, neg);
                }
            }
            _ => {}
        }
    }
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    collect(e, &mut pos, &mut neg);
    for a in neg {
        state.remove(&a);
    }
    for a in pos {
        state.insert(a);
    }
}

pub fn solve_shop_lifted(problem: &Problem, limits: &Limits) -> Result<LiftedResult, GroundError> {
    std::thread::scope(|scope| {
        std::thread::Builder::new()
            .stack_size(256 * 1024 * 1024)
            .spawn_scoped(scope, || solve_shop_lifted_inner(problem, limits))
            .expect("spawning the search thread")
            .join()
            .expect("search thread panicked")
    })
}

fn solve_shop_lifted_inner(
    problem: &Problem,
    limits: &Limits,
) -> Result<LiftedResult, GroundError> {
    let domain = &problem.domain;
    let hierarchy = &domain.hierarchy;

    let mut operators = Vec::with_capacity(domain.operators.len());
    for schema in &domain.operators {
        let allowed: HashSet<String> = schema.params.iter().map(|(v, _)| v.clone()).collect();
        let pre = normalize::normalize(&schema.precondition, hierarchy, &allowed)
            .map_err(|e| GroundError::Normalize { context: schema.name.clone(), source: e })?;
        let eff = normalize::normalize(&schema.effect, hierarchy, &allowed)
            .map_err(|e| GroundError::Normalize { context: schema.name.clone(), source: e })?;
        operators.push(LiftedOperator { schema, pre, eff });
    }

    let mut methods = Vec::with_capacity(domain.methods.len());
    for schema in &domain.methods {
        let free_typed = ground::infer_method_var_types(schema, domain)?;
        let mut allowed: HashSet<String> =
            schema.params.iter().map(|(v, _)| v.clone()).collect();
        allowed.extend(free_typed.iter().map(|(v, _)| v.clone()));
        let first_tag = schema.subtasks.first().map(|(t, _)| t.as_str());
        let mut conjuncts = Vec::new();
        for c in &schema.constraints {
            if let Constraint::Before(f, tags) = c {
                if first_tag == Some(tags[0].as_str()) {
                    conjuncts.push(normalize::normalize(f, hierarchy, &allowed).map_err(
                        |e| GroundError::Normalize { context: schema.name.clone(), source: e },
                    )?);
                }
            }
        }
        let pre = normalize::simplify_expression(&Expression::And(conjuncts));
        methods.push(LiftedMethod { schema, free_typed, pre });
    }

    let mut goal_after = Vec::new();
    for c in &problem.network.constraints {
        if let Constraint::After(f, _) = c {
            goal_after.push(
                normalize::normalize(f, hierarchy, &HashSet::new()).map_err(|e| {
                    GroundError::Normalize { context: "goal network".into(), source: e }
                })?,
            );
        }
    }

    let start = Instant::now();
    let mut searcher = LiftedSearcher {
        problem,
        operators,
        methods,
        goal_after,
        limits,
        deadline: limits.timeout.map(|t| start + t),
        stats: SearchStats::default(),
        visited: HashSet::new(),
        plan: Vec::new(),
        depth_hit: false,
    };
    if limits.timeout == Some(Duration::ZERO) {
        return Ok(LiftedResult { outcome: LiftedOutcome::Timeout, stats: searcher.stats });
    }
    let state: BTreeSet<GroundAtom> = problem.s0.clone();
    let mut pending: Vec<GroundTask> = problem
        .network
        .tasks
        .iter()
        .map(|(_, t)| to_ground_task(t))
        .collect();
    pending.reverse();
    let outcome = match searcher.search(&state, &pending, 0) {
        Err(Halt::Timeout) => LiftedOutcome::Timeout,
        Ok(true) => LiftedOutcome::Solved { plan: searcher.plan.clone() },
        Ok(false) if searcher.depth_hit => LiftedOutcome::DepthExceeded,
        Ok(false) => LiftedOutcome::Unsolvable,
    };
    Ok(LiftedResult { outcome, stats: searcher.stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground::{ground, GroundOptions};
    use crate::parser::{parse_domain, parse_problem};

    const ROVER_DOMAIN: &str = include_str!("../../../domains/rover/domain.htn");
    const ROVER_P01: &str = include_str!("../../../domains/rover/p01.htn");

    fn rover() -> Problem {
        let d = parse_domain(ROVER_DOMAIN).unwrap();
        parse_problem(ROVER_P01, &d).unwrap()
    }

    fn plan_strings(gp: &GroundProblem, plan: &Plan) -> Vec<String> {
        plan.steps.iter().map(|&i| gp.actions[i].to_string()).collect()
    }

    #[test]
    fn rover_p01_is_solved_with_the_expected_core_plan() {
        let p = rover();
        let (gp, _) = ground(&p, &GroundOptions::default()).unwrap();
        let result = solve_ishop(&gp, &Limits::default());
        let Outcome::Solved { plan, trace } = &result.outcome else {
            panic!("expected a plan, got {:?}", result.outcome);
        };
        let steps = plan_strings(&gp, plan);
        let core: Vec<&String> = steps
            .iter()
            .filter(|s| !s.starts_with("(visit") && !s.starts_with("(unvisit"))
            .collect();
        assert_eq!(
            core,
            vec![
                "(navigate rover1 waypoint3 waypoint1)",
                "(sample_rock rover1 store1 waypoint1)",
                "(communicate_rock_data rover1 lander1 waypoint1 waypoint0)",
            ]
        );
        // the trace's leaves reproduce the plan
        assert_eq!(trace.leaves(), plan.steps);
        assert!(result.stats.nodes_expanded >= plan.len() as u64);
    }

    #[test]
    fn lifted_baseline_returns_the_identical_plan() {
        let p = rover();
        let (gp, _) = ground(&p, &GroundOptions::default()).unwrap();
        let ishop = solve_ishop(&gp, &Limits::default());
        let lifted = solve_shop_lifted(&p, &Limits::default()).unwrap();
        let Outcome::Solved { plan, .. } = &ishop.outcome else { panic!() };
        let LiftedOutcome::Solved { plan: lifted_plan } = &lifted.outcome else {
            panic!("lifted search failed: {:?}", lifted.outcome)
        };
        let a = plan_strings(&gp, plan);
        let b: Vec<String> = lifted_plan.iter().map(|t| t.to_string()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_goal_network_yields_the_empty_plan() {
        let mut p = rover();
        p.network.tasks.clear();
        let (gp, _) = ground(&p, &GroundOptions::default()).unwrap();
        let result = solve_ishop(&gp, &Limits::default());
        let Outcome::Solved { plan, .. } = &result.outcome else { panic!() };
        assert!(plan.is_empty());
        let lifted = solve_shop_lifted(&p, &Limits::default()).unwrap();
        assert!(matches!(lifted.outcome, LiftedOutcome::Solved { plan } if plan.is_empty()));
    }

    #[test]
    fn missing_rock_sample_is_unsolvable_for_both_planners() {
        let mut p = rover();
        p.s0.remove(&GroundAtom {
            predicate: "at_rock_sample".into(),
            args: vec!["waypoint1".into()],
        });
        let (gp, _) = ground(&p, &GroundOptions::default()).unwrap();
        assert!(matches!(
            solve_ishop(&gp, &Limits::default()).outcome,
            Outcome::Unsolvable
        ));
        assert!(matches!(
            solve_shop_lifted(&p, &Limits::default()).unwrap().outcome,
            LiftedOutcome::Unsolvable
        ));
    }

    #[test]
    fn zero_timeout_reports_timeout() {
        let p = rover();
        let (gp, _) = ground(&p, &GroundOptions::default()).unwrap();
        let limits = Limits { timeout: Some(Duration::ZERO), ..Default::default() };
        assert!(matches!(solve_ishop(&gp, &limits).outcome, Outcome::Timeout));
    }

    #[test]
    fn plans_agree_with_and_without_loop_checking() {
        let p = rover();
        let (gp, _) = ground(&p, &GroundOptions::default()).unwrap();
        let with = solve_ishop(&gp, &Limits::default());
        let without = solve_ishop(&gp, &Limits { loop_check: false, ..Default::default() });
        let Outcome::Solved { plan: p1, .. } = &with.outcome else { panic!() };
        let Outcome::Solved { plan: p2, .. } = &without.outcome else { panic!() };
        assert_eq!(p1, p2);
    }

    #[test]
    fn goal_task_with_empty_relevance_fails_without_expansion() {
        let p = rover();
        let mut gp = {
            let (gp, _) = ground(&p, &GroundOptions::default()).unwrap();
            gp
        };
        // point the goal at a task with no surviving realization
        let ghost = GroundTask {
            name: "get_rock_data".into(),
            args: vec!["nowhere".into()],
        };
        let id = gp.tasks.intern(&ghost);
        gp.relevance.insert(ghost, Relevance::Compound(vec![]));
        gp.goal_tasks = vec![("g1".into(), id)];
        let result = solve_ishop(&gp, &Limits::default());
        assert!(matches!(result.outcome, Outcome::Unsolvable));
        assert_eq!(result.stats.nodes_expanded, 0);
    }
}
