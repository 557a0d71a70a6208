//! Grounding pipeline: inertia analysis, operator instantiation with
//! interleaved simplification, method instantiation with constraint
//! compilation, the two method-deletion passes, and final interning into a
//! `GroundProblem`.

pub mod actions;
pub mod inertia;
pub mod methods;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use crate::model::{Expression, GroundAtom, Problem};
use crate::normalize::{self, NormalizeError};
use crate::state::{
    GroundAction, GroundConstraint, GroundFormula, GroundMethod, GroundProblem, GroundTask,
    PropositionTable, Relevance, State, TaskRegistry,
};

pub use actions::{estimate_grounding_size, instantiate_operators};
pub use inertia::{compute_inertia, simplify_atom, AtomValue, InertiaClass, InertiaReport};
pub use methods::{infer_method_var_types, instantiate_methods, simplify_methods_by_tasks};

#[derive(Debug, Clone)]
pub struct GroundOptions {
    /// Apply inertia-based atom simplification and the deletion rules.
    pub simplify: bool,
    /// Run the compound-task deletion fixpoint (pass 2).
    pub method_fixpoint: bool,
    /// Maximum DNF clause count per precondition/constraint.
    pub dnf_cap: usize,
}

impl Default for GroundOptions {
    fn default() -> Self {
        GroundOptions { simplify: true, method_fixpoint: true, dnf_cap: 4096 }
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum GroundError {
    #[error("normalizing `{context}`: {source}")]
    Normalize {
        context: String,
        #[source]
        source: NormalizeError,
    },
    #[error("DNF explosion in `{context}`: {source}")]
    DnfExplosion {
        context: String,
        #[source]
        source: NormalizeError,
    },
    #[error(
        "type inference for `{variable}` in method `{method}`: \
         candidates `{first}` and `{second}` share no inheritance relation"
    )]
    TypeConflict { method: String, variable: String, first: String, second: String },
    #[error("cannot infer a type for `{variable}` in method `{method}`")]
    NoCandidateType { method: String, variable: String },
    #[error("subtask `{task}` in method `{method}`: argument {position} exceeds the target's arity")]
    SubtaskArity { method: String, task: String, position: usize },
}

/// Ground action over symbolic atoms; interned at the end of the pipeline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymAction {
    pub name: String,
    pub args: Vec<String>,
    pub clause: usize,
    pub pre_pos: Vec<GroundAtom>,
    pub pre_neg: Vec<GroundAtom>,
    pub eff_pos: Vec<GroundAtom>,
    pub eff_neg: Vec<GroundAtom>,
}

impl SymAction {
    pub fn task(&self) -> GroundTask {
        GroundTask { name: self.name.clone(), args: self.args.clone() }
    }
}

/// Ground constraint kept for the validator, formulas still symbolic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SymConstraint {
    Series(Vec<String>),
    Before(Expression, Vec<String>),
    After(Expression, Vec<String>),
    Between(Expression, Vec<String>, Vec<String>),
}

/// Ground method over symbolic atoms.
#[derive(Debug, Clone)]
pub struct SymMethod {
    pub name: String,
    pub args: Vec<String>,
    pub free_args: Vec<String>,
    pub clause: usize,
    pub subtasks: Vec<(String, GroundTask)>,
    pub pre_pos: Vec<GroundAtom>,
    pub pre_neg: Vec<GroundAtom>,
    pub residual: Vec<SymConstraint>,
}

impl SymMethod {
    /// The compound task this instance decomposes.
    pub fn task(&self) -> GroundTask {
        GroundTask { name: self.name.clone(), args: self.args.clone() }
    }
}

#[derive(Debug, Clone, Default)]
pub struct OperatorCounts {
    pub name: String,
    pub candidates: u128,
    pub kept: usize,
    pub deleted_precondition: usize,
    pub deleted_effect: usize,
}

#[derive(Debug, Clone, Default)]
pub struct MethodCounts {
    pub name: String,
    pub candidates: u128,
    pub kept: usize,
    pub deleted_constraint: usize,
    pub deleted_task: usize,
}

#[derive(Debug, Clone, Default)]
pub struct GroundingReport {
    pub inertia: InertiaReport,
    pub operators: Vec<OperatorCounts>,
    pub methods: Vec<MethodCounts>,
    pub fixpoint_iterations: usize,
    /// Interned proposition count per predicate after grounding.
    pub surviving_atoms: BTreeMap<String, usize>,
}

impl GroundingReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("== inertia ==\n");
        for (p, class) in self.inertia.iter() {
            let label = match class {
                InertiaClass::PositiveInertia => "positive-inertia",
                InertiaClass::NegativeInertia => "negative-inertia",
                InertiaClass::Both => "both-inertia",
                InertiaClass::Fluent => "fluent",
            };
            let surviving = self.surviving_atoms.get(p).copied().unwrap_or(0);
            out.push_str(&format!("predicate {p}: {label}, {surviving} surviving atoms\n"));
        }
        out.push_str("== operators ==\n");
        for c in &self.operators {
            out.push_str(&format!(
                "operator {}: candidates {} kept {} deleted-by-precondition {} deleted-by-effect {}\n",
                c.name, c.candidates, c.kept, c.deleted_precondition, c.deleted_effect
            ));
        }
        out.push_str("== methods ==\n");
        for c in &self.methods {
            out.push_str(&format!(
                "method {}: candidates {} kept {} deleted-by-constraint {} deleted-by-task {}\n",
                c.name, c.candidates, c.kept, c.deleted_constraint, c.deleted_task
            ));
        }
        out.push_str(&format!("fixpoint iterations: {}\n", self.fixpoint_iterations));
        out
    }
}

/// Runs the whole pipeline on a parsed problem.
pub fn ground(
    problem: &Problem,
    opts: &GroundOptions,
) -> Result<(GroundProblem, GroundingReport), GroundError> {
    let domain = &problem.domain;
    let inertia =
        compute_inertia(&domain.operators, domain.predicates.iter().map(|p| p.name.as_str()));

    let (sym_actions, op_counts) =
        instantiate_operators(domain, &problem.s0, &inertia, opts)?;

    let (mut sym_methods, mut method_counts) =
        instantiate_methods(domain, &problem.s0, &inertia, &sym_actions, opts)?;

    let fixpoint_iterations = if opts.simplify {
        let op_names: HashSet<String> =
            domain.operators.iter().map(|o| o.name.clone()).collect();
        simplify_methods_by_tasks(
            &mut sym_methods,
            &sym_actions,
            &op_names,
            &mut method_counts,
            opts,
        )
    } else {
        0
    };

    // goal network constraints: `after` formulas become the goal state
    let mut goal_state_pos: Vec<GroundAtom> = Vec::new();
    let mut goal_state_neg: Vec<GroundAtom> = Vec::new();
    let mut goal_unsatisfiable = false;
    let mut root_residual: Vec<SymConstraint> = Vec::new();
    for c in &problem.network.constraints {
        let compiled = methods::compile_constraint(
            c,
            &problem.domain.hierarchy,
            &inertia,
            &problem.s0,
            opts,
            "goal network",
        )?;
        let Some(compiled) = compiled else { continue }; // formula True: dropped
        match compiled {
            SymConstraint::After(Expression::False, _) => goal_unsatisfiable = true,
            SymConstraint::After(f, tags) => {
                // single-clause conjunctions extend the goal state; anything
                // disjunctive stays a residual formula checked on the final state
                let clauses = normalize::to_dnf(&f, opts.dnf_cap).map_err(|e| {
                    GroundError::DnfExplosion { context: "goal network".into(), source: e }
                })?;
                match clauses.as_slice() {
                    [] => goal_unsatisfiable = true,
                    [clause] => {
                        for lit in clause {
                            let atom = lit.atom.to_ground();
                            if lit.negated {
                                goal_state_neg.push(atom);
                            } else {
                                goal_state_pos.push(atom);
                            }
                        }
                    }
                    _ => root_residual.push(SymConstraint::After(f, tags)),
                }
            }
            other if matches!(
                other,
                SymConstraint::Before(Expression::False, _)
                    | SymConstraint::Between(Expression::False, _, _)
            ) =>
            {
                goal_unsatisfiable = true;
            }
            other => root_residual.push(other),
        }
    }

    let report_methods = method_counts;
    let (gp, surviving_atoms) = finalize(
        problem,
        sym_actions,
        sym_methods,
        goal_state_pos,
        goal_state_neg,
        goal_unsatisfiable,
        root_residual,
    );

    let report = GroundingReport {
        inertia,
        operators: op_counts,
        methods: report_methods,
        fixpoint_iterations,
        surviving_atoms,
    };
    Ok((gp, report))
}

/// Interns everything in deterministic order and assembles the final
/// `GroundProblem`.
fn finalize(
    problem: &Problem,
    sym_actions: Vec<SymAction>,
    sym_methods: Vec<SymMethod>,
    goal_state_pos: Vec<GroundAtom>,
    goal_state_neg: Vec<GroundAtom>,
    goal_unsatisfiable: bool,
    root_residual: Vec<SymConstraint>,
) -> (GroundProblem, BTreeMap<String, usize>) {
    let mut table = PropositionTable::new();
    let mut tasks = TaskRegistry::default();

    let actions: Vec<GroundAction> = sym_actions
        .iter()
        .map(|a| GroundAction {
            name: a.name.clone(),
            args: a.args.clone(),
            clause: a.clause,
            pre_pos: a.pre_pos.iter().map(|x| table.intern(x)).collect(),
            pre_neg: a.pre_neg.iter().map(|x| table.intern(x)).collect(),
            eff_pos: a.eff_pos.iter().map(|x| table.intern(x)).collect(),
            eff_neg: a.eff_neg.iter().map(|x| table.intern(x)).collect(),
        })
        .collect();

    let methods: Vec<GroundMethod> = sym_methods
        .iter()
        .map(|m| GroundMethod {
            name: m.name.clone(),
            args: m.args.clone(),
            free_args: m.free_args.clone(),
            clause: m.clause,
            task: tasks.intern(&m.task()),
            subtasks: m
                .subtasks
                .iter()
                .map(|(tag, t)| (tag.clone(), tasks.intern(t)))
                .collect(),
            pre_pos: m.pre_pos.iter().map(|x| table.intern(x)).collect(),
            pre_neg: m.pre_neg.iter().map(|x| table.intern(x)).collect(),
            residual_constraints: m
                .residual
                .iter()
                .map(|c| intern_constraint(c, &mut table))
                .collect(),
        })
        .collect();

    let goal_tasks: Vec<(String, crate::state::TaskId)> = problem
        .network
        .tasks
        .iter()
        .map(|(tag, t)| {
            let gt = GroundTask {
                name: t.name.clone(),
                args: t.args.iter().map(|a| a.name().to_string()).collect(),
            };
            (tag.clone(), tasks.intern(&gt))
        })
        .collect();

    let root_constraints: Vec<GroundConstraint> =
        root_residual.iter().map(|c| intern_constraint(c, &mut table)).collect();
    let goal_state_pos: Vec<_> = goal_state_pos.iter().map(|a| table.intern(a)).collect();
    let goal_state_neg: Vec<_> = goal_state_neg.iter().map(|a| table.intern(a)).collect();

    // initial state: interned atoms that are true in s0
    let mut state0 = State::empty(table.len());
    for atom in &problem.s0 {
        if let Some(id) = table.id_of(atom) {
            state0.insert(id);
        }
    }

    // relevance: every action/method head, plus referenced tasks with no
    // surviving realization (empty entries)
    let op_names: HashSet<&str> =
        problem.domain.operators.iter().map(|o| o.name.as_str()).collect();
    let mut relevance: HashMap<GroundTask, Relevance> = HashMap::new();
    for (i, a) in sym_actions.iter().enumerate() {
        match relevance
            .entry(a.task())
            .or_insert_with(|| Relevance::Primitive(Vec::new()))
        {
            Relevance::Primitive(v) => v.push(i),
            Relevance::Compound(_) => unreachable!("task names are exclusive"),
        }
    }
    for (i, m) in sym_methods.iter().enumerate() {
        match relevance
            .entry(m.task())
            .or_insert_with(|| Relevance::Compound(Vec::new()))
        {
            Relevance::Compound(v) => v.push(i),
            Relevance::Primitive(_) => unreachable!("task names are exclusive"),
        }
    }
    let mut referenced: Vec<GroundTask> = Vec::new();
    for m in &sym_methods {
        referenced.extend(m.subtasks.iter().map(|(_, t)| t.clone()));
    }
    for &(_, id) in &goal_tasks {
        referenced.push(tasks.task(id).clone());
    }
    for t in referenced {
        relevance.entry(t.clone()).or_insert_with(|| {
            if op_names.contains(t.name.as_str()) {
                Relevance::Primitive(Vec::new())
            } else {
                Relevance::Compound(Vec::new())
            }
        });
    }

    let mut surviving: BTreeMap<String, usize> = BTreeMap::new();
    for p in &problem.domain.predicates {
        surviving.insert(p.name.clone(), 0);
    }
    for (_, atom) in table.iter() {
        *surviving.entry(atom.predicate.clone()).or_insert(0) += 1;
    }

    let gp = GroundProblem {
        table,
        tasks,
        state0,
        goal_tasks,
        goal_state_pos,
        goal_state_neg,
        goal_unsatisfiable,
        actions,
        methods,
        relevance,
        root_constraints,
        s0_atoms: problem.s0.clone(),
    };
    (gp, surviving)
}

/// Converts a symbolic ground constraint to interned form.
fn intern_constraint(c: &SymConstraint, table: &mut PropositionTable) -> GroundConstraint {
    match c {
        SymConstraint::Series(tags) => GroundConstraint::Series(tags.clone()),
        SymConstraint::Before(f, tags) => {
            GroundConstraint::Before(intern_formula(f, table), tags.clone())
        }
        SymConstraint::After(f, tags) => {
            GroundConstraint::After(intern_formula(f, table), tags.clone())
        }
        SymConstraint::Between(f, a, b) => {
            GroundConstraint::Between(intern_formula(f, table), a.clone(), b.clone())
        }
    }
}

/// Converts a normalized ground expression to an interned formula.
pub fn intern_formula(e: &Expression, table: &mut PropositionTable) -> GroundFormula {
    match e {
        Expression::True => GroundFormula::True,
        Expression::False => GroundFormula::False,
        Expression::Atom(a) => {
            GroundFormula::Lit { id: table.intern(&a.to_ground()), negated: false }
        }
        Expression::Not(inner) => match &**inner {
            Expression::Atom(a) => {
                GroundFormula::Lit { id: table.intern(&a.to_ground()), negated: true }
            }
            _ => unreachable!("intern_formula expects a normalized expression"),
        },
        Expression::And(es) => {
            GroundFormula::And(es.iter().map(|e| intern_formula(e, table)).collect())
        }
        Expression::Or(es) => {
            GroundFormula::Or(es.iter().map(|e| intern_formula(e, table)).collect())
        }
        _ => unreachable!("intern_formula expects a normalized expression"),
    }
}

/// Replaces every atom of a normalized ground expression by its compile-time
/// truth value where inertia allows, then applies the identity rules.
pub fn evaluate_static_atoms(
    e: &Expression,
    inertia: &InertiaReport,
    s0: &BTreeSet<GroundAtom>,
) -> Expression {
    fn walk(e: &Expression, inertia: &InertiaReport, s0: &BTreeSet<GroundAtom>) -> Expression {
        match e {
            Expression::Atom(a) => match simplify_atom(&a.to_ground(), inertia, s0) {
                AtomValue::True => Expression::True,
                AtomValue::False => Expression::False,
                AtomValue::Keep => e.clone(),
            },
            Expression::Not(inner) => Expression::Not(Box::new(walk(inner, inertia, s0))),
            Expression::And(es) => {
                Expression::And(es.iter().map(|e| walk(e, inertia, s0)).collect())
            }
            Expression::Or(es) => {
                Expression::Or(es.iter().map(|e| walk(e, inertia, s0)).collect())
            }
            other => other.clone(),
        }
    }
    normalize::simplify_expression(&walk(e, inertia, s0))
}
