//! Method grounding: type inference for undeclared variables, instantiation
//! with constraint compilation, and the two deletion passes including the
//! compound-task fixpoint.

use std::collections::{BTreeSet, HashSet};

use crate::model::{
    substitute, substitute_task, Constraint, Domain, Expression, GroundAtom, MethodSchema,
    Term, TypeHierarchy,
};
use crate::normalize;
use crate::state::GroundTask;

use super::actions::{binding_substitution, split_clause, BindingIter};
use super::inertia::InertiaReport;
use super::{
    evaluate_static_atoms, GroundError, GroundOptions, MethodCounts, SymAction, SymConstraint,
    SymMethod,
};

/// Keeps the more specific of two candidate types; `None` when unrelated.
fn most_specific<'a>(h: &TypeHierarchy, a: &'a str, b: &'a str) -> Option<&'a str> {
    if h.is_subtype(a, b) {
        Some(a)
    } else if h.is_subtype(b, a) {
        Some(b)
    } else {
        None
    }
}

/// Infers a type for every undeclared variable of a method: candidates come
/// from subtask argument positions (via the relevant operator/method
/// parameters) and from constraint atoms (via the predicate declaration);
/// more specific types win, unrelated candidates are a typing error.
pub fn infer_method_var_types(
    m: &MethodSchema,
    domain: &Domain,
) -> Result<Vec<(String, String)>, GroundError> {
    let h = &domain.hierarchy;
    let mut out = Vec::new();
    for (var, declared) in &m.free_vars {
        if let Some(ty) = declared {
            out.push((var.clone(), ty.clone()));
            continue;
        }
        let mut candidate: Option<String> = None;
        let merge = |ty: &str, candidate: &mut Option<String>| -> Result<(), GroundError> {
            match candidate {
                None => *candidate = Some(ty.to_string()),
                Some(cur) => match most_specific(h, cur, ty) {
                    Some(best) => *candidate = Some(best.to_string()),
                    None => {
                        return Err(GroundError::TypeConflict {
                            method: m.name.clone(),
                            variable: var.clone(),
                            first: cur.clone(),
                            second: ty.to_string(),
                        })
                    }
                },
            }
            Ok(())
        };

        // source (a): subtask positions
        for (_, task) in &m.subtasks {
            for (i, arg) in task.args.iter().enumerate() {
                if *arg != Term::Variable(var.clone()) {
                    continue;
                }
                if task.primitive {
                    let op = domain.operator(&task.name).expect("resolved at parse");
                    merge(&op.params[i].1, &mut candidate)?;
                } else {
                    for schema in domain.methods_named(&task.name) {
                        let (_, ty) = schema.params.get(i).ok_or_else(|| {
                            GroundError::SubtaskArity {
                                method: m.name.clone(),
                                task: task.name.clone(),
                                position: i,
                            }
                        })?;
                        merge(ty, &mut candidate)?;
                    }
                }
            }
        }
        // source (b): constraint atoms
        for c in &m.constraints {
            if let Some(f) = c.formula() {
                collect_predicate_candidates(f, var, domain, &mut |ty| {
                    merge(ty, &mut candidate)
                })?;
            }
        }

        let ty = candidate.ok_or_else(|| GroundError::NoCandidateType {
            method: m.name.clone(),
            variable: var.clone(),
        })?;
        out.push((var.clone(), ty));
    }
    Ok(out)
}

fn collect_predicate_candidates(
    e: &Expression,
    var: &str,
    domain: &Domain,
    merge: &mut impl FnMut(&str) -> Result<(), GroundError>,
) -> Result<(), GroundError> {
    match e {
        Expression::Atom(a) => {
            if let Some(pred) = domain.predicate(&a.predicate) {
                for (i, arg) in a.args.iter().enumerate() {
                    if *arg == Term::Variable(var.to_string()) {
                        merge(&pred.param_types[i])?;
                    }
                }
            }
            Ok(())
        }
        Expression::Not(inner) => collect_predicate_candidates(inner, var, domain, merge),
        Expression::And(es) | Expression::Or(es) => {
            for e in es {
                collect_predicate_candidates(e, var, domain, merge)?;
            }
            Ok(())
        }
        Expression::Imply(a, b) => {
            collect_predicate_candidates(a, var, domain, merge)?;
            collect_predicate_candidates(b, var, domain, merge)
        }
        Expression::Forall(_, _, inner) | Expression::Exists(_, _, inner) => {
            collect_predicate_candidates(inner, var, domain, merge)
        }
        _ => Ok(()),
    }
}

/// Normalizes and (optionally) statically evaluates one ground constraint.
/// Returns `None` when the formula reduced to True (constraint dropped);
/// a `False` formula is preserved so callers can delete the owner.
pub fn compile_constraint(
    c: &Constraint,
    hierarchy: &TypeHierarchy,
    inertia: &InertiaReport,
    s0: &BTreeSet<GroundAtom>,
    opts: &GroundOptions,
    context: &str,
) -> Result<Option<SymConstraint>, GroundError> {
    let simplify = |e: &Expression| -> Result<Expression, GroundError> {
        let n = normalize::normalize(e, hierarchy, &HashSet::new()).map_err(|err| {
            GroundError::Normalize { context: context.to_string(), source: err }
        })?;
        Ok(if opts.simplify {
            evaluate_static_atoms(&n, inertia, s0)
        } else {
            normalize::simplify_expression(&n)
        })
    };
    Ok(match c {
        Constraint::Series(tags) => Some(SymConstraint::Series(tags.clone())),
        Constraint::Before(f, tags) => match simplify(f)? {
            Expression::True => None,
            f => Some(SymConstraint::Before(f, tags.clone())),
        },
        Constraint::After(f, tags) => match simplify(f)? {
            Expression::True => None,
            f => Some(SymConstraint::After(f, tags.clone())),
        },
        Constraint::Between(f, a, b) => match simplify(f)? {
            Expression::True => None,
            f => Some(SymConstraint::Between(f, a.clone(), b.clone())),
        },
    })
}

/// Enumerates every substitution of every method over declared parameters
/// plus inferred free variables; constraint formulas are simplified as each
/// candidate is built, `before` constraints anchored at the first subtask
/// compile into the method precondition, and a False formula deletes the
/// candidate.
pub fn instantiate_methods(
    domain: &Domain,
    s0: &BTreeSet<GroundAtom>,
    inertia: &InertiaReport,
    _actions: &[SymAction],
    opts: &GroundOptions,
) -> Result<(Vec<SymMethod>, Vec<MethodCounts>), GroundError> {
    let hierarchy = &domain.hierarchy;
    let mut methods = Vec::new();
    let mut counts = Vec::new();

    for schema in &domain.methods {
        let free_typed = infer_method_var_types(schema, domain)?;
        let mut all_vars = schema.params.clone();
        all_vars.extend(free_typed.iter().cloned());

        // quantifiers expand at the schema level; method variables stay symbolic
        let allowed: HashSet<String> = all_vars.iter().map(|(v, _)| v.clone()).collect();
        let mut normalized_constraints = Vec::with_capacity(schema.constraints.len());
        for c in &schema.constraints {
            normalized_constraints.push(match c.formula() {
                None => c.clone(),
                Some(f) => {
                    let n = normalize::normalize(f, hierarchy, &allowed).map_err(|err| {
                        GroundError::Normalize { context: schema.name.clone(), source: err }
                    })?;
                    match c {
                        Constraint::Before(_, t) => Constraint::Before(n, t.clone()),
                        Constraint::After(_, t) => Constraint::After(n, t.clone()),
                        Constraint::Between(_, a, b) => {
                            Constraint::Between(n, a.clone(), b.clone())
                        }
                        Constraint::Series(_) => unreachable!(),
                    }
                }
            });
        }

        let first_tag = schema.subtasks.first().map(|(t, _)| t.clone());
        let mut c = MethodCounts { name: schema.name.clone(), ..Default::default() };
        'binding: for values in BindingIter::new(&all_vars, hierarchy) {
            c.candidates += 1;
            let sigma = binding_substitution(&all_vars, &values);
            let subtasks: Vec<(String, GroundTask)> = schema
                .subtasks
                .iter()
                .map(|(tag, t)| {
                    let g = substitute_task(t, &sigma);
                    (
                        tag.clone(),
                        GroundTask {
                            name: g.name,
                            args: g.args.iter().map(|a| a.name().to_string()).collect(),
                        },
                    )
                })
                .collect();

            let mut residual = Vec::new();
            let mut pre_conjuncts = Vec::new();
            for constraint in &normalized_constraints {
                match constraint {
                    Constraint::Series(tags) => {
                        residual.push(SymConstraint::Series(tags.clone()))
                    }
                    other => {
                        let f = substitute(other.formula().unwrap(), &sigma);
                        let f = if opts.simplify {
                            evaluate_static_atoms(&f, inertia, s0)
                        } else {
                            normalize::simplify_expression(&f)
                        };
                        match f {
                            Expression::True => {} // constraint dropped
                            Expression::False => {
                                // e.g. `(before (false) t1)`: the candidate can
                                // never satisfy it
                                c.deleted_constraint += 1;
                                continue 'binding;
                            }
                            f => {
                                let compiled = match other {
                                    Constraint::Before(_, tags) => {
                                        let anchored =
                                            first_tag.as_deref() == Some(tags[0].as_str());
                                        if anchored {
                                            pre_conjuncts.push(f.clone());
                                        }
                                        SymConstraint::Before(f, tags.clone())
                                    }
                                    Constraint::After(_, tags) => {
                                        SymConstraint::After(f, tags.clone())
                                    }
                                    Constraint::Between(_, a, b) => {
                                        SymConstraint::Between(f, a.clone(), b.clone())
                                    }
                                    Constraint::Series(_) => unreachable!(),
                                };
                                residual.push(compiled);
                            }
                        }
                    }
                }
            }

            let pre = normalize::simplify_expression(&Expression::And(pre_conjuncts));
            let clauses = normalize::to_dnf(&pre, opts.dnf_cap).map_err(|e| {
                GroundError::DnfExplosion { context: schema.name.clone(), source: e }
            })?;
            if clauses.is_empty() {
                // conjunction of individually satisfiable befores is contradictory
                c.deleted_constraint += 1;
                continue;
            }
            let args: Vec<String> =
                values[..schema.params.len()].iter().map(|v| v.to_string()).collect();
            let free_args: Vec<String> =
                values[schema.params.len()..].iter().map(|v| v.to_string()).collect();
            for (clause, lits) in clauses.iter().enumerate() {
                let (pre_pos, pre_neg) = split_clause(lits);
                c.kept += 1;
                methods.push(SymMethod {
                    name: schema.name.clone(),
                    args: args.clone(),
                    free_args: free_args.clone(),
                    clause,
                    subtasks: subtasks.clone(),
                    pre_pos,
                    pre_neg,
                    residual: residual.clone(),
                });
            }
        }
        counts.push(c);
    }
    Ok((methods, counts))
}

/// Pass 1 deletes methods whose primitive subtask lost every action; pass 2
/// iterates deletion over compound subtasks until stable (greatest fixpoint:
/// a surviving method may justify its own recursion). Returns the number of
/// pass-2 iterations, counting the final stable pass.
pub fn simplify_methods_by_tasks(
    methods: &mut Vec<SymMethod>,
    actions: &[SymAction],
    op_names: &HashSet<String>,
    counts: &mut [MethodCounts],
    opts: &GroundOptions,
) -> usize {
    // a name stays primitive even when all its actions were deleted, so
    // classification comes from the operator names, not the surviving actions
    let is_primitive = |t: &GroundTask| op_names.contains(&t.name);

    // schemas can share a name; charge the deletion to an entry that still
    // has survivors so the per-name totals stay consistent
    let deleted = |name: &str, counts: &mut [MethodCounts]| {
        if let Some(c) = counts.iter_mut().find(|c| c.name == name && c.kept > 0) {
            c.deleted_task += 1;
            c.kept -= 1;
        }
    };

    // pass 1: primitive subtasks
    let action_tasks: HashSet<GroundTask> = actions.iter().map(SymAction::task).collect();
    let mut survivors = Vec::with_capacity(methods.len());
    for m in methods.drain(..) {
        if m.subtasks
            .iter()
            .all(|(_, t)| !is_primitive(t) || action_tasks.contains(t))
        {
            survivors.push(m);
        } else {
            deleted(&m.name, counts);
        }
    }
    *methods = survivors;

    // pass 2: compound subtasks, to a fixpoint
    let mut iterations = 0;
    if opts.method_fixpoint {
        loop {
            iterations += 1;
            let heads: HashSet<GroundTask> = methods.iter().map(SymMethod::task).collect();
            let mut removed = false;
            let mut survivors = Vec::with_capacity(methods.len());
            for m in methods.drain(..) {
                if m.subtasks
                    .iter()
                    .all(|(_, t)| is_primitive(t) || heads.contains(t))
                {
                    survivors.push(m);
                } else {
                    deleted(&m.name, counts);
                    removed = true;
                }
            }
            *methods = survivors;
            if !removed {
                break;
            }
        }
    }
    iterations
}
