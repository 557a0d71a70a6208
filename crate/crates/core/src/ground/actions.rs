//! Operator instantiation: substitution enumeration in canonical order with
//! interleaved atom simplification, DNF splitting and the deletion rules.

use std::collections::{BTreeSet, HashSet};

use crate::model::{
    substitute, Domain, Expression, GroundAtom, Substitution, TypeHierarchy,
};
use crate::normalize::{self, Literal};

use super::inertia::InertiaReport;
use super::{evaluate_static_atoms, GroundError, GroundOptions, OperatorCounts, SymAction};

/// Product of the parameter domains: the candidate count before any
/// simplification. Exact in u128; never enumerates.
pub fn estimate_grounding_size(params: &[(String, String)], hierarchy: &TypeHierarchy) -> u128 {
    params
        .iter()
        .map(|(_, ty)| hierarchy.instance_count(ty) as u128)
        .product()
}

/// Iterates all type-consistent bindings in canonical order: variables left
/// to right, constants in declaration order. Yields one value slice per
/// binding.
pub struct BindingIter<'a> {
    domains: Vec<Vec<&'a str>>,
    idx: Vec<usize>,
    done: bool,
}

impl<'a> BindingIter<'a> {
    pub fn new(params: &[(String, String)], hierarchy: &'a TypeHierarchy) -> Self {
        let domains: Vec<Vec<&str>> =
            params.iter().map(|(_, ty)| hierarchy.instances_of(ty)).collect();
        let done = domains.iter().any(Vec::is_empty);
        let idx = vec![0; domains.len()];
        BindingIter { domains, idx, done }
    }
}

impl<'a> Iterator for BindingIter<'a> {
    type Item = Vec<&'a str>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let current: Vec<&str> =
            self.idx.iter().zip(&self.domains).map(|(&i, d)| d[i]).collect();
        // odometer increment, rightmost digit fastest
        let mut pos = self.domains.len();
        loop {
            if pos == 0 {
                self.done = true;
                break;
            }
            pos -= 1;
            self.idx[pos] += 1;
            if self.idx[pos] < self.domains[pos].len() {
                break;
            }
            self.idx[pos] = 0;
        }
        Some(current)
    }
}

/// Builds the substitution for one binding.
pub fn binding_substitution(params: &[(String, String)], values: &[&str]) -> Substitution {
    params
        .iter()
        .zip(values)
        .map(|((v, _), c)| (v.clone(), c.to_string()))
        .collect()
}

/// Partitions one DNF clause into positive/negative ground atom lists.
pub fn split_clause(clause: &[Literal]) -> (Vec<GroundAtom>, Vec<GroundAtom>) {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for lit in clause {
        let atom = lit.atom.to_ground();
        if lit.negated {
            neg.push(atom);
        } else {
            pos.push(atom);
        }
    }
    (pos, neg)
}

/// Collects a normalized ground effect into deduplicated positive/negative
/// atom lists.
fn split_effect(e: &Expression, pos: &mut Vec<GroundAtom>, neg: &mut Vec<GroundAtom>) {
    match e {
        Expression::Atom(a) => {
            let g = a.to_ground();
            if !pos.contains(&g) {
                pos.push(g);
            }
        }
        Expression::Not(inner) => {
            if let Expression::Atom(a) = &**inner {
                let g = a.to_ground();
                if !neg.contains(&g) {
                    neg.push(g);
                }
            }
        }
        Expression::And(es) => {
            for e in es {
                split_effect(e, pos, neg);
            }
        }
        _ => {}
    }
}

enum Candidate {
    Kept(Vec<SymAction>),
    DeletedPrecondition,
    DeletedEffect,
}

/// Enumerates every substitution of every operator and applies the deletion
/// rules as each candidate is built. With `opts.simplify` off, only
/// structurally false preconditions prune (no inertia evaluation, no effect
/// deletion).
pub fn instantiate_operators(
    domain: &Domain,
    s0: &BTreeSet<GroundAtom>,
    inertia: &InertiaReport,
    opts: &GroundOptions,
) -> Result<(Vec<SymAction>, Vec<OperatorCounts>), GroundError> {
    let hierarchy = &domain.hierarchy;
    let mut actions = Vec::new();
    let mut counts = Vec::new();

    for op in &domain.operators {
        let allowed: HashSet<String> = op.params.iter().map(|(v, _)| v.clone()).collect();
        let pre = normalize::normalize(&op.precondition, hierarchy, &allowed).map_err(|e| {
            GroundError::Normalize { context: op.name.clone(), source: e }
        })?;
        let eff = normalize::normalize(&op.effect, hierarchy, &allowed).map_err(|e| {
            GroundError::Normalize { context: op.name.clone(), source: e }
        })?;

        let mut c = OperatorCounts { name: op.name.clone(), ..Default::default() };
        for values in BindingIter::new(&op.params, hierarchy) {
            c.candidates += 1;
            let sigma = binding_substitution(&op.params, &values);
            match build_candidate(op, &pre, &eff, &sigma, &values, s0, inertia, opts)? {
                Candidate::Kept(split) => {
                    c.kept += split.len();
                    actions.extend(split);
                }
                Candidate::DeletedPrecondition => c.deleted_precondition += 1,
                Candidate::DeletedEffect => c.deleted_effect += 1,
            }
        }
        debug_assert_eq!(
            c.candidates,
            estimate_grounding_size(&op.params, hierarchy),
            "count law: candidates must equal the size estimate"
        );
        counts.push(c);
    }
    Ok((actions, counts))
}

#[allow(clippy::too_many_arguments)]
fn build_candidate(
    op: &crate::model::OperatorSchema,
    pre: &Expression,
    eff: &Expression,
    sigma: &Substitution,
    values: &[&str],
    s0: &BTreeSet<GroundAtom>,
    inertia: &InertiaReport,
    opts: &GroundOptions,
) -> Result<Candidate, GroundError> {
    let mut pre = substitute(pre, sigma);
    if opts.simplify {
        pre = evaluate_static_atoms(&pre, inertia, s0);
    }
    let clauses = normalize::to_dnf(&pre, opts.dnf_cap).map_err(|e| {
        GroundError::DnfExplosion { context: op.name.clone(), source: e }
    })?;
    if clauses.is_empty() {
        return Ok(Candidate::DeletedPrecondition);
    }

    let eff = substitute(eff, sigma);
    let mut eff_pos = Vec::new();
    let mut eff_neg = Vec::new();
    split_effect(&eff, &mut eff_pos, &mut eff_neg);
    if opts.simplify {
        // contradictory effect: the action would produce an inconsistent state
        if eff_pos.iter().any(|a| eff_neg.contains(a)) {
            return Ok(Candidate::DeletedEffect);
        }
        // adding an always-true atom or deleting an always-false one is a no-op
        eff_pos.retain(|a| !(inertia.negative_inertia(&a.predicate) && s0.contains(a)));
        eff_neg.retain(|a| !(inertia.positive_inertia(&a.predicate) && !s0.contains(a)));
        if eff_pos.is_empty() && eff_neg.is_empty() {
            return Ok(Candidate::DeletedEffect);
        }
    }

    let args: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    let split = clauses
        .iter()
        .enumerate()
        .map(|(clause, lits)| {
            let (pre_pos, pre_neg) = split_clause(lits);
            SymAction {
                name: op.name.clone(),
                args: args.clone(),
                clause,
                pre_pos,
                pre_neg,
                eff_pos: eff_pos.clone(),
                eff_neg: eff_neg.clone(),
            }
        })
        .collect();
    Ok(Candidate::Kept(split))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground::compute_inertia;
    use crate::parser::{parse_domain, parse_problem};

    const ROVER_DOMAIN: &str = include_str!("../../../../domains/rover/domain.htn");
    const ROVER_P01: &str = include_str!("../../../../domains/rover/p01.htn");

    fn rover() -> crate::model::Problem {
        let d = parse_domain(ROVER_DOMAIN).unwrap();
        parse_problem(ROVER_P01, &d).unwrap()
    }

    fn ground_actions(p: &crate::model::Problem, simplify: bool) -> (Vec<SymAction>, Vec<OperatorCounts>) {
        let inertia = compute_inertia(
            &p.domain.operators,
            p.domain.predicates.iter().map(|x| x.name.as_str()),
        );
        let opts = GroundOptions { simplify, ..Default::default() };
        instantiate_operators(&p.domain, &p.s0, &inertia, &opts).unwrap()
    }

    #[test]
    fn binding_enumeration_is_canonical() {
        let mut h = TypeHierarchy::new();
        h.add_type("t", None).unwrap();
        h.add_object("a", "t").unwrap();
        h.add_object("b", "t").unwrap();
        let params = vec![("?x".to_string(), "t".to_string()), ("?y".to_string(), "t".to_string())];
        let all: Vec<Vec<&str>> = BindingIter::new(&params, &h).collect();
        assert_eq!(
            all,
            vec![vec!["a", "a"], vec!["a", "b"], vec!["b", "a"], vec!["b", "b"]]
        );
        // empty product: one binding with no values
        let none: Vec<Vec<&str>> = BindingIter::new(&[], &h).collect();
        assert_eq!(none, vec![Vec::<&str>::new()]);
    }

    #[test]
    fn estimate_matches_products() {
        let mut h = TypeHierarchy::new();
        for (ty, n) in [("rover", 2), ("waypoint", 3)] {
            h.add_type(ty, None).unwrap();
            for i in 0..n {
                h.add_object(&format!("{ty}{i}"), ty).unwrap();
            }
        }
        let nav = vec![
            ("?x".to_string(), "rover".to_string()),
            ("?p1".to_string(), "waypoint".to_string()),
            ("?p2".to_string(), "waypoint".to_string()),
        ];
        assert_eq!(estimate_grounding_size(&nav, &h), 18);
        assert_eq!(estimate_grounding_size(&[], &h), 1);
    }

    #[test]
    fn fourteen_million_combinations_without_enumerating() {
        let mut h = TypeHierarchy::new();
        for (ty, n) in [("rover", 14usize), ("lander", 1), ("waypoint", 100)] {
            h.add_type(ty, None).unwrap();
            for i in 0..n {
                h.add_object(&format!("{ty}{i}"), ty).unwrap();
            }
        }
        let params = vec![
            ("?r".to_string(), "rover".to_string()),
            ("?l".to_string(), "lander".to_string()),
            ("?p1".to_string(), "waypoint".to_string()),
            ("?p2".to_string(), "waypoint".to_string()),
            ("?p3".to_string(), "waypoint".to_string()),
        ];
        assert_eq!(estimate_grounding_size(&params, &h), 14_000_000);
    }

    #[test]
    fn candidate_counts_follow_the_size_formula() {
        let p = rover();
        let (_, counts) = ground_actions(&p, true);
        let nav = counts.iter().find(|c| c.name == "navigate").unwrap();
        // 1 rover × 4 waypoints × 4 waypoints
        assert_eq!(nav.candidates, 16);
        assert_eq!(
            nav.candidates,
            nav.kept as u128 + nav.deleted_precondition as u128 + nav.deleted_effect as u128
        );
    }

    #[test]
    fn surviving_navigate_actions_are_the_traversable_pairs() {
        let p = rover();
        let (actions, _) = ground_actions(&p, true);
        let nav: Vec<&SymAction> = actions.iter().filter(|a| a.name == "navigate").collect();
        let expected: Vec<Vec<&str>> = vec![
            vec!["rover1", "waypoint0", "waypoint1"],
            vec!["rover1", "waypoint0", "waypoint3"],
            vec!["rover1", "waypoint1", "waypoint0"],
            vec!["rover1", "waypoint1", "waypoint3"],
            vec!["rover1", "waypoint3", "waypoint0"],
            vec!["rover1", "waypoint3", "waypoint1"],
        ];
        let got: Vec<Vec<&str>> =
            nav.iter().map(|a| a.args.iter().map(String::as_str).collect()).collect();
        assert_eq!(got, expected);
        // static conjuncts are compiled away: only the fluent atoms remain
        let first = nav
            .iter()
            .find(|a| a.args == ["rover1", "waypoint3", "waypoint1"])
            .unwrap();
        let pre: Vec<String> = first.pre_pos.iter().map(|a| a.to_string()).collect();
        assert_eq!(pre, vec!["(available rover1)", "(at rover1 waypoint3)"]);
        assert!(first.pre_neg.is_empty());
    }

    #[test]
    fn unsimplified_candidates_keep_static_preconditions() {
        let p = rover();
        let (actions, counts) = ground_actions(&p, false);
        let nav = counts.iter().find(|c| c.name == "navigate").unwrap();
        assert_eq!(nav.kept, 16);
        let a = actions
            .iter()
            .find(|a| a.name == "navigate" && a.args == ["rover1", "waypoint3", "waypoint2"])
            .unwrap();
        let preds: Vec<&str> = a.pre_pos.iter().map(|x| x.predicate.as_str()).collect();
        assert_eq!(preds, vec!["available", "at", "can_traverse", "visible"]);
    }

    #[test]
    fn self_loop_with_contradictory_effect_is_deleted() {
        // navigate(r, w, w) gains at(r,w) ∧ ¬at(r,w): incoherent, deleted
        let p = rover();
        let (actions, _) = ground_actions(&p, true);
        assert!(actions
            .iter()
            .all(|a| !(a.name == "navigate" && a.args[1] == a.args[2])));

        // with a can_traverse self-loop in s0 the deletion must come from the
        // effect rule, not the precondition
        let mut p2 = rover();
        p2.s0.insert(GroundAtom {
            predicate: "can_traverse".into(),
            args: vec!["rover1".into(), "waypoint3".into(), "waypoint3".into()],
        });
        p2.s0.insert(GroundAtom {
            predicate: "visible".into(),
            args: vec!["waypoint3".into(), "waypoint3".into()],
        });
        let (actions, counts) = ground_actions(&p2, true);
        assert!(actions
            .iter()
            .all(|a| !(a.name == "navigate" && a.args[1] == a.args[2])));
        let nav = counts.iter().find(|c| c.name == "navigate").unwrap();
        assert_eq!(nav.deleted_effect, 1);
    }

    #[test]
    fn disjunctive_precondition_splits_into_clause_actions() {
        let text = "(define (domain d)
            (:types loc)
            (:predicates (p ?a - loc) (q ?a - loc) (r ?a - loc))
            (:action act :parameters (?a - loc)
              :precondition (or (p ?a) (q ?a))
              :effect (and (r ?a))))";
        let d = parse_domain(text).unwrap();
        let mut p = crate::model::Problem {
            name: "t".into(),
            domain: d,
            s0: BTreeSet::new(),
            network: Default::default(),
        };
        p.domain.hierarchy.add_object("l1", "loc").unwrap();
        let inertia = compute_inertia(
            &p.domain.operators,
            p.domain.predicates.iter().map(|x| x.name.as_str()),
        );
        // p and q are static here; keep them symbolic so both clauses remain
        let opts = GroundOptions { simplify: false, ..Default::default() };
        let (actions, _) = instantiate_operators(&p.domain, &p.s0, &inertia, &opts).unwrap();
        assert_eq!(actions.len(), 2);
        assert_eq!((actions[0].clause, actions[1].clause), (0, 1));
        assert_eq!(actions[0].pre_pos[0].predicate, "p");
        assert_eq!(actions[1].pre_pos[0].predicate, "q");
        assert_eq!(actions[0].args, actions[1].args);
    }

    #[test]
    fn two_runs_are_identical() {
        let p = rover();
        let (a1, _) = ground_actions(&p, true);
        let (a2, _) = ground_actions(&p, true);
        assert_eq!(a1, a2);
    }
}
