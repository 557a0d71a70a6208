//! Expression normalization: implication elimination, quantifier expansion
//! over type instances, negation pushing, plus DNF conversion and the
//! truth-table simplification rules.

use std::collections::HashSet;

use crate::model::{Atom, Expression, TypeHierarchy};

#[derive(Debug, Clone, thiserror::Error)]
pub enum NormalizeError {
    #[error("unbound variable `{0}` in quantified expression")]
    UnboundVariable(String),
    #[error("unknown type `{0}` in quantifier")]
    UnknownType(String),
    #[error("DNF clause count exceeded cap of {cap} ({clauses} clauses)")]
    DnfExplosion { cap: usize, clauses: usize },
}

/// Rewrites `e` into quantifier-free negation normal form: only `And`, `Or`,
/// literals, `True` and `False` remain. `imply a b` becomes `¬a ∨ b`;
/// `forall`/`exists` expand to conjunctions/disjunctions over the type's
/// instances. `allowed_vars` lists the variables that may occur free.
pub fn normalize(
    e: &Expression,
    hierarchy: &TypeHierarchy,
    allowed_vars: &HashSet<String>,
) -> Result<Expression, NormalizeError> {
    let mut bound = allowed_vars.clone();
    let n = nnf(e, false, hierarchy, &mut bound)?;
    Ok(flatten(n))
}

fn nnf(
    e: &Expression,
    negated: bool,
    hierarchy: &TypeHierarchy,
    bound: &mut HashSet<String>,
) -> Result<Expression, NormalizeError> {
    Ok(match e {
        Expression::True => {
            if negated {
                Expression::False
            } else {
                Expression::True
            }
        }
        Expression::False => {
            if negated {
                Expression::True
            } else {
                Expression::False
            }
        }
        Expression::Atom(a) => {
            for t in &a.args {
                if let crate::model::Term::Variable(v) = t {
                    if !bound.contains(v) {
                        return Err(NormalizeError::UnboundVariable(v.clone()));
                    }
                }
            }
            if negated {
                Expression::Not(Box::new(Expression::Atom(a.clone())))
            } else {
                Expression::Atom(a.clone())
            }
        }
        Expression::Not(inner) => nnf(inner, !negated, hierarchy, bound)?,
        Expression::And(es) => {
            let parts = es
                .iter()
                .map(|e| nnf(e, negated, hierarchy, bound))
                .collect::<Result<Vec<_>, _>>()?;
            if negated {
                Expression::Or(parts)
            } else {
                Expression::And(parts)
            }
        }
        Expression::Or(es) => {
            let parts = es
                .iter()
                .map(|e| nnf(e, negated, hierarchy, bound))
                .collect::<Result<Vec<_>, _>>()?;
            if negated {
                Expression::And(parts)
            } else {
                Expression::Or(parts)
            }
        }
        // a → b rewritten as ¬a ∨ b before pushing the negation context
        Expression::Imply(a, b) => {
            let rewritten =
                Expression::Or(vec![Expression::Not(a.clone()), (**b).clone()]);
            nnf(&rewritten, negated, hierarchy, bound)?
        }
        Expression::Forall(v, ty, body) => {
            expand_quantifier(v, ty, body, /*universal=*/ !negated, negated, hierarchy, bound)?
        }
        Expression::Exists(v, ty, body) => {
            expand_quantifier(v, ty, body, /*universal=*/ negated, negated, hierarchy, bound)?
        }
    })
}

fn expand_quantifier(
    var: &str,
    ty: &str,
    body: &Expression,
    universal: bool,
    negated: bool,
    hierarchy: &TypeHierarchy,
    bound: &mut HashSet<String>,
) -> Result<Expression, NormalizeError> {
    if !hierarchy.has_type(ty) {
        return Err(NormalizeError::UnknownType(ty.to_string()));
    }
    let instances: Vec<String> =
        hierarchy.instances_of(ty).into_iter().map(String::from).collect();
    let newly_bound = bound.insert(var.to_string());
    let mut parts = Vec::with_capacity(instances.len());
    for c in &instances {
        let sigma: crate::model::Substitution =
            [(var.to_string(), c.clone())].into_iter().collect();
        let instantiated = crate::model::substitute(body, &sigma);
        parts.push(nnf(&instantiated, negated, hierarchy, bound)?);
    }
    if newly_bound {
        bound.remove(var);
    }
    // empty domain: forall expands to True, exists to False
    Ok(if universal { Expression::And(parts) } else { Expression::Or(parts) })
}

/// Flattens nested conjunctions/disjunctions and normalizes trivial cases.
fn flatten(e: Expression) -> Expression {
    match e {
        Expression::And(es) => {
            let mut parts = Vec::new();
            for e in es {
                match flatten(e) {
                    Expression::And(inner) => parts.extend(inner),
                    other => parts.push(other),
                }
            }
            match parts.len() {
                0 => Expression::True,
                1 => parts.pop().unwrap(),
                _ => Expression::And(parts),
            }
        }
        Expression::Or(es) => {
            let mut parts = Vec::new();
            for e in es {
                match flatten(e) {
                    Expression::Or(inner) => parts.extend(inner),
                    other => parts.push(other),
                }
            }
            match parts.len() {
                0 => Expression::False,
                1 => parts.pop().unwrap(),
                _ => Expression::Or(parts),
            }
        }
        other => other,
    }
}

/// Applies the ten atomic-simplification identities to a fixpoint:
/// ¬T≡F, ¬F≡T, T∧φ≡φ, F∧φ≡F, T∨φ≡T, F∨φ≡φ, φ∧φ≡φ, φ∨φ≡φ,
/// φ∧¬φ≡F, φ∨¬φ≡T. Expects a normalized expression.
pub fn simplify_expression(e: &Expression) -> Expression {
    match e {
        Expression::True | Expression::False | Expression::Atom(_) => e.clone(),
        Expression::Not(inner) => match simplify_expression(inner) {
            Expression::True => Expression::False,
            Expression::False => Expression::True,
            Expression::Not(e) => *e,
            other => Expression::Not(Box::new(other)),
        },
        Expression::And(es) => {
            let mut parts: Vec<Expression> = Vec::new();
            for e in es {
                match simplify_expression(e) {
                    Expression::True => {}
                    Expression::False => return Expression::False,
                    Expression::And(inner) => {
                        for p in inner {
                            if !parts.contains(&p) {
                                parts.push(p);
                            }
                        }
                    }
                    other => {
                        if !parts.contains(&other) {
                            parts.push(other);
                        }
                    }
                }
            }
            for p in &parts {
                if parts.contains(&complement(p)) {
                    return Expression::False;
                }
            }
            match parts.len() {
                0 => Expression::True,
                1 => parts.pop().unwrap(),
                _ => Expression::And(parts),
            }
        }
        Expression::Or(es) => {
            let mut parts: Vec<Expression> = Vec::new();
            for e in es {
                match simplify_expression(e) {
                    Expression::False => {}
                    Expression::True => return Expression::True,
                    Expression::Or(inner) => {
                        for p in inner {
                            if !parts.contains(&p) {
                                parts.push(p);
                            }
                        }
                    }
                    other => {
                        if !parts.contains(&other) {
                            parts.push(other);
                        }
                    }
                }
            }
            for p in &parts {
                if parts.contains(&complement(p)) {
                    return Expression::True;
                }
            }
            match parts.len() {
                0 => Expression::False,
                1 => parts.pop().unwrap(),
                _ => Expression::Or(parts),
            }
        }
        other => other.clone(),
    }
}

fn complement(e: &Expression) -> Expression {
    match e {
        Expression::Not(inner) => (**inner).clone(),
        other => Expression::Not(Box::new(other.clone())),
    }
}

/// A literal of a DNF clause.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Literal {
    pub atom: Atom,
    pub negated: bool,
}

/// Converts a normalized expression to a disjunction of conjunctions of
/// literals. `True` yields one empty clause; `False` yields no clause.
/// Clause order follows input order; clauses containing a complementary
/// pair are dropped as unsatisfiable.
pub fn to_dnf(e: &Expression, cap: usize) -> Result<Vec<Vec<Literal>>, NormalizeError> {
    let clauses = dnf_rec(e, cap)?;
    let mut out = Vec::new();
    'clause: for clause in clauses {
        let mut lits: Vec<Literal> = Vec::new();
        for lit in clause {
            if lits.iter().any(|l| l.atom == lit.atom && l.negated != lit.negated) {
                continue 'clause; // φ ∧ ¬φ: unsatisfiable clause
            }
            if !lits.contains(&lit) {
                lits.push(lit);
            }
        }
        out.push(lits);
    }
    Ok(out)
}

fn dnf_rec(e: &Expression, cap: usize) -> Result<Vec<Vec<Literal>>, NormalizeError> {
    Ok(match e {
        Expression::True => vec![vec![]],
        Expression::False => vec![],
        Expression::Atom(a) => vec![vec![Literal { atom: a.clone(), negated: false }]],
        Expression::Not(inner) => match &**inner {
            Expression::Atom(a) => vec![vec![Literal { atom: a.clone(), negated: true }]],
            Expression::True => vec![],
            Expression::False => vec![vec![]],
            _ => unreachable!("to_dnf expects a normalized expression"),
        },
        Expression::Or(es) => {
            let mut clauses = Vec::new();
            for e in es {
                clauses.extend(dnf_rec(e, cap)?);
                if clauses.len() > cap {
                    return Err(NormalizeError::DnfExplosion { cap, clauses: clauses.len() });
                }
            }
            clauses
        }
        Expression::And(es) => {
            let mut clauses: Vec<Vec<Literal>> = vec![vec![]];
            for e in es {
                let rhs = dnf_rec(e, cap)?;
                let mut next = Vec::with_capacity(clauses.len() * rhs.len().max(1));
                for c in &clauses {
                    for r in &rhs {
                        let mut merged = c.clone();
                        merged.extend(r.iter().cloned());
                        next.push(merged);
                    }
                }
                if next.len() > cap {
                    return Err(NormalizeError::DnfExplosion { cap, clauses: next.len() });
                }
                clauses = next;
            }
            clauses
        }
        _ => unreachable!("to_dnf expects a normalized expression"),
    })
}

/// True if the expression is structurally quantifier- and implication-free.
pub fn is_normalized(e: &Expression) -> bool {
    match e {
        Expression::True | Expression::False | Expression::Atom(_) => true,
        Expression::Not(inner) => matches!(**inner, Expression::Atom(_)),
        Expression::And(es) | Expression::Or(es) => es.iter().all(is_normalized),
        _ => false,
    }
}
