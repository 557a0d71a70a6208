//! Lifted domain/problem model: type hierarchy, terms, logical expressions,
//! operator and method schemas, and substitution.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use crate::sexpr::SourceSpan;

pub const OBJECT_TYPE: &str = "object";

/// Declared types, the subtype relation and the typed constants of a problem.
#[derive(Debug, Clone, Default)]
pub struct TypeHierarchy {
    /// Declaration order, `object` implicit root first.
    types: Vec<String>,
    parent: HashMap<String, String>,
    /// Constants in declaration order with their declared type.
    objects: Vec<(String, String)>,
    object_types: HashMap<String, String>,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum ModelError {
    #[error("type cycle involving `{0}`")]
    TypeCycle(String),
    #[error("unknown type `{0}`")]
    UnknownType(String),
    #[error("unknown constant `{0}`")]
    UnknownConstant(String),
    #[error("constant `{constant}` of type `{actual}` is not compatible with `{expected}`")]
    IncompatibleBinding { constant: String, actual: String, expected: String },
    #[error("variable `{0}` is not bound to a constant")]
    UnboundVariable(String),
}

impl TypeHierarchy {
    pub fn new() -> Self {
        let mut h = TypeHierarchy::default();
        h.types.push(OBJECT_TYPE.to_string());
        h
    }

    pub fn add_type(&mut self, name: &str, parent: Option<&str>) -> Result<(), ModelError> {
        if !self.types.iter().any(|t| t == name) {
            self.types.push(name.to_string());
        }
        if let Some(p) = parent {
            if p != OBJECT_TYPE && !self.types.iter().any(|t| t == p) {
                self.types.push(p.to_string());
            }
            self.parent.insert(name.to_string(), p.to_string());
            // walk up to detect cycles
            let mut seen = HashSet::new();
            let mut cur = name.to_string();
            while let Some(next) = self.parent.get(&cur) {
                if !seen.insert(cur.clone()) {
                    return Err(ModelError::TypeCycle(name.to_string()));
                }
                cur = next.clone();
            }
        }
        Ok(())
    }

    pub fn has_type(&self, name: &str) -> bool {
        self.types.iter().any(|t| t == name)
    }

    pub fn add_object(&mut self, name: &str, ty: &str) -> Result<(), ModelError> {
        if !self.has_type(ty) {
            return Err(ModelError::UnknownType(ty.to_string()));
        }
        self.objects.push((name.to_string(), ty.to_string()));
        self.object_types.insert(name.to_string(), ty.to_string());
        Ok(())
    }

    pub fn object_type(&self, name: &str) -> Option<&str> {
        self.object_types.get(name).map(String::as_str)
    }

    pub fn is_object(&self, name: &str) -> bool {
        self.object_types.contains_key(name)
    }

    /// `sub` equals `sup` or is a transitive subtype of it.
    pub fn is_subtype(&self, sub: &str, sup: &str) -> bool {
        if sup == OBJECT_TYPE {
            return true;
        }
        let mut cur = sub;
        loop {
            if cur == sup {
                return true;
            }
            match self.parent.get(cur) {
                Some(p) => cur = p,
                None => return false,
            }
        }
    }

    /// Constants whose declared type equals `ty` or is a subtype of it,
    /// in declaration order.
    pub fn instances_of(&self, ty: &str) -> Vec<&str> {
        self.objects
            .iter()
            .filter(|(_, t)| self.is_subtype(t, ty))
            .map(|(n, _)| n.as_str())
            .collect()
    }

    pub fn instance_count(&self, ty: &str) -> usize {
        self.objects.iter().filter(|(_, t)| self.is_subtype(t, ty)).count()
    }

    /// True when no declared type is a strict subtype of `ty`.
    pub fn has_no_subtypes(&self, ty: &str) -> bool {
        !self.types.iter().any(|t| t != ty && self.is_subtype(t, ty))
    }

    pub fn objects(&self) -> &[(String, String)] {
        &self.objects
    }

    pub fn types(&self) -> &[String] {
        &self.types
    }

    pub fn parent_of(&self, ty: &str) -> Option<&str> {
        self.parent.get(ty).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Variable(String),
    Constant(String),
}

impl Term {
    pub fn is_variable(&self) -> bool {
        matches!(self, Term::Variable(_))
    }

    pub fn name(&self) -> &str {
        match self {
            Term::Variable(n) | Term::Constant(n) => n,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| !t.is_variable())
    }

    /// Only valid for ground atoms.
    pub fn to_ground(&self) -> GroundAtom {
        debug_assert!(self.is_ground());
        GroundAtom {
            predicate: self.predicate.clone(),
            args: self.args.iter().map(|t| t.name().to_string()).collect(),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        write!(f, ")")
    }
}

/// Fully instantiated atom; the unit interned by the proposition table.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundAtom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expression {
    True,
    False,
    Atom(Atom),
    Not(Box<Expression>),
    And(Vec<Expression>),
    Or(Vec<Expression>),
    Imply(Box<Expression>, Box<Expression>),
    Forall(String, String, Box<Expression>),
    Exists(String, String, Box<Expression>),
}

impl Expression {
    pub fn atom(predicate: &str, args: Vec<Term>) -> Self {
        Expression::Atom(Atom { predicate: predicate.to_string(), args })
    }

    /// Collects the variables occurring anywhere in the expression.
    pub fn variables(&self, out: &mut BTreeSet<String>) {
        match self {
            Expression::True | Expression::False => {}
            Expression::Atom(a) => {
                for t in &a.args {
                    if let Term::Variable(v) = t {
                        out.insert(v.clone());
                    }
                }
            }
            Expression::Not(e) => e.variables(out),
            Expression::And(es) | Expression::Or(es) => {
                for e in es {
                    e.variables(out);
                }
            }
            Expression::Imply(a, b) => {
                a.variables(out);
                b.variables(out);
            }
            Expression::Forall(v, _, e) | Expression::Exists(v, _, e) => {
                let mut inner = BTreeSet::new();
                e.variables(&mut inner);
                inner.remove(v);
                out.extend(inner);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Predicate {
    pub name: String,
    pub param_types: Vec<String>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone)]
pub struct OperatorSchema {
    pub name: String,
    pub params: Vec<(String, String)>,
    pub precondition: Expression,
    pub effect: Expression,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TaskRef {
    pub name: String,
    pub args: Vec<Term>,
    pub primitive: bool,
}

impl fmt::Display for TaskRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Constraint {
    Series(Vec<String>),
    Before(Expression, Vec<String>),
    After(Expression, Vec<String>),
    Between(Expression, Vec<String>, Vec<String>),
}

impl Constraint {
    pub fn tags(&self) -> Vec<&str> {
        match self {
            Constraint::Series(ts)
            | Constraint::Before(_, ts)
            | Constraint::After(_, ts) => ts.iter().map(String::as_str).collect(),
            Constraint::Between(_, a, b) => {
                a.iter().chain(b.iter()).map(String::as_str).collect()
            }
        }
    }

    pub fn formula(&self) -> Option<&Expression> {
        match self {
            Constraint::Series(_) => None,
            Constraint::Before(e, _) | Constraint::After(e, _) | Constraint::Between(e, _, _) => {
                Some(e)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct MethodSchema {
    pub name: String,
    pub params: Vec<(String, String)>,
    pub subtasks: Vec<(String, TaskRef)>,
    pub constraints: Vec<Constraint>,
    /// Variables used by the method but not declared as parameters; types are
    /// filled in by inference before instantiation.
    pub free_vars: Vec<(String, Option<String>)>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, Default)]
pub struct TaskNetwork {
    pub tasks: Vec<(String, TaskRef)>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone)]
pub struct Domain {
    pub name: String,
    pub hierarchy: TypeHierarchy,
    pub predicates: Vec<Predicate>,
    pub operators: Vec<OperatorSchema>,
    pub methods: Vec<MethodSchema>,
}

impl Domain {
    pub fn predicate(&self, name: &str) -> Option<&Predicate> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn operator(&self, name: &str) -> Option<&OperatorSchema> {
        self.operators.iter().find(|o| o.name == name)
    }

    pub fn methods_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a MethodSchema> + 'a {
        self.methods.iter().filter(move |m| m.name == name)
    }
}

/// A complete lifted HTN problem: initial state, goal network, operators,
/// methods and the type hierarchy with all objects merged in.
#[derive(Debug, Clone)]
pub struct Problem {
    pub name: String,
    pub domain: Domain,
    pub s0: BTreeSet<GroundAtom>,
    pub network: TaskNetwork,
}

pub type Substitution = HashMap<String, String>;

/// Replaces every occurrence of a mapped variable with its constant.
/// Unmapped variables stay symbolic.
pub fn substitute(e: &Expression, sigma: &Substitution) -> Expression {
    match e {
        Expression::True => Expression::True,
        Expression::False => Expression::False,
        Expression::Atom(a) => Expression::Atom(substitute_atom(a, sigma)),
        Expression::Not(inner) => Expression::Not(Box::new(substitute(inner, sigma))),
        Expression::And(es) => Expression::And(es.iter().map(|e| substitute(e, sigma)).collect()),
        Expression::Or(es) => Expression::Or(es.iter().map(|e| substitute(e, sigma)).collect()),
        Expression::Imply(a, b) => Expression::Imply(
            Box::new(substitute(a, sigma)),
            Box::new(substitute(b, sigma)),
        ),
        Expression::Forall(v, t, inner) => {
            // the quantified variable shadows any outer binding
            let mut inner_sigma = sigma.clone();
            inner_sigma.remove(v);
            Expression::Forall(v.clone(), t.clone(), Box::new(substitute(inner, &inner_sigma)))
        }
        Expression::Exists(v, t, inner) => {
            let mut inner_sigma = sigma.clone();
            inner_sigma.remove(v);
            Expression::Exists(v.clone(), t.clone(), Box::new(substitute(inner, &inner_sigma)))
        }
    }
}

pub fn substitute_term(t: &Term, sigma: &Substitution) -> Term {
    match t {
        Term::Variable(v) => match sigma.get(v) {
            Some(c) => Term::Constant(c.clone()),
            None => t.clone(),
        },
        Term::Constant(_) => t.clone(),
    }
}

pub fn substitute_atom(a: &Atom, sigma: &Substitution) -> Atom {
    Atom {
        predicate: a.predicate.clone(),
        args: a.args.iter().map(|t| substitute_term(t, sigma)).collect(),
    }
}

pub fn substitute_task(t: &TaskRef, sigma: &Substitution) -> TaskRef {
    TaskRef {
        name: t.name.clone(),
        args: t.args.iter().map(|t| substitute_term(t, sigma)).collect(),
        primitive: t.primitive,
    }
}

pub fn substitute_constraint(c: &Constraint, sigma: &Substitution) -> Constraint {
    match c {
        Constraint::Series(ts) => Constraint::Series(ts.clone()),
        Constraint::Before(e, ts) => Constraint::Before(substitute(e, sigma), ts.clone()),
        Constraint::After(e, ts) => Constraint::After(substitute(e, sigma), ts.clone()),
        Constraint::Between(e, a, b) => {
            Constraint::Between(substitute(e, sigma), a.clone(), b.clone())
        }
    }
}

/// Checks that every binding in `sigma` maps a variable of the given
/// parameter list to a constant of a compatible type.
pub fn check_binding_types(
    params: &[(String, String)],
    sigma: &Substitution,
    hierarchy: &TypeHierarchy,
) -> Result<(), ModelError> {
    for (var, ty) in params {
        if let Some(c) = sigma.get(var) {
            let actual = hierarchy
                .object_type(c)
                .ok_or_else(|| ModelError::UnknownConstant(c.clone()))?;
            if !hierarchy.is_subtype(actual, ty) {
                return Err(ModelError::IncompatibleBinding {
                    constant: c.clone(),
                    actual: actual.to_string(),
                    expected: ty.clone(),
                });
            }
        }
    }
    Ok(())
}
