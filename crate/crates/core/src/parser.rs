//! Parser for the HTN domain/problem dialect: s-expression domains with
//! `:action`, `:method`/`:expansion`/`:constraints` blocks, typed object
//! lists and `series`/`before`/`after`/`between` constraint forms.

use std::collections::{BTreeSet, HashSet};

use crate::model::{
    Atom, Constraint, Domain, Expression, MethodSchema, OperatorSchema, Predicate, Problem,
    TaskNetwork, TaskRef, Term, TypeHierarchy, OBJECT_TYPE,
};
use crate::sexpr::{self, Sexpr, SourceSpan};

#[derive(Debug, Clone, thiserror::Error)]
#[error("{span}: {message}")]
pub struct ParseError {
    pub message: String,
    pub span: SourceSpan,
}

impl ParseError {
    fn new(message: impl Into<String>, span: SourceSpan) -> Self {
        ParseError { message: message.into(), span }
    }
}

impl From<sexpr::SexprError> for ParseError {
    fn from(e: sexpr::SexprError) -> Self {
        ParseError { message: e.message, span: e.span }
    }
}

type Result<T> = std::result::Result<T, ParseError>;

fn expect_symbol<'a>(e: &'a Sexpr, what: &str) -> Result<&'a str> {
    e.as_symbol().ok_or_else(|| ParseError::new(format!("expected {what}"), e.span()))
}

fn expect_list<'a>(e: &'a Sexpr, what: &str) -> Result<&'a [Sexpr]> {
    e.as_list().ok_or_else(|| ParseError::new(format!("expected {what}"), e.span()))
}

fn is_variable(s: &str) -> bool {
    s.starts_with('?')
}

fn term_of(s: &str) -> Term {
    if is_variable(s) {
        Term::Variable(s.to_string())
    } else {
        Term::Constant(s.to_string())
    }
}

/// Parses a PDDL-style typed list `a b - t c d - u e` into name/type pairs.
/// Names with no trailing type marker get `default_ty`.
fn parse_typed_list(items: &[Sexpr], default_ty: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    let mut pending: Vec<String> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let sym = expect_symbol(&items[i], "name or `-`")?;
        if sym == "-" {
            let ty_expr = items.get(i + 1).ok_or_else(|| {
                ParseError::new("expected type after `-`", items[i].span())
            })?;
            let ty = expect_symbol(ty_expr, "type name")?;
            if pending.is_empty() {
                return Err(ParseError::new("dangling type marker", items[i].span()));
            }
            for n in pending.drain(..) {
                out.push((n, ty.to_string()));
            }
            i += 2;
        } else {
            pending.push(sym.to_string());
            i += 1;
        }
    }
    for n in pending {
        out.push((n, default_ty.to_string()));
    }
    Ok(out)
}

fn check_atom_arity(domain_preds: &[Predicate], atom: &Atom, span: SourceSpan) -> Result<()> {
    match domain_preds.iter().find(|p| p.name == atom.predicate) {
        None => Err(ParseError::new(
            format!("unknown predicate `{}`", atom.predicate),
            span,
        )),
        Some(p) if p.param_types.len() != atom.args.len() => Err(ParseError::new(
            format!(
                "predicate `{}` expects {} arguments, got {}",
                atom.predicate,
                p.param_types.len(),
                atom.args.len()
            ),
            span,
        )),
        Some(_) => Ok(()),
    }
}

fn parse_expression(e: &Sexpr, preds: &[Predicate]) -> Result<Expression> {
    let items = expect_list(e, "expression")?;
    if items.is_empty() {
        return Ok(Expression::True);
    }
    let head = expect_symbol(&items[0], "expression head")?;
    match head {
        "and" => Ok(Expression::And(
            items[1..].iter().map(|e| parse_expression(e, preds)).collect::<Result<_>>()?,
        )),
        "or" => Ok(Expression::Or(
            items[1..].iter().map(|e| parse_expression(e, preds)).collect::<Result<_>>()?,
        )),
        "not" => {
            if items.len() != 2 {
                return Err(ParseError::new("`not` takes one argument", e.span()));
            }
            Ok(Expression::Not(Box::new(parse_expression(&items[1], preds)?)))
        }
        "imply" => {
            if items.len() != 3 {
                return Err(ParseError::new("`imply` takes two arguments", e.span()));
            }
            Ok(Expression::Imply(
                Box::new(parse_expression(&items[1], preds)?),
                Box::new(parse_expression(&items[2], preds)?),
            ))
        }
        "forall" | "exists" => {
            if items.len() != 3 {
                return Err(ParseError::new(
                    format!("`{head}` takes a variable list and a body"),
                    e.span(),
                ));
            }
            let binding = expect_list(&items[1], "quantified variable list")?;
            let vars = parse_typed_list(binding, OBJECT_TYPE)?;
            if vars.len() != 1 {
                return Err(ParseError::new(
                    "exactly one quantified variable expected",
                    items[1].span(),
                ));
            }
            let (var, ty) = vars.into_iter().next().unwrap();
            if !is_variable(&var) {
                return Err(ParseError::new("quantified name must be a variable", items[1].span()));
            }
            let body = Box::new(parse_expression(&items[2], preds)?);
            Ok(if head == "forall" {
                Expression::Forall(var, ty, body)
            } else {
                Expression::Exists(var, ty, body)
            })
        }
        "true" => Ok(Expression::True),
        "false" => Ok(Expression::False),
        _ => {
            let args = items[1..]
                .iter()
                .map(|t| expect_symbol(t, "term").map(term_of))
                .collect::<Result<Vec<_>>>()?;
            let atom = Atom { predicate: head.to_string(), args };
            check_atom_arity(preds, &atom, e.span())?;
            Ok(Expression::Atom(atom))
        }
    }
}

/// Effects are restricted to conjunctions of literals; anything else
/// (conditional effects, disjunctions, quantifiers) is rejected here.
fn parse_effect(e: &Sexpr, preds: &[Predicate]) -> Result<Expression> {
    fn literal(e: &Sexpr, preds: &[Predicate]) -> Result<Expression> {
        let items = expect_list(e, "effect literal")?;
        let head = expect_symbol(&items[0], "effect literal")?;
        if head == "not" {
            if items.len() != 2 {
                return Err(ParseError::new("`not` takes one argument", e.span()));
            }
            let inner = literal(&items[1], preds)?;
            if matches!(inner, Expression::Not(_)) {
                return Err(ParseError::new("double negation in effect", e.span()));
            }
            return Ok(Expression::Not(Box::new(inner)));
        }
        match parse_expression(e, preds)? {
            a @ Expression::Atom(_) => Ok(a),
            _ => Err(ParseError::new("effect must be a conjunction of literals", e.span())),
        }
    }
    let items = expect_list(e, "effect")?;
    if items.is_empty() {
        return Ok(Expression::And(vec![]));
    }
    if items[0].as_symbol() == Some("and") {
        Ok(Expression::And(
            items[1..].iter().map(|e| literal(e, preds)).collect::<Result<_>>()?,
        ))
    } else {
        literal(e, preds)
    }
}

fn parse_task(e: &Sexpr) -> Result<TaskRef> {
    let items = expect_list(e, "task")?;
    if items.is_empty() {
        return Err(ParseError::new("empty task", e.span()));
    }
    let name = expect_symbol(&items[0], "task name")?;
    let args = items[1..]
        .iter()
        .map(|t| expect_symbol(t, "term").map(term_of))
        .collect::<Result<Vec<_>>>()?;
    // primitive flag resolved against operator/method names in finalize
    Ok(TaskRef { name: name.to_string(), args, primitive: false })
}

/// `(tag t1 (task ...))` entries of an `:expansion` or `:goal-tasks` list.
fn parse_tagged_tasks(e: &Sexpr) -> Result<Vec<(String, TaskRef)>> {
    let items = expect_list(e, "tagged task list")?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for entry in items {
        let parts = expect_list(entry, "(tag NAME task)")?;
        if parts.len() != 3 || parts[0].as_symbol() != Some("tag") {
            return Err(ParseError::new("expected `(tag NAME (task ...))`", entry.span()));
        }
        let tag = expect_symbol(&parts[1], "tag name")?;
        if !seen.insert(tag.to_string()) {
            return Err(ParseError::new(format!("duplicate tag `{tag}`"), parts[1].span()));
        }
        out.push((tag.to_string(), parse_task(&parts[2])?));
    }
    Ok(out)
}

/// A tag group is either a bare tag or a parenthesized list of tags.
fn parse_tag_group(e: &Sexpr) -> Result<Vec<String>> {
    match e {
        Sexpr::Symbol(s, _) => Ok(vec![s.clone()]),
        Sexpr::List(items, span) => {
            if items.is_empty() {
                return Err(ParseError::new("empty tag group", *span));
            }
            items.iter().map(|t| expect_symbol(t, "tag").map(String::from)).collect()
        }
    }
}

fn parse_constraint(e: &Sexpr, preds: &[Predicate]) -> Result<Constraint> {
    let items = expect_list(e, "constraint")?;
    if items.is_empty() {
        return Err(ParseError::new("empty constraint", e.span()));
    }
    let head = expect_symbol(&items[0], "constraint keyword")?;
    match head {
        "series" => {
            if items.len() < 2 {
                return Err(ParseError::new("`series` needs at least one tag", e.span()));
            }
            let tags = items[1..]
                .iter()
                .map(|t| expect_symbol(t, "tag").map(String::from))
                .collect::<Result<_>>()?;
            Ok(Constraint::Series(tags))
        }
        "before" | "after" => {
            if items.len() != 3 {
                return Err(ParseError::new(
                    format!("`{head}` takes a formula and a tag group"),
                    e.span(),
                ));
            }
            let formula = parse_expression(&items[1], preds)?;
            let tags = parse_tag_group(&items[2])?;
            Ok(if head == "before" {
                Constraint::Before(formula, tags)
            } else {
                Constraint::After(formula, tags)
            })
        }
        "between" => {
            if items.len() != 4 {
                return Err(ParseError::new(
                    "`between` takes a formula and two tag groups",
                    e.span(),
                ));
            }
            let formula = parse_expression(&items[1], preds)?;
            let first = parse_tag_group(&items[2])?;
            let second = parse_tag_group(&items[3])?;
            Ok(Constraint::Between(formula, first, second))
        }
        other => Err(ParseError::new(format!("unknown constraint keyword `{other}`"), e.span())),
    }
}

fn parse_constraint_block(e: &Sexpr, preds: &[Predicate]) -> Result<Vec<Constraint>> {
    let items = expect_list(e, "constraint block")?;
    if items.is_empty() {
        return Ok(vec![]);
    }
    if items[0].as_symbol() == Some("and") {
        items[1..].iter().map(|c| parse_constraint(c, preds)).collect()
    } else {
        Ok(vec![parse_constraint(e, preds)?])
    }
}

fn expression_vars(e: &Expression) -> BTreeSet<String> {
    let mut vars = BTreeSet::new();
    e.variables(&mut vars);
    vars
}

/// Parses a domain definition into the lifted model.
pub fn parse_domain(text: &str) -> Result<Domain> {
    let root = sexpr::parse_one(text)?;
    let items = expect_list(&root, "(define ...)")?;
    if items.first().and_then(Sexpr::as_symbol) != Some("define") {
        return Err(ParseError::new("expected `(define (domain ...) ...)`", root.span()));
    }
    let header = expect_list(
        items.get(1).ok_or_else(|| ParseError::new("missing domain header", root.span()))?,
        "(domain NAME)",
    )?;
    if header.first().and_then(Sexpr::as_symbol) != Some("domain") || header.len() != 2 {
        return Err(ParseError::new("expected `(domain NAME)`", items[1].span()));
    }
    let name = expect_symbol(&header[1], "domain name")?.to_string();

    let mut hierarchy = TypeHierarchy::new();
    let mut predicates: Vec<Predicate> = Vec::new();
    let mut operators: Vec<OperatorSchema> = Vec::new();
    let mut methods: Vec<MethodSchema> = Vec::new();

    for section in &items[2..] {
        let parts = expect_list(section, "domain section")?;
        let head = expect_symbol(
            parts.first().ok_or_else(|| ParseError::new("empty section", section.span()))?,
            "section keyword",
        )?;
        match head {
            ":requirements" => {} // accepted and ignored
            ":types" => {
                for (ty, parent) in parse_typed_list(&parts[1..], OBJECT_TYPE)? {
                    let parent = if parent == OBJECT_TYPE { None } else { Some(parent) };
                    hierarchy
                        .add_type(&ty, parent.as_deref())
                        .map_err(|e| ParseError::new(e.to_string(), section.span()))?;
                }
            }
            ":predicates" => {
                for p in &parts[1..] {
                    let decl = expect_list(p, "predicate declaration")?;
                    let pname = expect_symbol(
                        decl.first()
                            .ok_or_else(|| ParseError::new("empty predicate", p.span()))?,
                        "predicate name",
                    )?;
                    let params = parse_typed_list(&decl[1..], OBJECT_TYPE)?;
                    predicates.push(Predicate {
                        name: pname.to_string(),
                        param_types: params.into_iter().map(|(_, t)| t).collect(),
                        span: p.span(),
                    });
                }
            }
            ":action" => {
                operators.push(parse_action(parts, section.span(), &predicates)?);
            }
            ":method" => {
                methods.push(parse_method(parts, section.span(), &predicates)?);
            }
            other => {
                return Err(ParseError::new(
                    format!("unknown domain section `{other}`"),
                    section.span(),
                ))
            }
        }
    }

    let mut domain = Domain { name, hierarchy, predicates, operators, methods };
    finalize_domain(&mut domain)?;
    Ok(domain)
}

fn parse_action(
    parts: &[Sexpr],
    span: SourceSpan,
    preds: &[Predicate],
) -> Result<OperatorSchema> {
    let name = expect_symbol(
        parts.get(1).ok_or_else(|| ParseError::new("missing action name", span))?,
        "action name",
    )?
    .to_string();
    let mut params = Vec::new();
    let mut precondition = Expression::True;
    let mut effect = Expression::And(vec![]);
    let mut i = 2;
    while i < parts.len() {
        let key = expect_symbol(&parts[i], "action keyword")?;
        let value = parts
            .get(i + 1)
            .ok_or_else(|| ParseError::new(format!("missing value for `{key}`"), parts[i].span()))?;
        match key {
            ":parameters" => {
                let list = expect_list(value, "parameter list")?;
                for (v, t) in parse_typed_list(list, "")? {
                    if !is_variable(&v) {
                        return Err(ParseError::new(
                            "action parameters must be variables",
                            value.span(),
                        ));
                    }
                    params.push((v, t)); // empty type resolved in finalize
                }
            }
            ":precondition" => precondition = parse_expression(value, preds)?,
            ":effect" => effect = parse_effect(value, preds)?,
            other => {
                return Err(ParseError::new(
                    format!("unknown action keyword `{other}`"),
                    parts[i].span(),
                ))
            }
        }
        i += 2;
    }
    // every variable in precondition/effect must be declared
    let declared: HashSet<&String> = params.iter().map(|(v, _)| v).collect();
    for v in expression_vars(&precondition).union(&expression_vars(&effect)) {
        if !declared.contains(v) {
            return Err(ParseError::new(
                format!("variable `{v}` of action `{name}` is not declared in :parameters"),
                span,
            ));
        }
    }
    Ok(OperatorSchema { name, params, precondition, effect, span })
}

fn parse_method(parts: &[Sexpr], span: SourceSpan, preds: &[Predicate]) -> Result<MethodSchema> {
    let name = expect_symbol(
        parts.get(1).ok_or_else(|| ParseError::new("missing method name", span))?,
        "method name",
    )?
    .to_string();
    let mut params = Vec::new();
    let mut subtasks = Vec::new();
    let mut constraints = Vec::new();
    let mut i = 2;
    while i < parts.len() {
        let key = expect_symbol(&parts[i], "method keyword")?;
        let value = parts
            .get(i + 1)
            .ok_or_else(|| ParseError::new(format!("missing value for `{key}`"), parts[i].span()))?;
        match key {
            ":parameters" => {
                let list = expect_list(value, "parameter list")?;
                for (v, t) in parse_typed_list(list, OBJECT_TYPE)? {
                    if !is_variable(&v) {
                        return Err(ParseError::new(
                            "method parameters must be variables",
                            value.span(),
                        ));
                    }
                    params.push((v, t));
                }
            }
            ":expansion" => subtasks = parse_tagged_tasks(value)?,
            ":constraints" => constraints = parse_constraint_block(value, preds)?,
            other => {
                return Err(ParseError::new(
                    format!("unknown method keyword `{other}`"),
                    parts[i].span(),
                ))
            }
        }
        i += 2;
    }
    // every tag referenced by a constraint must be declared
    let tags: HashSet<&str> = subtasks.iter().map(|(t, _)| t.as_str()).collect();
    for c in &constraints {
        for t in c.tags() {
            if !tags.contains(t) {
                return Err(ParseError::new(
                    format!("constraint of method `{name}` references unknown tag `{t}`"),
                    span,
                ));
            }
        }
    }
    // undeclared variables become free variables, first-occurrence order
    let declared: HashSet<String> = params.iter().map(|(v, _)| v.clone()).collect();
    let mut free_vars: Vec<(String, Option<String>)> = Vec::new();
    let mut record = |v: &str| {
        if !declared.contains(v) && !free_vars.iter().any(|(f, _)| f == v) {
            free_vars.push((v.to_string(), None));
        }
    };
    for (_, task) in &subtasks {
        for t in &task.args {
            if let Term::Variable(v) = t {
                record(v);
            }
        }
    }
    for c in &constraints {
        if let Some(f) = c.formula() {
            for v in expression_vars(f) {
                record(&v);
            }
        }
    }
    Ok(MethodSchema { name, params, subtasks, constraints, free_vars, span })
}

/// Resolves primitive flags, untyped operator parameters and the
/// operator/method name exclusivity rule.
fn finalize_domain(domain: &mut Domain) -> Result<()> {
    let op_names: HashSet<String> = domain.operators.iter().map(|o| o.name.clone()).collect();
    let method_names: HashSet<String> = domain.methods.iter().map(|m| m.name.clone()).collect();
    if let Some(overlap) = op_names.intersection(&method_names).next() {
        return Err(ParseError::new(
            format!("`{overlap}` names both an operator and a method"),
            SourceSpan::point(1, 1),
        ));
    }

    // untyped operator parameters: simplified unary-predicate scan, then object
    let type_names: HashSet<String> = domain.hierarchy.types().iter().cloned().collect();
    for op in &mut domain.operators {
        for (var, ty) in op.params.iter_mut().filter(|(_, t)| t.is_empty()) {
            let mut inferred = None;
            scan_unary(&op.precondition, var, &type_names, &mut inferred);
            *ty = inferred.unwrap_or_else(|| OBJECT_TYPE.to_string());
        }
    }

    let resolve = |task: &mut TaskRef, owner: &str, span: SourceSpan| -> Result<()> {
        if op_names.contains(&task.name) {
            task.primitive = true;
            let arity = domain.operators.iter().find(|o| o.name == task.name).unwrap().params.len();
            if arity != task.args.len() {
                return Err(ParseError::new(
                    format!(
                        "task `{}` in `{owner}` has {} arguments, operator expects {arity}",
                        task.name,
                        task.args.len()
                    ),
                    span,
                ));
            }
        } else if method_names.contains(&task.name) {
            task.primitive = false;
        } else {
            return Err(ParseError::new(
                format!("task `{}` in `{owner}` has no relevant operator or method", task.name),
                span,
            ));
        }
        Ok(())
    };

    let mut methods = std::mem::take(&mut domain.methods);
    for m in &mut methods {
        let owner = m.name.clone();
        let span = m.span;
        for (_, task) in &mut m.subtasks {
            resolve(task, &owner, span)?;
        }
    }
    domain.methods = methods;
    Ok(())
}

fn scan_unary(
    e: &Expression,
    var: &str,
    type_names: &HashSet<String>,
    found: &mut Option<String>,
) {
    match e {
        Expression::Atom(a) => {
            if a.args.len() == 1
                && a.args[0] == Term::Variable(var.to_string())
                && type_names.contains(&a.predicate)
                && found.is_none()
            {
                *found = Some(a.predicate.clone());
            }
        }
        Expression::Not(inner) => scan_unary(inner, var, type_names, found),
        Expression::And(es) | Expression::Or(es) => {
            for e in es {
                scan_unary(e, var, type_names, found);
            }
        }
        Expression::Imply(a, b) => {
            scan_unary(a, var, type_names, found);
            scan_unary(b, var, type_names, found);
        }
        Expression::Forall(_, _, inner) | Expression::Exists(_, _, inner) => {
            scan_unary(inner, var, type_names, found)
        }
        _ => {}
    }
}

/// Parses a problem definition against an already parsed domain.
pub fn parse_problem(text: &str, domain: &Domain) -> Result<Problem> {
    let root = sexpr::parse_one(text)?;
    let items = expect_list(&root, "(define ...)")?;
    if items.first().and_then(Sexpr::as_symbol) != Some("define") {
        return Err(ParseError::new("expected `(define (problem ...) ...)`", root.span()));
    }
    let header = expect_list(
        items.get(1).ok_or_else(|| ParseError::new("missing problem header", root.span()))?,
        "(problem NAME)",
    )?;
    if header.first().and_then(Sexpr::as_symbol) != Some("problem") || header.len() != 2 {
        return Err(ParseError::new("expected `(problem NAME)`", items[1].span()));
    }
    let name = expect_symbol(&header[1], "problem name")?.to_string();

    let mut hierarchy = domain.hierarchy.clone();
    let mut s0 = BTreeSet::new();
    let mut network = TaskNetwork::default();

    for section in &items[2..] {
        let parts = expect_list(section, "problem section")?;
        let head = expect_symbol(
            parts.first().ok_or_else(|| ParseError::new("empty section", section.span()))?,
            "section keyword",
        )?;
        match head {
            ":domain" => {
                let dname = expect_symbol(&parts[1], "domain name")?;
                if dname != domain.name {
                    return Err(ParseError::new(
                        format!("problem requires domain `{dname}`, got `{}`", domain.name),
                        parts[1].span(),
                    ));
                }
            }
            ":objects" => {
                for (obj, ty) in parse_typed_list(&parts[1..], OBJECT_TYPE)? {
                    hierarchy
                        .add_object(&obj, &ty)
                        .map_err(|e| ParseError::new(e.to_string(), section.span()))?;
                }
            }
            ":init" => {
                for fact in &parts[1..] {
                    let e = parse_expression(fact, &domain.predicates)?;
                    let atom = match e {
                        Expression::Atom(a) => a,
                        _ => {
                            return Err(ParseError::new(
                                "`:init` entries must be atoms",
                                fact.span(),
                            ))
                        }
                    };
                    for t in &atom.args {
                        match t {
                            Term::Variable(v) => {
                                return Err(ParseError::new(
                                    format!("variable `{v}` in `:init`"),
                                    fact.span(),
                                ))
                            }
                            Term::Constant(c) if !hierarchy.is_object(c) => {
                                return Err(ParseError::new(
                                    format!("unknown constant `{c}` in `:init`"),
                                    fact.span(),
                                ))
                            }
                            _ => {}
                        }
                    }
                    s0.insert(atom.to_ground());
                }
            }
            ":goal-tasks" => {
                let tagged = parse_tagged_tasks(&parts[1])?;
                for (tag, mut task) in tagged {
                    resolve_goal_task(&mut task, domain, section.span())?;
                    network.tasks.push((tag, task));
                }
            }
            ":goal-constraints" => {
                network.constraints = parse_constraint_block(&parts[1], &domain.predicates)?;
            }
            other => {
                return Err(ParseError::new(
                    format!("unknown problem section `{other}`"),
                    section.span(),
                ))
            }
        }
    }

    let tags: HashSet<&str> = network.tasks.iter().map(|(t, _)| t.as_str()).collect();
    for c in &network.constraints {
        for t in c.tags() {
            if !tags.contains(t) {
                return Err(ParseError::new(
                    format!("goal constraint references unknown tag `{t}`"),
                    SourceSpan::point(1, 1),
                ));
            }
        }
    }

    let mut domain = domain.clone();
    domain.hierarchy = hierarchy;
    Ok(Problem { name, domain, s0, network })
}

fn resolve_goal_task(task: &mut TaskRef, domain: &Domain, span: SourceSpan) -> Result<()> {
    if domain.operator(&task.name).is_some() {
        task.primitive = true;
    } else if domain.methods_named(&task.name).next().is_some() {
        task.primitive = false;
    } else {
        return Err(ParseError::new(
            format!("goal task `{}` has no relevant operator or method", task.name),
            span,
        ));
    }
    for t in &task.args {
        if t.is_variable() {
            return Err(ParseError::new(
                format!("goal task `{}` must be ground", task.name),
                span,
            ));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Pretty printing (parse → print → parse is a fixpoint)
// ---------------------------------------------------------------------------

fn write_expression(e: &Expression, out: &mut String) {
    match e {
        Expression::True => out.push_str("(true)"),
        Expression::False => out.push_str("(false)"),
        Expression::Atom(a) => out.push_str(&a.to_string()),
        Expression::Not(inner) => {
            out.push_str("(not ");
            write_expression(inner, out);
            out.push(')');
        }
        Expression::And(es) => {
            out.push_str("(and");
            for e in es {
                out.push(' ');
                write_expression(e, out);
            }
            out.push(')');
        }
        Expression::Or(es) => {
            out.push_str("(or");
            for e in es {
                out.push(' ');
                write_expression(e, out);
            }
            out.push(')');
        }
        Expression::Imply(a, b) => {
            out.push_str("(imply ");
            write_expression(a, out);
            out.push(' ');
            write_expression(b, out);
            out.push(')');
        }
        Expression::Forall(v, t, body) => {
            out.push_str(&format!("(forall ({v} - {t}) "));
            write_expression(body, out);
            out.push(')');
        }
        Expression::Exists(v, t, body) => {
            out.push_str(&format!("(exists ({v} - {t}) "));
            write_expression(body, out);
            out.push(')');
        }
    }
}

fn write_params(params: &[(String, String)], out: &mut String) {
    out.push('(');
    for (i, (v, t)) in params.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&format!("{v} - {t}"));
    }
    out.push(')');
}

fn write_tag_group(tags: &[String], out: &mut String) {
    if tags.len() == 1 {
        out.push_str(&tags[0]);
    } else {
        out.push('(');
        out.push_str(&tags.join(" "));
        out.push(')');
    }
}

fn write_constraint(c: &Constraint, out: &mut String) {
    match c {
        Constraint::Series(tags) => {
            out.push_str("(series ");
            out.push_str(&tags.join(" "));
            out.push(')');
        }
        Constraint::Before(f, tags) => {
            out.push_str("(before ");
            write_expression(f, out);
            out.push(' ');
            write_tag_group(tags, out);
            out.push(')');
        }
        Constraint::After(f, tags) => {
            out.push_str("(after ");
            write_expression(f, out);
            out.push(' ');
            write_tag_group(tags, out);
            out.push(')');
        }
        Constraint::Between(f, a, b) => {
            out.push_str("(between ");
            write_expression(f, out);
            out.push(' ');
            write_tag_group(a, out);
            out.push(' ');
            write_tag_group(b, out);
            out.push(')');
        }
    }
}

fn write_tagged_tasks(tasks: &[(String, TaskRef)], out: &mut String) {
    out.push('(');
    for (i, (tag, task)) in tasks.iter().enumerate() {
        if i > 0 {
            out.push_str("\n              ");
        }
        out.push_str(&format!("(tag {tag} {task})"));
    }
    out.push(')');
}

pub fn print_domain(domain: &Domain) -> String {
    let mut out = String::new();
    out.push_str(&format!("(define (domain {})\n", domain.name));
    let user_types: Vec<&String> =
        domain.hierarchy.types().iter().filter(|t| t.as_str() != OBJECT_TYPE).collect();
    if !user_types.is_empty() {
        out.push_str("  (:types");
        for t in &user_types {
            match domain.hierarchy.parent_of(t) {
                Some(p) => out.push_str(&format!(" {t} - {p}")),
                None => out.push_str(&format!(" {t}")),
            }
        }
        out.push_str(")\n");
    }
    if !domain.predicates.is_empty() {
        out.push_str("  (:predicates\n");
        for p in &domain.predicates {
            out.push_str(&format!("    ({}", p.name));
            for (i, t) in p.param_types.iter().enumerate() {
                out.push_str(&format!(" ?a{i} - {t}"));
            }
            out.push_str(")\n");
        }
        out.push_str("  )\n");
    }
    for op in &domain.operators {
        out.push_str(&format!("  (:action {}\n    :parameters ", op.name));
        write_params(&op.params, &mut out);
        out.push_str("\n    :precondition ");
        write_expression(&op.precondition, &mut out);
        out.push_str("\n    :effect ");
        write_expression(&op.effect, &mut out);
        out.push_str("\n  )\n");
    }
    for m in &domain.methods {
        out.push_str(&format!("  (:method {}\n    :parameters ", m.name));
        write_params(&m.params, &mut out);
        out.push_str("\n    :expansion ");
        write_tagged_tasks(&m.subtasks, &mut out);
        out.push_str("\n    :constraints (and");
        for c in &m.constraints {
            out.push_str("\n      ");
            write_constraint(c, &mut out);
        }
        out.push_str(")\n  )\n");
    }
    out.push_str(")\n");
    out
}

pub fn print_problem(problem: &Problem) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "(define (problem {})\n  (:domain {})\n",
        problem.name, problem.domain.name
    ));
    let domain_objects: HashSet<&str> = HashSet::new(); // all objects live in the problem
    let objs: Vec<_> = problem
        .domain
        .hierarchy
        .objects()
        .iter()
        .filter(|(n, _)| !domain_objects.contains(n.as_str()))
        .collect();
    if !objs.is_empty() {
        out.push_str("  (:objects");
        for (n, t) in objs {
            out.push_str(&format!(" {n} - {t}"));
        }
        out.push_str(")\n");
    }
    out.push_str("  (:init\n");
    for atom in &problem.s0 {
        out.push_str(&format!("    {atom}\n"));
    }
    out.push_str("  )\n  (:goal-tasks ");
    write_tagged_tasks(&problem.network.tasks, &mut out);
    out.push_str(")\n");
    if !problem.network.constraints.is_empty() {
        out.push_str("  (:goal-constraints (and");
        for c in &problem.network.constraints {
            out.push_str("\n    ");
            write_constraint(c, &mut out);
        }
        out.push_str("))\n");
    }
    out.push_str(")\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const ROVER_DOMAIN: &str = include_str!("../../../domains/rover/domain.htn");
    const ROVER_P01: &str = include_str!("../../../domains/rover/p01.htn");

    #[test]
    fn parses_rover_domain() {
        let d = parse_domain(ROVER_DOMAIN).unwrap();
        assert_eq!(d.name, "rover");
        assert_eq!(d.predicates.len(), 13);
        assert_eq!(d.operators.len(), 5);
        assert_eq!(d.methods.len(), 3);
        assert_eq!(d.methods_named("do_navigate").count(), 2);

        let nav = d.operator("navigate").unwrap();
        assert_eq!(nav.params.len(), 3);
        assert_eq!(nav.params[0], ("?x".to_string(), "rover".to_string()));

        // recursive do_navigate has exactly one free variable, ?mid
        let rec = d.methods_named("do_navigate").nth(1).unwrap();
        assert_eq!(rec.free_vars, vec![("?mid".to_string(), None)]);

        // get_rock_data free variables appear in first-occurrence order
        let grd = d.methods_named("get_rock_data").next().unwrap();
        let names: Vec<&str> = grd.free_vars.iter().map(|(v, _)| v.as_str()).collect();
        assert_eq!(names, vec!["?x", "?from", "?s", "?l", "?w"]);

        // subtask primitive flags resolved against operator/method names
        assert!(grd.subtasks[1].1.primitive);
        assert!(!grd.subtasks[0].1.primitive);
    }

    #[test]
    fn parses_rover_problem() {
        let d = parse_domain(ROVER_DOMAIN).unwrap();
        let p = parse_problem(ROVER_P01, &d).unwrap();
        assert_eq!(p.name, "rover-p01");
        assert_eq!(p.s0.len(), 23);
        assert_eq!(p.network.tasks.len(), 1);
        assert_eq!(p.network.tasks[0].0, "g1");
        assert!(!p.network.tasks[0].1.primitive);
        assert_eq!(p.domain.hierarchy.instances_of("waypoint").len(), 4);
    }

    #[test]
    fn print_parse_is_a_fixpoint() {
        let d = parse_domain(ROVER_DOMAIN).unwrap();
        let once = print_domain(&d);
        let twice = print_domain(&parse_domain(&once).unwrap());
        assert_eq!(once, twice);

        let p = parse_problem(ROVER_P01, &d).unwrap();
        let once = print_problem(&p);
        let d2 = parse_domain(&print_domain(&d)).unwrap();
        let twice = print_problem(&parse_problem(&once, &d2).unwrap());
        assert_eq!(once, twice);
    }

    fn mini(extra: &str) -> String {
        format!(
            "(define (domain mini)
               (:types loc)
               (:predicates (adj ?a - loc ?b - loc) (here ?a - loc))
               (:action go
                 :parameters (?a - loc ?b - loc)
                 :precondition (and (here ?a) (adj ?a ?b))
                 :effect (and (not (here ?a)) (here ?b)))
               {extra})"
        )
    }

    #[test]
    fn rejects_operator_method_name_overlap() {
        let text = mini(
            "(:method go :parameters (?a - loc ?b - loc)
               :expansion ((tag t1 (go ?a ?b))) :constraints (and))",
        );
        let err = parse_domain(&text).unwrap_err();
        assert!(err.message.contains("both an operator and a method"), "{err}");
    }

    #[test]
    fn rejects_duplicate_tags() {
        let text = mini(
            "(:method move :parameters (?a - loc ?b - loc)
               :expansion ((tag t1 (go ?a ?b)) (tag t1 (go ?b ?a)))
               :constraints (and))",
        );
        let err = parse_domain(&text).unwrap_err();
        assert!(err.message.contains("duplicate tag"), "{err}");
    }

    #[test]
    fn rejects_unknown_constraint_tag() {
        let text = mini(
            "(:method move :parameters (?a - loc ?b - loc)
               :expansion ((tag t1 (go ?a ?b)))
               :constraints (and (series t1 t9)))",
        );
        let err = parse_domain(&text).unwrap_err();
        assert!(err.message.contains("unknown tag `t9`"), "{err}");
    }

    #[test]
    fn rejects_predicate_arity_mismatch() {
        let text = mini(
            "(:method move :parameters (?a - loc)
               :expansion ((tag t1 (go ?a ?a)))
               :constraints (and (before (adj ?a) t1)))",
        );
        let err = parse_domain(&text).unwrap_err();
        assert!(err.message.contains("expects 2 arguments"), "{err}");
    }

    #[test]
    fn rejects_undeclared_action_variable() {
        let text = "(define (domain bad)
            (:predicates (p ?a - object))
            (:action act :parameters (?a - object) :effect (and (p ?b))))";
        let err = parse_domain(text).unwrap_err();
        assert!(err.message.contains("`?b`"), "{err}");
    }

    #[test]
    fn rejects_subtask_with_no_relevant_definition() {
        let text = mini(
            "(:method move :parameters (?a - loc ?b - loc)
               :expansion ((tag t1 (teleport ?a ?b)))
               :constraints (and))",
        );
        let err = parse_domain(&text).unwrap_err();
        assert!(err.message.contains("no relevant operator or method"), "{err}");
    }

    #[test]
    fn rejects_disjunctive_effect() {
        let text = "(define (domain bad)
            (:predicates (p ?a - object) (q ?a - object))
            (:action act :parameters (?a - object)
              :effect (or (p ?a) (q ?a))))";
        let err = parse_domain(text).unwrap_err();
        assert!(err.message.contains("conjunction of literals"), "{err}");
    }

    #[test]
    fn untyped_action_parameter_uses_unary_predicate_scan() {
        let text = "(define (domain scan)
            (:types loc)
            (:predicates (loc ?a - object) (here ?a - loc))
            (:action mark :parameters (?a)
              :precondition (and (loc ?a)) :effect (and (here ?a))))";
        let d = parse_domain(text).unwrap();
        assert_eq!(d.operator("mark").unwrap().params[0].1, "loc");
    }

    #[test]
    fn bare_and_parenthesized_tag_groups_agree() {
        let d = parse_domain(ROVER_DOMAIN).unwrap();
        let direct = d.methods_named("do_navigate").next().unwrap();
        match &direct.constraints[0] {
            Constraint::Before(_, tags) => assert_eq!(tags, &vec!["t1".to_string()]),
            other => panic!("unexpected constraint {other:?}"),
        }
    }

    #[test]
    fn problem_errors_are_reported() {
        let d = parse_domain(ROVER_DOMAIN).unwrap();
        let bad = "(define (problem p) (:domain rover)
            (:objects r - rover w - waypoint)
            (:init (at r nowhere))
            (:goal-tasks ((tag g1 (get_rock_data w)))))";
        let err = parse_problem(bad, &d).unwrap_err();
        assert!(err.message.contains("unknown constant `nowhere`"), "{err}");

        let bad = "(define (problem p) (:domain rover)
            (:objects w - waypoint)
            (:goal-tasks ((tag g1 (dig w)))))";
        let err = parse_problem(bad, &d).unwrap_err();
        assert!(err.message.contains("no relevant operator or method"), "{err}");
    }
}
