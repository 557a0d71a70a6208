//! Line-oriented text form of a ground problem, written for diffability and
//! byte-identical golden comparisons; plus the trace file format.

use std::fmt::Write as _;

use crate::state::{
    DecompositionTrace, GroundConstraint, GroundFormula, GroundProblem, TraceNode,
};

fn ids(out: &mut String, label: &str, list: &[u32]) {
    out.push_str("  ");
    out.push_str(label);
    for id in list {
        let _ = write!(out, " {id}");
    }
    out.push('\n');
}

fn formula(out: &mut String, f: &GroundFormula) {
    match f {
        GroundFormula::True => out.push_str("true"),
        GroundFormula::False => out.push_str("false"),
        GroundFormula::Lit { id, negated } => {
            if *negated {
                let _ = write!(out, "(not {id})");
            } else {
                let _ = write!(out, "{id}");
            }
        }
        GroundFormula::And(fs) => {
            out.push_str("(and");
            for f in fs {
                out.push(' ');
                formula(out, f);
            }
            out.push(')');
        }
        GroundFormula::Or(fs) => {
            out.push_str("(or");
            for f in fs {
                out.push(' ');
                formula(out, f);
            }
            out.push(')');
        }
    }
}

fn constraint(out: &mut String, c: &GroundConstraint) {
    match c {
        GroundConstraint::Series(tags) => {
            let _ = write!(out, "(series {})", tags.join(" "));
        }
        GroundConstraint::Before(f, tags) => {
            out.push_str("(before ");
            formula(out, f);
            let _ = write!(out, " ({}))", tags.join(" "));
        }
        GroundConstraint::After(f, tags) => {
            out.push_str("(after ");
            formula(out, f);
            let _ = write!(out, " ({}))", tags.join(" "));
        }
        GroundConstraint::Between(f, a, b) => {
            out.push_str("(between ");
            formula(out, f);
            let _ = write!(out, " ({}) ({}))", a.join(" "), b.join(" "));
        }
    }
}

/// Serializes the whole ground problem. Write-only by design: the format
/// exists for golden tests and inspection, not interchange.
pub fn serialize_ground(gp: &GroundProblem) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "propositions {}", gp.table.len());
    for (id, atom) in gp.table.iter() {
        let _ = writeln!(out, "{id} {atom}");
    }

    let _ = writeln!(out, "state0 {}", gp.state0.count());
    let mut first = true;
    for id in gp.state0.iter() {
        if first {
            out.push_str("  ");
            first = false;
        } else {
            out.push(' ');
        }
        let _ = write!(out, "{id}");
    }
    if !first {
        out.push('\n');
    }

    let _ = writeln!(out, "actions {}", gp.actions.len());
    for (i, a) in gp.actions.iter().enumerate() {
        let _ = writeln!(out, "action {i} {a} clause {}", a.clause);
        ids(&mut out, "pre+", &a.pre_pos);
        ids(&mut out, "pre-", &a.pre_neg);
        ids(&mut out, "eff+", &a.eff_pos);
        ids(&mut out, "eff-", &a.eff_neg);
    }

    let _ = writeln!(out, "methods {}", gp.methods.len());
    for (i, m) in gp.methods.iter().enumerate() {
        let free = if m.free_args.is_empty() {
            String::new()
        } else {
            format!(" | {}", m.free_args.join(" "))
        };
        let _ = writeln!(
            out,
            "method {i} {m}{free} clause {} task {}",
            m.clause,
            gp.tasks.task(m.task)
        );
        out.push_str("  subtasks");
        for (tag, t) in &m.subtasks {
            let _ = write!(out, " ({tag} {})", gp.tasks.task(*t));
        }
        out.push('\n');
        ids(&mut out, "pre+", &m.pre_pos);
        ids(&mut out, "pre-", &m.pre_neg);
        for c in &m.residual_constraints {
            out.push_str("  constraint ");
            constraint(&mut out, c);
            out.push('\n');
        }
    }

    out.push_str("goal-tasks");
    for (tag, t) in &gp.goal_tasks {
        let _ = write!(out, " ({tag} {})", gp.tasks.task(*t));
    }
    out.push('\n');
    ids(&mut out, "goal+", &gp.goal_state_pos);
    ids(&mut out, "goal-", &gp.goal_state_neg);
    let _ = writeln!(out, "goal-unsatisfiable {}", gp.goal_unsatisfiable);
    for c in &gp.root_constraints {
        out.push_str("constraint ");
        constraint(&mut out, c);
        out.push('\n');
    }
    out
}

/// Renders the decomposition trace as nested s-expressions, one method
/// application per node with the plan-index span of each tagged subtask.
pub fn serialize_trace(gp: &GroundProblem, trace: &DecompositionTrace) -> String {
    fn node(out: &mut String, gp: &GroundProblem, n: &TraceNode, indent: usize) {
        let pad = "  ".repeat(indent);
        match n {
            TraceNode::Action { action, plan_index } => {
                let _ = writeln!(out, "{pad}(action {} {plan_index})", gp.actions[*action]);
            }
            TraceNode::Method { method, spans, children } => {
                let m = &gp.methods[*method];
                // free-variable bindings are part of the method's identity:
                // the residual constraints mention them
                out.push_str(&format!("{pad}(method ({}", m.name));
                for a in m.args.iter().chain(&m.free_args) {
                    let _ = write!(out, " {a}");
                }
                out.push_str(")\n");
                for (tag, lo, hi) in spans {
                    let _ = writeln!(out, "{pad}  (span {tag} {lo} {hi})");
                }
                if !m.residual_constraints.is_empty() {
                    let _ = write!(out, "{pad}  (constraints");
                    for c in &m.residual_constraints {
                        out.push(' ');
                        constraint(out, c);
                    }
                    out.push_str(")\n");
                }
                for c in children {
                    node(out, gp, c, indent + 1);
                }
                let _ = writeln!(out, "{pad})");
            }
        }
    }
    let mut out = String::new();
    for (root, (tag, lo, hi)) in trace.roots.iter().zip(&trace.root_spans) {
        let _ = writeln!(out, "(root {tag} {lo} {hi}");
        node(&mut out, gp, root, 1);
        out.push_str(")\n");
    }
    out
}

/// Reads a trace file back against its ground problem. Method nodes are
/// resolved by task name, arguments and span tags; clause-split copies share
/// residual constraints, so resolving to the first match is sound for
/// validation.
pub fn parse_trace(gp: &GroundProblem, text: &str) -> Result<DecompositionTrace, String> {
    use crate::sexpr::{parse_all, Sexpr};

    fn symbol<'a>(s: &'a Sexpr, what: &str) -> Result<&'a str, String> {
        s.as_symbol().ok_or_else(|| format!("expected {what}"))
    }
    fn number(s: &Sexpr, what: &str) -> Result<usize, String> {
        symbol(s, what)?.parse().map_err(|_| format!("expected numeric {what}"))
    }
    fn task(s: &Sexpr) -> Result<(String, Vec<String>), String> {
        let items = s.as_list().ok_or("expected a task list")?;
        let mut it = items.iter();
        let name = symbol(it.next().ok_or("empty task")?, "task name")?.to_string();
        let args = it.map(|a| symbol(a, "task argument").map(str::to_string))
            .collect::<Result<_, _>>()?;
        Ok((name, args))
    }

    fn node(gp: &GroundProblem, s: &Sexpr) -> Result<TraceNode, String> {
        let items = s.as_list().ok_or("expected a trace node")?;
        match items.first().and_then(|h| h.as_symbol()) {
            Some("action") => {
                let [_, t, idx] = items else {
                    return Err("malformed action node".into());
                };
                let (name, args) = task(t)?;
                let action = gp
                    .actions
                    .iter()
                    .position(|a| a.name == name && a.args == args)
                    .ok_or_else(|| format!("unknown action ({name} {})", args.join(" ")))?;
                Ok(TraceNode::Action { action, plan_index: number(idx, "plan index")? })
            }
            Some("method") => {
                let t = items.get(1).ok_or("malformed method node")?;
                let (name, args) = task(t)?;
                let mut spans = Vec::new();
                let mut children = Vec::new();
                for item in &items[2..] {
                    let list = item.as_list().ok_or("expected a method node element")?;
                    match list.first().and_then(|h| h.as_symbol()) {
                        Some("span") => {
                            let [_, tag, lo, hi] = list else {
                                return Err("malformed span".into());
                            };
                            spans.push((
                                symbol(tag, "span tag")?.to_string(),
                                number(lo, "span start")?,
                                number(hi, "span end")?,
                            ));
                        }
                        Some("constraints") => {} // re-derived from the resolved method
                        _ => children.push(node(gp, item)?),
                    }
                }
                let method = gp
                    .methods
                    .iter()
                    .position(|m| {
                        m.name == name
                            && m.args.len() + m.free_args.len() == args.len()
                            && m.args.iter().chain(&m.free_args).eq(&args)
                            && m.subtasks.len() == spans.len()
                            && m.subtasks.iter().all(|(tag, _)| {
                                spans.iter().any(|(t, _, _)| t == tag)
                            })
                    })
                    .ok_or_else(|| format!("unknown method ({name} {})", args.join(" ")))?;
                Ok(TraceNode::Method { method, spans, children })
            }
            _ => Err("expected an action or method node".into()),
        }
    }

    let mut trace = DecompositionTrace::default();
    for root in parse_all(text).map_err(|e| e.to_string())? {
        let items = root.as_list().ok_or("expected a root list")?;
        let [head, tag, lo, hi, body] = items else {
            return Err("malformed root node".into());
        };
        if symbol(head, "root keyword")? != "root" {
            return Err("expected a root node".into());
        }
        trace.root_spans.push((
            symbol(tag, "root tag")?.to_string(),
            number(lo, "root start")?,
            number(hi, "root end")?,
        ));
        trace.roots.push(node(gp, body)?);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground::{ground, GroundOptions};
    use crate::parser::{parse_domain, parse_problem};
    use crate::planner::{solve_ishop, Limits, Outcome};

    const ROVER_DOMAIN: &str = include_str!("../../../domains/rover/domain.htn");
    const ROVER_P01: &str = include_str!("../../../domains/rover/p01.htn");

    #[test]
    fn serialization_is_deterministic() {
        let d = parse_domain(ROVER_DOMAIN).unwrap();
        let p = parse_problem(ROVER_P01, &d).unwrap();
        let (gp1, _) = ground(&p, &GroundOptions::default()).unwrap();
        let (gp2, _) = ground(&p, &GroundOptions::default()).unwrap();
        let s1 = serialize_ground(&gp1);
        let s2 = serialize_ground(&gp2);
        assert_eq!(s1, s2);
        assert!(s1.starts_with("propositions "));
    }

    #[test]
    fn trace_serialization_mentions_every_method_application() {
        let d = parse_domain(ROVER_DOMAIN).unwrap();
        let p = parse_problem(ROVER_P01, &d).unwrap();
        let (gp, _) = ground(&p, &GroundOptions::default()).unwrap();
        let Outcome::Solved { trace, .. } = solve_ishop(&gp, &Limits::default()).outcome else {
            panic!()
        };
        let text = serialize_trace(&gp, &trace);
        assert!(text.contains("(method (get_rock_data waypoint1 rover1"));
        assert!(text.contains("(span t1 "));
        assert!(text.contains("(action (navigate rover1 waypoint3 waypoint1) 0)"));
    }

    #[test]
    fn trace_round_trips_through_the_file_format() {
        let d = parse_domain(ROVER_DOMAIN).unwrap();
        let p = parse_problem(ROVER_P01, &d).unwrap();
        let (gp, _) = ground(&p, &GroundOptions::default()).unwrap();
        let Outcome::Solved { plan, trace } = solve_ishop(&gp, &Limits::default()).outcome
        else {
            panic!()
        };
        let parsed = parse_trace(&gp, &serialize_trace(&gp, &trace)).unwrap();
        assert_eq!(parsed.root_spans, trace.root_spans);
        assert_eq!(parsed.leaves(), trace.leaves());
        crate::validate::validate_trace(&gp, &parsed, &plan).unwrap();
    }
}
