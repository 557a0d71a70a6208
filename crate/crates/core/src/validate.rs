//! Independent plan/trace checker: executability, goal state, and the
//! residual constraint semantics over the state trajectory.

use std::fmt;

use crate::state::{
    applicable, apply, DecompositionTrace, GroundConstraint, GroundFormula, GroundProblem, Plan,
    State, TraceNode,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Plan step or state index the check failed at.
    pub step: usize,
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {}: {}", self.step, self.reason)
    }
}

impl std::error::Error for Violation {}

fn violation(step: usize, reason: impl Into<String>) -> Violation {
    Violation { step, reason: reason.into() }
}

/// Simulates the plan from the initial state; checks every precondition and
/// the goal state after the last action.
pub fn validate_plan(gp: &GroundProblem, plan: &Plan) -> Result<(), Violation> {
    let states = trajectory(gp, plan)?;
    let last = states.last().expect("trajectory includes the initial state");
    for &p in &gp.goal_state_pos {
        if !last.contains(p) {
            return Err(violation(
                plan.len(),
                format!("goal literal {} does not hold in the final state", gp.table.atom(p)),
            ));
        }
    }
    for &p in &gp.goal_state_neg {
        if last.contains(p) {
            return Err(violation(
                plan.len(),
                format!("goal literal (not {}) does not hold in the final state", gp.table.atom(p)),
            ));
        }
    }
    for c in &gp.root_constraints {
        if let GroundConstraint::After(f, _) = c {
            if !f.eval(last) {
                return Err(violation(plan.len(), "goal `after` formula fails in the final state"));
            }
        }
    }
    Ok(())
}

/// States s0..sn visited by the plan, failing at the first inapplicable step.
pub fn trajectory(gp: &GroundProblem, plan: &Plan) -> Result<Vec<State>, Violation> {
    let mut states = Vec::with_capacity(plan.len() + 1);
    states.push(gp.state0.clone());
    for (i, &idx) in plan.steps.iter().enumerate() {
        let action = gp
            .actions
            .get(idx)
            .ok_or_else(|| violation(i, format!("action index {idx} out of range")))?;
        let current = states.last().unwrap();
        if !applicable(action, current) {
            let missing = action
                .pre_pos
                .iter()
                .find(|&&p| !current.contains(p))
                .map(|&p| gp.table.atom(p).to_string())
                .or_else(|| {
                    action
                        .pre_neg
                        .iter()
                        .find(|&&p| current.contains(p))
                        .map(|&p| format!("(not {})", gp.table.atom(p)))
                });
            return Err(violation(
                i,
                format!(
                    "action {action} is not applicable: {} unsatisfied",
                    missing.unwrap_or_else(|| "precondition".into())
                ),
            ));
        }
        states.push(apply(action, current));
    }
    Ok(states)
}

/// Checks the decomposition trace: the leaf sequence must realize the plan,
/// and every residual constraint of every applied method must hold over the
/// state trajectory.
pub fn validate_trace(
    gp: &GroundProblem,
    trace: &DecompositionTrace,
    plan: &Plan,
) -> Result<(), Violation> {
    let leaves = trace.leaves();
    if leaves.len() != plan.len()
        || leaves
            .iter()
            .zip(&plan.steps)
            .any(|(&a, &b)| gp.actions[a].task() != gp.actions[b].task())
    {
        return Err(violation(0, "trace leaf sequence does not match the plan"));
    }
    let states = trajectory(gp, plan)?;
    for node in &trace.roots {
        check_node(gp, node, &states)?;
    }
    check_constraints(
        gp,
        &gp.root_constraints,
        &trace.root_spans,
        &states,
        "goal network",
    )
}

fn check_node(gp: &GroundProblem, node: &TraceNode, states: &[State]) -> Result<(), Violation> {
    let TraceNode::Method { method, spans, children } = node else {
        return Ok(());
    };
    let m = &gp.methods[*method];
    check_constraints(gp, &m.residual_constraints, spans, states, &m.to_string())?;
    for child in children {
        check_node(gp, child, states)?;
    }
    Ok(())
}

/// Plan-index interval covered by a tag group: from the group's first start
/// to its last end.
fn group_span(
    spans: &[(String, usize, usize)],
    tags: &[String],
    owner: &str,
) -> Result<(usize, usize), Violation> {
    let mut lo = usize::MAX;
    let mut hi = 0;
    for tag in tags {
        let &(_, s, e) = spans
            .iter()
            .find(|(t, _, _)| t == tag)
            .ok_or_else(|| violation(0, format!("{owner}: tag `{tag}` missing from the trace")))?;
        lo = lo.min(s);
        hi = hi.max(e);
    }
    Ok((lo, hi))
}

fn check_constraints(
    gp: &GroundProblem,
    constraints: &[GroundConstraint],
    spans: &[(String, usize, usize)],
    states: &[State],
    owner: &str,
) -> Result<(), Violation> {
    let _ = gp;
    let eval = |f: &GroundFormula, idx: usize| f.eval(&states[idx]);
    for c in constraints {
        match c {
            GroundConstraint::Series(tags) => {
                for pair in tags.windows(2) {
                    let (_, first_hi) = group_span(spans, &pair[..1], owner)?;
                    let (second_lo, _) = group_span(spans, &pair[1..], owner)?;
                    if first_hi > second_lo {
                        return Err(violation(
                            second_lo,
                            format!(
                                "{owner}: series violated, `{}` does not finish before `{}`",
                                pair[0], pair[1]
                            ),
                        ));
                    }
                }
            }
            GroundConstraint::Before(f, tags) => {
                let (lo, _) = group_span(spans, tags, owner)?;
                if !eval(f, lo) {
                    return Err(violation(
                        lo,
                        format!("{owner}: before-formula fails in state {lo}"),
                    ));
                }
            }
            GroundConstraint::After(f, tags) => {
                let (_, hi) = group_span(spans, tags, owner)?;
                if !eval(f, hi) {
                    return Err(violation(
                        hi,
                        format!("{owner}: after-formula fails in state {hi}"),
                    ));
                }
            }
            GroundConstraint::Between(f, a, b) => {
                let (_, h1) = group_span(spans, a, owner)?;
                let (l2, _) = group_span(spans, b, owner)?;
                // adjacent or inverted groups leave no interval: vacuous
                for idx in h1..=l2.max(h1) {
                    if idx > l2 {
                        break;
                    }
                    if !eval(f, idx) {
                        return Err(violation(
                            idx,
                            format!("{owner}: between-formula fails in state {idx}"),
                        ));
                    }
                }
            }
        }
    }
    Ok(())
}
