//! Inertia analysis: one pass over the operator effects classifies every
//! predicate, enabling compile-time evaluation of static atoms.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::model::{Expression, GroundAtom, OperatorSchema};

/// Predicate class derived from the two inertia flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InertiaClass {
    /// In no operator's positive effects: can never become true.
    PositiveInertia,
    /// In no operator's negative effects: can never become false.
    NegativeInertia,
    /// In no effects at all: truth value is frozen at s0.
    Both,
    /// Appears in both positive and negative effects.
    Fluent,
}

#[derive(Debug, Clone, Default)]
pub struct InertiaReport {
    /// predicate name → (positive_inertia, negative_inertia) flags.
    flags: BTreeMap<String, (bool, bool)>,
}

impl InertiaReport {
    /// Predicates absent from every effect (e.g. never mentioned by the
    /// domain) default to both-inertia, matching the vacuous case.
    pub fn class_of(&self, predicate: &str) -> InertiaClass {
        match self.flags.get(predicate).copied().unwrap_or((true, true)) {
            (true, true) => InertiaClass::Both,
            (true, false) => InertiaClass::PositiveInertia,
            (false, true) => InertiaClass::NegativeInertia,
            (false, false) => InertiaClass::Fluent,
        }
    }

    pub fn positive_inertia(&self, predicate: &str) -> bool {
        matches!(self.class_of(predicate), InertiaClass::PositiveInertia | InertiaClass::Both)
    }

    pub fn negative_inertia(&self, predicate: &str) -> bool {
        matches!(self.class_of(predicate), InertiaClass::NegativeInertia | InertiaClass::Both)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, InertiaClass)> {
        self.flags.keys().map(|p| (p.as_str(), self.class_of(p)))
    }
}

/// Collects the predicates of a normalized effect into (positive, negative)
/// occurrence sets.
fn effect_predicates(e: &Expression, pos: &mut HashSet<String>, neg: &mut HashSet<String>) {
    match e {
        Expression::Atom(a) => {
            pos.insert(a.predicate.clone());
        }
        Expression::Not(inner) => {
            if let Expression::Atom(a) = &**inner {
                neg.insert(a.predicate.clone());
            }
        }
        Expression::And(es) => {
            for e in es {
                effect_predicates(e, pos, neg);
            }
        }
        _ => {}
    }
}

/// Single pass over all operators; `predicates` seeds the report so every
/// declared predicate gets a classification even if no effect mentions it.
pub fn compute_inertia<'a>(
    operators: &[OperatorSchema],
    predicates: impl Iterator<Item = &'a str>,
) -> InertiaReport {
    let mut pos = HashSet::new();
    let mut neg = HashSet::new();
    for op in operators {
        effect_predicates(&op.effect, &mut pos, &mut neg);
    }
    let mut report = InertiaReport::default();
    for p in predicates {
        report
            .flags
            .insert(p.to_string(), (!pos.contains(p), !neg.contains(p)));
    }
    report
}

/// Outcome of compile-time atom evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomValue {
    True,
    False,
    Keep,
}

/// Evaluates a ground atom against the inertia report and the initial state:
/// a positive-inertia atom absent from s0 can never hold; a negative-inertia
/// atom present in s0 always holds; anything else stays symbolic.
pub fn simplify_atom(
    atom: &GroundAtom,
    inertia: &InertiaReport,
    s0: &BTreeSet<GroundAtom>,
) -> AtomValue {
    let in_s0 = s0.contains(atom);
    if inertia.positive_inertia(&atom.predicate) && !in_s0 {
        return AtomValue::False;
    }
    if inertia.negative_inertia(&atom.predicate) && in_s0 {
        return AtomValue::True;
    }
    AtomValue::Keep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_domain;

    const ROVER_DOMAIN: &str = include_str!("../../../../domains/rover/domain.htn");

    fn rover_report() -> InertiaReport {
        let d = parse_domain(ROVER_DOMAIN).unwrap();
        compute_inertia(&d.operators, d.predicates.iter().map(|p| p.name.as_str()))
    }

    #[test]
    fn rover_classification() {
        let r = rover_report();
        // never produced nor consumed
        assert_eq!(r.class_of("can_traverse"), InertiaClass::Both);
        assert!(r.positive_inertia("can_traverse") && r.negative_inertia("can_traverse"));
        assert_eq!(r.class_of("visible"), InertiaClass::Both);
        assert_eq!(r.class_of("at_lander"), InertiaClass::Both);
        assert_eq!(r.class_of("store_of"), InertiaClass::Both);
        assert_eq!(r.class_of("at_soil_sample"), InertiaClass::Both);
        // produced and consumed
        assert_eq!(r.class_of("at"), InertiaClass::Fluent);
        assert_eq!(r.class_of("available"), InertiaClass::Fluent);
        assert_eq!(r.class_of("visited"), InertiaClass::Fluent);
        // only consumed: can never become true
        assert_eq!(r.class_of("empty"), InertiaClass::PositiveInertia);
        assert_eq!(r.class_of("at_rock_sample"), InertiaClass::PositiveInertia);
        // only produced: can never become false
        assert_eq!(r.class_of("full"), InertiaClass::NegativeInertia);
        assert_eq!(r.class_of("have_rock_analysis"), InertiaClass::NegativeInertia);
        assert_eq!(r.class_of("communicated_rock_data"), InertiaClass::NegativeInertia);
    }

    #[test]
    fn empty_operator_set_makes_everything_both_inertia() {
        let report = compute_inertia(&[], ["p", "q"].into_iter());
        assert_eq!(report.class_of("p"), InertiaClass::Both);
        assert_eq!(report.class_of("q"), InertiaClass::Both);
    }

    fn atom(p: &str, args: &[&str]) -> GroundAtom {
        GroundAtom { predicate: p.into(), args: args.iter().map(|s| s.to_string()).collect() }
    }

    #[test]
    fn static_atoms_are_decided_by_membership() {
        let r = rover_report();
        let mut s0 = BTreeSet::new();
        s0.insert(atom("can_traverse", &["rover1", "waypoint3", "waypoint1"]));
        assert_eq!(
            simplify_atom(&atom("can_traverse", &["rover1", "waypoint3", "waypoint1"]), &r, &s0),
            AtomValue::True
        );
        assert_eq!(
            simplify_atom(&atom("can_traverse", &["rover1", "waypoint3", "waypoint0"]), &r, &s0),
            AtomValue::False
        );
    }

    #[test]
    fn fluent_atoms_are_kept_regardless_of_s0() {
        let r = rover_report();
        let mut s0 = BTreeSet::new();
        s0.insert(atom("at", &["rover1", "waypoint3"]));
        assert_eq!(simplify_atom(&atom("at", &["rover1", "waypoint3"]), &r, &s0), AtomValue::Keep);
        assert_eq!(simplify_atom(&atom("at", &["rover1", "waypoint0"]), &r, &s0), AtomValue::Keep);
    }

    #[test]
    fn one_sided_inertia_keeps_the_mutable_side() {
        let r = rover_report();
        let mut s0 = BTreeSet::new();
        s0.insert(atom("empty", &["store1"]));
        // pos-inertia in s0: may still be deleted later
        assert_eq!(simplify_atom(&atom("empty", &["store1"]), &r, &s0), AtomValue::Keep);
        // pos-inertia absent: can never appear
        assert_eq!(simplify_atom(&atom("empty", &["store2"]), &r, &s0), AtomValue::False);
        // neg-inertia absent: may still appear later
        assert_eq!(simplify_atom(&atom("full", &["store1"]), &r, &s0), AtomValue::Keep);
        s0.insert(atom("full", &["store1"]));
        // neg-inertia in s0: always true
        assert_eq!(simplify_atom(&atom("full", &["store1"]), &r, &s0), AtomValue::True);
    }
}
