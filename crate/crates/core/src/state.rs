//! Ground representations: interned propositions, bit-vector states,
//! ground actions/methods and the fully grounded problem.

use std::collections::HashMap;
use std::fmt;

use crate::model::GroundAtom;

pub type PropId = u32;

/// Bijection between ground atoms and dense integer ids.
#[derive(Debug, Clone, Default)]
pub struct PropositionTable {
    atoms: Vec<GroundAtom>,
    index: HashMap<GroundAtom, PropId>,
}

impl PropositionTable {
    pub fn new() -> Self {
        PropositionTable::default()
    }

    pub fn intern(&mut self, atom: &GroundAtom) -> PropId {
        if let Some(&id) = self.index.get(atom) {
            return id;
        }
        let id = self.atoms.len() as PropId;
        self.atoms.push(atom.clone());
        self.index.insert(atom.clone(), id);
        id
    }

    pub fn id_of(&self, atom: &GroundAtom) -> Option<PropId> {
        self.index.get(atom).copied()
    }

    pub fn atom(&self, id: PropId) -> &GroundAtom {
        &self.atoms[id as usize]
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (PropId, &GroundAtom)> {
        self.atoms.iter().enumerate().map(|(i, a)| (i as PropId, a))
    }
}

/// Set of proposition ids with O(1) membership, stored as packed 64-bit words.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct State {
    bits: Vec<u64>,
}

impl State {
    pub fn empty(capacity: usize) -> Self {
        State { bits: vec![0; capacity.div_ceil(64)] }
    }

    pub fn contains(&self, id: PropId) -> bool {
        let (w, b) = (id as usize / 64, id as usize % 64);
        self.bits.get(w).is_some_and(|word| word >> b & 1 == 1)
    }

    pub fn insert(&mut self, id: PropId) {
        let (w, b) = (id as usize / 64, id as usize % 64);
        if w >= self.bits.len() {
            self.bits.resize(w + 1, 0);
        }
        self.bits[w] |= 1 << b;
    }

    pub fn remove(&mut self, id: PropId) {
        let (w, b) = (id as usize / 64, id as usize % 64);
        if w < self.bits.len() {
            self.bits[w] &= !(1 << b);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = PropId> + '_ {
        self.bits.iter().enumerate().flat_map(|(w, &word)| {
            (0..64).filter(move |b| word >> b & 1 == 1).map(move |b| (w * 64 + b) as PropId)
        })
    }

    pub fn count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }
}

/// Fully instantiated operator over interned propositions. Disjunctive
/// preconditions are split at grounding time, one action per DNF clause.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundAction {
    pub name: String,
    pub args: Vec<String>,
    /// DNF clause index; 0 for conjunctive preconditions.
    pub clause: usize,
    pub pre_pos: Vec<PropId>,
    pub pre_neg: Vec<PropId>,
    pub eff_pos: Vec<PropId>,
    pub eff_neg: Vec<PropId>,
}

impl GroundAction {
    pub fn task(&self) -> GroundTask {
        GroundTask { name: self.name.clone(), args: self.args.clone() }
    }
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        write!(f, ")")
    }
}

/// True iff `pre_pos ⊆ s` and `pre_neg ∩ s = ∅`.
pub fn applicable(a: &GroundAction, s: &State) -> bool {
    a.pre_pos.iter().all(|&p| s.contains(p)) && a.pre_neg.iter().all(|&p| !s.contains(p))
}

/// Returns `(s \ eff_neg) ∪ eff_pos`; the input state is untouched.
pub fn apply(a: &GroundAction, s: &State) -> State {
    let mut out = s.clone();
    for &p in &a.eff_neg {
        out.remove(p);
    }
    for &p in &a.eff_pos {
        out.insert(p);
    }
    out
}

/// A fully instantiated task: the key used for relevance lookups.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundTask {
    pub name: String,
    pub args: Vec<String>,
}

impl fmt::Display for GroundTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        write!(f, ")")
    }
}

pub type TaskId = u32;

/// Interns ground tasks so pending lists and relevance use dense ids.
#[derive(Debug, Clone, Default)]
pub struct TaskRegistry {
    tasks: Vec<GroundTask>,
    index: HashMap<GroundTask, TaskId>,
}

impl TaskRegistry {
    pub fn intern(&mut self, task: &GroundTask) -> TaskId {
        if let Some(&id) = self.index.get(task) {
            return id;
        }
        let id = self.tasks.len() as TaskId;
        self.tasks.push(task.clone());
        self.index.insert(task.clone(), id);
        id
    }

    pub fn id_of(&self, task: &GroundTask) -> Option<TaskId> {
        self.index.get(task).copied()
    }

    pub fn task(&self, id: TaskId) -> &GroundTask {
        &self.tasks[id as usize]
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }
}

/// Ground constraint formula in negation normal form over interned literals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GroundFormula {
    True,
    False,
    Lit { id: PropId, negated: bool },
    And(Vec<GroundFormula>),
    Or(Vec<GroundFormula>),
}

impl GroundFormula {
    pub fn eval(&self, s: &State) -> bool {
        match self {
            GroundFormula::True => true,
            GroundFormula::False => false,
            GroundFormula::Lit { id, negated } => s.contains(*id) != *negated,
            GroundFormula::And(fs) => fs.iter().all(|f| f.eval(s)),
            GroundFormula::Or(fs) => fs.iter().any(|f| f.eval(s)),
        }
    }
}

/// Ground constraint kept for the validator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GroundConstraint {
    Series(Vec<String>),
    Before(GroundFormula, Vec<String>),
    After(GroundFormula, Vec<String>),
    Between(GroundFormula, Vec<String>, Vec<String>),
}

/// Fully instantiated method.
#[derive(Debug, Clone)]
pub struct GroundMethod {
    pub name: String,
    /// Declared parameter bindings (display identity, mirrors the schema head).
    pub args: Vec<String>,
    /// Bindings of the undeclared (inferred) variables, in inference order.
    pub free_args: Vec<String>,
    /// DNF clause index of the compiled precondition; 0 when conjunctive.
    pub clause: usize,
    /// The compound task this method decomposes.
    pub task: TaskId,
    pub subtasks: Vec<(String, TaskId)>,
    /// Compiled from `before` constraints anchored at the first subtask.
    pub pre_pos: Vec<PropId>,
    pub pre_neg: Vec<PropId>,
    pub residual_constraints: Vec<GroundConstraint>,
}

impl GroundMethod {
    pub fn precondition_holds(&self, s: &State) -> bool {
        self.pre_pos.iter().all(|&p| s.contains(p))
            && self.pre_neg.iter().all(|&p| !s.contains(p))
    }
}

impl fmt::Display for GroundMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        write!(f, ")")
    }
}

/// Relevance entry for one ground task. Exclusive per the formalism: a task
/// name is never both an operator name and a method name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Relevance {
    Primitive(Vec<usize>),
    Compound(Vec<usize>),
}

impl Relevance {
    pub fn is_empty(&self) -> bool {
        match self {
            Relevance::Primitive(v) | Relevance::Compound(v) => v.is_empty(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GroundProblem {
    pub table: PropositionTable,
    pub tasks: TaskRegistry,
    pub state0: State,
    pub goal_tasks: Vec<(String, TaskId)>,
    pub goal_state_pos: Vec<PropId>,
    pub goal_state_neg: Vec<PropId>,
    /// A goal `after` constraint simplified to False: the problem cannot be solved.
    pub goal_unsatisfiable: bool,
    pub actions: Vec<GroundAction>,
    pub methods: Vec<GroundMethod>,
    pub relevance: HashMap<GroundTask, Relevance>,
    /// Non-`after` constraints of the initial network, checked by the validator.
    pub root_constraints: Vec<GroundConstraint>,
    /// Original initial-state atoms; static truths compiled out of the table
    /// are still decidable from here.
    pub s0_atoms: std::collections::BTreeSet<GroundAtom>,
}

impl GroundProblem {
    pub fn relevance_of(&self, task: TaskId) -> Option<&Relevance> {
        self.relevance.get(self.tasks.task(task))
    }

    /// Truth of an arbitrary ground atom in a state: interned atoms by bit,
    /// compiled-away atoms by their frozen initial-state truth.
    pub fn atom_holds(&self, atom: &GroundAtom, s: &State) -> bool {
        match self.table.id_of(atom) {
            Some(id) => s.contains(id),
            None => self.s0_atoms.contains(atom),
        }
    }
}

/// Ordered primitive plan: indices into `GroundProblem::actions`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Plan {
    pub steps: Vec<usize>,
}

impl Plan {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn render(&self, gp: &GroundProblem) -> String {
        let mut out = String::new();
        for &i in &self.steps {
            out.push_str(&gp.actions[i].to_string());
            out.push('\n');
        }
        out
    }
}

/// One node of the decomposition trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceNode {
    /// A primitive task realized at the given plan index.
    Action { action: usize, plan_index: usize },
    /// A method application with the plan-index span of each tagged subtask.
    Method {
        method: usize,
        /// (tag, start, end) with `end` exclusive.
        spans: Vec<(String, usize, usize)>,
        children: Vec<TraceNode>,
    },
}

impl TraceNode {
    pub fn span(&self) -> (usize, usize) {
        match self {
            TraceNode::Action { plan_index, .. } => (*plan_index, *plan_index + 1),
            TraceNode::Method { spans, .. } => {
                let lo = spans.first().map_or(0, |s| s.1);
                let hi = spans.last().map_or(lo, |s| s.2);
                (lo, hi)
            }
        }
    }
}

/// Tree of method applications whose left-to-right leaf sequence is the plan.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DecompositionTrace {
    pub roots: Vec<TraceNode>,
    /// Plan-index span of each goal-network tag.
    pub root_spans: Vec<(String, usize, usize)>,
}

impl DecompositionTrace {
    /// Left-to-right leaf sequence; must equal the plan.
    pub fn leaves(&self) -> Vec<usize> {
        fn walk(node: &TraceNode, out: &mut Vec<usize>) {
            match node {
                TraceNode::Action { action, .. } => out.push(*action),
                TraceNode::Method { children, .. } => {
                    for c in children {
                        walk(c, out);
                    }
                }
            }
        }
        let mut out = Vec::new();
        for r in &self.roots {
            walk(r, &mut out);
        }
        out
    }
}
