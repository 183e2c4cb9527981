//! Ordering deduction: per-model NoReorder, must-happen-before, and the
//! refutation of reads-from assumptions.
//!
//! A node pair in MHB means the first event takes effect (a load reads, a
//! store reaches memory) before the second in every execution. Thread
//! entries, exits, fences, creates and joins drain the store buffer, so they
//! are ordered with every access of their own thread under every model.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::datalog::{pos, Atom, Engine, Literal, RelId, Term};
use crate::domain::Interval;
use crate::ir::{FlowGraph, Instruction, MembarKind, NodeId, Program, VarId};
use crate::relations::{extract, Pairs, RelationStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum MemoryModel {
    SC,
    TSO,
    PSO,
    RMO,
}

impl MemoryModel {
    /// Strongest first.
    pub const ALL: [MemoryModel; 4] = [MemoryModel::SC, MemoryModel::TSO, MemoryModel::PSO, MemoryModel::RMO];

    /// Whether two accesses of one thread keep program order without a barrier.
    pub fn keeps_order(self, first: Access<'_>, second: Access<'_>) -> bool {
        let same_var = first.var == second.var;
        match self {
            MemoryModel::SC => true,
            MemoryModel::TSO => first.is_load || !second.is_load,
            MemoryModel::PSO => first.is_load || (!second.is_load && same_var),
            MemoryModel::RMO => same_var && (first.is_load || !second.is_load),
        }
    }
}

impl fmt::Display for MemoryModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown memory model `{0}` (expected sc, tso, pso or rmo)")]
pub struct UnknownModel(pub String);

impl FromStr for MemoryModel {
    type Err = UnknownModel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sc" => Ok(MemoryModel::SC),
            "tso" => Ok(MemoryModel::TSO),
            "pso" => Ok(MemoryModel::PSO),
            "rmo" => Ok(MemoryModel::RMO),
            _ => Err(UnknownModel(s.to_string())),
        }
    }
}

/// A global memory access as seen by the reordering rules.
#[derive(Clone, Copy, Debug)]
pub struct Access<'a> {
    pub is_load: bool,
    pub var: &'a VarId,
}

impl<'a> Access<'a> {
    pub fn of(instr: &'a Instruction) -> Option<Self> {
        match instr {
            Instruction::Load { src, .. } => Some(Access { is_load: true, var: src }),
            Instruction::Store { dst, .. } => Some(Access { is_load: false, var: dst }),
            _ => None,
        }
    }
}

/// Nodes after which a thread's pending stores are drained.
pub fn is_sync(graph: &FlowGraph, n: NodeId) -> bool {
    n == graph.entry
        || n == graph.exit
        || matches!(graph.instruction(n), Instruction::Fence | Instruction::ThreadCreate(_) | Instruction::ThreadJoin(_))
}

/// Same-thread pairs `(a,b)`, `b` reachable from `a`, whose order the model
/// preserves, either directly or because a barrier of the matching kind
/// lies strictly between them on every path.
pub fn compute_no_reorder(model: MemoryModel, store: &RelationStore, program: &Program) -> Pairs {
    let mut out = Pairs::new();
    for g in program.threads.values() {
        let relevant: Vec<NodeId> =
            g.nodes.keys().copied().filter(|&n| is_sync(g, n) || g.instruction(n).is_memory_access()).collect();
        for &a in &relevant {
            let reach = g.reachable_from(a);
            for &b in &relevant {
                if a == b || !reach.contains(&b) {
                    continue;
                }
                let ordered = is_sync(g, a)
                    || is_sync(g, b)
                    || match (Access::of(g.instruction(a)), Access::of(g.instruction(b))) {
                        (Some(x), Some(y)) => model.keeps_order(x, y),
                        _ => false,
                    };
                if ordered {
                    out.insert((a, b));
                }
            }
        }
        // barrier rules
        let dom = |a: NodeId, b: NodeId| store.dominates.contains(&(a, b));
        for &m in g.nodes.keys() {
            let kinds: Vec<MembarKind> = match g.instruction(m) {
                Instruction::Membar(ks) => ks.iter().copied().collect(),
                Instruction::Fence | Instruction::ThreadCreate(_) | Instruction::ThreadJoin(_) => MembarKind::ALL.to_vec(),
                _ => continue,
            };
            for &s1 in &relevant {
                let Some(x) = Access::of(g.instruction(s1)) else { continue };
                if !dom(s1, m) {
                    continue;
                }
                for &s2 in &relevant {
                    let Some(y) = Access::of(g.instruction(s2)) else { continue };
                    if dom(m, s2) && kinds.iter().any(|k| k.orders() == (x.is_load, y.is_load)) {
                        out.insert((s1, s2));
                    }
                }
            }
        }
    }
    out
}

struct Rels {
    load: RelId,
    store: RelId,
    thread: RelId,
    dom: RelId,
    nrf: RelId,
    creates: RelId,
    joins: RelId,
    no_reorder: RelId,
    rf: RelId,
    mhb: RelId,
    mnrf: RelId,
}

fn n(id: NodeId) -> u32 {
    id.0
}

/// Builds the rule program over the static facts of `store` (NoReorder
/// included). Variables are interned in sorted order.
fn build(store: &RelationStore) -> (Engine, Rels) {
    let mut e = Engine::new();
    let r = Rels {
        load: e.relation("IsLoad", 2),
        store: e.relation("IsStore", 2),
        thread: e.relation("Thread", 2),
        dom: e.relation("Dominates", 2),
        nrf: e.relation("NotReachableFrom", 2),
        creates: e.relation("ThreadCreates", 2),
        joins: e.relation("ThreadJoins", 2),
        no_reorder: e.relation("NoReorder", 2),
        rf: e.relation("ReadsFrom", 2),
        mhb: e.relation("MHB", 2),
        mnrf: e.relation("MustNotReadFrom", 2),
    };
    let vars: BTreeSet<&VarId> = store.is_load.iter().chain(&store.is_store).map(|(_, v)| v).collect();
    let var_id: BTreeMap<&VarId, u32> = vars.into_iter().zip(0..).collect();
    for (node, v) in &store.is_load {
        e.insert(r.load, &[n(*node), var_id[v]]);
    }
    for (node, v) in &store.is_store {
        e.insert(r.store, &[n(*node), var_id[v]]);
    }
    for (node, t) in &store.thread {
        e.insert(r.thread, &[n(*node), t.0]);
    }
    for (rel, set) in [
        (r.dom, &store.dominates),
        (r.nrf, &store.not_reachable_from),
        (r.creates, &store.thread_creates),
        (r.joins, &store.thread_joins),
        (r.no_reorder, &store.no_reorder),
        (r.rf, &store.reads_from),
    ] {
        for (a, b) in set {
            e.insert(rel, &[n(*a), n(*b)]);
        }
    }

    use Term::Var as V;
    let (a, b, c, v, t1, t2, t3) = (V(0), V(1), V(2), V(3), V(4), V(5), V(6));
    let cross = |x: Term, y: Term, tx: Term, ty: Term| {
        vec![pos(r.thread, [x, tx]), pos(r.thread, [y, ty]), Literal::Neq(tx, ty)]
    };
    let rules: Vec<(Atom, Vec<Literal>)> = vec![
        // a remote store a load reads from has reached memory before it
        (Atom::new(r.mhb, [b, a]), [vec![pos(r.rf, [a, b])], cross(a, b, t1, t2)].concat()),
        (Atom::new(r.mhb, [a, b]), vec![pos(r.creates, [a, b])]),
        (Atom::new(r.mhb, [b, a]), vec![pos(r.joins, [a, b])]),
        (
            Atom::new(r.mhb, [a, b]),
            vec![pos(r.no_reorder, [a, b]), pos(r.dom, [a, b]), pos(r.nrf, [a, b])],
        ),
        (Atom::new(r.mhb, [a, c]), vec![pos(r.mhb, [a, b]), pos(r.mhb, [b, c])]),
        // a load precedes every store coherence-after the one it reads
        (
            Atom::new(r.mhb, [a, c]),
            vec![
                pos(r.rf, [a, b]),
                pos(r.mhb, [b, c]),
                pos(r.load, [a, v]),
                pos(r.store, [b, v]),
                pos(r.store, [c, v]),
            ],
        ),
        (
            Atom::new(r.mnrf, [a, b]),
            [vec![pos(r.mhb, [a, b]), pos(r.load, [a, v]), pos(r.store, [b, v])], cross(a, b, t1, t2)].concat(),
        ),
        // a: first load, b: the store it reads, c: a later store, V(7): a load after c
        (
            Atom::new(r.mnrf, [V(7), b]),
            [
                vec![
                    pos(r.rf, [a, b]),
                    pos(r.mhb, [a, c]),
                    pos(r.mhb, [c, V(7)]),
                    pos(r.load, [a, v]),
                    pos(r.store, [b, v]),
                    pos(r.store, [c, v]),
                    pos(r.load, [V(7), v]),
                ],
                cross(a, b, t1, t2),
                vec![pos(r.thread, [V(7), t3]), Literal::Neq(t3, t2)],
            ]
            .concat(),
        ),
    ];
    for (head, body) in rules {
        e.rule(head, body).expect("well-formed rule");
    }
    (e, r)
}

fn pairs_of(e: &Engine, rel: RelId) -> Pairs {
    e.tuples(rel).map(|t| (NodeId(t[0]), NodeId(t[1]))).collect()
}

/// Least MHB relation for the given reads-from facts. `store.no_reorder`
/// must already be populated.
pub fn deduce_mhb(store: &RelationStore, reads_from: &Pairs) -> Pairs {
    deduce(store, reads_from).0
}

pub fn deduce_must_not_read_from(store: &RelationStore, reads_from: &Pairs) -> Pairs {
    deduce(store, reads_from).1
}

/// MHB and MustNotReadFrom together.
pub fn deduce(store: &RelationStore, reads_from: &Pairs) -> (Pairs, Pairs) {
    let (mut e, r) = build(store);
    for (l, s) in reads_from {
        e.insert(r.rf, &[n(*l), n(*s)]);
    }
    e.run();
    (pairs_of(&e, r.mhb), pairs_of(&e, r.mnrf))
}

/// What a load observes in one interference combination.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Choice {
    /// The thread's own sequential view of the variable.
    NoInterference,
    /// A store of another thread; `value` bounds what it wrote and
    /// `provenance` lists reads-from facts its own thread relied on.
    RemoteStore { store: NodeId, value: Interval, provenance: Pairs },
}

pub type InterferenceCombination = BTreeMap<NodeId, Choice>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FeasibilityResult {
    Feasible,
    Infeasible { load: NodeId, store: NodeId },
}

impl FeasibilityResult {
    pub fn is_feasible(&self) -> bool {
        matches!(self, FeasibilityResult::Feasible)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContractViolation {
    #[error("{0} is not a load")]
    NotALoad(NodeId),
    #[error("{store} does not store the variable loaded by {load}")]
    WrongVariable { load: NodeId, store: NodeId },
    #[error("{store} is in the same thread as {load}")]
    SameThread { load: NodeId, store: NodeId },
}

/// Per-program, per-model state shared by all feasibility queries: the
/// static relations and the rule engine already closed over them.
pub struct FeasibilityContext {
    pub model: MemoryModel,
    store: RelationStore,
    engine: Engine,
    rels: Rels,
    /// Reads-from fact implied by NoInterference, where it is unambiguous.
    own_source: BTreeMap<NodeId, NodeId>,
    cyclic: BTreeSet<NodeId>,
}

impl FeasibilityContext {
    pub fn new(program: &Program, model: MemoryModel) -> Self {
        let mut store = extract(program);
        store.no_reorder = compute_no_reorder(model, &store, program);
        let (mut engine, rels) = build(&store);
        engine.run();
        let cyclic = program.threads.values().flat_map(|g| g.cyclic_nodes()).collect();
        let own_source = own_sources(program, &store);
        FeasibilityContext { model, store, engine, rels, own_source, cyclic }
    }

    pub fn relations(&self) -> &RelationStore {
        &self.store
    }

    /// Static relations plus the MHB and MustNotReadFrom closures derived
    /// without any reads-from assumption.
    pub fn static_relations(&self) -> RelationStore {
        let mut s = self.store.clone();
        s.mhb = pairs_of(&self.engine, self.rels.mhb);
        s.must_not_read_from = pairs_of(&self.engine, self.rels.mnrf);
        s
    }

    /// MHB without any reads-from assumption.
    pub fn static_mhb(&self, a: NodeId, b: NodeId) -> bool {
        self.engine.contains(self.rels.mhb, &[n(a), n(b)])
    }

    pub fn is_cyclic(&self, node: NodeId) -> bool {
        self.cyclic.contains(&node)
    }

    /// The store a NoInterference load reads, when that is unique.
    pub fn own_source(&self, load: NodeId) -> Option<NodeId> {
        self.own_source.get(&load).copied()
    }

    /// Reads-from facts asserted by `ic`, provenance included.
    pub fn facts(&self, ic: &InterferenceCombination) -> Result<Pairs, ContractViolation> {
        let mut out = Pairs::new();
        for (&l, choice) in ic {
            let Some(var) = self.store.load_var(l) else { return Err(ContractViolation::NotALoad(l)) };
            match choice {
                Choice::NoInterference => {
                    if let Some(s) = self.own_source(l) {
                        out.insert((l, s));
                    }
                }
                Choice::RemoteStore { store: s, provenance, .. } => {
                    if self.store.store_var(*s) != Some(var) {
                        return Err(ContractViolation::WrongVariable { load: l, store: *s });
                    }
                    if self.store.thread.get(s) == self.store.thread.get(&l) {
                        return Err(ContractViolation::SameThread { load: l, store: *s });
                    }
                    if !self.is_cyclic(l) {
                        out.insert((l, *s));
                    }
                    out.extend(provenance.iter().copied());
                }
            }
        }
        Ok(out)
    }

    /// Derives MHB and MustNotReadFrom under extra reads-from facts.
    pub fn close(&self, facts: &Pairs) -> RelationStore {
        let e = self.extended(facts);
        let mut s = self.store.clone();
        s.reads_from = facts.clone();
        s.mhb = pairs_of(&e, self.rels.mhb);
        s.must_not_read_from = pairs_of(&e, self.rels.mnrf);
        s
    }

    fn extended(&self, facts: &Pairs) -> Engine {
        let mut e = self.engine.clone();
        for (l, s) in facts {
            e.insert(self.rels.rf, &[n(*l), n(*s)]);
        }
        e.run();
        e
    }

    /// Refutes a set of reads-from facts. Among the refuted facts the one
    /// with the latest load is blamed, since it is the last assumption made.
    pub fn check_facts(&self, facts: &Pairs) -> FeasibilityResult {
        let e = self.extended(facts);
        facts
            .iter()
            .filter(|(l, s)| e.contains(self.rels.mnrf, &[n(*l), n(*s)]))
            .max_by_key(|&&(l, s)| (l, std::cmp::Reverse(s)))
            .map_or(FeasibilityResult::Feasible, |&(load, store)| FeasibilityResult::Infeasible { load, store })
    }

    pub fn check(&self, ic: &InterferenceCombination) -> Result<FeasibilityResult, ContractViolation> {
        Ok(self.check_facts(&self.facts(ic)?))
    }
}

pub fn check_feasible(
    program: &Program,
    model: MemoryModel,
    ic: &InterferenceCombination,
) -> Result<FeasibilityResult, ContractViolation> {
    FeasibilityContext::new(program, model).check(ic)
}

/// For each acyclic load, the single store of its own thread (or the
/// initial store) that reaches it along every path, if there is one.
fn own_sources(program: &Program, store: &RelationStore) -> BTreeMap<NodeId, NodeId> {
    let inits: BTreeMap<&VarId, NodeId> = program.init_stores().into_iter().map(|(n, v)| (v, n)).collect();
    let mut out = BTreeMap::new();
    for g in program.threads.values() {
        let cyclic = g.cyclic_nodes();
        for (&l, instr) in &g.nodes {
            let Instruction::Load { src, .. } = instr else { continue };
            if cyclic.contains(&l) {
                continue;
            }
            let mut defs = BTreeSet::new();
            let mut seen = BTreeSet::new();
            let mut stack: Vec<NodeId> = g.predecessors(l).collect();
            let mut reaches_entry = g.predecessors(l).next().is_none();
            while let Some(p) = stack.pop() {
                if !seen.insert(p) {
                    continue;
                }
                if store.store_var(p) == Some(src) {
                    defs.insert(p);
                    continue;
                }
                let preds: Vec<NodeId> = g.predecessors(p).collect();
                if preds.is_empty() {
                    reaches_entry = true;
                }
                stack.extend(preds);
            }
            if reaches_entry {
                if let Some(&init) = inits.get(src) {
                    defs.insert(init);
                }
            }
            if defs.len() == 1 {
                out.insert(l, defs.into_iter().next().unwrap());
            }
        }
    }
    out
}
