//! Static relations over program nodes: instruction classifiers, per-thread
//! domination and reachability, and thread creation/join edges.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::ir::{FlowGraph, Instruction, MembarKind, NodeId, Program, ThreadId, VarId};

pub type Pairs = BTreeSet<(NodeId, NodeId)>;

/// Named finite relations. The static ones are filled by [`extract`]; the
/// derived ones stay empty until a feasibility query populates them.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RelationStore {
    /// Owning thread of every node.
    pub thread: BTreeMap<NodeId, ThreadId>,
    pub is_load: BTreeSet<(NodeId, VarId)>,
    pub is_store: BTreeSet<(NodeId, VarId)>,
    pub is_fence: BTreeSet<NodeId>,
    pub membars: BTreeMap<MembarKind, BTreeSet<NodeId>>,
    pub dominates: Pairs,
    pub not_reachable_from: Pairs,
    pub thread_creates: Pairs,
    pub thread_joins: Pairs,
    pub no_reorder: Pairs,
    pub mhb: Pairs,
    pub reads_from: Pairs,
    pub must_not_read_from: Pairs,
}

impl RelationStore {
    pub fn membar(&self, kind: MembarKind) -> &BTreeSet<NodeId> {
        static EMPTY: BTreeSet<NodeId> = BTreeSet::new();
        self.membars.get(&kind).unwrap_or(&EMPTY)
    }

    pub fn load_var(&self, n: NodeId) -> Option<&VarId> {
        self.is_load.range((n, min_var())..).next().filter(|(m, _)| *m == n).map(|(_, v)| v)
    }

    pub fn store_var(&self, n: NodeId) -> Option<&VarId> {
        self.is_store.range((n, min_var())..).next().filter(|(m, _)| *m == n).map(|(_, v)| v)
    }

    /// Every relation as sorted `Name(a,b)` lines.
    pub fn emit(&self) -> String {
        let mut out = String::new();
        let mut unary = |name: &str, set: &BTreeSet<NodeId>| {
            for n in set {
                let _ = writeln!(out, "{name}({n})");
            }
        };
        unary("IsFence", &self.is_fence);
        for kind in MembarKind::ALL {
            unary(&format!("Is{}Membar", kind.mnemonic()), self.membar(kind));
        }
        for (name, set) in [("IsLoad", &self.is_load), ("IsStore", &self.is_store)] {
            for (n, v) in set {
                let _ = writeln!(out, "{name}({n},{v})");
            }
        }
        for (name, set) in [
            ("Dominates", &self.dominates),
            ("NotReachableFrom", &self.not_reachable_from),
            ("ThreadCreates", &self.thread_creates),
            ("ThreadJoins", &self.thread_joins),
            ("NoReorder", &self.no_reorder),
            ("ReadsFrom", &self.reads_from),
            ("MHB", &self.mhb),
            ("MustNotReadFrom", &self.must_not_read_from),
        ] {
            for (a, b) in set {
                let _ = writeln!(out, "{name}({a},{b})");
            }
        }
        out
    }
}

fn min_var() -> VarId {
    VarId { name: String::new(), kind: crate::ir::VarKind::Global }
}

/// Classifies every node by instruction kind. Fences count as all four
/// membar kinds.
pub fn extract_unary(program: &Program) -> RelationStore {
    let mut store = RelationStore::default();
    for kind in MembarKind::ALL {
        store.membars.insert(kind, BTreeSet::new());
    }
    for (n, t, instr) in program.nodes() {
        store.thread.insert(n, t);
        match instr {
            Instruction::Load { src, .. } => {
                store.is_load.insert((n, src.clone()));
            }
            Instruction::Store { dst, .. } => {
                store.is_store.insert((n, dst.clone()));
            }
            Instruction::Fence => {
                store.is_fence.insert(n);
                for kind in MembarKind::ALL {
                    store.membars.get_mut(&kind).unwrap().insert(n);
                }
            }
            Instruction::Membar(kinds) => {
                for kind in kinds {
                    store.membars.get_mut(kind).unwrap().insert(n);
                }
            }
            _ => {}
        }
    }
    store
}

/// Strict dominators: `(a,b)` iff `a != b` and every entry path to `b`
/// passes through `a`.
pub fn compute_dominates(graph: &FlowGraph) -> Pairs {
    let all: BTreeSet<NodeId> = graph.nodes.keys().copied().collect();
    // unreachable nodes are vacuously dominated by everything
    let mut live = graph.reachable_from(graph.entry);
    live.insert(graph.entry);
    let mut dom: BTreeMap<NodeId, BTreeSet<NodeId>> =
        all.iter().map(|&n| (n, if n == graph.entry { BTreeSet::from([n]) } else { all.clone() })).collect();
    let mut changed = true;
    while changed {
        changed = false;
        for &n in &all {
            if n == graph.entry {
                continue;
            }
            let mut acc: Option<BTreeSet<NodeId>> = None;
            for p in graph.predecessors(n).filter(|p| live.contains(p)) {
                acc = Some(match acc {
                    None => dom[&p].clone(),
                    Some(a) => a.intersection(&dom[&p]).copied().collect(),
                });
            }
            let Some(mut next) = acc else { continue };
            next.insert(n);
            if next != dom[&n] {
                dom.insert(n, next);
                changed = true;
            }
        }
    }
    dom.iter().flat_map(|(&b, ds)| ds.iter().filter(move |&&a| a != b).map(move |&a| (a, b))).collect()
}

/// `(a,b)` iff there is no path of one or more edges from `b` to `a`.
pub fn compute_not_reachable_from(graph: &FlowGraph) -> Pairs {
    let mut out = Pairs::new();
    for &b in graph.nodes.keys() {
        let reach = graph.reachable_from(b);
        for &a in graph.nodes.keys() {
            if !reach.contains(&a) {
                out.insert((a, b));
            }
        }
    }
    out
}

/// Create nodes to the entry of the created thread, and the exit of a
/// joined thread to the join node.
pub fn compute_thread_edges(program: &Program) -> (Pairs, Pairs) {
    let mut creates = Pairs::new();
    let mut joins = Pairs::new();
    for (n, _, instr) in program.nodes() {
        match instr {
            Instruction::ThreadCreate(t) => {
                creates.insert((n, program.threads[t].entry));
            }
            Instruction::ThreadJoin(t) => {
                joins.insert((n, program.threads[t].exit));
            }
            _ => {}
        }
    }
    (creates, joins)
}

/// All static relations of a validated program.
pub fn extract(program: &Program) -> RelationStore {
    let mut store = extract_unary(program);
    for g in program.threads.values() {
        store.dominates.extend(compute_dominates(g));
        store.not_reachable_from.extend(compute_not_reachable_from(g));
    }
    let (c, j) = compute_thread_edges(program);
    store.thread_creates = c;
    store.thread_joins = j;
    store
}
