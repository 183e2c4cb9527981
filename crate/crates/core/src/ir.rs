//! Program representation: one flow graph per thread, one atomic
//! instruction per node.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

/// Identifies a node across the whole program.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
#[serde(transparent)]
pub struct ThreadId(pub u32);

impl fmt::Display for ThreadId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarKind {
    Global,
    Local(ThreadId),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId {
    pub name: String,
    pub kind: VarKind,
}

impl VarId {
    pub fn global(name: impl Into<String>) -> Self {
        VarId { name: name.into(), kind: VarKind::Global }
    }

    pub fn local(name: impl Into<String>, owner: ThreadId) -> Self {
        VarId { name: name.into(), kind: VarKind::Local(owner) }
    }

    pub fn is_global(&self) -> bool {
        self.kind == VarKind::Global
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
        }
    }
}

/// Pure integer expression.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Const(i64),
    Var(VarId),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(v: VarId) -> Self {
        Expr::Var(v)
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Self {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn for_each_var<'a>(&'a self, f: &mut impl FnMut(&'a VarId)) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => f(v),
            Expr::Neg(e) => e.for_each_var(f),
            Expr::Bin(_, a, b) => {
                a.for_each_var(f);
                b.for_each_var(f);
            }
        }
    }

    pub fn vars(&self) -> Vec<&VarId> {
        let mut out = Vec::new();
        self.for_each_var(&mut |v| out.push(v));
        out
    }

    /// Concrete evaluation with wrapping 64-bit arithmetic.
    pub fn eval(&self, lookup: &impl Fn(&VarId) -> Option<i64>) -> Option<i64> {
        Some(match self {
            Expr::Const(c) => *c,
            Expr::Var(v) => lookup(v)?,
            Expr::Neg(e) => e.eval(lookup)?.wrapping_neg(),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(lookup)?, b.eval(lookup)?);
                match op {
                    BinOp::Add => a.wrapping_add(b),
                    BinOp::Sub => a.wrapping_sub(b),
                    BinOp::Mul => a.wrapping_mul(b),
                }
            }
        })
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(e) => write!(f, "-({e})"),
            Expr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn negate(self) -> Self {
        match self {
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Ge => CmpOp::Lt,
        }
    }

    /// The operator with its operands swapped: `a op b` iff `b op.flip() a`.
    pub fn flip(self) -> Self {
        match self {
            CmpOp::Eq => CmpOp::Eq,
            CmpOp::Ne => CmpOp::Ne,
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
        }
    }

    pub fn holds(self, a: i64, b: i64) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

/// Pure boolean condition.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Cond {
    Bool(bool),
    Cmp(CmpOp, Expr, Expr),
    And(Box<Cond>, Box<Cond>),
    Or(Box<Cond>, Box<Cond>),
    Not(Box<Cond>),
}

impl Cond {
    pub fn cmp(op: CmpOp, a: Expr, b: Expr) -> Self {
        Cond::Cmp(op, a, b)
    }

    /// Logical negation with `!` pushed down to the comparisons.
    pub fn negate(&self) -> Cond {
        match self {
            Cond::Bool(b) => Cond::Bool(!b),
            Cond::Cmp(op, a, b) => Cond::Cmp(op.negate(), a.clone(), b.clone()),
            Cond::And(a, b) => Cond::Or(Box::new(a.negate()), Box::new(b.negate())),
            Cond::Or(a, b) => Cond::And(Box::new(a.negate()), Box::new(b.negate())),
            Cond::Not(c) => (**c).clone(),
        }
    }

    pub fn for_each_var<'a>(&'a self, f: &mut impl FnMut(&'a VarId)) {
        match self {
            Cond::Bool(_) => {}
            Cond::Cmp(_, a, b) => {
                a.for_each_var(f);
                b.for_each_var(f);
            }
            Cond::And(a, b) | Cond::Or(a, b) => {
                a.for_each_var(f);
                b.for_each_var(f);
            }
            Cond::Not(c) => c.for_each_var(f),
        }
    }

    pub fn vars(&self) -> Vec<&VarId> {
        let mut out = Vec::new();
        self.for_each_var(&mut |v| out.push(v));
        out
    }

    pub fn eval(&self, lookup: &impl Fn(&VarId) -> Option<i64>) -> Option<bool> {
        Some(match self {
            Cond::Bool(b) => *b,
            Cond::Cmp(op, a, b) => op.holds(a.eval(lookup)?, b.eval(lookup)?),
            Cond::And(a, b) => a.eval(lookup)? && b.eval(lookup)?,
            Cond::Or(a, b) => a.eval(lookup)? || b.eval(lookup)?,
            Cond::Not(c) => !c.eval(lookup)?,
        })
    }
}

impl fmt::Display for Cond {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cond::Bool(b) => write!(f, "{}", if *b { "true" } else { "false" }),
            Cond::Cmp(op, a, b) => write!(f, "{a} {} {b}", op.symbol()),
            Cond::And(a, b) => write!(f, "({a} && {b})"),
            Cond::Or(a, b) => write!(f, "({a} || {b})"),
            Cond::Not(c) => write!(f, "!({c})"),
        }
    }
}

/// The four SPARC barrier kinds. A full fence implies all four.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MembarKind {
    LoadLoad,
    LoadStore,
    StoreLoad,
    StoreStore,
}

impl MembarKind {
    pub const ALL: [MembarKind; 4] = [
        MembarKind::LoadLoad,
        MembarKind::LoadStore,
        MembarKind::StoreLoad,
        MembarKind::StoreStore,
    ];

    pub fn mnemonic(self) -> &'static str {
        match self {
            MembarKind::LoadLoad => "#LL",
            MembarKind::LoadStore => "#LS",
            MembarKind::StoreLoad => "#SL",
            MembarKind::StoreStore => "#SS",
        }
    }

    /// (earlier access is a load, later access is a load)
    pub fn orders(self) -> (bool, bool) {
        match self {
            MembarKind::LoadLoad => (true, true),
            MembarKind::LoadStore => (true, false),
            MembarKind::StoreLoad => (false, true),
            MembarKind::StoreStore => (false, false),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Instruction {
    Load { dst: VarId, src: VarId },
    Store { dst: VarId, src: Expr },
    LocalAssign { dst: VarId, src: Expr },
    Fence,
    Membar(BTreeSet<MembarKind>),
    Assume(Cond),
    Assert { cond: Cond, location: String },
    ThreadCreate(ThreadId),
    ThreadJoin(ThreadId),
    Nop,
}

impl Instruction {
    /// Global variable read, if any.
    pub fn global_read(&self) -> Option<&VarId> {
        match self {
            Instruction::Load { src, .. } => Some(src),
            _ => None,
        }
    }

    /// Global variable written, if any.
    pub fn global_write(&self) -> Option<&VarId> {
        match self {
            Instruction::Store { dst, .. } => Some(dst),
            _ => None,
        }
    }

    pub fn is_memory_access(&self) -> bool {
        matches!(self, Instruction::Load { .. } | Instruction::Store { .. })
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instruction::Load { dst, src } => write!(f, "{dst} = load {src}"),
            Instruction::Store { dst, src } => write!(f, "store {dst} = {src}"),
            Instruction::LocalAssign { dst, src } => write!(f, "{dst} = {src}"),
            Instruction::Fence => f.write_str("fence"),
            Instruction::Membar(kinds) => {
                f.write_str("membar")?;
                for k in kinds {
                    write!(f, " {}", k.mnemonic())?;
                }
                Ok(())
            }
            Instruction::Assume(c) => write!(f, "assume {c}"),
            Instruction::Assert { cond, location } => write!(f, "assert {cond} @{location}"),
            Instruction::ThreadCreate(t) => write!(f, "create {t}"),
            Instruction::ThreadJoin(t) => write!(f, "join {t}"),
            Instruction::Nop => f.write_str("nop"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowGraph {
    pub thread: ThreadId,
    pub name: String,
    pub nodes: BTreeMap<NodeId, Instruction>,
    pub entry: NodeId,
    pub exit: NodeId,
    pub edges: BTreeSet<(NodeId, NodeId)>,
}

impl FlowGraph {
    pub fn successors(&self, n: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.edges.range((n, NodeId(0))..=(n, NodeId(u32::MAX))).map(|&(_, b)| b)
    }

    pub fn predecessors(&self, n: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.edges.iter().filter(move |&&(_, b)| b == n).map(|&(a, _)| a)
    }

    pub fn contains(&self, n: NodeId) -> bool {
        self.nodes.contains_key(&n)
    }

    pub fn instruction(&self, n: NodeId) -> &Instruction {
        &self.nodes[&n]
    }

    /// Nodes reachable from `from` by one or more edges.
    pub fn reachable_from(&self, from: NodeId) -> BTreeSet<NodeId> {
        let mut seen = BTreeSet::new();
        let mut queue: VecDeque<NodeId> = self.successors(from).collect();
        while let Some(n) = queue.pop_front() {
            if seen.insert(n) {
                queue.extend(self.successors(n));
            }
        }
        seen
    }

    /// Nodes lying on some cycle.
    pub fn cyclic_nodes(&self) -> BTreeSet<NodeId> {
        self.nodes
            .keys()
            .copied()
            .filter(|&n| self.reachable_from(n).contains(&n))
            .collect()
    }
}

/// A whole program: the root thread holds the initial stores and
/// starts every top-level thread.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub globals: BTreeMap<String, i64>,
    pub threads: BTreeMap<ThreadId, FlowGraph>,
    pub root: ThreadId,
    /// Source line of each node that came from a statement.
    pub lines: BTreeMap<NodeId, usize>,
    /// Memory model named by an in-file `model` directive.
    pub model: Option<String>,
}

impl Program {
    pub fn node_count(&self) -> usize {
        self.threads.values().map(|g| g.nodes.len()).sum()
    }

    pub fn thread_of(&self, n: NodeId) -> Option<ThreadId> {
        self.threads.values().find(|g| g.contains(n)).map(|g| g.thread)
    }

    pub fn graph_of(&self, n: NodeId) -> Option<&FlowGraph> {
        self.threads.values().find(|g| g.contains(n))
    }

    pub fn instruction(&self, n: NodeId) -> Option<&Instruction> {
        self.graph_of(n).map(|g| g.instruction(n))
    }

    pub fn root_graph(&self) -> &FlowGraph {
        &self.threads[&self.root]
    }

    /// All nodes in id order with their instruction and thread.
    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, ThreadId, &Instruction)> {
        let mut all: Vec<_> = self
            .threads
            .values()
            .flat_map(|g| g.nodes.iter().map(move |(&n, i)| (n, g.thread, i)))
            .collect();
        all.sort_by_key(|&(n, _, _)| n);
        all.into_iter()
    }

    /// Virtual stores of initial values held by the root thread.
    pub fn init_stores(&self) -> BTreeMap<NodeId, &VarId> {
        self.root_graph()
            .nodes
            .iter()
            .filter_map(|(&n, i)| i.global_write().map(|v| (n, v)))
            .collect()
    }

    pub fn is_init_store(&self, n: NodeId) -> bool {
        self.root_graph().contains(n) && self.root_graph().instruction(n).global_write().is_some()
    }

    pub fn asserts(&self) -> Vec<(NodeId, &Cond, &str)> {
        self.nodes()
            .filter_map(|(n, _, i)| match i {
                Instruction::Assert { cond, location } => Some((n, cond, location.as_str())),
                _ => None,
            })
            .collect()
    }

    /// Human-readable listing of all graphs.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for g in self.threads.values() {
            out.push_str(&format!("thread {} ({}) entry={} exit={}\n", g.name, g.thread, g.entry, g.exit));
            for (n, i) in &g.nodes {
                let succ: Vec<String> = g.successors(*n).map(|s| s.to_string()).collect();
                out.push_str(&format!("  {n}: {i} -> [{}]\n", succ.join(", ")));
            }
        }
        out
    }
}

/// One structural problem found by [`validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub node: Option<NodeId>,
    pub reason: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node {
            Some(n) => write!(f, "{n}: {}", self.reason),
            None => f.write_str(&self.reason),
        }
    }
}

fn diag(node: Option<NodeId>, reason: impl Into<String>) -> Diagnostic {
    Diagnostic { node, reason: reason.into() }
}

/// Checks every structural invariant of a program; empty means well formed.
pub fn validate(program: &Program) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if !program.threads.contains_key(&program.root) {
        out.push(diag(None, "root thread missing"));
    }
    let mut owner: BTreeMap<NodeId, ThreadId> = BTreeMap::new();
    for g in program.threads.values() {
        for &n in g.nodes.keys() {
            if let Some(prev) = owner.insert(n, g.thread) {
                out.push(diag(Some(n), format!("node shared by threads {prev} and {}", g.thread)));
            }
        }
    }
    for (&tid, g) in &program.threads {
        if tid != g.thread {
            out.push(diag(None, format!("thread key {tid} does not match graph id {}", g.thread)));
        }
        validate_graph(program, g, &mut out);
    }
    // Creation graph must be acyclic.
    let mut creates: BTreeMap<ThreadId, Vec<ThreadId>> = BTreeMap::new();
    for g in program.threads.values() {
        for i in g.nodes.values() {
            if let Instruction::ThreadCreate(c) = i {
                creates.entry(g.thread).or_default().push(*c);
            }
        }
    }
    for &start in program.threads.keys() {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<ThreadId> = creates.get(&start).cloned().unwrap_or_default();
        while let Some(t) = stack.pop() {
            if t == start {
                out.push(diag(None, format!("thread creation cycle through {start}")));
                break;
            }
            if seen.insert(t) {
                stack.extend(creates.get(&t).cloned().unwrap_or_default());
            }
        }
    }
    out
}

fn validate_graph(program: &Program, g: &FlowGraph, out: &mut Vec<Diagnostic>) {
    for &(a, b) in &g.edges {
        if !g.contains(a) || !g.contains(b) {
            out.push(diag(Some(a), format!("edge {a}->{b} leaves thread {}", g.name)));
        }
    }
    if !g.contains(g.entry) {
        out.push(diag(Some(g.entry), "entry node missing"));
        return;
    }
    if !g.contains(g.exit) {
        out.push(diag(Some(g.exit), "exit node missing"));
    }
    if g.predecessors(g.entry).next().is_some() {
        out.push(diag(Some(g.entry), "entry node has an incoming edge"));
    }
    if g.successors(g.exit).next().is_some() {
        out.push(diag(Some(g.exit), "exit node has an outgoing edge"));
    }
    let mut reach = g.reachable_from(g.entry);
    reach.insert(g.entry);
    for &n in g.nodes.keys() {
        if !reach.contains(&n) {
            out.push(diag(Some(n), "node unreachable from entry"));
        }
    }
    let check_local = |v: &VarId, n: NodeId, what: &str, out: &mut Vec<Diagnostic>| match v.kind {
        VarKind::Global => out.push(diag(Some(n), format!("{what} mentions global {v}"))),
        VarKind::Local(t) if t != g.thread => {
            out.push(diag(Some(n), format!("local {v} of {t} used by {}", g.thread)))
        }
        _ => {}
    };
    for (&n, instr) in &g.nodes {
        match instr {
            Instruction::Load { dst, src } => {
                check_local(dst, n, "load destination", out);
                if !src.is_global() || !program.globals.contains_key(&src.name) {
                    out.push(diag(Some(n), format!("load source {src} is not a declared global")));
                }
            }
            Instruction::Store { dst, src } => {
                if !dst.is_global() || !program.globals.contains_key(&dst.name) {
                    out.push(diag(Some(n), format!("store target {dst} is not a declared global")));
                }
                for v in src.vars() {
                    check_local(v, n, "store expression", out);
                }
            }
            Instruction::LocalAssign { dst, src } => {
                check_local(dst, n, "assignment target", out);
                for v in src.vars() {
                    check_local(v, n, "assignment expression", out);
                }
            }
            Instruction::Assume(c) | Instruction::Assert { cond: c, .. } => {
                for v in c.vars() {
                    check_local(v, n, "condition", out);
                }
            }
            Instruction::Membar(kinds) if kinds.is_empty() => {
                out.push(diag(Some(n), "membar without kinds"));
            }
            Instruction::ThreadCreate(t) | Instruction::ThreadJoin(t) => {
                if !program.threads.contains_key(t) {
                    out.push(diag(Some(n), format!("unknown thread {t}")));
                } else if *t == g.thread || *t == program.root {
                    out.push(diag(Some(n), format!("thread {t} cannot be created or joined here")));
                }
            }
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight_line(thread: ThreadId, ids: &[u32], instrs: Vec<Instruction>) -> FlowGraph {
        let nodes: BTreeMap<NodeId, Instruction> =
            ids.iter().map(|&i| NodeId(i)).zip(instrs).collect();
        let edges = ids.windows(2).map(|w| (NodeId(w[0]), NodeId(w[1]))).collect();
        FlowGraph {
            thread,
            name: format!("{thread}"),
            nodes,
            entry: NodeId(ids[0]),
            exit: NodeId(*ids.last().unwrap()),
            edges,
        }
    }

    fn empty_program() -> Program {
        let root = straight_line(ThreadId(0), &[0, 1], vec![Instruction::Nop, Instruction::Nop]);
        Program {
            globals: BTreeMap::new(),
            threads: [(ThreadId(0), root)].into_iter().collect(),
            root: ThreadId(0),
            lines: BTreeMap::new(),
            model: None,
        }
    }

    #[test]
    fn empty_program_is_valid_with_two_nodes() {
        let p = empty_program();
        assert!(validate(&p).is_empty());
        assert_eq!(p.node_count(), 2);
    }

    #[test]
    fn entry_with_incoming_edge_is_reported() {
        let mut p = empty_program();
        p.threads.get_mut(&ThreadId(0)).unwrap().edges.insert((NodeId(1), NodeId(0)));
        let d = validate(&p);
        assert!(d.iter().any(|d| d.node == Some(NodeId(0)) && d.reason.contains("entry")));
    }

    #[test]
    fn unknown_thread_is_reported() {
        let root = straight_line(
            ThreadId(0),
            &[0, 1, 2],
            vec![Instruction::Nop, Instruction::ThreadCreate(ThreadId(7)), Instruction::Nop],
        );
        let p = Program {
            globals: BTreeMap::new(),
            threads: [(ThreadId(0), root)].into_iter().collect(),
            root: ThreadId(0),
            lines: BTreeMap::new(),
            model: None,
        };
        let d = validate(&p);
        assert_eq!(d.len(), 1);
        assert!(d[0].reason.contains("unknown thread"));
    }

    #[test]
    fn condition_negation_is_involutive_semantically() {
        let a = VarId::local("a", ThreadId(1));
        let c = Cond::And(
            Box::new(Cond::cmp(CmpOp::Eq, Expr::Var(a.clone()), Expr::Const(0))),
            Box::new(Cond::Not(Box::new(Cond::cmp(CmpOp::Lt, Expr::Var(a.clone()), Expr::Const(3))))),
        );
        for v in -5..5 {
            let look = |_: &VarId| Some(v);
            assert_eq!(c.eval(&look).map(|b| !b), c.negate().eval(&look));
        }
    }
}
