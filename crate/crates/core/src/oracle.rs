//! Exhaustive enumeration of concrete executions under a memory model.
//!
//! Each thread issues instructions in program order into a window of
//! pending memory events. A pending event may take effect once no earlier
//! pending event of its thread must stay ahead of it: the model's ordering
//! between the two accesses, or a barrier marker between them. A load takes
//! the value of the latest earlier pending store of its own thread to the
//! same variable if there is one, and memory otherwise.
//!
//! Stores and local assignments may be issued before the loads they depend
//! on complete; their values fill in as those loads complete. Conditions,
//! asserts and writes to a local with a value still pending wait, so data
//! and control dependencies are respected and nothing is speculated.
//! Fences, creates, joins, thread entry and exit wait for an empty window.
//! Locals start at 0.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::feasibility::{Access, MemoryModel};
use crate::ir::{Cond, Expr, FlowGraph, Instruction, MembarKind, NodeId, Program, ThreadId, VarId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Limits {
    /// Loads and stores outside the root thread, per execution.
    pub max_events: usize,
    /// Times control may return to a node on a cycle.
    pub max_loop_iters: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_events: 12, max_loop_iters: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("loop at {node} runs more than {limit} iterations")]
    LoopBoundExceeded { node: NodeId, limit: usize },
    #[error("an execution has more than {limit} memory events")]
    EventBudgetExceeded { limit: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum EventKind {
    LoadEvent,
    StoreCommit,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Event {
    pub node: NodeId,
    pub kind: EventKind,
    pub thread: ThreadId,
    pub variable: String,
    pub value: i64,
}

/// One distinct outcome with a trace that produces it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Execution {
    pub events: Vec<Event>,
    pub globals: BTreeMap<String, i64>,
    /// Keyed by `thread.local`.
    pub locals: BTreeMap<String, i64>,
    pub violated: BTreeSet<NodeId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Phase {
    Waiting,
    Running,
    Done,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Pending {
    Load { node: NodeId, dst: usize, var: usize },
    Store { node: NodeId, var: usize, value: Expr },
    Local { dst: usize, value: Expr },
    Barrier { kinds: Vec<MembarKind> },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct ThreadState {
    phase: Phase,
    pc: NodeId,
    locals: Vec<i64>,
    /// Locals with a load still pending.
    waiting: Vec<bool>,
    window: Vec<Pending>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct State {
    threads: Vec<ThreadState>,
    memory: Vec<i64>,
    loop_visits: BTreeMap<NodeId, usize>,
    events: usize,
    violated: BTreeSet<NodeId>,
}

struct Layout<'p> {
    program: &'p Program,
    model: MemoryModel,
    limits: Limits,
    graphs: Vec<&'p FlowGraph>,
    index: BTreeMap<ThreadId, usize>,
    globals: Vec<VarId>,
    global_ix: BTreeMap<VarId, usize>,
    locals: Vec<Vec<VarId>>,
    local_ix: Vec<BTreeMap<VarId, usize>>,
    cyclic: BTreeSet<NodeId>,
}

impl<'p> Layout<'p> {
    fn new(program: &'p Program, model: MemoryModel, limits: Limits) -> Self {
        let graphs: Vec<&FlowGraph> = program.threads.values().collect();
        let index = graphs.iter().enumerate().map(|(i, g)| (g.thread, i)).collect();
        let globals: Vec<VarId> = program.globals.keys().map(VarId::global).collect();
        let global_ix = globals.iter().cloned().zip(0..).collect();
        let mut locals = Vec::new();
        let mut local_ix = Vec::new();
        for g in &graphs {
            let mut set = BTreeSet::new();
            for instr in g.nodes.values() {
                collect_locals(instr, &mut set);
            }
            let list: Vec<VarId> = set.into_iter().collect();
            local_ix.push(list.iter().cloned().zip(0..).collect());
            locals.push(list);
        }
        let cyclic = graphs.iter().flat_map(|g| g.cyclic_nodes()).collect();
        Layout { program, model, limits, graphs, index, globals, global_ix, locals, local_ix, cyclic }
    }

    fn initial(&self) -> State {
        let threads = self
            .graphs
            .iter()
            .enumerate()
            .map(|(i, g)| ThreadState {
                phase: if g.thread == self.program.root { Phase::Running } else { Phase::Waiting },
                pc: g.entry,
                locals: vec![0; self.locals[i].len()],
                waiting: vec![false; self.locals[i].len()],
                window: Vec::new(),
            })
            .collect();
        State {
            threads,
            memory: vec![0; self.globals.len()],
            loop_visits: BTreeMap::new(),
            events: 0,
            violated: BTreeSet::new(),
        }
    }

    fn access(&self, p: &Pending) -> Option<Access<'_>> {
        match p {
            Pending::Load { var, .. } => Some(Access { is_load: true, var: &self.globals[*var] }),
            Pending::Store { var, .. } => Some(Access { is_load: false, var: &self.globals[*var] }),
            Pending::Local { .. } | Pending::Barrier { .. } => None,
        }
    }

    /// Whether the pending event at `k` may take effect now.
    fn can_perform(&self, window: &[Pending], k: usize) -> bool {
        let Some(me) = self.access(&window[k]) else { return false };
        match &window[k] {
            Pending::Store { value, .. } if constant(value).is_none() => return false,
            Pending::Load { var, .. } => {
                let source = window[..k].iter().rev().find_map(|p| match p {
                    Pending::Store { var: v, value, .. } if v == var => Some(value),
                    _ => None,
                });
                if source.is_some_and(|v| constant(v).is_none()) {
                    return false;
                }
            }
            _ => {}
        }
        for (j, earlier) in window[..k].iter().enumerate() {
            match earlier {
                Pending::Barrier { kinds } => {
                    let blocked = window[..j].iter().filter_map(|p| self.access(p)).any(|x| {
                        kinds.iter().any(|kd| kd.orders() == (x.is_load, me.is_load))
                    });
                    if blocked {
                        return false;
                    }
                }
                other => {
                    if self.access(other).is_some_and(|a| self.model.keeps_order(a, me)) {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn lookup<'a>(&'a self, t: usize, st: &'a ThreadState) -> impl Fn(&VarId) -> Option<i64> + 'a {
        move |v: &VarId| {
            let i = *self.local_ix[t].get(v)?;
            (!st.waiting[i]).then_some(st.locals[i])
        }
    }
}

fn collect_locals(instr: &Instruction, set: &mut BTreeSet<VarId>) {
    let mut add = |v: &VarId| {
        if !v.is_global() {
            set.insert(v.clone());
        }
    };
    match instr {
        Instruction::Load { dst, .. } => add(dst),
        Instruction::Store { src, .. } => src.for_each_var(&mut add),
        Instruction::LocalAssign { dst, src } => {
            add(dst);
            src.for_each_var(&mut add);
        }
        Instruction::Assume(c) | Instruction::Assert { cond: c, .. } => c.for_each_var(&mut add),
        _ => {}
    }
}

fn constant(e: &Expr) -> Option<i64> {
    e.eval(&|_| None)
}

/// Replaces every known local by its value.
fn partial(e: &Expr, known: &impl Fn(&VarId) -> Option<i64>) -> Expr {
    if let Some(c) = e.eval(known) {
        return Expr::Const(c);
    }
    match e {
        Expr::Const(_) => e.clone(),
        Expr::Var(v) => known(v).map_or_else(|| e.clone(), Expr::Const),
        Expr::Neg(a) => Expr::Neg(Box::new(partial(a, known))),
        Expr::Bin(op, a, b) => Expr::bin(*op, partial(a, known), partial(b, known)),
    }
}

/// Fills resolved locals into pending values and completes local
/// assignments whose value is now known.
fn settle(ts: &mut ThreadState, index: &BTreeMap<VarId, usize>) {
    loop {
        let known = |v: &VarId| index.get(v).filter(|&&i| !ts.waiting[i]).map(|&i| ts.locals[i]);
        for p in ts.window.iter_mut() {
            if let Pending::Store { value, .. } | Pending::Local { value, .. } = p {
                *value = partial(value, &known);
            }
        }
        let done = ts.window.iter().position(|p| matches!(p, Pending::Local { value: Expr::Const(_), .. }));
        let Some(k) = done else { break };
        if let Pending::Local { dst, value: Expr::Const(c) } = ts.window.remove(k) {
            ts.locals[dst] = c;
            ts.waiting[dst] = false;
        }
    }
}

fn eval_cond(c: &Cond, lookup: &impl Fn(&VarId) -> Option<i64>) -> Option<bool> {
    c.eval(lookup)
}

/// Final memory, locals per thread, and violated asserts.
type OutcomeKey = (Vec<i64>, Vec<Vec<i64>>, BTreeSet<NodeId>);

struct Search<'l, 'p> {
    layout: &'l Layout<'p>,
    seen: HashSet<State>,
    trace: Vec<Event>,
    outcomes: BTreeMap<OutcomeKey, Vec<Event>>,
    violated: BTreeSet<NodeId>,
}

impl<'l, 'p> Search<'l, 'p> {
    fn explore(&mut self, state: State) -> Result<(), OracleError> {
        if !self.seen.insert(state.clone()) {
            return Ok(());
        }
        self.violated.extend(state.violated.iter().copied());
        if state.threads.iter().all(|t| t.phase != Phase::Running) {
            let key = (state.memory.clone(), state.threads.iter().map(|t| t.locals.clone()).collect(), state.violated.clone());
            self.outcomes.entry(key).or_insert_with(|| self.trace.clone());
            return Ok(());
        }
        for t in 0..state.threads.len() {
            if state.threads[t].phase != Phase::Running {
                continue;
            }
            for k in 0..state.threads[t].window.len() {
                if self.layout.can_perform(&state.threads[t].window, k) {
                    let (next, event) = self.perform(&state, t, k)?;
                    self.trace.push(event);
                    let r = self.explore(next);
                    self.trace.pop();
                    r?;
                }
            }
            for next in self.issue(&state, t)? {
                self.explore(next)?;
            }
        }
        Ok(())
    }

    fn perform(&self, state: &State, t: usize, k: usize) -> Result<(State, Event), OracleError> {
        let l = self.layout;
        let mut next = state.clone();
        let thread = l.graphs[t].thread;
        if thread != l.program.root {
            next.events += 1;
            if next.events > l.limits.max_events {
                return Err(OracleError::EventBudgetExceeded { limit: l.limits.max_events });
            }
        }
        let ts = &mut next.threads[t];
        let pending = ts.window.remove(k);
        let event = match pending {
            Pending::Load { node, dst, var } => {
                let forwarded = state.threads[t].window[..k].iter().rev().find_map(|p| match p {
                    Pending::Store { var: v, value, .. } if *v == var => constant(value),
                    _ => None,
                });
                let value = forwarded.unwrap_or(state.memory[var]);
                ts.locals[dst] = value;
                ts.waiting[dst] = false;
                settle(ts, &l.local_ix[t]);
                Event { node, kind: EventKind::LoadEvent, thread, variable: l.globals[var].name.clone(), value }
            }
            Pending::Store { node, var, value } => {
                let value = constant(&value).expect("only resolved stores perform");
                next.memory[var] = value;
                Event { node, kind: EventKind::StoreCommit, thread, variable: l.globals[var].name.clone(), value }
            }
            Pending::Local { .. } | Pending::Barrier { .. } => unreachable!("only memory accesses perform"),
        };
        // drop barriers with no access left ahead of them
        let ts = &mut next.threads[t];
        let mut seen_access = false;
        ts.window.retain(|p| {
            seen_access |= matches!(p, Pending::Load { .. } | Pending::Store { .. });
            seen_access || !matches!(p, Pending::Barrier { .. })
        });
        Ok((next, event))
    }

    /// Issues the next instruction of thread `t`, if it is not blocked.
    fn issue(&self, state: &State, t: usize) -> Result<Vec<State>, OracleError> {
        let l = self.layout;
        let g = l.graphs[t];
        let ts = &state.threads[t];
        let n = ts.pc;
        let instr = g.instruction(n);
        let lookup = l.lookup(t, ts);
        let drained = ts.window.is_empty();
        let mut next = state.clone();
        match instr {
            _ if (n == g.entry || n == g.exit) && !drained => return Ok(vec![]),
            Instruction::Fence | Instruction::ThreadCreate(_) | Instruction::ThreadJoin(_) if !drained => {
                return Ok(vec![])
            }
            Instruction::Load { dst, src } => {
                let d = l.local_ix[t][dst];
                if ts.waiting[d] {
                    return Ok(vec![]);
                }
                let nt = &mut next.threads[t];
                nt.waiting[d] = true;
                nt.window.push(Pending::Load { node: n, dst: d, var: l.global_ix[src] });
            }
            Instruction::Store { dst, src } => {
                let value = partial(src, &lookup);
                next.threads[t].window.push(Pending::Store { node: n, var: l.global_ix[dst], value });
            }
            Instruction::LocalAssign { dst, src } => {
                let d = l.local_ix[t][dst];
                if ts.waiting[d] {
                    return Ok(vec![]);
                }
                let nt = &mut next.threads[t];
                match partial(src, &lookup) {
                    Expr::Const(c) => nt.locals[d] = c,
                    value => {
                        nt.waiting[d] = true;
                        nt.window.push(Pending::Local { dst: d, value });
                    }
                }
            }
            Instruction::Assume(c) => match eval_cond(c, &lookup) {
                Some(true) => {}
                _ => return Ok(vec![]),
            },
            Instruction::Assert { cond, .. } => match eval_cond(cond, &lookup) {
                Some(true) => {}
                Some(false) => {
                    next.violated.insert(n);
                }
                None => return Ok(vec![]),
            },
            Instruction::Membar(kinds) => {
                if !drained {
                    next.threads[t].window.push(Pending::Barrier { kinds: kinds.iter().copied().collect() });
                }
            }
            Instruction::ThreadCreate(c) => {
                next.threads[l.index[c]].phase = Phase::Running;
            }
            Instruction::ThreadJoin(c) => {
                if state.threads[l.index[c]].phase != Phase::Done {
                    return Ok(vec![]);
                }
            }
            Instruction::Fence | Instruction::Nop => {}
        }
        if n == g.exit {
            next.threads[t].phase = Phase::Done;
            return Ok(vec![next]);
        }
        let succs: Vec<NodeId> = g.successors(n).collect();
        let mut out = Vec::with_capacity(succs.len());
        for s in succs {
            let mut branch = next.clone();
            branch.threads[t].pc = s;
            if l.cyclic.contains(&s) {
                let visits = branch.loop_visits.entry(s).or_default();
                *visits += 1;
                if *visits > l.limits.max_loop_iters + 1 {
                    return Err(OracleError::LoopBoundExceeded { node: s, limit: l.limits.max_loop_iters });
                }
            }
            out.push(branch);
        }
        Ok(out)
    }
}

/// Explores every execution; returns the distinct complete outcomes and
/// the asserts violated along any explored prefix.
fn search(program: &Program, model: MemoryModel, limits: Limits) -> Result<(Vec<Execution>, BTreeSet<NodeId>), OracleError> {
    let layout = Layout::new(program, model, limits);
    let mut s = Search {
        layout: &layout,
        seen: HashSet::new(),
        trace: Vec::new(),
        outcomes: BTreeMap::new(),
        violated: BTreeSet::new(),
    };
    s.explore(layout.initial())?;
    let executions = s
        .outcomes
        .into_iter()
        .map(|((memory, locals, violated), events)| Execution {
            events,
            globals: layout.globals.iter().map(|g| g.name.clone()).zip(memory).collect(),
            locals: layout
                .graphs
                .iter()
                .enumerate()
                .flat_map(|(t, g)| {
                    let names: Vec<String> = layout.locals[t].iter().map(|v| format!("{}.{}", g.name, v.name)).collect();
                    names.into_iter().zip(locals[t].clone())
                })
                .collect(),
            violated,
        })
        .collect();
    Ok((executions, s.violated))
}

/// All distinct outcomes of complete executions, one trace each.
pub fn enumerate(program: &Program, model: MemoryModel, limits: Limits) -> Result<Vec<Execution>, OracleError> {
    search(program, model, limits).map(|(e, _)| e)
}

/// For each assert, whether some execution falsifies it.
pub fn violates(program: &Program, model: MemoryModel, limits: Limits) -> Result<BTreeMap<NodeId, bool>, OracleError> {
    let (_, violated) = search(program, model, limits)?;
    Ok(program.asserts().into_iter().map(|(n, _, _)| (n, violated.contains(&n))).collect())
}

/// A complete execution that falsifies `assert`, if any.
pub fn witness(program: &Program, model: MemoryModel, limits: Limits, assert: NodeId) -> Result<Option<Execution>, OracleError> {
    Ok(enumerate(program, model, limits)?.into_iter().find(|e| e.violated.contains(&assert)))
}
