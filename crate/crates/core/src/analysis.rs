//! Thread-modular interval analysis.
//!
//! Each thread is analyzed sequentially once per interference combination:
//! a choice, for every load, between the thread's own view of the variable
//! and one value some other thread stored. Combinations whose reads-from
//! facts are refuted by the ordering rules are dropped. An outer fixpoint
//! feeds the stores each thread produces back into the others.
//!
//! Stored values are tracked per provenance, the reads-from facts of the
//! loads that dominate the store in its own run. A load that picks such a
//! value inherits those facts, which lets the ordering rules see across
//! thread boundaries.
//!
//! A node's environment from one run is kept only if the facts of the loads
//! dominating that node are feasible: loads off the executed path make no
//! claim about the execution.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;

use crate::domain::{AbstractEnv, Interval};
use crate::feasibility::{Choice, FeasibilityContext, FeasibilityResult, InterferenceCombination, MemoryModel};
use crate::ir::{FlowGraph, Instruction, NodeId, Program, VarId};
use crate::relations::Pairs;

pub type EnvMap = BTreeMap<NodeId, AbstractEnv>;

/// A value some store may have written, with the facts it depends on.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Candidate {
    pub store: NodeId,
    pub value: Interval,
    pub provenance: Pairs,
}

/// Candidates per load.
pub type InterferenceSet = BTreeMap<NodeId, Vec<Candidate>>;

/// Values written by each store, keyed by provenance.
pub type StoreTable = BTreeMap<NodeId, BTreeMap<Pairs, Interval>>;

pub const DEFAULT_MAX_COMBINATIONS: usize = 4096;
/// Outer rounds after which environments are widened.
pub const OUTER_WIDEN_AFTER: usize = 3;
/// Visits of a loop head before widening.
pub const LOOP_WIDEN_AFTER: usize = 2;
const DESCENDING_PASSES: usize = 2;

/// Globals at their initial values, locals unconstrained.
pub fn initial_env(program: &Program) -> AbstractEnv {
    AbstractEnv::from_pairs(program.globals.iter().map(|(g, &v)| (VarId::global(g), Interval::singleton(v))))
}

/// Targets of retreating edges in a depth-first walk from the entry.
pub fn loop_heads(graph: &FlowGraph) -> BTreeSet<NodeId> {
    let mut heads = BTreeSet::new();
    let mut on_stack = BTreeSet::new();
    let mut done = BTreeSet::new();
    let mut stack: Vec<(NodeId, Vec<NodeId>)> = vec![(graph.entry, graph.successors(graph.entry).collect())];
    on_stack.insert(graph.entry);
    while let Some((n, succs)) = stack.last_mut() {
        let n = *n;
        match succs.pop() {
            Some(s) if on_stack.contains(&s) => {
                heads.insert(s);
            }
            Some(s) if !done.contains(&s) => {
                on_stack.insert(s);
                stack.push((s, graph.successors(s).collect()));
            }
            Some(_) => {}
            None => {
                on_stack.remove(&n);
                done.insert(n);
                stack.pop();
            }
        }
    }
    heads
}

/// Sequential fixpoint of one thread. Loads in `ic` with a remote choice
/// take that value; loads in `extra` take their own view joined with the
/// given interval; all others read the thread's own view.
pub fn analyze_tm(
    graph: &FlowGraph,
    ic: &InterferenceCombination,
    extra: &BTreeMap<NodeId, Interval>,
    init: &AbstractEnv,
) -> EnvMap {
    let heads = loop_heads(graph);
    let step = |n: NodeId, input: &AbstractEnv| -> AbstractEnv {
        let instr = graph.instruction(n);
        if let Instruction::Load { dst, src } = instr {
            if input.is_bottom() {
                return input.clone();
            }
            let value = match (ic.get(&n), extra.get(&n)) {
                (Some(Choice::RemoteStore { value, .. }), _) => *value,
                (_, Some(more)) => input.get(src).join(more),
                _ => input.get(src),
            };
            let mut out = input.clone();
            out.set(dst.clone(), value);
            return out;
        }
        input.transfer(instr)
    };
    let input_of = |n: NodeId, out: &EnvMap| -> AbstractEnv {
        let mut acc = if n == graph.entry { init.clone() } else { AbstractEnv::bottom() };
        for p in graph.predecessors(n) {
            if let Some(e) = out.get(&p) {
                acc = acc.join(e);
            }
        }
        acc
    };

    let mut out: EnvMap = graph.nodes.keys().map(|&n| (n, AbstractEnv::bottom())).collect();
    let mut head_in: BTreeMap<NodeId, AbstractEnv> = BTreeMap::new();
    let mut visits: BTreeMap<NodeId, usize> = BTreeMap::new();
    let mut work: BTreeSet<NodeId> = BTreeSet::from([graph.entry]);
    while let Some(n) = work.pop_first() {
        let mut input = input_of(n, &out);
        if heads.contains(&n) {
            let count = visits.entry(n).or_default();
            *count += 1;
            let old = head_in.get(&n).cloned().unwrap_or_else(AbstractEnv::bottom);
            if *count > LOOP_WIDEN_AFTER {
                input = old.widen(&old.join(&input));
            }
            if input == old && *count > 1 {
                continue;
            }
            head_in.insert(n, input.clone());
        }
        let next = step(n, &input);
        if next != out[&n] {
            out.insert(n, next);
            work.extend(graph.successors(n));
        }
    }
    // decreasing sweeps recover bounds lost to widening
    for _ in 0..DESCENDING_PASSES {
        for &n in graph.nodes.keys() {
            let next = step(n, &input_of(n, &out));
            out.insert(n, next);
        }
    }
    out
}

/// Plain sequential analysis of one graph.
pub fn analyze_sequential(graph: &FlowGraph, init: &AbstractEnv) -> EnvMap {
    analyze_tm(graph, &InterferenceCombination::new(), &BTreeMap::new(), init)
}

/// For every load of `graph`, the values stores of other threads (initial
/// stores included) may have written. Candidates with the same store and
/// value are merged, keeping only the facts common to both.
pub fn interfs(program: &Program, graph: &FlowGraph, table: &StoreTable) -> InterferenceSet {
    let mut out = InterferenceSet::new();
    for (&l, instr) in &graph.nodes {
        let Instruction::Load { src, .. } = instr else { continue };
        let mut merged: BTreeMap<(NodeId, Interval), Pairs> = BTreeMap::new();
        for (&s, entries) in table {
            if graph.contains(s) || program.instruction(s).and_then(Instruction::global_write) != Some(src) {
                continue;
            }
            for (prov, value) in entries {
                if value.is_bottom() {
                    continue;
                }
                merged
                    .entry((s, *value))
                    .and_modify(|p| *p = p.intersection(prov).copied().collect())
                    .or_insert_with(|| prov.clone());
            }
        }
        let cands = merged.into_iter().map(|((store, value), provenance)| Candidate { store, value, provenance }).collect();
        out.insert(l, cands);
    }
    out
}

/// Cartesian product of `{NoInterference} ∪ candidates` over the loads of
/// `set`, or `None` when it has more than `cap` elements. The last load
/// varies fastest.
pub fn enumerate_combinations(set: &InterferenceSet, cap: usize) -> Option<Vec<InterferenceCombination>> {
    let mut total: usize = 1;
    for cands in set.values() {
        total = total.checked_mul(cands.len() + 1).filter(|&t| t <= cap)?;
    }
    let loads: Vec<(&NodeId, &Vec<Candidate>)> = set.iter().collect();
    let mut out = Vec::with_capacity(total);
    for mut index in 0..total {
        let mut ic = InterferenceCombination::new();
        for (l, cands) in loads.iter().rev() {
            let radix = cands.len() + 1;
            let pick = index % radix;
            index /= radix;
            let choice = match pick {
                0 => Choice::NoInterference,
                k => {
                    let c = &cands[k - 1];
                    Choice::RemoteStore { store: c.store, value: c.value, provenance: c.provenance.clone() }
                }
            };
            ic.insert(**l, choice);
        }
        out.push(ic);
    }
    Some(out)
}

/// Join of the candidate values a load on a cycle may see: every candidate
/// except those whose store must happen after the load.
pub fn loop_fallback_value(load: NodeId, cands: &[Candidate], ctx: &FeasibilityContext) -> Interval {
    cands
        .iter()
        .filter(|c| !ctx.static_mhb(load, c.store))
        .fold(Interval::Bottom, |acc, c| acc.join(&c.value))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Status {
    PROVED,
    ALARM,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub node: NodeId,
    pub location: String,
    pub line: Option<usize>,
    pub model: MemoryModel,
    pub status: Status,
    /// First combination under which the assertion may fail.
    pub witness: Option<InterferenceCombination>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ThreadStats {
    pub thread: String,
    pub loads: usize,
    pub enumerated: usize,
    pub pruned: usize,
    pub overflow: bool,
}

/// Counts of the last outer round.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub threads: usize,
    pub nodes: usize,
    pub combinations_enumerated: usize,
    pub combinations_pruned: usize,
    pub outer_rounds: usize,
    pub per_thread: Vec<ThreadStats>,
}

#[derive(Clone, Debug)]
pub struct Analysis {
    pub model: MemoryModel,
    pub envs: EnvMap,
    pub stores: StoreTable,
    pub verdicts: Vec<Verdict>,
    pub stats: Stats,
    /// Environments after each outer round, for inspection.
    pub history: Vec<EnvMap>,
}

struct ThreadRound {
    envs: EnvMap,
    stores: StoreTable,
    alarms: BTreeMap<NodeId, InterferenceCombination>,
    stats: ThreadStats,
}

/// Memoized feasibility checks over one program and model.
pub struct Analyzer<'p> {
    program: &'p Program,
    ctx: FeasibilityContext,
    cap: usize,
    init: AbstractEnv,
    memo: HashMap<Pairs, bool>,
    /// Acyclic loads dominating each node, the node itself included.
    dom_loads: BTreeMap<NodeId, Vec<NodeId>>,
}

impl<'p> Analyzer<'p> {
    pub fn new(program: &'p Program, model: MemoryModel, cap: usize) -> Self {
        let ctx = FeasibilityContext::new(program, model);
        let rel = ctx.relations();
        let mut dom_loads = BTreeMap::new();
        for g in program.threads.values() {
            for &n in g.nodes.keys() {
                let loads: Vec<NodeId> = g
                    .nodes
                    .keys()
                    .copied()
                    .filter(|&l| {
                        rel.load_var(l).is_some()
                            && !ctx.is_cyclic(l)
                            && (l == n || rel.dominates.contains(&(l, n)))
                    })
                    .collect();
                dom_loads.insert(n, loads);
            }
        }
        Analyzer { program, ctx, cap, init: initial_env(program), memo: HashMap::new(), dom_loads }
    }

    pub fn context(&self) -> &FeasibilityContext {
        &self.ctx
    }

    fn feasible(&mut self, facts: &Pairs) -> bool {
        if let Some(&r) = self.memo.get(facts) {
            return r;
        }
        let r = self.ctx.check_facts(facts) == FeasibilityResult::Feasible;
        self.memo.insert(facts.clone(), r);
        r
    }

    fn load_facts(&self, l: NodeId, choice: &Choice) -> Pairs {
        match choice {
            Choice::NoInterference => self.ctx.own_source(l).map(|s| (l, s)).into_iter().collect(),
            Choice::RemoteStore { store, provenance, .. } => {
                let mut f = provenance.clone();
                f.insert((l, *store));
                f
            }
        }
    }

    fn run_thread(&mut self, graph: &FlowGraph, table: &StoreTable) -> ThreadRound {
        let all = interfs(self.program, graph, table);
        let mut fallback = BTreeMap::new();
        let mut enumerable = InterferenceSet::new();
        for (&l, cands) in &all {
            let remote: Vec<Candidate> =
                cands.iter().filter(|c| !self.program.is_init_store(c.store)).cloned().collect();
            if self.ctx.is_cyclic(l) {
                fallback.insert(l, loop_fallback_value(l, &remote, &self.ctx));
            } else {
                enumerable.insert(l, remote);
            }
        }
        let mut round = ThreadRound {
            envs: EnvMap::new(),
            stores: StoreTable::new(),
            alarms: BTreeMap::new(),
            stats: ThreadStats { thread: graph.name.clone(), loads: all.len(), ..ThreadStats::default() },
        };

        let Some(combos) = enumerate_combinations(&enumerable, self.cap) else {
            // too many: every load sees its own view joined with every
            // candidate that is not ordered after it
            round.stats.overflow = true;
            round.stats.enumerated = 1;
            for (&l, cands) in &enumerable {
                fallback.insert(l, loop_fallback_value(l, cands, &self.ctx));
            }
            let envs = analyze_tm(graph, &InterferenceCombination::new(), &fallback, &self.init);
            self.absorb(graph, &envs, |_| Some(Pairs::new()), &InterferenceCombination::new(), &mut round);
            return round;
        };

        round.stats.enumerated = combos.len();
        for ic in &combos {
            let facts: BTreeMap<NodeId, Pairs> = ic.iter().map(|(&l, c)| (l, self.load_facts(l, c))).collect();
            let full: Pairs = facts.values().flatten().copied().collect();
            if !self.feasible(&full) {
                round.stats.pruned += 1;
            }
            let envs = analyze_tm(graph, ic, &fallback, &self.init);
            let mut verdict_cache: BTreeMap<Vec<NodeId>, Option<Pairs>> = BTreeMap::new();
            let mut node_facts = |n: NodeId, this: &mut Self| -> Option<Pairs> {
                let key = this.dom_loads[&n].clone();
                if let Some(r) = verdict_cache.get(&key) {
                    return r.clone();
                }
                let f: Pairs = key.iter().flat_map(|l| facts[l].iter().copied()).collect();
                let r = this.feasible(&f).then_some(f);
                verdict_cache.insert(key, r.clone());
                r
            };
            let mut per_node = BTreeMap::new();
            for &n in graph.nodes.keys() {
                per_node.insert(n, node_facts(n, self));
            }
            self.absorb(graph, &envs, |n| per_node[&n].clone(), ic, &mut round);
        }
        round
    }

    /// Adds one run's environments, stores and assertion outcomes to
    /// `round`. `facts_at` gives the feasible facts guarding a node, or
    /// `None` when the run does not describe any execution reaching it.
    fn absorb(
        &self,
        graph: &FlowGraph,
        envs: &EnvMap,
        facts_at: impl Fn(NodeId) -> Option<Pairs>,
        ic: &InterferenceCombination,
        round: &mut ThreadRound,
    ) {
        for (&n, env) in envs {
            let Some(facts) = facts_at(n) else { continue };
            let slot = round.envs.entry(n).or_insert_with(AbstractEnv::bottom);
            *slot = slot.join(env);
            if env.is_bottom() {
                continue;
            }
            match graph.instruction(n) {
                Instruction::Store { dst, .. } => {
                    let v = round.stores.entry(n).or_default().entry(facts).or_insert(Interval::Bottom);
                    *v = v.join(&env.get(dst));
                }
                Instruction::Assert { cond, .. }
                    if env.may_be_false(cond) && !round.alarms.contains_key(&n) => {
                        round.alarms.insert(n, ic.clone());
                    }
                _ => {}
            }
        }
    }

    /// Outer fixpoint over all threads.
    pub fn run(mut self) -> Analysis {
        let mut envs = EnvMap::new();
        let mut table = StoreTable::new();
        let mut history = Vec::new();
        let mut rounds = 0;
        loop {
            rounds += 1;
            let mut next_envs = envs.clone();
            let mut next_table = table.clone();
            let mut alarms = BTreeMap::new();
            let mut per_thread = Vec::new();
            for g in self.program.threads.values() {
                let r = self.run_thread(g, &table);
                for (n, e) in r.envs {
                    let slot = next_envs.entry(n).or_insert_with(AbstractEnv::bottom);
                    *slot = slot.join(&e);
                }
                for (s, entries) in r.stores {
                    let row = next_table.entry(s).or_default();
                    for (prov, v) in entries {
                        let slot = row.entry(prov).or_insert(Interval::Bottom);
                        *slot = slot.join(&v);
                    }
                }
                alarms.extend(r.alarms);
                per_thread.push(r.stats);
            }
            if rounds > OUTER_WIDEN_AFTER {
                next_envs = widen_envs(&envs, &next_envs);
                next_table = widen_table(&table, &next_table);
            }
            history.push(next_envs.clone());
            if next_envs == envs && next_table == table {
                return self.finish(envs, table, alarms, per_thread, rounds, history);
            }
            envs = next_envs;
            table = next_table;
        }
    }

    fn finish(
        &self,
        envs: EnvMap,
        stores: StoreTable,
        alarms: BTreeMap<NodeId, InterferenceCombination>,
        per_thread: Vec<ThreadStats>,
        rounds: usize,
        history: Vec<EnvMap>,
    ) -> Analysis {
        let model = self.ctx.model;
        let verdicts = self
            .program
            .asserts()
            .into_iter()
            .map(|(n, _, location)| {
                let witness = alarms.get(&n).cloned();
                Verdict {
                    node: n,
                    location: location.to_string(),
                    line: self.program.lines.get(&n).copied(),
                    model,
                    status: if witness.is_some() { Status::ALARM } else { Status::PROVED },
                    witness,
                }
            })
            .collect();
        let stats = Stats {
            threads: self.program.threads.len(),
            nodes: self.program.node_count(),
            combinations_enumerated: per_thread.iter().map(|t| t.enumerated).sum(),
            combinations_pruned: per_thread.iter().map(|t| t.pruned).sum(),
            outer_rounds: rounds,
            per_thread,
        };
        Analysis { model, envs, stores, verdicts, stats, history }
    }
}

fn widen_envs(old: &EnvMap, new: &EnvMap) -> EnvMap {
    new.iter()
        .map(|(n, e)| (*n, old.get(n).map_or_else(|| e.clone(), |o| o.widen(&o.join(e)))))
        .collect()
}

fn widen_table(old: &StoreTable, new: &StoreTable) -> StoreTable {
    new.iter()
        .map(|(s, row)| {
            let row = row
                .iter()
                .map(|(p, v)| {
                    let w = old.get(s).and_then(|r| r.get(p)).map_or(*v, |o| o.widen(&o.join(v)));
                    (p.clone(), w)
                })
                .collect();
            (*s, row)
        })
        .collect()
}

/// Runs the whole analysis with the given combination cap.
pub fn analyze_all(program: &Program, model: MemoryModel, cap: usize) -> Analysis {
    Analyzer::new(program, model, cap).run()
}
