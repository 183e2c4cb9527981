//! Strategies, reference implementations and property checks shared by the
//! property suite and the acceptance harness.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use relax_check::analysis::{analyze_all, analyze_sequential, initial_env, Status, DEFAULT_MAX_COMBINATIONS};
use relax_check::corpus;
use relax_check::datalog::{pos, Atom, Engine, Term::Var};
use relax_check::domain::{AbstractEnv, Bound, Interval};
use relax_check::feasibility::{FeasibilityContext, MemoryModel};
use relax_check::frontend::compile;
use relax_check::ir::{
    BinOp, CmpOp, Cond, Expr, FlowGraph, Instruction, NodeId, Program, ThreadId, VarId,
};
use relax_check::oracle::{self, Limits};
use relax_check::relations::{compute_dominates, compute_not_reachable_from, Pairs};
use relax_check::report::{run_source, RunConfig};

pub const CASES: u32 = 256;

/// Enough room for every generated program.
pub const WIDE: Limits = Limits { max_events: 16, max_loop_iters: 3 };

// ---- strategies

pub fn bound() -> impl Strategy<Value = Bound> {
    prop_oneof![
        1 => Just(Bound::NegInf),
        1 => Just(Bound::PosInf),
        6 => (-8i64..8).prop_map(Bound::Fin),
    ]
}

pub fn interval() -> impl Strategy<Value = Interval> {
    prop_oneof![
        1 => Just(Interval::Bottom),
        8 => (bound(), bound()).prop_map(|(a, b)| Interval::new(a.min(b), a.max(b))),
    ]
}

fn var_names() -> [VarId; 3] {
    [VarId::global("x"), VarId::local("a", ThreadId(1)), VarId::local("b", ThreadId(1))]
}

pub fn env() -> impl Strategy<Value = AbstractEnv> {
    prop_oneof![
        1 => Just(AbstractEnv::bottom()),
        8 => proptest::collection::vec(interval(), 3).prop_map(|ivs| {
            let mut e = AbstractEnv::top();
            for (v, i) in var_names().into_iter().zip(ivs) {
                if !i.is_bottom() {
                    e.set(v, i);
                }
            }
            e
        }),
    ]
}

pub fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-4i64..5).prop_map(Expr::Const),
        (0usize..3).prop_map(|i| Expr::Var(var_names()[i].clone())),
    ];
    leaf.prop_recursive(3, 8, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (prop_oneof![Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul)], inner.clone(), inner)
                .prop_map(|(op, a, b)| Expr::bin(op, a, b)),
        ]
    })
}

pub fn cond() -> impl Strategy<Value = Cond> {
    let op = prop_oneof![
        Just(CmpOp::Eq),
        Just(CmpOp::Ne),
        Just(CmpOp::Lt),
        Just(CmpOp::Le),
        Just(CmpOp::Gt),
        Just(CmpOp::Ge)
    ];
    let atom = (op, expr(), expr()).prop_map(|(op, a, b)| Cond::cmp(op, a, b));
    atom.prop_recursive(2, 6, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|c| c.negate()),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Cond::And(Box::new(a), Box::new(b))),
            (inner.clone(), inner).prop_map(|(a, b)| Cond::Or(Box::new(a), Box::new(b))),
        ]
    })
}

pub fn instruction() -> impl Strategy<Value = Instruction> {
    let [x, a, _] = var_names();
    prop_oneof![
        expr().prop_map(move |e| Instruction::Store { dst: x.clone(), src: e }),
        expr().prop_map(move |e| Instruction::LocalAssign { dst: a.clone(), src: e }),
        Just(Instruction::Load { dst: var_names()[2].clone(), src: var_names()[0].clone() }),
        cond().prop_map(Instruction::Assume),
    ]
}

/// Concrete valuations of the three variables, drawn inside `env`.
fn sample(env: &AbstractEnv, picks: &[i64]) -> Option<BTreeMap<VarId, i64>> {
    if env.is_bottom() {
        return None;
    }
    let mut out = BTreeMap::new();
    for (v, &p) in var_names().iter().zip(picks) {
        let value = match env.get(v).bounds()? {
            (Bound::Fin(lo), Bound::Fin(hi)) => lo + p.rem_euclid(hi - lo + 1),
            (Bound::Fin(lo), _) => lo + p.abs(),
            (_, Bound::Fin(hi)) => hi - p.abs(),
            _ => p,
        };
        out.insert(v.clone(), value);
    }
    Some(out)
}

#[derive(Clone, Debug)]
enum Stmt {
    Store(usize, i64),
    StoreLocal(usize, usize),
    Load(usize, usize),
    Fence,
    Membar(&'static str),
    IfStore(usize, i64, usize, i64),
    AssertLocal(usize, i64),
}

const GLOBALS: [&str; 2] = ["x", "y"];

fn stmt() -> impl Strategy<Value = Stmt> {
    prop_oneof![
        3 => (0usize..2, 1i64..3).prop_map(|(g, c)| Stmt::Store(g, c)),
        1 => (0usize..2, 0usize..2).prop_map(|(g, r)| Stmt::StoreLocal(g, r)),
        3 => (0usize..2, 0usize..2).prop_map(|(r, g)| Stmt::Load(r, g)),
        1 => Just(Stmt::Fence),
        1 => prop_oneof![Just("#LL"), Just("#LS"), Just("#SL"), Just("#SS")].prop_map(Stmt::Membar),
        1 => (0usize..2, 0i64..3, 0usize..2, 1i64..3).prop_map(|(r, c, g, v)| Stmt::IfStore(r, c, g, v)),
        1 => (0usize..2, 0i64..3).prop_map(|(r, c)| Stmt::AssertLocal(r, c)),
    ]
}

fn render(threads: &[Vec<Stmt>], final_assert: (i64, i64)) -> String {
    let mut s = String::from("global x, y;\n");
    for (i, body) in threads.iter().enumerate() {
        s += &format!("thread t{i} {{ local r0 = 0; local r1 = 0;");
        for st in body {
            s += &match st {
                Stmt::Store(g, c) => format!(" {} = {c};", GLOBALS[*g]),
                Stmt::StoreLocal(g, r) => format!(" {} = r{r} + 1;", GLOBALS[*g]),
                Stmt::Load(r, g) => format!(" r{r} = {};", GLOBALS[*g]),
                Stmt::Fence => " fence;".to_string(),
                Stmt::Membar(k) => format!(" membar {k};"),
                Stmt::IfStore(r, c, g, v) => format!(" if (r{r} == {c}) {{ {} = {v}; }}", GLOBALS[*g]),
                Stmt::AssertLocal(r, c) => format!(" assert(r{r} != {c});"),
            };
        }
        s += " }\n";
    }
    s += &format!("assert(!(x == {} && y == {}));\n", final_assert.0, final_assert.1);
    s
}

/// Source text of a small random litmus program.
pub fn litmus() -> impl Strategy<Value = String> {
    (proptest::collection::vec(proptest::collection::vec(stmt(), 1..=3), 2..=3), (0i64..3, 0i64..3))
        .prop_map(|(threads, fin)| render(&threads, fin))
}

/// One thread, no loops, no top-level asserts.
pub fn single_thread() -> impl Strategy<Value = String> {
    proptest::collection::vec(stmt(), 1..=6).prop_map(|body| {
        let text = render(&[body], (0, 0));
        text.lines().filter(|l| !l.starts_with("assert")).collect::<Vec<_>>().join("\n")
    })
}

/// A corpus program or a random one.
pub fn any_program() -> impl Strategy<Value = String> {
    prop_oneof![
        1 => (0..corpus::ALL.len()).prop_map(|i| corpus::ALL[i].source.to_string()),
        2 => litmus(),
    ]
}

pub fn model() -> impl Strategy<Value = MemoryModel> {
    (0usize..4).prop_map(|i| MemoryModel::ALL[i])
}

/// Graphs of up to 12 nodes rooted at node 0.
pub fn graph() -> impl Strategy<Value = FlowGraph> {
    (2u32..=12).prop_flat_map(|n| {
        proptest::collection::btree_set((0..n, 0..n), 0..(3 * n as usize)).prop_map(move |edges| FlowGraph {
            thread: ThreadId(1),
            name: "g".into(),
            nodes: (0..n).map(|i| (NodeId(i), Instruction::Nop)).collect(),
            entry: NodeId(0),
            exit: NodeId(n - 1),
            edges: edges.into_iter().map(|(a, b)| (NodeId(a), NodeId(b))).collect(),
        })
    })
}

// ---- reference implementations

pub type Valuation = BTreeMap<String, i64>;

/// Nodes reachable from `from` in zero or more steps, avoiding `skip`.
pub fn reach_avoiding(g: &FlowGraph, from: NodeId, skip: Option<NodeId>) -> BTreeSet<NodeId> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![from];
    while let Some(n) = stack.pop() {
        if Some(n) == skip || !seen.insert(n) {
            continue;
        }
        stack.extend(g.successors(n));
    }
    seen
}

/// Sequentially consistent interleaving of whole instructions. Returns
/// (final globals, violated asserts) of every complete execution.
pub fn interleave_sc(p: &Program) -> BTreeSet<(Valuation, BTreeSet<NodeId>)> {
    #[derive(Clone, PartialEq, Eq, Hash)]
    struct S {
        pcs: BTreeMap<ThreadId, Option<NodeId>>,
        done: BTreeSet<ThreadId>,
        mem: BTreeMap<VarId, i64>,
        locals: BTreeMap<VarId, i64>,
        violated: BTreeSet<NodeId>,
    }
    let root = p.root_graph();
    let start = S {
        pcs: BTreeMap::from([(p.root, Some(root.entry))]),
        done: BTreeSet::new(),
        mem: BTreeMap::new(),
        locals: BTreeMap::new(),
        violated: BTreeSet::new(),
    };
    let mut out = BTreeSet::new();
    let mut seen = HashSet::new();
    let mut stack = vec![start];
    while let Some(s) = stack.pop() {
        if !seen.insert(s.clone()) {
            continue;
        }
        if s.pcs.values().all(|pc| pc.is_none()) {
            let globals = p.globals.keys().map(|g| (g.clone(), *s.mem.get(&VarId::global(g)).unwrap_or(&0))).collect();
            out.insert((globals, s.violated.clone()));
            continue;
        }
        for (&t, pc) in &s.pcs {
            let Some(n) = *pc else { continue };
            let g = &p.threads[&t];
            let lookup = |v: &VarId| Some(*s.locals.get(v).unwrap_or(&0));
            let mut next = s.clone();
            match g.instruction(n) {
                Instruction::Load { dst, src } => {
                    next.locals.insert(dst.clone(), *s.mem.get(src).unwrap_or(&0));
                }
                Instruction::Store { dst, src } => {
                    next.mem.insert(dst.clone(), src.eval(&lookup).unwrap());
                }
                Instruction::LocalAssign { dst, src } => {
                    next.locals.insert(dst.clone(), src.eval(&lookup).unwrap());
                }
                Instruction::Assume(c) => {
                    if !c.eval(&lookup).unwrap() {
                        continue;
                    }
                }
                Instruction::Assert { cond, .. } => {
                    if !cond.eval(&lookup).unwrap() {
                        next.violated.insert(n);
                    }
                }
                Instruction::ThreadCreate(c) => {
                    next.pcs.insert(*c, Some(p.threads[c].entry));
                }
                Instruction::ThreadJoin(c)
                    if !s.done.contains(c) => {
                        continue;
                    }
                _ => {}
            }
            if n == g.exit {
                next.pcs.insert(t, None);
                next.done.insert(t);
                stack.push(next);
                continue;
            }
            for succ in g.successors(n) {
                let mut b = next.clone();
                b.pcs.insert(t, Some(succ));
                stack.push(b);
            }
        }
    }
    out
}

pub fn final_states(p: &Program, m: MemoryModel) -> Option<BTreeSet<(Valuation, Valuation)>> {
    let ex = oracle::enumerate(p, m, WIDE).ok()?;
    Some(ex.into_iter().map(|e| (e.globals, e.locals)).collect())
}

// ---- properties

fn runner() -> TestRunner {
    TestRunner::new(Config { cases: CASES, failure_persistence: None, ..Config::default() })
}

fn fail(msg: String) -> TestCaseError {
    TestCaseError::fail(msg)
}

pub type Outcome = Result<(), String>;

fn finish<T: std::fmt::Debug>(r: Result<(), proptest::test_runner::TestError<T>>) -> Outcome {
    r.map_err(|e| e.to_string())
}

pub fn lattice_laws() -> Outcome {
    finish(runner().run(&(interval(), interval(), interval()), |(a, b, c)| {
        prop_assert_eq!(a.join(&b), b.join(&a));
        prop_assert_eq!(a.join(&b).join(&c), a.join(&b.join(&c)));
        prop_assert_eq!(a.join(&a), a);
        prop_assert!(a.leq(&a));
        prop_assert!(a.leq(&a.join(&b)) && b.leq(&a.join(&b)));
        if a.leq(&b) && b.leq(&a) {
            prop_assert_eq!(a, b);
        }
        if a.leq(&b) && b.leq(&c) {
            prop_assert!(a.leq(&c));
        }
        let m = a.meet(&b);
        prop_assert!(m.leq(&a) && m.leq(&b));
        if c.leq(&a) && c.leq(&b) {
            prop_assert!(c.leq(&m));
        }
        let w = a.widen(&b);
        prop_assert!(a.leq(&w) && b.leq(&w));
        prop_assert!(Interval::Bottom.leq(&a) && a.leq(&Interval::TOP));
        Ok(())
    }))?;
    finish(runner().run(&(env(), env()), |(e, f)| {
        let j = e.join(&f);
        prop_assert!(e.leq(&j) && f.leq(&j));
        prop_assert_eq!(j.clone(), f.join(&e));
        let w = e.widen(&f);
        prop_assert!(e.leq(&w) && f.leq(&w));
        Ok(())
    }))
}

pub fn transfer_monotone() -> Outcome {
    let strategy = (env(), env(), instruction(), proptest::collection::vec(-20i64..20, 3));
    finish(runner().run(&strategy, |(e, f, instr, picks)| {
        let (lo, hi) = (e.clone(), e.join(&f));
        let (lo_out, hi_out) = (lo.transfer(&instr), hi.transfer(&instr));
        prop_assert!(lo_out.leq(&hi_out), "{} -> {} not below {} -> {}", lo, lo_out, hi, hi_out);
        // concrete states inside the input stay inside the output
        if let Some(vals) = sample(&lo, &picks) {
            let lookup = |v: &VarId| vals.get(v).copied();
            let small = |x: i64| x.abs() < 1 << 40;
            match &instr {
                Instruction::Store { dst, src } | Instruction::LocalAssign { dst, src } => {
                    if let Some(v) = src.eval(&lookup).filter(|v| small(*v)) {
                        prop_assert!(lo_out.get(dst).contains(v), "{} ∉ {}", v, lo_out.get(dst));
                    }
                }
                Instruction::Assume(c)
                    if c.eval(&lookup) == Some(true) => {
                        for (v, x) in &vals {
                            prop_assert!(lo_out.get(v).contains(*x));
                        }
                    }
                _ => {}
            }
        }
        Ok(())
    }))
}

/// Facts drawn from the same-variable load/store pairs of a program.
fn candidate_facts(p: &Program) -> Vec<(NodeId, NodeId)> {
    let mut loads = Vec::new();
    let mut stores = Vec::new();
    for (n, _, i) in p.nodes() {
        match i {
            Instruction::Load { src, .. } => loads.push((n, src.clone())),
            Instruction::Store { dst, .. } => stores.push((n, dst.clone())),
            _ => {}
        }
    }
    let mut out = Vec::new();
    for (l, v) in &loads {
        for (s, w) in &stores {
            if v == w {
                out.push((*l, *s));
            }
        }
    }
    out
}

fn pick(all: &[(NodeId, NodeId)], mask: &[bool]) -> Pairs {
    all.iter().zip(mask.iter().cycle()).filter(|(_, &k)| k).map(|(p, _)| *p).collect()
}

pub fn model_inclusion_chain() -> Outcome {
    let strategy = (any_program(), proptest::collection::vec(any::<bool>(), 1..16));
    finish(runner().run(&strategy, |(src, mask)| {
        let p = compile(&src).map_err(|e| fail(format!("{e}\n{src}")))?;
        let facts = pick(&candidate_facts(&p), &mask);
        let closed: Vec<_> = MemoryModel::ALL.iter().map(|&m| FeasibilityContext::new(&p, m).close(&facts)).collect();
        for w in closed.windows(2) {
            let (strong, weak) = (&w[0], &w[1]);
            prop_assert!(weak.no_reorder.is_subset(&strong.no_reorder));
            prop_assert!(weak.mhb.is_subset(&strong.mhb));
            prop_assert!(weak.must_not_read_from.is_subset(&strong.must_not_read_from));
        }
        Ok(())
    }))
}

pub fn datalog_fact_monotone() -> Outcome {
    let edges = proptest::collection::btree_set((0u32..8, 0u32..8), 0..20);
    finish(runner().run(&(edges.clone(), edges), |(small, extra)| {
        let closure = |facts: &BTreeSet<(u32, u32)>, split: bool| {
            let mut e = Engine::new();
            let edge = e.relation("edge", 2);
            let path = e.relation("path", 2);
            e.rule(Atom::new(path, [Var(0), Var(1)]), vec![pos(edge, [Var(0), Var(1)])]).unwrap();
            e.rule(Atom::new(path, [Var(0), Var(2)]), vec![pos(path, [Var(0), Var(1)]), pos(path, [Var(1), Var(2)])])
                .unwrap();
            for (i, (a, b)) in facts.iter().enumerate() {
                e.insert(edge, &[*a, *b]);
                if split && i % 3 == 0 {
                    e.run();
                }
            }
            e.run();
            e.tuples(path).map(|t| (t[0], t[1])).collect::<BTreeSet<_>>()
        };
        let big: BTreeSet<_> = small.union(&extra).copied().collect();
        let (c_small, c_big) = (closure(&small, false), closure(&big, false));
        prop_assert!(c_small.is_subset(&c_big));
        prop_assert_eq!(&c_big, &closure(&big, true));
        Ok(())
    }))?;
    let strategy = (any_program(), model(), proptest::collection::vec(any::<bool>(), 1..16), any::<u64>());
    finish(runner().run(&strategy, |(src, m, mask, salt)| {
        let p = compile(&src).map_err(|e| fail(format!("{e}")))?;
        let all = candidate_facts(&p);
        let small = pick(&all, &mask);
        let mut big = small.clone();
        big.extend(all.iter().enumerate().filter(|(i, _)| (salt >> (i % 64)) & 1 == 1).map(|(_, f)| *f));
        let ctx = FeasibilityContext::new(&p, m);
        let (a, b) = (ctx.close(&small), ctx.close(&big));
        prop_assert!(a.mhb.is_subset(&b.mhb));
        prop_assert!(a.must_not_read_from.is_subset(&b.must_not_read_from));
        Ok(())
    }))
}

pub fn dominators_brute_force() -> Outcome {
    finish(runner().run(&graph(), |g| {
        let dom = compute_dominates(&g);
        let reachable = reach_avoiding(&g, g.entry, None);
        for &b in &reachable {
            for &a in g.nodes.keys() {
                let expected = a != b && !reach_avoiding(&g, g.entry, Some(a)).contains(&b);
                prop_assert_eq!(dom.contains(&(a, b)), expected, "dominates({}, {})", a, b);
            }
        }
        let nrf = compute_not_reachable_from(&g);
        for &a in g.nodes.keys() {
            for &b in g.nodes.keys() {
                let one_or_more = g.successors(b).any(|s| reach_avoiding(&g, s, None).contains(&a));
                prop_assert_eq!(nrf.contains(&(a, b)), !one_or_more);
            }
        }
        Ok(())
    }))
}

pub fn oracle_behavior_inclusion() -> Outcome {
    finish(runner().run(&any_program(), |src| {
        let p = compile(&src).map_err(|e| fail(format!("{e}")))?;
        let Some(sets) = MemoryModel::ALL.iter().map(|&m| final_states(&p, m)).collect::<Option<Vec<_>>>() else {
            return Ok(());
        };
        for w in sets.windows(2) {
            prop_assert!(w[0].is_subset(&w[1]), "{}", src);
        }
        // the operational SC semantics agrees with plain interleaving
        let ex = oracle::enumerate(&p, MemoryModel::SC, WIDE).unwrap();
        let ours: BTreeSet<_> = ex.into_iter().map(|e| (e.globals, e.violated)).collect();
        prop_assert_eq!(ours, interleave_sc(&p), "{}", src);
        Ok(())
    }))
}

pub fn verdict_monotone() -> Outcome {
    finish(runner().run(&any_program(), |src| {
        let p = compile(&src).map_err(|e| fail(format!("{e}")))?;
        let runs: Vec<_> = MemoryModel::ALL.iter().map(|&m| analyze_all(&p, m, DEFAULT_MAX_COMBINATIONS)).collect();
        for w in runs.windows(2) {
            for (strong, weak) in w[0].verdicts.iter().zip(&w[1].verdicts) {
                if weak.status == Status::PROVED {
                    prop_assert_eq!(strong.status, Status::PROVED, "{} {} vs {}\n{}", strong.node, w[0].model, w[1].model, src);
                }
            }
        }
        Ok(())
    }))
}

pub fn deterministic() -> Outcome {
    finish(runner().run(&(any_program(), model()), |(src, m)| {
        let cfg = RunConfig { model: Some(m), emit_relations: true, ..RunConfig::new("p.lit") };
        let render = || {
            let mut r = run_source("p.lit", &src, &cfg).unwrap();
            r.wall_time_ms = 0.0;
            (r.render_text(), r.render_json())
        };
        prop_assert_eq!(render(), render());
        Ok(())
    }))
}

/// Oracle violation implies ALARM, on random programs.
pub fn sound_on_random_programs() -> Outcome {
    finish(runner().run(&(litmus(), model()), |(src, m)| {
        let p = compile(&src).map_err(|e| fail(format!("{e}")))?;
        let Ok(concrete) = oracle::violates(&p, m, WIDE) else { return Ok(()) };
        for v in analyze_all(&p, m, DEFAULT_MAX_COMBINATIONS).verdicts {
            if concrete[&v.node] {
                prop_assert_eq!(v.status, Status::ALARM, "{} under {}\n{}", v.node, m, src);
            }
        }
        Ok(())
    }))
}

/// Envs of a single-thread program equal plain sequential analysis.
pub fn degenerate_single_thread(src: &str) -> Result<(), String> {
    let p = compile(src).map_err(|e| e.to_string())?;
    let init = initial_env(&p);
    for m in MemoryModel::ALL {
        let a = analyze_all(&p, m, DEFAULT_MAX_COMBINATIONS);
        for g in p.threads.values() {
            for (n, e) in analyze_sequential(g, &init) {
                if a.envs.get(&n) != Some(&e) {
                    return Err(format!("{m} {n}: {:?} vs {e}\n{src}", a.envs.get(&n).map(|e| e.to_string())));
                }
            }
        }
    }
    Ok(())
}

pub fn single_thread_degeneracy() -> Outcome {
    finish(runner().run(&single_thread(), |src| degenerate_single_thread(&src).map_err(fail)))
}

pub type Property = (&'static str, fn() -> Outcome);

pub const PROPERTIES: &[Property] = &[
    ("lattice laws", lattice_laws),
    ("transfer monotonicity", transfer_monotone),
    ("NoReorder/MHB/MustNotReadFrom model inclusion", model_inclusion_chain),
    ("Datalog fact monotonicity", datalog_fact_monotone),
    ("dominators vs brute force", dominators_brute_force),
    ("oracle behavior inclusion", oracle_behavior_inclusion),
    ("verdict monotonicity across models", verdict_monotone),
    ("determinism", deterministic),
];
