//! One pass/fail line per acceptance criterion; exits non-zero on any fail.

mod common;

use std::time::{Duration, Instant};

use relax_check::analysis::{analyze_all, Status, DEFAULT_MAX_COMBINATIONS};
use relax_check::corpus;
use relax_check::domain::{AbstractEnv, Interval};
use relax_check::feasibility::{Choice, FeasibilityContext, FeasibilityResult, InterferenceCombination, MemoryModel};
use relax_check::frontend::compile;
use relax_check::ir::{BinOp, Expr, Instruction, NodeId, Program, ThreadId, VarId};
use relax_check::oracle::{self, Limits};
use relax_check::relations::Pairs;
use relax_check::report::{run_source, RunConfig};

use MemoryModel::{PSO, RMO, SC, TSO};
use Status::{ALARM, PROVED};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn verdict(name: &str, model: MemoryModel) -> Status {
    let p = compile(corpus::get(name).unwrap()).unwrap();
    let a = analyze_all(&p, model, DEFAULT_MAX_COMBINATIONS);
    assert_eq!(a.verdicts.len(), 1, "{name} has one assert");
    a.verdicts[0].status
}

fn expect_cells(cells: &[(&str, MemoryModel, Status)]) -> Result<(), String> {
    let wrong: Vec<String> = cells
        .iter()
        .filter_map(|&(name, m, want)| {
            let got = verdict(name, m);
            (got != want).then(|| format!("{name} {m}: {got}, expected {want}"))
        })
        .collect();
    if wrong.is_empty() {
        Ok(())
    } else {
        Err(wrong.join("; "))
    }
}

fn verdict_table() -> Check {
    let start = Instant::now();
    let mut cells = Vec::new();
    for m in [SC, TSO, PSO] {
        cells.push(("sb_fence", m, PROVED));
        cells.push(("mp_fence", m, PROVED));
    }
    cells.extend([
        ("sb", SC, PROVED),
        ("sb", TSO, ALARM),
        ("sb", PSO, ALARM),
        ("mp", SC, PROVED),
        ("mp", TSO, PROVED),
        ("mp", PSO, ALARM),
    ]);
    expect_cells(&cells)?;
    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(5) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("12/12 cells in {elapsed:?}"))
}

fn rmo_alarms() -> Check {
    expect_cells(&[("mp", RMO, ALARM), ("sb", RMO, ALARM)])?;
    Ok("both ALARM".into())
}

fn combination_audit() -> Check {
    let cfg = RunConfig { model: Some(TSO), ..RunConfig::new("mp_fence.lit") };
    let r = run_source("mp_fence.lit", corpus::get("mp_fence").unwrap(), &cfg).map_err(|e| e.to_string())?;
    let text = r.render_text();
    let line = text
        .lines()
        .find(|l| l.trim_start().starts_with("t2:"))
        .ok_or_else(|| format!("no t2 line in stats block:\n{text}"))?;
    if line.trim() != "t2: loads 2, combinations 4, pruned 1" {
        return Err(format!("stats line `{}`", line.trim()));
    }
    if r.asserts.iter().any(|a| a.status != PROVED) {
        return Err("assert not proved".into());
    }
    Ok(format!("{} and PROVED", line.trim()))
}

fn node(p: &Program, thread: &str, pred: impl Fn(&Instruction) -> bool) -> NodeId {
    let g = p.threads.values().find(|g| g.name == thread).unwrap();
    *g.nodes.iter().find(|(_, i)| pred(i)).unwrap().0
}

fn forwarding() -> Check {
    if verdict("sb_forward", TSO) != ALARM {
        return Err("forwarding program under TSO is not ALARM".into());
    }
    let p = compile(corpus::get("sb_forward").unwrap()).unwrap();
    let load = |t: &str, v: &str| node(&p, t, |i| matches!(i, Instruction::Load { src, .. } if src.name == v));
    let init = |v: &str| {
        let root = p.root_graph().name.clone();
        node(&p, &root, |i| matches!(i, Instruction::Store { dst, .. } if dst.name == v))
    };
    let from_init = |v: &str| Choice::RemoteStore { store: init(v), value: Interval::singleton(0), provenance: Pairs::new() };
    let ic = InterferenceCombination::from([
        (load("t1", "x"), Choice::NoInterference),
        (load("t1", "y"), from_init("y")),
        (load("t2", "x"), from_init("x")),
    ]);
    match FeasibilityContext::new(&p, TSO).check(&ic) {
        Ok(FeasibilityResult::Feasible) => Ok("ALARM; own-write/init/init combination Feasible".into()),
        other => Err(format!("combination judged {other:?}")),
    }
}

fn soundness_sweep() -> Check {
    let start = Instant::now();
    let (mut checked, mut violations, mut beyond) = (0, 0, Vec::new());
    let mut failures = Vec::new();
    for entry in corpus::ALL {
        let p = compile(entry.source).unwrap();
        for m in MemoryModel::ALL {
            let concrete = match oracle::violates(&p, m, Limits::default()) {
                Ok(c) => c,
                Err(e) => {
                    beyond.push(format!("{} {m}: {e}", entry.name));
                    continue;
                }
            };
            for v in analyze_all(&p, m, DEFAULT_MAX_COMBINATIONS).verdicts {
                checked += 1;
                if concrete[&v.node] {
                    violations += 1;
                    if v.status != ALARM {
                        failures.push(format!("{} {m} {}", entry.name, v.node));
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    if corpus::ALL.len() < 20 {
        return Err(format!("only {} corpus programs", corpus::ALL.len()));
    }
    if !failures.is_empty() {
        return Err(format!("violated but PROVED: {}", failures.join(", ")));
    }
    if !beyond.is_empty() {
        return Err(format!("beyond oracle limits: {}", beyond.join(", ")));
    }
    if elapsed >= Duration::from_secs(60) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!(
        "{} programs, {checked} assert/model pairs, {violations} concrete violations all ALARM, {elapsed:?}",
        corpus::ALL.len()
    ))
}

fn interval_values() -> Check {
    let join = Interval::finite(1, 3).join(&Interval::finite(7, 10));
    if join != Interval::finite(1, 10) {
        return Err(format!("join gave {join}"));
    }
    if !Interval::finite(4, 6).leq(&Interval::finite(1, 10)) {
        return Err("[4,6] not below [1,10]".into());
    }
    let x = VarId::global("x");
    let a = VarId::local("a", ThreadId(1));
    let env = AbstractEnv::from_pairs([(x.clone(), Interval::finite(1, 3)), (a.clone(), Interval::finite(2, 5))]);
    let store = Instruction::Store { dst: x.clone(), src: Expr::bin(BinOp::Add, Expr::Var(a.clone()), Expr::Const(1)) };
    let out = env.transfer(&store);
    let want = AbstractEnv::from_pairs([(x, Interval::finite(3, 6)), (a, Interval::finite(2, 5))]);
    if out != want {
        return Err(format!("transfer gave {out}"));
    }
    Ok(format!("join {join}, leq holds, transfer {out}"))
}

fn property_suites() -> Check {
    let mut failed = Vec::new();
    for (name, check) in common::PROPERTIES {
        let start = Instant::now();
        let r = check();
        println!("    {:<48} {} ({:?})", name, if r.is_ok() { "ok" } else { "FAILED" }, start.elapsed());
        if let Err(e) = r {
            failed.push(format!("{name}: {e}"));
        }
    }
    if failed.is_empty() {
        Ok(format!("{} suites x {} cases", common::PROPERTIES.len(), common::CASES))
    } else {
        Err(failed.join("\n"))
    }
}

fn single_thread_degeneracy() -> Check {
    let fixed = [
        "global x; thread t { local a; x = 3; a = x; if (a > 2) { x = a + 1; } else { x = 0; } }",
        "global x, y = 2; thread t { local a; a = y; x = a * a - 1; y = x; }",
        "global x; thread t { local a = 5; local b; b = a - 7; if (b < 0) { x = -b; } assert(x >= 0); }",
        "global x, y; thread t { fence; x = 1; membar #SL; y = x + 1; if (y == 2) { x = 9; } }",
    ];
    for src in fixed {
        common::degenerate_single_thread(src)?;
    }
    common::single_thread_degeneracy()?;
    Ok(format!("{} fixed programs and {} random ones, all models", fixed.len(), common::CASES))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("store-buffering and message-passing verdict table", verdict_table),
        ("RMO alarms without fences", rmo_alarms),
        ("combination audit on fenced message passing", combination_audit),
        ("own-store forwarding under TSO", forwarding),
        ("soundness sweep over the corpus", soundness_sweep),
        ("interval domain values", interval_values),
        ("property suites", property_suites),
        ("single-thread degeneracy", single_thread_degeneracy),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failures += 1;
                println!("criterion {}: FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria pass", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
