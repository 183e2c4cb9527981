//! Asks the feasibility engine about the four ways thread 2 of the
//! message-passing program can read `y` and `x`.

use relax_check::domain::Interval;
use relax_check::feasibility::{Choice, FeasibilityContext, InterferenceCombination, MemoryModel};
use relax_check::frontend::compile;
use relax_check::ir::{Instruction, NodeId};
use relax_check::relations::Pairs;

fn main() {
    let program = compile(relax_check::corpus::get("mp_fence").unwrap()).unwrap();
    let find = |pred: &dyn Fn(&Instruction) -> bool| -> NodeId {
        program.nodes().find(|(n, _, i)| pred(i) && !program.is_init_store(*n)).unwrap().0
    };
    let load = |v: &str| find(&|i| matches!(i, Instruction::Load { src, .. } if src.name == v));
    let store = |v: &str| find(&|i| matches!(i, Instruction::Store { dst, .. } if dst.name == v));
    let (ly, lx) = (load("y"), load("x"));
    let remote = |s: NodeId, v: i64| Choice::RemoteStore { store: s, value: Interval::singleton(v), provenance: Pairs::new() };

    for model in MemoryModel::ALL {
        let ctx = FeasibilityContext::new(&program, model);
        println!("{model}:");
        for (label, y_choice, x_choice) in [
            ("y own, x own      ", Choice::NoInterference, Choice::NoInterference),
            ("y own, x from t1  ", Choice::NoInterference, remote(store("x"), 5)),
            ("y from t1, x t1   ", remote(store("y"), 10), remote(store("x"), 5)),
            ("y from t1, x own  ", remote(store("y"), 10), Choice::NoInterference),
        ] {
            let ic = InterferenceCombination::from([(ly, y_choice), (lx, x_choice)]);
            println!("  {label} {:?}", ctx.check(&ic).unwrap());
        }
    }
}
