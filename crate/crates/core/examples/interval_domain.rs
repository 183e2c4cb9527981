//! Interval lattice operations and the transfer of a store.

use relax_check::domain::{AbstractEnv, Interval};
use relax_check::ir::{BinOp, Expr, Instruction, ThreadId, VarId};

fn main() {
    let a = Interval::finite(1, 3);
    let b = Interval::finite(7, 10);
    println!("{a} join {b} = {}", a.join(&b));
    println!("[4,6] <= [1,10]: {}", Interval::finite(4, 6).leq(&Interval::finite(1, 10)));
    println!("[0,1] widen [0,2] = {}", Interval::finite(0, 1).widen(&Interval::finite(0, 2)));

    let x = VarId::global("x");
    let r = VarId::local("a", ThreadId(1));
    let env = AbstractEnv::from_pairs([(x.clone(), Interval::finite(1, 3)), (r.clone(), Interval::finite(2, 5))]);
    let store = Instruction::Store { dst: x, src: Expr::bin(BinOp::Add, Expr::Var(r), Expr::Const(1)) };
    println!("{env}  --x = a + 1-->  {}", env.transfer(&store));
}
