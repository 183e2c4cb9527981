//! The rule engine on its own: reachability over a small graph, then one
//! more edge added to the running fixpoint.

use relax_check::datalog::{pos, Atom, Engine, Term::Var};

fn main() {
    let mut e = Engine::new();
    let edge = e.relation("edge", 2);
    let path = e.relation("path", 2);
    e.rule(Atom::new(path, [Var(0), Var(1)]), vec![pos(edge, [Var(0), Var(1)])]).unwrap();
    e.rule(Atom::new(path, [Var(0), Var(2)]), vec![pos(path, [Var(0), Var(1)]), pos(edge, [Var(1), Var(2)])])
        .unwrap();
    for (a, b) in [(1, 2), (2, 3), (3, 4)] {
        e.insert(edge, &[a, b]);
    }
    e.run();
    println!("path has {} tuples", e.len(path));
    e.insert(edge, &[4, 1]);
    e.run();
    println!("after closing the cycle: {} tuples", e.len(path));
    let mut rows: Vec<_> = e.tuples(path).map(|t| (t[0], t[1])).collect();
    rows.sort();
    println!("{rows:?}");
}
