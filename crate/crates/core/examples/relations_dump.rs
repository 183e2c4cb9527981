//! Prints the static relations of a corpus program, the same lines
//! `relax-check --emit-relations` writes.
//!
//!     cargo run --example relations_dump [corpus-name] [model]

use relax_check::corpus;
use relax_check::feasibility::{FeasibilityContext, MemoryModel};
use relax_check::frontend::compile;

fn main() {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "mp_fence".into());
    let model: MemoryModel = args.next().as_deref().unwrap_or("tso").parse().unwrap();
    let source = corpus::get(&name).unwrap_or_else(|| panic!("no corpus program named {name}"));
    let program = compile(source).unwrap();
    print!("{}", FeasibilityContext::new(&program, model).static_relations().emit());
}
