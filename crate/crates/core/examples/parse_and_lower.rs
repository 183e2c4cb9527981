//! Compiles a litmus program and prints the lowered per-thread graphs.
//!
//!     cargo run --example parse_and_lower [file.lit]

use relax_check::frontend;

const DEFAULT: &str = "global x, y;
thread t1 { x = 5; fence; y = 10; }
thread t2 { if (y == 10) { assert(x == 5); } }";

fn main() {
    let source = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}")),
        None => DEFAULT.to_string(),
    };
    match frontend::compile(&source) {
        Ok(program) => {
            print!("{}", program.dump());
            println!("{} nodes, {} asserts", program.node_count(), program.asserts().len());
        }
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(2);
        }
    }
}
