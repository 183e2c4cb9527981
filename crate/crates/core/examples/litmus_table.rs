//! Verdicts for every bundled litmus program under every model.

use relax_check::analysis::{analyze_all, DEFAULT_MAX_COMBINATIONS};
use relax_check::corpus;
use relax_check::feasibility::MemoryModel;
use relax_check::frontend::compile;

fn main() {
    print!("{:<22}", "program");
    for m in MemoryModel::ALL {
        print!("{:>8}", m.to_string());
    }
    println!();
    for entry in corpus::ALL {
        let program = compile(entry.source).unwrap();
        print!("{:<22}", entry.name);
        for m in MemoryModel::ALL {
            let a = analyze_all(&program, m, DEFAULT_MAX_COMBINATIONS);
            let cell: Vec<String> = a.verdicts.iter().map(|v| v.status.to_string()).collect();
            print!("{:>8}", cell.join("/"));
        }
        println!();
    }
}
