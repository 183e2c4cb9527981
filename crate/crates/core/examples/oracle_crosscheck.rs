//! Compares analyzer verdicts with exhaustive enumeration on the corpus.
//! An ALARM without a concrete violation is imprecision; a PROVED assert
//! the oracle can violate would be a soundness bug.

use relax_check::analysis::{analyze_all, Status, DEFAULT_MAX_COMBINATIONS};
use relax_check::corpus;
use relax_check::feasibility::MemoryModel;
use relax_check::frontend::compile;
use relax_check::oracle::{violates, Limits};

fn main() {
    let (mut agree, mut imprecise, mut unsound, mut skipped) = (0, 0, 0, 0);
    for entry in corpus::ALL {
        let program = compile(entry.source).unwrap();
        for m in MemoryModel::ALL {
            let Ok(concrete) = violates(&program, m, Limits::default()) else {
                skipped += 1;
                continue;
            };
            for v in analyze_all(&program, m, DEFAULT_MAX_COMBINATIONS).verdicts {
                match (v.status, concrete[&v.node]) {
                    (Status::PROVED, true) => {
                        unsound += 1;
                        println!("{} {m}: PROVED but violated", entry.name);
                    }
                    (Status::ALARM, false) => {
                        imprecise += 1;
                        println!("{} {m}: bogus alarm", entry.name);
                    }
                    _ => agree += 1,
                }
            }
        }
    }
    println!("agree {agree}, imprecise {imprecise}, unsound {unsound}, beyond limits {skipped}");
}
