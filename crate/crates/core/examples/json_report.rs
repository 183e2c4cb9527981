//! The JSON report `relax-check --format json` prints, built in-process.

use relax_check::feasibility::MemoryModel;
use relax_check::oracle::Limits;
use relax_check::report::{run_source, RunConfig};

fn main() {
    let mut config = RunConfig::new("sb_forward.lit");
    config.model = Some(MemoryModel::TSO);
    config.oracle = Some(Limits::default());
    let report = run_source("sb_forward.lit", relax_check::corpus::get("sb_forward").unwrap(), &config).unwrap();
    println!("{}", report.render_json());
    std::process::exit(report.exit_code());
}
