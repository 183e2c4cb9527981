use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use relax_check::analysis::DEFAULT_MAX_COMBINATIONS;
use relax_check::feasibility::MemoryModel;
use relax_check::oracle::Limits;
use relax_check::report::{self, Format, RunConfig};

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Text,
    Json,
}

/// Proves or refutes assertions of a litmus program under a memory model.
#[derive(Parser)]
#[command(name = "relax-check", version)]
struct Cli {
    input: PathBuf,
    /// sc, tso, pso or rmo; overrides the file's `model` directive.
    #[arg(long, value_parser = |s: &str| s.parse::<MemoryModel>().map_err(|e| e.to_string()))]
    model: Option<MemoryModel>,
    #[arg(long, default_value_t = DEFAULT_MAX_COMBINATIONS)]
    max_combinations: usize,
    /// Cross-check every verdict against exhaustive enumeration.
    #[arg(long)]
    oracle: bool,
    #[arg(long, default_value_t = Limits::default().max_events)]
    oracle_max_events: usize,
    #[arg(long, default_value_t = Limits::default().max_loop_iters)]
    oracle_max_loop_iters: usize,
    /// Print the static relations before the verdicts.
    #[arg(long)]
    emit_relations: bool,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    format: OutputFormat,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let config = RunConfig {
        input: cli.input,
        model: cli.model,
        max_combinations: cli.max_combinations,
        oracle: cli
            .oracle
            .then_some(Limits { max_events: cli.oracle_max_events, max_loop_iters: cli.oracle_max_loop_iters }),
        emit_relations: cli.emit_relations,
        format: match cli.format {
            OutputFormat::Text => Format::Text,
            OutputFormat::Json => Format::Json,
        },
    };
    let outcome = std::panic::catch_unwind(|| report::run(&config));
    match outcome {
        Ok(Ok(r)) => {
            match config.format {
                Format::Text => {
                    print!("{}", r.render_text());
                    eprintln!("wall time: {:.3} ms", r.wall_time_ms);
                }
                Format::Json => println!("{}", r.render_json()),
            }
            ExitCode::from(r.exit_code() as u8)
        }
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(_) => ExitCode::from(3),
    }
}
