//! One checker invocation: read a file, analyze it, optionally cross-check
//! with the oracle, and render the outcome as text or JSON.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::analysis::{self, Stats, Status};
use crate::feasibility::{FeasibilityContext, InterferenceCombination, MemoryModel};
use crate::frontend::{self, FrontendError};
use crate::ir::NodeId;
use crate::oracle::{self, Limits};

/// Model used when neither the command line nor the file names one.
pub const DEFAULT_MODEL: MemoryModel = MemoryModel::TSO;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Format {
    #[default]
    Text,
    Json,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub input: PathBuf,
    /// Overrides the file's `model` directive.
    pub model: Option<MemoryModel>,
    pub max_combinations: usize,
    /// Cross-check with the oracle under these limits.
    pub oracle: Option<Limits>,
    pub emit_relations: bool,
    pub format: Format,
}

impl RunConfig {
    pub fn new(input: impl Into<PathBuf>) -> Self {
        RunConfig {
            input: input.into(),
            model: None,
            max_combinations: analysis::DEFAULT_MAX_COMBINATIONS,
            oracle: None,
            emit_relations: false,
            format: Format::Text,
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{source}")]
    Frontend { path: String, source: FrontendError },
    #[error("{0}")]
    Usage(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleNote {
    Agree,
    AnalyzerImprecise,
    SoundnessBug,
}

impl OracleNote {
    pub fn label(self) -> &'static str {
        match self {
            OracleNote::Agree => "agree",
            OracleNote::AnalyzerImprecise => "analyzer imprecise",
            OracleNote::SoundnessBug => "SOUNDNESS BUG",
        }
    }

    fn of(status: Status, violated: bool) -> Self {
        match (status, violated) {
            (Status::PROVED, true) => OracleNote::SoundnessBug,
            (Status::ALARM, false) => OracleNote::AnalyzerImprecise,
            _ => OracleNote::Agree,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AssertReport {
    pub node: NodeId,
    pub line: Option<usize>,
    pub location: String,
    pub status: Status,
    pub oracle: Option<OracleNote>,
    pub witness: Option<InterferenceCombination>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub file: String,
    pub model: MemoryModel,
    pub asserts: Vec<AssertReport>,
    pub stats: Stats,
    /// Static relations as `Name(a,b)` lines, when requested.
    pub relations: Option<Vec<String>>,
    /// Why the oracle could not decide, when it was requested.
    pub oracle_error: Option<String>,
    pub wall_time_ms: f64,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        if self.asserts.iter().any(|a| a.oracle == Some(OracleNote::SoundnessBug)) {
            3
        } else if self.asserts.iter().any(|a| a.status == Status::ALARM) {
            1
        } else {
            0
        }
    }

    /// Everything except the wall time, which varies between runs.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for line in self.relations.iter().flatten() {
            let _ = writeln!(out, "{line}");
        }
        for a in &self.asserts {
            let line = a.line.map_or_else(|| "?".to_string(), |l| l.to_string());
            let _ = writeln!(out, "{}:{line}: {} under {}", self.file, a.status, self.model);
            if let Some(note) = a.oracle {
                let _ = writeln!(out, "  oracle: {}", note.label());
            }
        }
        if let Some(e) = &self.oracle_error {
            let _ = writeln!(out, "oracle: unavailable ({e})");
        }
        let s = &self.stats;
        let _ = writeln!(out, "threads: {}", s.threads);
        let _ = writeln!(out, "nodes: {}", s.nodes);
        let _ = writeln!(out, "combinations enumerated: {}", s.combinations_enumerated);
        let _ = writeln!(out, "combinations pruned infeasible: {}", s.combinations_pruned);
        let _ = writeln!(out, "outer rounds: {}", s.outer_rounds);
        for t in s.per_thread.iter().filter(|t| t.loads > 0) {
            let overflow = if t.overflow { ", over cap" } else { "" };
            let _ = writeln!(
                out,
                "  {}: loads {}, combinations {}, pruned {}{overflow}",
                t.thread, t.loads, t.enumerated, t.pruned
            );
        }
        out
    }

    pub fn render_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Analyzes already-read source text.
pub fn run_source(file: &str, source: &str, config: &RunConfig) -> Result<Report, RunError> {
    let start = Instant::now();
    let program =
        frontend::compile(source).map_err(|source| RunError::Frontend { path: file.to_string(), source })?;
    let model = match (config.model, &program.model) {
        (Some(m), _) => m,
        (None, Some(name)) => name.parse().map_err(|e| RunError::Usage(format!("{file}: {e}")))?,
        (None, None) => DEFAULT_MODEL,
    };
    let analysis = analysis::analyze_all(&program, model, config.max_combinations);
    let relations = config
        .emit_relations
        .then(|| FeasibilityContext::new(&program, model).static_relations().emit().lines().map(String::from).collect());
    let (violated, oracle_error) = match config.oracle {
        None => (None, None),
        Some(limits) => match oracle::violates(&program, model, limits) {
            Ok(v) => (Some(v), None),
            Err(e) => (None, Some(e.to_string())),
        },
    };
    let asserts = analysis
        .verdicts
        .iter()
        .map(|v| AssertReport {
            node: v.node,
            line: v.line,
            location: v.location.clone(),
            status: v.status,
            oracle: violated.as_ref().map(|m| OracleNote::of(v.status, m[&v.node])),
            witness: v.witness.clone(),
        })
        .collect();
    Ok(Report {
        file: file.to_string(),
        model,
        asserts,
        stats: analysis.stats,
        relations,
        oracle_error,
        wall_time_ms: start.elapsed().as_secs_f64() * 1000.0,
    })
}

pub fn run(config: &RunConfig) -> Result<Report, RunError> {
    let file = config.input.display().to_string();
    let source = std::fs::read_to_string(&config.input).map_err(|source| RunError::Io { path: file.clone(), source })?;
    run_source(&file, &source, config)
}
