//! End-to-end driver: parse, transform, solve, classify.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::diagnostic::Diagnostic;
use crate::gvn::{do_gvn, TermLog};
use crate::interp::{enumerate_traces_with, traces_equivalent, InterpError, Limits};
use crate::ir::Program;
use crate::normalize::{lift_loops, to_ssa};
use crate::parse::{parse_with, ParseOptions};
use crate::solver::{
    classify_assertions, generate_constraints, solve_naive, solve_worklist, PointsTo, SafetyReport, Timings,
};

/// How far to transform before analysis. Each level includes the ones
/// before it; `Ssa` and `Gvn` lift loops first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    None,
    Ssa,
    Gvn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Naive,
    #[default]
    Worklist,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown value `{0}`")]
pub struct UnknownValue(String);

impl FromStr for Level {
    type Err = UnknownValue;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Level::None),
            "ssa" => Ok(Level::Ssa),
            "gvn" | "ssa+gvn" => Ok(Level::Gvn),
            _ => Err(UnknownValue(s.into())),
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::None => "none",
            Level::Ssa => "ssa",
            Level::Gvn => "gvn",
        })
    }
}

impl FromStr for SolverKind {
    type Err = UnknownValue;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "naive" => Ok(SolverKind::Naive),
            "worklist" => Ok(SolverKind::Worklist),
            _ => Err(UnknownValue(s.into())),
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverKind::Naive => "naive",
            SolverKind::Worklist => "worklist",
        })
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    /// Problems with the input program.
    #[error("{}", render(.0))]
    Diagnostics(Vec<Diagnostic>),
    #[error(transparent)]
    Interp(#[from] InterpError),
}

fn render(ds: &[Diagnostic]) -> String {
    ds.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n")
}

impl From<Diagnostic> for PipelineError {
    fn from(d: Diagnostic) -> Self {
        PipelineError::Diagnostics(vec![d])
    }
}

impl From<Vec<Diagnostic>> for PipelineError {
    fn from(ds: Vec<Diagnostic>) -> Self {
        PipelineError::Diagnostics(ds)
    }
}

fn ms_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

pub struct Transformed {
    pub program: Program,
    /// Present at level `Gvn`.
    pub log: Option<TermLog>,
    pub timings: Timings,
}

pub fn transform(program: &Program, level: Level) -> Result<Transformed, PipelineError> {
    let mut timings = Timings::default();
    if level == Level::None {
        return Ok(Transformed { program: program.clone(), log: None, timings });
    }
    let t = Instant::now();
    let lifted = lift_loops(program)?;
    timings.lift = ms_since(t);
    let t = Instant::now();
    let ssa = to_ssa(&lifted)?;
    timings.ssa = ms_since(t);
    if level == Level::Ssa {
        return Ok(Transformed { program: ssa, log: None, timings });
    }
    let t = Instant::now();
    let out = do_gvn(&ssa)?;
    timings.gvn = ms_since(t);
    Ok(Transformed { program: out.program, log: Some(out.log), timings })
}

pub fn solve(program: &Program, solver: SolverKind) -> PointsTo {
    let cs = generate_constraints(program);
    match solver {
        SolverKind::Naive => solve_naive(&cs),
        SolverKind::Worklist => solve_worklist(&cs),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Options {
    pub level: Level,
    pub solver: SolverKind,
}

impl Default for Options {
    fn default() -> Self {
        Options { level: Level::Gvn, solver: SolverKind::Worklist }
    }
}

pub struct Analysis {
    pub transformed: Transformed,
    pub points_to: PointsTo,
    pub report: SafetyReport,
}

pub fn analyze(program: &Program, opts: Options) -> Result<Analysis, PipelineError> {
    let transformed = transform(program, opts.level)?;
    let t = Instant::now();
    let points_to = solve(&transformed.program, opts.solver);
    let mut report = classify_assertions(&transformed.program, &points_to);
    let solve_ms = ms_since(t);
    report.timings_ms = Timings { solve: solve_ms, ..transformed.timings };
    Ok(Analysis { transformed, points_to, report })
}

/// Parse `text` (naming it `file` in diagnostics) and analyze it.
pub fn analyze_source(
    text: &str,
    file: Option<&str>,
    allow_reserved: bool,
    opts: Options,
) -> Result<Analysis, PipelineError> {
    let t = Instant::now();
    let program = parse_source(text, file, allow_reserved)?;
    let parse_ms = ms_since(t);
    let mut a = analyze(&program, opts)?;
    a.report.timings_ms.parse = parse_ms;
    Ok(a)
}

/// `allow_reserved` admits names produced by the transformation passes, so
/// emitted programs can be read back.
pub fn parse_source(text: &str, file: Option<&str>, allow_reserved: bool) -> Result<Program, PipelineError> {
    let opts = ParseOptions { allow_reserved, file: file.map(str::to_string) };
    Ok(parse_with(text, &opts)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StageCheck {
    pub level: &'static str,
    pub equivalent: bool,
    pub original_traces: usize,
    pub transformed_traces: usize,
}

/// Compare bounded trace sets of `program` against its lifted, SSA and GVN
/// forms.
pub fn check_semantics(program: &Program, limits: Limits) -> Result<Vec<StageCheck>, PipelineError> {
    let original = enumerate_traces_with(program, limits)?;
    let lifted = lift_loops(program)?;
    let ssa = to_ssa(&lifted)?;
    let gvn = do_gvn(&ssa)?.program;
    let mut out = Vec::new();
    for (level, p) in [("lift", &lifted), ("ssa", &ssa), ("gvn", &gvn)] {
        let traces = enumerate_traces_with(p, limits)?;
        out.push(StageCheck {
            level,
            equivalent: traces_equivalent(&original, &traces),
            original_traces: original.len(),
            transformed_traces: traces.len(),
        });
    }
    Ok(out)
}

/// One line of the corpus table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusRow {
    pub name: String,
    pub procs: usize,
    pub stmts: usize,
    pub asserts: usize,
    pub ssa_ms: f64,
    pub ssa_unproved: usize,
    pub gvn_total_ms: f64,
    pub gvn_ms: f64,
    pub gvn_unproved: usize,
}

fn total_ms(t: &Timings) -> f64 {
    t.parse + t.lift + t.ssa + t.gvn + t.solve
}

pub fn corpus_row(name: &str, program: &Program, solver: SolverKind) -> Result<CorpusRow, PipelineError> {
    let ssa = analyze(program, Options { level: Level::Ssa, solver })?.report;
    let gvn = analyze(program, Options { level: Level::Gvn, solver })?.report;
    Ok(CorpusRow {
        name: name.to_string(),
        procs: program.procedures.len(),
        stmts: program.statements().count(),
        asserts: program.count_asserts(),
        ssa_ms: total_ms(&ssa.timings_ms),
        ssa_unproved: ssa.asserts_unproved,
        gvn_total_ms: total_ms(&gvn.timings_ms),
        gvn_ms: gvn.timings_ms.gvn,
        gvn_unproved: gvn.asserts_unproved,
    })
}

/// Rows for many programs, computed in parallel on at most `jobs` threads
/// (0 picks a default). Order follows the input.
pub fn corpus_rows(
    inputs: &[(String, Program)],
    solver: SolverKind,
    jobs: usize,
) -> Vec<Result<CorpusRow, PipelineError>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().expect("thread pool");
    pool.install(|| inputs.par_iter().map(|(n, p)| corpus_row(n, p, solver)).collect())
}

pub fn totals(rows: &[CorpusRow]) -> CorpusRow {
    let mut t = CorpusRow {
        name: "total".into(),
        procs: 0,
        stmts: 0,
        asserts: 0,
        ssa_ms: 0.0,
        ssa_unproved: 0,
        gvn_total_ms: 0.0,
        gvn_ms: 0.0,
        gvn_unproved: 0,
    };
    for r in rows {
        t.procs += r.procs;
        t.stmts += r.stmts;
        t.asserts += r.asserts;
        t.ssa_ms += r.ssa_ms;
        t.ssa_unproved += r.ssa_unproved;
        t.gvn_total_ms += r.gvn_total_ms;
        t.gvn_ms += r.gvn_ms;
        t.gvn_unproved += r.gvn_unproved;
    }
    t
}

/// Render rows plus a total line as an aligned text table.
pub fn render_table(rows: &[CorpusRow]) -> String {
    let mut out = format!(
        "{:<24} {:>5} {:>6} {:>7} | {:>10} {:>7} | {:>10} {:>8} {:>7}\n",
        "bench", "procs", "stmts", "asserts", "ssa ms", "unprov", "gvn ms", "gvn-only", "unprov"
    );
    let line = |r: &CorpusRow| {
        format!(
            "{:<24} {:>5} {:>6} {:>7} | {:>10.3} {:>7} | {:>10.3} {:>8.3} {:>7}\n",
            r.name, r.procs, r.stmts, r.asserts, r.ssa_ms, r.ssa_unproved, r.gvn_total_ms, r.gvn_ms, r.gvn_unproved
        )
    };
    for r in rows {
        out.push_str(&line(r));
    }
    out.push_str(&line(&totals(rows)));
    out
}
