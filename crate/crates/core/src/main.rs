use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use nullgvn::corpus::{generate, GeneratorConfig};
use nullgvn::interp::{enumerate_traces_with, Limits, DEFAULT_TRACE_CAP};
use nullgvn::ir::Program;
use nullgvn::parse::print_program;
use nullgvn::pipeline::{
    analyze, check_semantics, corpus_rows, parse_source, render_table, totals, transform, Level, Options,
    PipelineError, SolverKind,
};
use nullgvn::solver::{SafetyReport, Verdict};

/// Null-assertion checker built on GVN and Andersen points-to analysis.
#[derive(Parser)]
#[command(name = "nullgvn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify every non-null assertion as SAFE or UNPROVED.
    Analyze(AnalyzeArgs),
    /// Print the transformed program.
    Transform(TransformArgs),
    /// Generate a random program.
    Gen(GenArgs),
    /// Compare bounded traces of a program and its transformed forms.
    CheckSemantics(SemanticsArgs),
    /// Tabulate SSA against SSA+GVN over a corpus.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    None,
    Ssa,
    Gvn,
}

impl From<LevelArg> for Level {
    fn from(l: LevelArg) -> Self {
        match l {
            LevelArg::None => Level::None,
            LevelArg::Ssa => Level::Ssa,
            LevelArg::Gvn => Level::Gvn,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Naive,
    Worklist,
}

impl From<SolverArg> for SolverKind {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Naive => SolverKind::Naive,
            SolverArg::Worklist => SolverKind::Worklist,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct InputArgs {
    /// IR files, or directories whose `.ir` files are all read.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Accept pass-introduced names such as `x__1` (for re-reading emitted output).
    #[arg(long)]
    transformed: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value = "gvn")]
    level: LevelArg,
    #[arg(long, value_enum, default_value = "worklist")]
    solver: SolverArg,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Write the analyzed program here (single input only).
    #[arg(long, value_name = "PATH")]
    emit_transformed: Option<PathBuf>,
    /// Also check that the transformations preserve bounded traces.
    #[arg(long)]
    check_semantics: bool,
    #[arg(long, default_value_t = 64)]
    depth: u32,
}

#[derive(Args)]
struct TransformArgs {
    input: PathBuf,
    #[arg(long, value_enum, default_value = "gvn")]
    level: LevelArg,
    #[arg(long)]
    transformed: bool,
    /// Output file; standard output if absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// File of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one setting, e.g. `--set null_check_density=0`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Number of consecutive seeds to generate.
    #[arg(long, default_value_t = 1)]
    count: u64,
    /// Write `gen_<seed>.ir` files here instead of printing.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args)]
struct SemanticsArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 64)]
    depth: u32,
    #[arg(long, default_value_t = DEFAULT_TRACE_CAP)]
    max_traces: usize,
    /// Write the original program's traces as JSON lines.
    #[arg(long, value_name = "PATH")]
    dump_traces: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// IR files or directories.
    inputs: Vec<PathBuf>,
    /// Add this many generated programs (seeds 0..N).
    #[arg(long, default_value_t = 0)]
    generated: u64,
    /// Generator configuration for `--generated`.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "worklist")]
    solver: SolverArg,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Worker threads; 0 picks a default.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long)]
    transformed: bool,
}

enum Failure {
    /// Bad input or a failed check: exit 1.
    User(String),
    /// Anything else: exit 2.
    Internal(String),
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Diagnostics(_) => Failure::User(e.to_string()),
            PipelineError::Interp(_) => Failure::Internal(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: io::Error) -> Failure {
    Failure::User(format!("{}: {e}", path.display()))
}

fn write_err(e: io::Error) -> Failure {
    Failure::Internal(format!("write failed: {e}"))
}

fn json<T: Serialize>(v: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(v).map_err(|e| Failure::Internal(e.to_string()))
}

/// Expand directories to their `.ir` files, sorted.
fn expand(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, Failure> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| io_err(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "ir"))
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn load(path: &Path, allow_reserved: bool) -> Result<Program, Failure> {
    load_timed(path, allow_reserved).map(|(p, _)| p)
}

/// Also returns the parse time in milliseconds.
fn load_timed(path: &Path, allow_reserved: bool) -> Result<(Program, f64), Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let start = Instant::now();
    let program = parse_source(&text, Some(&path.display().to_string()), allow_reserved)?;
    Ok((program, start.elapsed().as_secs_f64() * 1e3))
}

fn load_all(input: &InputArgs) -> Result<Vec<(PathBuf, Program, f64)>, Failure> {
    expand(&input.inputs)?
        .into_iter()
        .map(|p| load_timed(&p, input.transformed).map(|(prog, ms)| (p, prog, ms)))
        .collect()
}

fn render_report(name: &str, level: Level, solver: SolverKind, r: &SafetyReport) -> String {
    let t = &r.timings_ms;
    let mut s = format!(
        "{name}: level {level}, solver {solver}\n  asserts {} total, {} unproved\n",
        r.asserts_total, r.asserts_unproved
    );
    for a in &r.per_assert {
        let v = match a.verdict {
            Verdict::Safe => "SAFE",
            Verdict::Unproved => "UNPROVED",
        };
        s.push_str(&format!("  {v:<9} {}/{}#{}\n", a.proc, a.block, a.index));
    }
    s.push_str(&format!(
        "  time ms: parse {:.3} lift {:.3} ssa {:.3} gvn {:.3} solve {:.3}\n",
        t.parse, t.lift, t.ssa, t.gvn, t.solve
    ));
    s
}

#[derive(Serialize)]
struct FileReport<'a> {
    file: String,
    report: &'a SafetyReport,
}

fn cmd_analyze(a: AnalyzeArgs, out: &mut impl Write) -> Result<(), Failure> {
    let programs = load_all(&a.input)?;
    if a.emit_transformed.is_some() && programs.len() != 1 {
        return Err(Failure::User("--emit-transformed needs exactly one input".into()));
    }
    let opts = Options { level: a.level.into(), solver: a.solver.into() };
    let mut reports = Vec::new();
    let mut mismatch = Vec::new();
    for (path, program, parse_ms) in &programs {
        let mut analysis = analyze(program, opts)?;
        if let Some(dest) = &a.emit_transformed {
            fs::write(dest, print_program(&analysis.transformed.program)).map_err(|e| io_err(dest, e))?;
        }
        if a.check_semantics {
            for c in check_semantics(program, Limits::depth(a.depth))? {
                if !c.equivalent {
                    mismatch.push(format!("{}: traces differ after {}", path.display(), c.level));
                }
            }
        }
        analysis.report.timings_ms.parse = *parse_ms;
        reports.push((path.display().to_string(), analysis.report));
    }
    match a.format {
        Format::Json if reports.len() == 1 => writeln!(out, "{}", json(&reports[0].1)?),
        Format::Json => {
            let list: Vec<FileReport> = reports.iter().map(|(f, r)| FileReport { file: f.clone(), report: r }).collect();
            writeln!(out, "{}", json(&list)?)
        }
        Format::Text => reports
            .iter()
            .try_for_each(|(f, r)| write!(out, "{}", render_report(f, opts.level, opts.solver, r))),
    }
    .map_err(write_err)?;
    if mismatch.is_empty() {
        Ok(())
    } else {
        Err(Failure::User(mismatch.join("\n")))
    }
}

fn cmd_transform(a: TransformArgs, out: &mut impl Write) -> Result<(), Failure> {
    let program = load(&a.input, a.transformed)?;
    let text = print_program(&transform(&program, a.level.into())?.program);
    match &a.output {
        Some(p) => fs::write(p, text).map_err(|e| io_err(p, e)),
        None => out.write_all(text.as_bytes()).map_err(write_err),
    }
}

fn gen_config(config: Option<&PathBuf>, overrides: &[String]) -> Result<GeneratorConfig, Failure> {
    let mut cfg = GeneratorConfig::default();
    if let Some(path) = config {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        cfg.apply_text(&text).map_err(|e| Failure::User(format!("{}: {e}", path.display())))?;
    }
    for o in overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| Failure::User(format!("expected KEY=VALUE, got `{o}`")))?;
        cfg.set(k.trim(), v.trim()).map_err(|e| Failure::User(e.to_string()))?;
    }
    Ok(cfg)
}

fn cmd_gen(a: GenArgs, out: &mut impl Write) -> Result<(), Failure> {
    let mut cfg = gen_config(a.config.as_ref(), &a.overrides)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if a.print_config {
        return write!(out, "{cfg}").map_err(write_err);
    }
    if let Some(dir) = &a.out_dir {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let first = cfg.seed;
    for seed in first..first + a.count {
        cfg.seed = seed;
        let p = generate(&cfg).map_err(|e| Failure::User(e.to_string()))?;
        let text = print_program(&p);
        match &a.out_dir {
            Some(dir) => {
                let path = dir.join(format!("gen_{seed}.ir"));
                fs::write(&path, text).map_err(|e| io_err(&path, e))?;
            }
            None => {
                if a.count > 1 {
                    writeln!(out, "// seed {seed}").map_err(write_err)?;
                }
                out.write_all(text.as_bytes()).map_err(write_err)?;
            }
        }
    }
    Ok(())
}

fn cmd_check_semantics(a: SemanticsArgs, out: &mut impl Write) -> Result<(), Failure> {
    let programs = load_all(&a.input)?;
    let limits = Limits { depth: a.depth, max_traces: a.max_traces };
    let mut dump = match &a.dump_traces {
        Some(p) => Some(fs::File::create(p).map_err(|e| io_err(p, e))?),
        None => None,
    };
    let mut failed = false;
    for (path, program, _) in &programs {
        if let Some(f) = dump.as_mut() {
            for t in enumerate_traces_with(program, limits).map_err(PipelineError::from)? {
                writeln!(f, "{}", serde_json::to_string(&t).map_err(|e| Failure::Internal(e.to_string()))?)
                    .map_err(write_err)?;
            }
        }
        for c in check_semantics(program, limits)? {
            failed |= !c.equivalent;
            writeln!(
                out,
                "{}: {:<4} {} ({} vs {} traces)",
                path.display(),
                c.level,
                if c.equivalent { "equivalent" } else { "DIFFERENT" },
                c.original_traces,
                c.transformed_traces
            )
            .map_err(write_err)?;
        }
    }
    if failed {
        Err(Failure::User("semantics not preserved".into()))
    } else {
        Ok(())
    }
}

#[derive(Serialize)]
struct ReportJson<'a> {
    rows: &'a [nullgvn::pipeline::CorpusRow],
    total: nullgvn::pipeline::CorpusRow,
}

fn cmd_report(a: ReportArgs, out: &mut impl Write) -> Result<(), Failure> {
    let mut inputs: Vec<(String, Program)> = Vec::new();
    for path in expand(&a.inputs)? {
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        inputs.push((name, load(&path, a.transformed)?));
    }
    if a.generated > 0 {
        let cfg = gen_config(a.config.as_ref(), &[])?;
        for seed in 0..a.generated {
            let p = generate(&cfg.clone().with_seed(seed)).map_err(|e| Failure::User(e.to_string()))?;
            inputs.push((format!("gen_{seed}"), p));
        }
    }
    if inputs.is_empty() {
        return Err(Failure::User("no inputs".into()));
    }
    let rows = corpus_rows(&inputs, a.solver.into(), a.jobs).into_iter().collect::<Result<Vec<_>, _>>()?;
    let text = match a.format {
        Format::Text => render_table(&rows),
        Format::Json => json(&ReportJson { rows: &rows, total: totals(&rows) })? + "\n",
    };
    out.write_all(text.as_bytes()).map_err(write_err)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = io::stdout().lock();
    let result = match cli.command {
        Command::Analyze(a) => cmd_analyze(a, &mut out),
        Command::Transform(a) => cmd_transform(a, &mut out),
        Command::Gen(a) => cmd_gen(a, &mut out),
        Command::CheckSemantics(a) => cmd_check_semantics(a, &mut out),
        Command::Report(a) => cmd_report(a, &mut out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::User(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(2)
        }
    }
}
