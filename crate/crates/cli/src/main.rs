use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use fep_core::classify::{classify, Mode, PairedExecution, VerdictRecord};
use fep_core::corpus::{load_corpus, load_program, read_jsonl, run_corpus, write_jsonl};
use fep_core::diff::{statement_script, tree_edit_distance, EditScript};
use fep_core::inputgen::{generate_pool, GeneratorConfig};
use fep_core::instrument::{instrument_pair, AlignedInstrumentation, ProgramPoint};
use fep_core::minilang::{pretty, SourceUnit};
use fep_core::mutation::{generate_mutants, MutantInfo};
use fep_core::pipeline::{analyze_case, analyze_mutants, AnalysisConfig, CaseInput, PipelineError};
use fep_core::stats::{aggregate, Grouping, Report};
use fep_core::tracer::{execute_system, execute_unit, ExecConfig, InputVector};

#[derive(Parser)]
#[command(name = "fep", version, about = "Measure failed error propagation between buggy and fixed MiniLang programs")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Global {
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Worker threads; 0 lets the runtime decide.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[arg(long, global = true, value_enum, default_value_t = ModeArg::Unit)]
    mode: ModeArg,
    #[arg(long, global = true)]
    budget_seconds: Option<f64>,
    /// Emit JSON; with a path, write it there instead of stdout.
    #[arg(long, global = true, num_args = 0..=1, value_name = "PATH")]
    json: Option<Option<PathBuf>>,
    /// Write a CSV table (report commands).
    #[arg(long, global = true, value_name = "PATH")]
    csv: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Unit,
    Sys,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Unit => Mode::Unit,
            ModeArg::Sys => Mode::Sys,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Level {
    Statement,
    Node,
}

#[derive(Clone, Copy, ValueEnum)]
enum Side {
    Buggy,
    Fixed,
}

#[derive(Args)]
struct PairArgs {
    #[arg(long)]
    buggy: PathBuf,
    #[arg(long)]
    fixed: PathBuf,
    /// Defaults to the one function whose body changed.
    #[arg(long = "fn")]
    function: Option<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse and validate a program, then print it back.
    Parse { file: PathBuf },
    /// Edit script between the buggy and fixed version of a function.
    Diff {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long, value_enum, default_value_t = Level::Statement)]
        granularity: Level,
    },
    /// Aligned program points of both versions.
    Align {
        #[command(flatten)]
        pair: PairArgs,
    },
    /// Coverage-directed input pool for the given lines.
    GenInputs {
        #[arg(long)]
        program: PathBuf,
        #[arg(long = "fn")]
        function: String,
        #[arg(long, value_delimiter = ',', required = true)]
        lines: Vec<u32>,
        #[arg(long, default_value_t = 1000)]
        target: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one input and print the outcome.
    Run {
        #[arg(long)]
        program: PathBuf,
        #[arg(long = "fn")]
        function: String,
        /// JSON input vector, e.g. '{"args":[5]}'.
        #[arg(long)]
        input: String,
        /// A list of program points, or an alignment (see --side).
        #[arg(long)]
        points: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Side::Buggy)]
        side: Side,
    },
    /// Classify paired executions (one JSON value, or JSON lines).
    Classify {
        #[arg(long)]
        paired: PathBuf,
    },
    /// Write every first-order mutant of a function plus a manifest.
    Mutate {
        #[arg(long)]
        program: PathBuf,
        #[arg(long = "fn")]
        function: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full analysis of one pair, or of the mutants of one function.
    Analyze {
        #[arg(long, conflicts_with = "mutants_of")]
        buggy: Option<PathBuf>,
        #[arg(long, requires = "buggy")]
        fixed: Option<PathBuf>,
        /// Analyse the mutants of this (correct) program instead.
        #[arg(long)]
        mutants_of: Option<PathBuf>,
        #[arg(long = "fn")]
        function: Option<String>,
        #[arg(long)]
        lines: Option<String>,
        #[arg(long, default_value_t = 1000)]
        target: usize,
        #[arg(long)]
        verdicts_out: Option<PathBuf>,
        #[arg(long)]
        paired_out: Option<PathBuf>,
    },
    /// Aggregate persisted verdicts into a report.
    Report {
        #[arg(long)]
        verdicts: PathBuf,
    },
    /// Bundled corpus commands.
    Corpus {
        #[command(subcommand)]
        cmd: CorpusCmd,
    },
}

#[derive(Subcommand)]
enum CorpusCmd {
    /// Run every case and mutant subject of a manifest.
    Run {
        #[arg(long, default_value = "corpus/manifest.json")]
        manifest: PathBuf,
        /// Directory for report.json, CSV tables and JSON-lines artifacts.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the manifest's target executions per case.
        #[arg(long)]
        target: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.global.jobs > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cli.global.jobs).build_global().expect("thread pool");
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_invalid_input() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn invalid(msg: impl Into<String>) -> PipelineError {
    PipelineError::Invalid(msg.into())
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.display().to_string(), source }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn write_file(path: &Path, text: &str) -> Result<(), PipelineError> {
    fs::write(path, text).map_err(io_err(path))
}

/// Prints `value` as JSON (to a file when `--json PATH`), or `text` otherwise.
fn emit<T: Serialize>(g: &Global, value: &T, text: impl FnOnce() -> String) -> Result<(), PipelineError> {
    match &g.json {
        Some(Some(path)) => write_file(path, &to_json(value)),
        Some(None) => {
            print!("{}", to_json(value));
            Ok(())
        }
        None => {
            print!("{}", text());
            Ok(())
        }
    }
}

fn pick_fn(buggy: &SourceUnit, fixed: &SourceUnit, requested: Option<&str>) -> Result<String, PipelineError> {
    if let Some(f) = requested {
        return Ok(f.to_string());
    }
    let changed: Vec<&str> = buggy
        .functions
        .iter()
        .filter(|f| fixed.function(&f.name).is_some_and(|g| !g.body.same_shape(&f.body)))
        .map(|f| f.name.as_str())
        .collect();
    match changed.as_slice() {
        [one] => Ok(one.to_string()),
        [] if buggy.functions.len() == 1 => Ok(buggy.functions[0].name.clone()),
        _ => Err(invalid("cannot tell which function changed; pass --fn")),
    }
}

fn load_pair(p: &PairArgs) -> Result<(SourceUnit, SourceUnit, String), PipelineError> {
    let b = load_program(&p.buggy)?;
    let f = load_program(&p.fixed)?;
    let name = pick_fn(&b, &f, p.function.as_deref())?;
    for (v, u) in [("buggy", &b), ("fixed", &f)] {
        if u.function(&name).is_none() {
            return Err(invalid(format!("{v} version has no function `{name}`")));
        }
    }
    Ok((b, f, name))
}

fn script_text(s: &EditScript) -> String {
    let mut out = String::new();
    for op in &s.ops {
        let kind = serde_json::to_value(op.op).expect("op kind");
        let kind = kind.as_str().expect("op kind is a string");
        match (&op.source, &op.target) {
            (Some(a), Some(b)) if a.text != b.text => out.push_str(&format!("{kind} {} -> {}\n", a.text, b.text)),
            (Some(n), _) | (None, Some(n)) => out.push_str(&format!("{kind} {}\n", n.text)),
            (None, None) => {}
        }
    }
    out.push_str(&format!("cost {}\n", s.cost));
    out
}

fn parse_lines(s: &str) -> Result<Vec<u32>, PipelineError> {
    s.split(',').map(|t| t.trim().parse().map_err(|_| invalid(format!("bad line number `{t}`")))).collect()
}

fn analysis_config(g: &Global, target: usize) -> AnalysisConfig {
    let mut generator = GeneratorConfig { target_executions: target, seed: g.seed, ..Default::default() };
    if let Some(b) = g.budget_seconds {
        generator.budget_seconds = b;
    }
    AnalysisConfig { seed: g.seed, generator, exec: ExecConfig::default(), keep_paired: false }
}

fn write_report(g: &Global, report: &Report) -> Result<(), PipelineError> {
    if let Some(path) = &g.csv {
        write_file(path, &report.to_csv())?;
    }
    match &g.json {
        Some(Some(path)) => write_file(path, &report.to_json()),
        _ if g.csv.is_some() && g.json.is_none() => Ok(()),
        _ => {
            print!("{}", report.to_json());
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let g = &cli.global;
    let mode: Mode = g.mode.into();
    match cli.cmd {
        Cmd::Parse { file } => {
            let unit = load_program(&file)?;
            emit(g, &unit, || pretty(&unit))
        }
        Cmd::Diff { pair, granularity } => {
            let (b, f, name) = load_pair(&pair)?;
            let (bf, ff) = (b.function(&name).unwrap(), f.function(&name).unwrap());
            let script = match granularity {
                Level::Statement => statement_script(bf, ff),
                Level::Node => tree_edit_distance(&bf.body, &ff.body),
            };
            emit(g, &script, || script_text(&script))
        }
        Cmd::Align { pair } => {
            let (b, f, name) = load_pair(&pair)?;
            let (bf, ff) = (b.function(&name).unwrap(), f.function(&name).unwrap());
            let al = instrument_pair(bf, ff, &statement_script(bf, ff))?;
            emit(g, &al, || alignment_text(&al))
        }
        Cmd::GenInputs { program, function, lines, target, out } => {
            let unit = load_program(&program)?;
            let runner = match mode {
                Mode::Unit => function.clone(),
                Mode::Sys => unit.entry.clone().ok_or_else(|| invalid("program has no entry"))?,
            };
            if unit.function(&function).is_none() {
                return Err(invalid(format!("no function `{function}`")));
            }
            let mut cfg = analysis_config(g, target).generator;
            cfg.line_list = lines;
            let pool = generate_pool(&unit, &runner, &cfg)?;
            match out {
                Some(path) => {
                    write_file(&path, &to_json(&pool))?;
                    eprintln!("{} inputs, {} attempts", pool.inputs.len(), pool.generator_log.attempts);
                    Ok(())
                }
                None => {
                    print!("{}", to_json(&pool));
                    Ok(())
                }
            }
        }
        Cmd::Run { program, function, input, points, side } => {
            let unit = load_program(&program)?;
            let input: InputVector = serde_json::from_str(&input).map_err(|e| invalid(format!("--input: {e}")))?;
            let points = match points {
                None => Vec::new(),
                Some(p) => read_points(&p, side)?,
            };
            let cfg = ExecConfig::default();
            match mode {
                Mode::Unit => {
                    let o = execute_unit(&unit, &function, &input, &points, &cfg)?;
                    print!("{}", to_json(&o));
                }
                Mode::Sys => {
                    let (system, invocations) = execute_system(&unit, &input, &function, &points, &cfg)?;
                    print!("{}", to_json(&serde_json::json!({ "system": system, "invocations": invocations })));
                }
            }
            Ok(())
        }
        Cmd::Classify { paired } => {
            let pes = read_paired(&paired)?;
            let mut out = String::new();
            for pe in &pes {
                let v = classify(pe)?;
                out.push_str(&serde_json::to_string(&VerdictRecord::new(pe, &v)).expect("record"));
                out.push('\n');
            }
            match &g.json {
                Some(Some(path)) => write_file(path, &out),
                _ => {
                    print!("{out}");
                    Ok(())
                }
            }
        }
        Cmd::Mutate { program, function, out } => {
            let unit = load_program(&program)?;
            let mutants = generate_mutants(&unit, &function)?;
            fs::create_dir_all(&out).map_err(io_err(&out))?;
            let mut manifest: Vec<serde_json::Value> = Vec::new();
            for m in &mutants {
                let file = format!("m{:04}_{}.mlang", m.id, m.operator.id().replace('-', "_neg").replace('!', "_not"));
                write_file(&out.join(&file), &pretty(&m.mutated_unit))?;
                let info: MutantInfo = m.info();
                let mut v = serde_json::to_value(&info).expect("info");
                v["file"] = file.into();
                manifest.push(v);
            }
            write_file(&out.join("manifest.json"), &to_json(&manifest))?;
            println!("{} mutants written to {}", mutants.len(), out.display());
            Ok(())
        }
        Cmd::Analyze { buggy, fixed, mutants_of, function, lines, target, verdicts_out, paired_out } => {
            let mut cfg = analysis_config(g, target);
            cfg.keep_paired = paired_out.is_some();
            let (rows, verdicts) = if let Some(p) = mutants_of {
                let unit = load_program(&p)?;
                let name = function.ok_or_else(|| invalid("--mutants-of needs --fn"))?;
                let out = analyze_mutants(&unit, &name, None, &cfg)?;
                for d in &out.discarded {
                    eprintln!("discarded {} ({:?}): {}", d.fault_id, d.reason, d.mutant.description);
                }
                (out.reports, out.verdicts)
            } else {
                let (Some(b), Some(f)) = (buggy, fixed) else {
                    return Err(invalid("pass --buggy and --fixed, or --mutants-of"));
                };
                let pair = PairArgs { buggy: b, fixed: f, function };
                let (bu, fu, name) = load_pair(&pair)?;
                let case = CaseInput {
                    case_id: name.clone(),
                    project: None,
                    buggy: bu,
                    fixed: fu,
                    target_fn: name,
                    line_list: lines.as_deref().map(parse_lines).transpose()?,
                    mode,
                };
                let out = analyze_case(&case, &cfg)?;
                if let Some(p) = &paired_out {
                    write_jsonl(p, &out.paired)?;
                }
                (vec![out.report], out.verdicts)
            };
            if let Some(p) = &verdicts_out {
                write_jsonl(p, &verdicts)?;
            }
            let report = Report::new(if rows.is_empty() { mode } else { rows[0].mode }, g.seed, rows)?;
            write_report(g, &report)
        }
        Cmd::Report { verdicts } => {
            let recs: Vec<VerdictRecord> = read_jsonl(&verdicts)?;
            let rows = aggregate(&recs, &Grouping::ByFault)?;
            let report = Report::new(mode, g.seed, rows)?;
            write_report(g, &report)
        }
        Cmd::Corpus { cmd: CorpusCmd::Run { manifest, out, target } } => {
            let mut corpus = load_corpus(&manifest)?;
            if let Some(t) = target {
                corpus.manifest.defaults.target_executions = t;
            }
            if let Some(b) = g.budget_seconds {
                corpus.manifest.defaults.budget_seconds = b;
            }
            let run = run_corpus(&corpus, &analysis_config(g, corpus.manifest.defaults.target_executions))?;
            let json = run.report.to_json();
            if let Some(dir) = &out {
                fs::create_dir_all(dir).map_err(io_err(dir))?;
                write_file(&dir.join("report.json"), &json)?;
                write_file(&dir.join("unit.csv"), &run.report.unit.to_csv())?;
                write_file(&dir.join("unit_projects.csv"), &run.report.unit_projects.to_csv())?;
                write_file(&dir.join("sys.csv"), &run.report.sys.to_csv())?;
                write_file(&dir.join("mutants.csv"), &run.report.mutants.to_csv())?;
                write_file(&dir.join("mutant_subjects.csv"), &run.report.mutant_subjects.to_csv())?;
                write_jsonl(&dir.join("verdicts.jsonl"), &run.verdicts)?;
                write_jsonl(&dir.join("pools.jsonl"), &run.pools)?;
            }
            match &g.json {
                Some(Some(path)) => write_file(path, &json)?,
                Some(None) => print!("{json}"),
                None => print!("{}", corpus_summary(&run.report)),
            }
            Ok(())
        }
    }
}

fn read_points(path: &Path, side: Side) -> Result<Vec<ProgramPoint>, PipelineError> {
    let v: serde_json::Value = read_json(path)?;
    let parse_err = |e: serde_json::Error| invalid(format!("{}: {e}", path.display()));
    if v.is_array() {
        return serde_json::from_value(v).map_err(parse_err);
    }
    let al: AlignedInstrumentation = serde_json::from_value(v).map_err(parse_err)?;
    Ok(match side {
        Side::Buggy => al.buggy_points,
        Side::Fixed => al.fixed_points,
    })
}

fn read_paired(path: &Path) -> Result<Vec<PairedExecution>, PipelineError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    if let Ok(one) = serde_json::from_str::<PairedExecution>(&text) {
        return Ok(vec![one]);
    }
    if let Ok(many) = serde_json::from_str::<Vec<PairedExecution>>(&text) {
        return Ok(many);
    }
    read_jsonl(path)
}

fn alignment_text(al: &AlignedInstrumentation) -> String {
    let mut out = String::new();
    for (name, pts) in [("buggy", &al.buggy_points), ("fixed", &al.fixed_points)] {
        out.push_str(&format!("{name}:\n"));
        for p in pts {
            out.push_str(&format!("  pp{} line {} {:?}\n", p.pp_index, p.line, p.anchor));
        }
    }
    let pairs: Vec<String> = al.correspondence.iter().map(|(b, f)| format!("{b}<->{f}")).collect();
    out.push_str(&format!("correspondence: {}\n", pairs.join(" ")));
    out
}

fn corpus_summary(r: &fep_core::corpus::CorpusReport) -> String {
    let mut out = String::new();
    for (title, rep) in [("unit", &r.unit), ("sys", &r.sys), ("mutants by subject", &r.mutant_subjects)] {
        out.push_str(&format!("== {title}\n{}", rep.to_csv()));
    }
    out.push_str(&format!("discarded mutants: {}\n", r.discarded_mutants.len()));
    let ok = r.fix_patterns.iter().filter(|c| c.expected == c.detected).count();
    out.push_str(&format!("fix patterns matching labels: {ok}/{}\n", r.fix_patterns.len()));
    out
}
