//! Command-line front door: approximate counting for grammar slices, NNF
//! circuit models, and raw (+,*) program supports, plus exact oracles,
//! structural validation, format conversion, and seeded coverage trials.
//!
//! Exit codes: 0 success, 2 input parse failure, 3 parameter failure,
//! 4 structural failure (invalid program, non-decomposable circuit),
//! 5 oracle refusal (exact enumeration above its cap).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use suppcount::engine::{counter, CountReport, CountRequest, EngineError, Mode, Overrides};
use suppcount::grammar::{cfg_slice_program, to_cnf, uc_to_program, CfgSlice, Grammar, GrammarError};
use suppcount::nnf::{dnnf_to_program, simplify, smooth, DnnfBuild, Nnf, NnfError, Simplified};
use suppcount::numeric::parse_decimal;
use suppcount::oracle::{self, OracleError};
use suppcount::program::Program;
use suppcount::stats::{run_coverage_trials, StatsError};

#[derive(Parser)]
#[command(
    name = "suppcount",
    version,
    about = "Approximate and exact counting for (+,*) programs, grammar slices, and NNF circuits"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Approximately count the length-n words of a context-free grammar.
    CountCfg {
        /// Grammar file.
        input: PathBuf,
        /// Word length to count.
        #[arg(long = "n")]
        n: u32,
        #[command(flatten)]
        flags: EngineFlags,
    },
    /// Approximately count the models of a decomposable NNF circuit.
    CountDnnf {
        /// Circuit file in the `nnf` format.
        input: PathBuf,
        #[command(flatten)]
        flags: EngineFlags,
    },
    /// Approximately count the root support of a (+,*) program.
    CountProgram {
        /// Program file.
        input: PathBuf,
        #[command(flatten)]
        flags: EngineFlags,
    },
    /// Exact count by brute-force enumeration.
    Exact {
        input: PathBuf,
        /// Input kind; detected from the content when omitted.
        #[arg(long, value_enum)]
        kind: Option<Kind>,
        /// Word length (grammars only).
        #[arg(long = "n")]
        n: Option<u32>,
        /// Enumeration refuses inputs needing more elements than this.
        #[arg(long, default_value_t = 2_000_000)]
        cap: u64,
        /// Emit a JSON document instead of text lines.
        #[arg(long)]
        json: bool,
    },
    /// Structural checks: program validity, decomposability, smoothness.
    Validate {
        input: PathBuf,
        /// Input kind; detected from the content when omitted.
        #[arg(long, value_enum)]
        kind: Option<Kind>,
        /// Emit a JSON document instead of text lines.
        #[arg(long)]
        json: bool,
    },
    /// Convert an input, writing derived artifact files.
    Convert {
        input: PathBuf,
        /// Input kind; detected from the content when omitted.
        #[arg(long, value_enum)]
        kind: Option<Kind>,
        /// Word length (grammars only).
        #[arg(long = "n")]
        n: Option<u32>,
        /// Directory for the written artifacts.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Emit a JSON document instead of text lines.
        #[arg(long)]
        json: bool,
    },
    /// Seeded coverage trials of the counter against the exact oracle.
    Stats {
        input: PathBuf,
        /// Input kind; detected from the content when omitted.
        #[arg(long, value_enum)]
        kind: Option<Kind>,
        /// Word length (grammars only).
        #[arg(long = "n")]
        n: Option<u32>,
        /// Number of seeded trials.
        #[arg(long, default_value_t = 100)]
        trials: u64,
        #[command(flatten)]
        flags: EngineFlags,
    },
}

#[derive(Args)]
struct EngineFlags {
    /// Relative accuracy target.
    #[arg(long, default_value = "0.1")]
    epsilon: String,
    /// Failure probability bound.
    #[arg(long, default_value = "0.1")]
    delta: String,
    /// Base seed; reruns with the same seed reproduce every number.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads for the runs; the output is identical for any value.
    #[arg(long)]
    jobs: Option<usize>,
    /// Follow the verbatim parameter schedule instead of the practical one.
    #[arg(long)]
    paper_strict: bool,
    /// Override the per-batch sample count (practical mode only).
    #[arg(long)]
    override_ns: Option<u64>,
    /// Override the batch count (practical mode only).
    #[arg(long)]
    override_nt: Option<u64>,
    /// Override the abort bound on stored set sizes (practical mode only).
    #[arg(long)]
    override_theta: Option<u64>,
    /// Override the exact-path support threshold (practical mode only).
    #[arg(long)]
    override_threshold: Option<u64>,
    /// Override the number of runs taken to the median (practical mode only).
    #[arg(long)]
    override_m: Option<u32>,
    /// Emit a JSON document instead of text lines.
    #[arg(long)]
    json: bool,
    /// Include per-run estimates in the output.
    #[arg(long)]
    diagnostics: bool,
}

impl EngineFlags {
    fn mode(&self) -> Mode {
        if self.paper_strict {
            eprintln!(
                "warning: paper-strict parameters are astronomically large for desk-scale \
                 inputs; anything beyond the exact path will refuse to run"
            );
            Mode::PaperStrict
        } else {
            Mode::Practical
        }
    }

    fn overrides(&self) -> Overrides {
        Overrides {
            ns: self.override_ns,
            nt: self.override_nt,
            theta: self.override_theta,
            threshold: self.override_threshold,
            m: self.override_m,
        }
    }

    fn request(&self) -> Result<CountRequest, Failure> {
        let epsilon =
            parse_decimal(&self.epsilon).map_err(|e| fail(3, format!("--epsilon: {e}")))?;
        let delta = parse_decimal(&self.delta).map_err(|e| fail(3, format!("--delta: {e}")))?;
        Ok(CountRequest {
            epsilon,
            delta,
            seed: self.seed,
            mode: self.mode(),
            overrides: self.overrides(),
            jobs: self.jobs,
        })
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    Program,
    Cfg,
    Dnnf,
}

impl Kind {
    fn label(self) -> &'static str {
        match self {
            Kind::Program => "program",
            Kind::Cfg => "cfg",
            Kind::Dnnf => "dnnf",
        }
    }
}

struct Failure {
    code: u8,
    msg: String,
}

fn fail(code: u8, msg: impl Into<String>) -> Failure {
    Failure { code, msg: msg.into() }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::CountCfg { input, n, flags } => cmd_count_cfg(&input, n, &flags),
        Cmd::CountDnnf { input, flags } => cmd_count_dnnf(&input, &flags),
        Cmd::CountProgram { input, flags } => cmd_count_program(&input, &flags),
        Cmd::Exact { input, kind, n, cap, json } => cmd_exact(&input, kind, n, cap, json),
        Cmd::Validate { input, kind, json } => cmd_validate(&input, kind, json),
        Cmd::Convert { input, kind, n, out_dir, json } => {
            cmd_convert(&input, kind, n, &out_dir, json)
        }
        Cmd::Stats { input, kind, n, trials, flags } => cmd_stats(&input, kind, n, trials, &flags),
    }
}

fn read_input(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| fail(2, format!("{}: {e}", path.display())))
}

/// First content line tells the formats apart: an `nnf` header, a production
/// arrow, or neither.
fn sniff_kind(text: &str) -> Kind {
    for raw in text.lines() {
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if content.starts_with("nnf ") {
            return Kind::Dnnf;
        }
        if content.contains("->") {
            return Kind::Cfg;
        }
        return Kind::Program;
    }
    Kind::Program
}

fn resolve_kind(kind: Option<Kind>, text: &str) -> Kind {
    kind.unwrap_or_else(|| sniff_kind(text))
}

fn engine_fail(e: EngineError) -> Failure {
    match e {
        EngineError::BadParams(m) => fail(3, m),
        EngineError::InvalidProgram(m) => fail(4, m),
        EngineError::Invariant(m) => fail(1, format!("internal invariant broken: {m}")),
    }
}

fn grammar_fail(e: GrammarError) -> Failure {
    match e {
        GrammarError::TooLarge(_) => fail(4, e.to_string()),
        _ => fail(2, e.to_string()),
    }
}

fn nnf_fail(e: NnfError) -> Failure {
    match e {
        NnfError::Parse { .. } => fail(2, e.to_string()),
        NnfError::NotDecomposable(_) | NnfError::TooLarge(_) => fail(4, e.to_string()),
    }
}

fn oracle_fail(e: OracleError) -> Failure {
    fail(5, e.to_string())
}

fn parse_program(text: &str) -> Result<Program, Failure> {
    Program::parse(text).map_err(|e| fail(2, e.to_string()))
}

fn parse_grammar(text: &str) -> Result<Grammar, Failure> {
    Grammar::parse(text).map_err(grammar_fail)
}

fn parse_nnf(text: &str) -> Result<Nnf, Failure> {
    Nnf::parse(text).map_err(nnf_fail)
}

fn require_n(n: Option<u32>) -> Result<u32, Failure> {
    match n {
        Some(0) | None => Err(fail(3, "grammars need --n with a length of at least 1")),
        Some(v) => Ok(v),
    }
}

/// One JSON document per invocation; text mode prints the same document as
/// `key: value` lines, so both modes carry identical numbers.
fn emit(doc: &Value, json: bool) {
    if json {
        println!("{}", serde_json::to_string_pretty(doc).expect("document serializes"));
    } else {
        print_text("", doc);
    }
}

fn print_text(path: &str, v: &Value) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let next = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                print_text(&next, child);
            }
        }
        Value::Array(items) => {
            for (i, child) in items.iter().enumerate() {
                print_text(&format!("{path}[{i}]"), child);
            }
        }
        Value::String(s) => println!("{path}: {s}"),
        other => println!("{path}: {other}"),
    }
}

fn report_doc(
    command: &str,
    input: &Path,
    report: &CountReport,
    extra: &[(&str, Value)],
    diagnostics: bool,
) -> Value {
    let mut doc = serde_json::to_value(report).expect("report serializes");
    let obj = doc.as_object_mut().expect("report is an object");
    obj.insert("command".into(), command.into());
    obj.insert("input".into(), input.display().to_string().into());
    for (k, v) in extra {
        obj.insert((*k).into(), v.clone());
    }
    if !diagnostics {
        obj.remove("run_estimates");
    }
    doc
}

/// A structurally-zero count (empty grammar slice, unsatisfiable circuit)
/// reported in the same shape as an engine report's core fields.
fn zero_doc(command: &str, input: &Path, extra: &[(&str, Value)]) -> Value {
    let mut doc = serde_json::json!({
        "schema_version": 1,
        "command": command,
        "input": input.display().to_string(),
        "estimate": "0",
        "exact": true,
        "runs": 0,
    });
    let obj = doc.as_object_mut().expect("document is an object");
    for (k, v) in extra {
        obj.insert((*k).into(), v.clone());
    }
    doc
}

fn cmd_count_cfg(input: &Path, n: u32, flags: &EngineFlags) -> Result<(), Failure> {
    if n == 0 {
        return Err(fail(3, "--n must be at least 1"));
    }
    let g = parse_grammar(&read_input(input)?)?;
    let cnf = to_cnf(&g).map_err(grammar_fail)?;
    let doc = match cfg_slice_program(&cnf, n) {
        CfgSlice::Empty => zero_doc("count-cfg", input, &[("n", n.into())]),
        CfgSlice::Present(uc) => {
            let (program, _decoder) = uc_to_program(&uc);
            let report = counter(&program, &flags.request()?).map_err(engine_fail)?;
            report_doc("count-cfg", input, &report, &[("n", n.into())], flags.diagnostics)
        }
    };
    emit(&doc, flags.json);
    Ok(())
}

fn cmd_count_dnnf(input: &Path, flags: &EngineFlags) -> Result<(), Failure> {
    let nnf = parse_nnf(&read_input(input)?)?;
    // The pipeline smooths on its own; record whether that was a rewrite.
    let needed_smoothing = match simplify(&nnf) {
        Simplified::Circuit(c) => !c.check_smooth().is_empty(),
        Simplified::ConstTrue | Simplified::ConstFalse => false,
    };
    let doc = match dnnf_to_program(&nnf).map_err(nnf_fail)? {
        DnnfBuild::Unsatisfiable => {
            zero_doc("count-dnnf", input, &[("smoothed", false.into())])
        }
        DnnfBuild::Present { program, .. } => {
            let report = counter(&program, &flags.request()?).map_err(engine_fail)?;
            report_doc(
                "count-dnnf",
                input,
                &report,
                &[("smoothed", needed_smoothing.into())],
                flags.diagnostics,
            )
        }
    };
    emit(&doc, flags.json);
    Ok(())
}

fn cmd_count_program(input: &Path, flags: &EngineFlags) -> Result<(), Failure> {
    let program = parse_program(&read_input(input)?)?;
    let report = counter(&program, &flags.request()?).map_err(engine_fail)?;
    let doc = report_doc("count-program", input, &report, &[], flags.diagnostics);
    emit(&doc, flags.json);
    Ok(())
}

fn cmd_exact(
    input: &Path,
    kind: Option<Kind>,
    n: Option<u32>,
    cap: u64,
    json: bool,
) -> Result<(), Failure> {
    let text = read_input(input)?;
    let kind = resolve_kind(kind, &text);
    let mut extra: Vec<(&str, Value)> = Vec::new();
    let count = match kind {
        Kind::Program => {
            let p = parse_program(&text)?;
            oracle::support_size(&p, cap).map_err(oracle_fail)?
        }
        Kind::Cfg => {
            let g = parse_grammar(&text)?;
            let n = require_n(n)?;
            extra.push(("n", n.into()));
            oracle::brute_cfg_count_direct(&g, n, cap).map_err(oracle_fail)?
        }
        Kind::Dnnf => {
            let nnf = parse_nnf(&text)?;
            oracle::brute_dnnf_count(&nnf).map_err(oracle_fail)?
        }
    };
    let mut doc = serde_json::json!({
        "schema_version": 1,
        "command": "exact",
        "input": input.display().to_string(),
        "kind": kind.label(),
        "count": count,
        "cap": cap,
    });
    let obj = doc.as_object_mut().expect("document is an object");
    for (k, v) in extra {
        obj.insert(k.into(), v);
    }
    emit(&doc, json);
    Ok(())
}

fn cmd_validate(input: &Path, kind: Option<Kind>, json: bool) -> Result<(), Failure> {
    let text = read_input(input)?;
    let kind = resolve_kind(kind, &text);
    match kind {
        Kind::Program => {
            let p = parse_program(&text)?;
            let report = p.validate();
            let violations: Vec<String> =
                report.violations.iter().map(|v| v.to_string()).collect();
            let doc = serde_json::json!({
                "schema_version": 1,
                "command": "validate",
                "input": input.display().to_string(),
                "kind": "program",
                "valid": report.is_valid(),
                "violations": violations,
            });
            emit(&doc, json);
            if !report.is_valid() {
                return Err(fail(4, "program violates structural invariants"));
            }
        }
        Kind::Cfg => {
            let g = parse_grammar(&text)?;
            let cnf = to_cnf(&g).map_err(grammar_fail)?;
            let doc = serde_json::json!({
                "schema_version": 1,
                "command": "validate",
                "input": input.display().to_string(),
                "kind": "cfg",
                "nonterminals": g.nonterminals.len(),
                "terminals": g.terminals.len(),
                "rules": g.rules.len(),
                "normal_form_rules": cnf.rules.len(),
            });
            emit(&doc, json);
        }
        Kind::Dnnf => {
            let nnf = parse_nnf(&text)?;
            let (decomposable, bad, smooth_already, unsmooth) = match simplify(&nnf) {
                Simplified::Circuit(c) => {
                    let bad = c.check_decomposable();
                    let unsmooth = c.check_smooth();
                    (bad.is_empty(), bad, unsmooth.is_empty(), unsmooth)
                }
                _ => (true, Vec::new(), true, Vec::new()),
            };
            let doc = serde_json::json!({
                "schema_version": 1,
                "command": "validate",
                "input": input.display().to_string(),
                "kind": "dnnf",
                "decomposable": decomposable,
                "sharing_and_nodes": bad,
                "smooth": smooth_already,
                "unsmooth_or_nodes": unsmooth,
            });
            emit(&doc, json);
            if !decomposable {
                return Err(fail(4, "circuit is not decomposable"));
            }
        }
    }
    Ok(())
}

fn write_artifact(dir: &Path, name: &str, content: &str) -> Result<String, Failure> {
    let path = dir.join(name);
    std::fs::write(&path, content)
        .map_err(|e| fail(2, format!("{}: {e}", path.display())))?;
    Ok(path.display().to_string())
}

fn cmd_convert(
    input: &Path,
    kind: Option<Kind>,
    n: Option<u32>,
    out_dir: &Path,
    json: bool,
) -> Result<(), Failure> {
    let text = read_input(input)?;
    let kind = resolve_kind(kind, &text);
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let mut written: Vec<String> = Vec::new();
    let mut extra: Vec<(&str, Value)> = Vec::new();
    match kind {
        Kind::Program => {
            let p = parse_program(&text)?;
            written.push(write_artifact(out_dir, &format!("{stem}.norm.program.txt"), &p.to_text())?);
        }
        Kind::Cfg => {
            let g = parse_grammar(&text)?;
            let n = require_n(n)?;
            extra.push(("n", n.into()));
            let cnf = to_cnf(&g).map_err(grammar_fail)?;
            match cfg_slice_program(&cnf, n) {
                CfgSlice::Empty => extra.push(("empty_slice", true.into())),
                CfgSlice::Present(uc) => {
                    written.push(write_artifact(
                        out_dir,
                        &format!("{stem}.n{n}.uc.txt"),
                        &uc.to_text(),
                    )?);
                    let (program, _) = uc_to_program(&uc);
                    written.push(write_artifact(
                        out_dir,
                        &format!("{stem}.n{n}.program.txt"),
                        &program.to_text(),
                    )?);
                }
            }
        }
        Kind::Dnnf => {
            let nnf = parse_nnf(&text)?;
            match simplify(&nnf) {
                Simplified::ConstTrue => extra.push(("constant", "true".into())),
                Simplified::ConstFalse => extra.push(("constant", "false".into())),
                Simplified::Circuit(c) => {
                    let bad = c.check_decomposable();
                    if !bad.is_empty() {
                        return Err(nnf_fail(NnfError::NotDecomposable(bad)));
                    }
                    written.push(write_artifact(
                        out_dir,
                        &format!("{stem}.smooth.nnf"),
                        &smooth(&c).to_text(),
                    )?);
                }
            }
            if let DnnfBuild::Present { program, .. } = dnnf_to_program(&nnf).map_err(nnf_fail)? {
                written.push(write_artifact(
                    out_dir,
                    &format!("{stem}.program.txt"),
                    &program.to_text(),
                )?);
            }
        }
    }
    let mut doc = serde_json::json!({
        "schema_version": 1,
        "command": "convert",
        "input": input.display().to_string(),
        "kind": kind.label(),
        "written": written,
    });
    let obj = doc.as_object_mut().expect("document is an object");
    for (k, v) in extra {
        obj.insert(k.into(), v);
    }
    emit(&doc, json);
    Ok(())
}

fn stats_fail(e: StatsError) -> Failure {
    match e {
        StatsError::Oracle(o) => oracle_fail(o),
        StatsError::Engine(e) => engine_fail(e),
        StatsError::BadRequest(m) => fail(3, m),
    }
}

fn cmd_stats(
    input: &Path,
    kind: Option<Kind>,
    n: Option<u32>,
    trials: u64,
    flags: &EngineFlags,
) -> Result<(), Failure> {
    let text = read_input(input)?;
    let kind = resolve_kind(kind, &text);
    let mut extra: Vec<(&str, Value)> = Vec::new();
    let program = match kind {
        Kind::Program => parse_program(&text)?,
        Kind::Cfg => {
            let g = parse_grammar(&text)?;
            let n = require_n(n)?;
            extra.push(("n", n.into()));
            let cnf = to_cnf(&g).map_err(grammar_fail)?;
            match cfg_slice_program(&cnf, n) {
                CfgSlice::Empty => {
                    return Err(fail(3, "the grammar derives no word of this length"))
                }
                CfgSlice::Present(uc) => uc_to_program(&uc).0,
            }
        }
        Kind::Dnnf => {
            let nnf = parse_nnf(&text)?;
            match dnnf_to_program(&nnf).map_err(nnf_fail)? {
                DnnfBuild::Unsatisfiable => {
                    return Err(fail(3, "the circuit is unsatisfiable, nothing to sample"))
                }
                DnnfBuild::Present { program, .. } => program,
            }
        }
    };
    let epsilon = parse_decimal(&flags.epsilon).map_err(|e| fail(3, format!("--epsilon: {e}")))?;
    let delta = parse_decimal(&flags.delta).map_err(|e| fail(3, format!("--delta: {e}")))?;
    let mode = flags.mode();
    let overrides = flags.overrides();
    let run = || run_coverage_trials(&program, &epsilon, &delta, mode, &overrides, trials, flags.seed);
    let report = match flags.jobs {
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j.max(1))
                .build()
                .map_err(|e| fail(3, format!("--jobs: {e}")))?;
            pool.install(run)
        }
        None => run(),
    }
    .map_err(stats_fail)?;
    let mut doc = serde_json::to_value(&report).expect("report serializes");
    let obj = doc.as_object_mut().expect("report is an object");
    obj.insert("schema_version".into(), 1.into());
    obj.insert("command".into(), "stats".into());
    obj.insert("input".into(), input.display().to_string().into());
    obj.insert("kind".into(), kind.label().into());
    obj.insert("mode".into(), serde_json::to_value(mode).expect("mode serializes"));
    for (k, v) in extra {
        obj.insert(k.into(), v);
    }
    emit(&doc, flags.json);
    Ok(())
}
